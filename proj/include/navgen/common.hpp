#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace navgen {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector3 = Eigen::Vector3d;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced to callers derives from navgen::Error so the
// CLI can map families of errors onto exit codes.
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class GenerationExhausted : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public Error {
 public:
  VersionError(std::uint32_t expected, std::uint32_t found)
      : Error("version mismatch: expected " + std::to_string(expected) + ", found " +
              std::to_string(found)),
        expected_(expected),
        found_(found) {}
  std::uint32_t expected() const { return expected_; }
  std::uint32_t found() const { return found_; }

 private:
  std::uint32_t expected_;
  std::uint32_t found_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class MagicError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyReportError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericAbort : public Error {
 public:
  using Error::Error;
};

// Named sub-seed derivation: all randomness flows from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// Hex-encoded SHA-256 of a byte range.
std::string sha256_hex(std::string_view bytes);

}  // namespace navgen
