#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace navgen {

// Fixed template text, keyed by task family and schema. Loaded from the
// embedded data/templates.json so that template bytes are pinned by data.
struct TemplateCatalog {
  std::map<std::string, std::string> task;
  std::string history;
  std::map<std::string, std::string> observation;
  std::map<std::string, std::string> hint;
  std::map<std::string, std::string> grammar;

  static const TemplateCatalog& standard();

  // Substitutes "{}" placeholders in order.
  static std::string fill(std::string_view pattern, std::span<const std::string> args);
};

// Closed vocabulary over templates, grammar words, landmarks, objects, digits
// and the numbered ID markers "(0)".."(max_marker)". Markers are atomic
// tokens so an ID is generated and consumed as a single step.
class Vocabulary {
 public:
  static const Vocabulary& standard();

  int size() const { return static_cast<int>(words_.size()); }
  int bos() const { return bos_; }
  int eos() const { return eos_; }

  // Throws VocabularyError for out-of-vocabulary words.
  int id(std::string_view word) const;
  std::optional<int> find(std::string_view word) const;
  const std::string& word(int id) const;

  int max_marker() const { return max_marker_; }
  int marker(int value) const;
  std::optional<int> marker_value(int token) const;

  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> tokens) const;

  const std::vector<std::string>& landmarks() const { return landmarks_; }
  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  Vocabulary();
  int add(const std::string& word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> landmarks_;
  std::vector<std::string> objects_;
  int bos_ = 0;
  int eos_ = 1;
  int first_marker_ = 2;
  int max_marker_ = 0;
};

// Splits text into words: whitespace separated, with . , ? : as standalone
// punctuation tokens and "(N)" kept whole.
std::vector<std::string> split_words(std::string_view text);

}  // namespace navgen
