#include "navgen/vocab.hpp"

#include "navgen/common.hpp"
#include "resources.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace navgen {

namespace {

constexpr std::string_view kPunctuation = ".,?:";

bool is_marker_word(std::string_view w) {
  if (w.size() < 3 || w.front() != '(' || w.back() != ')') return false;
  return std::all_of(w.begin() + 1, w.end() - 1, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (kPunctuation.find(c) != std::string_view::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

const TemplateCatalog& TemplateCatalog::standard() {
  static const TemplateCatalog catalog = [] {
    const auto doc = nlohmann::json::parse(resources::kTemplateCatalog);
    TemplateCatalog c;
    c.task = doc.at("task").get<std::map<std::string, std::string>>();
    c.history = doc.at("history").get<std::string>();
    c.observation = doc.at("observation").get<std::map<std::string, std::string>>();
    c.hint = doc.at("hint").get<std::map<std::string, std::string>>();
    c.grammar = doc.at("grammar").get<std::map<std::string, std::string>>();
    return c;
  }();
  return catalog;
}

std::string TemplateCatalog::fill(std::string_view pattern, std::span<const std::string> args) {
  std::string out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '{' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
      if (next >= args.size()) throw Error("template placeholder without argument");
      out += args[next++];
      ++i;
    } else {
      out.push_back(pattern[i]);
    }
  }
  return out;
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab;
  return vocab;
}

Vocabulary::Vocabulary() {
  const auto lexicon = nlohmann::json::parse(resources::kLexicon);
  landmarks_ = lexicon.at("landmarks").get<std::vector<std::string>>();
  objects_ = lexicon.at("objects").get<std::vector<std::string>>();
  max_marker_ = lexicon.at("max_marker").get<int>();

  bos_ = add("<bos>");
  eos_ = add("<eos>");
  first_marker_ = size();
  for (int i = 0; i <= max_marker_; ++i) add("(" + std::to_string(i) + ")");
  for (char c : kPunctuation) add(std::string(1, c));
  for (int d = 0; d <= 9; ++d) add(std::to_string(d));

  const auto& catalog = TemplateCatalog::standard();
  std::set<std::string> template_words;
  auto collect = [&](const std::string& text) {
    for (auto& w : split_words(text)) {
      if (w == "{}" || is_marker_word(w)) continue;
      template_words.insert(w);
    }
  };
  for (const auto& [k, v] : catalog.task) collect(v);
  collect(catalog.history);
  for (const auto& [k, v] : catalog.observation) collect(v);
  for (const auto& [k, v] : catalog.hint) collect(v);
  for (const auto& [k, v] : catalog.grammar) collect(v);
  for (const auto& w : template_words) {
    if (!index_.contains(w)) add(w);
  }
  for (const auto& w : landmarks_) {
    if (index_.contains(w)) throw Error("landmark word collides with vocabulary: " + w);
    add(w);
  }
  for (const auto& w : objects_) {
    if (index_.contains(w)) throw Error("object word collides with vocabulary: " + w);
    add(w);
  }
}

int Vocabulary::add(const std::string& word) {
  const int id = size();
  words_.push_back(word);
  index_.emplace(word, id);
  return id;
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view word) const {
  if (auto id = find(word)) return *id;
  throw VocabularyError("out-of-vocabulary word: '" + std::string(word) + "'");
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw VocabularyError("token id out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

int Vocabulary::marker(int value) const {
  if (value < 0 || value > max_marker_) {
    throw VocabularyError("ID marker out of range: " + std::to_string(value));
  }
  return first_marker_ + value;
}

std::optional<int> Vocabulary::marker_value(int token) const {
  if (token < first_marker_ || token > first_marker_ + max_marker_) return std::nullopt;
  return token - first_marker_;
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::detokenize(std::span<const int> tokens) const {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += word(t);
  }
  return out;
}

}  // namespace navgen
