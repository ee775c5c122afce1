#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmkws {

// Lowercases and strips everything but letters.
std::string normalize_word(std::string_view raw);

// Splits on whitespace and normalizes each word; empty results are dropped.
std::vector<std::string> split_words(std::string_view phrase);

// Pronunciation dictionary with a deterministic per-letter fallback for
// out-of-vocabulary words. The phoneme inventory is closed: it contains
// every symbol any lookup or fallback can produce.
class Lexicon {
 public:
  static Lexicon load(const std::string& path);

  bool contains(const std::string& word) const { return entries_.count(word) > 0; }

  // Stored pronunciation, or the per-letter fallback sequence. Never empty.
  std::vector<std::string> g2p(const std::string& word) const;
  std::vector<int64_t> g2p_ids(const std::string& word) const;

  // Concatenated pronunciation of a whole phrase.
  std::vector<std::string> phrase_phonemes(const std::vector<std::string>& words) const;
  std::vector<int64_t> phrase_ids(const std::vector<std::string>& words) const;

  int64_t inventory_size() const { return static_cast<int64_t>(inventory_.size()); }
  const std::vector<std::string>& inventory() const { return inventory_; }
  int64_t symbol_id(const std::string& symbol) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
  std::vector<std::string> inventory_;  // sorted, unique
  std::unordered_map<std::string, int64_t> symbol_ids_;
};

// Whitespace-token vocabulary, one token per line, line number = id.
// Id 0 is reserved for the unknown token.
class Vocab {
 public:
  static Vocab load(const std::string& path);

  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  // Unknown words map to id 0.
  int64_t id_of(const std::string& word) const;
  std::vector<int64_t> encode(const std::vector<std::string>& words) const;
  const std::string& token(int64_t id) const { return tokens_.at(static_cast<size_t>(id)); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int64_t> ids_;
};

// Word -> fixed-dimension real vector, loaded from a space-separated text file.
class SemanticTable {
 public:
  static SemanticTable load(const std::string& path);

  bool contains(const std::string& word) const { return vectors_.count(word) > 0; }
  const std::vector<double>& vector_of(const std::string& word) const;
  int64_t dim() const { return dim_; }
  const std::map<std::string, std::vector<double>>& vectors() const { return vectors_; }

 private:
  int64_t dim_ = 0;
  std::map<std::string, std::vector<double>> vectors_;
};

// u·v / (|u||v|).
double cosine(const std::vector<double>& u, const std::vector<double>& v);

}  // namespace mmkws
