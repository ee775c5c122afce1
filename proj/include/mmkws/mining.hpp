#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmkws/lexicon.hpp"

namespace mmkws {

// Levenshtein distance with unit insert/delete/substitute costs.
int64_t phoneme_edit_distance(const std::vector<int64_t>& a, const std::vector<int64_t>& b);

// Same distance, but may stop early once it can prove the result exceeds
// `bound`; in that case any value > bound may be returned.
int64_t phoneme_edit_distance_bounded(const std::vector<int64_t>& a,
                                      const std::vector<int64_t>& b, int64_t bound);

struct PhoneticNeighbor {
  std::string phrase;
  int64_t distance = 0;
};

struct PhoneticNeighborResult {
  std::vector<PhoneticNeighbor> neighbors;  // ascending distance, then phrase
  bool truncated = false;                   // corpus had fewer than k candidates
};

// The k corpus phrases whose concatenated pronunciations are closest to the
// target's, excluding the target itself. Ties break lexicographically.
PhoneticNeighborResult mine_phonetic_neighbors(const std::string& target,
                                               const std::vector<std::string>& corpus, int64_t k,
                                               const Lexicon& lexicon);

struct SemanticNeighbor {
  std::string word;
  double cosine = 0.0;
};

// Top-k table words by cosine similarity to the target's vector, target
// excluded, ties broken lexicographically.
std::vector<SemanticNeighbor> mine_semantic_neighbors(const std::string& target,
                                                      const SemanticTable& table, int64_t k);

// Every distinct reordering of the phrase except the original, in
// lexicographic order, capped at kMaxPermutations.
inline constexpr int64_t kMaxPermutations = 24;
std::vector<std::vector<std::string>> permute_words(const std::vector<std::string>& phrase);

struct ConfusableSet {
  std::string target;
  std::vector<PhoneticNeighbor> phonetic;
  std::vector<SemanticNeighbor> semantic;       // empty if the target word is unknown
  std::vector<std::string> permutations;        // phrases joined with single spaces
  bool phonetic_truncated = false;
};

// Runs all three generators for one target phrase. Semantic mining is
// per-word: neighbors of every target word present in the table are merged,
// deduplicated (keeping the best cosine), and the overall top-k kept. Words
// absent from the table contribute nothing; if none are present the semantic
// list is empty.
ConfusableSet mine_confusables(const std::string& target, const std::vector<std::string>& corpus,
                               const SemanticTable& table, int64_t k, const Lexicon& lexicon);

std::string join_words(const std::vector<std::string>& words);

}  // namespace mmkws
