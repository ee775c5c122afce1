#include "mmkws/mining.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "mmkws/error.hpp"

namespace mmkws {

int64_t phoneme_edit_distance(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0) return static_cast<int64_t>(m);
  if (m == 0) return static_cast<int64_t>(n);
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), int64_t{0});
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

int64_t phoneme_edit_distance_bounded(const std::vector<int64_t>& a,
                                      const std::vector<int64_t>& b, int64_t bound) {
  const int64_t n = static_cast<int64_t>(a.size()), m = static_cast<int64_t>(b.size());
  const int64_t gap = std::abs(n - m);
  if (gap > bound) return gap;  // length difference is a lower bound
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<int64_t> prev(static_cast<size_t>(m) + 1), cur(static_cast<size_t>(m) + 1);
  std::iota(prev.begin(), prev.end(), int64_t{0});
  for (int64_t i = 1; i <= n; ++i) {
    cur[0] = i;
    int64_t row_min = cur[0];
    for (int64_t j = 1; j <= m; ++j) {
      const int64_t sub =
          prev[static_cast<size_t>(j - 1)] +
          (a[static_cast<size_t>(i - 1)] == b[static_cast<size_t>(j - 1)] ? 0 : 1);
      cur[static_cast<size_t>(j)] =
          std::min({prev[static_cast<size_t>(j)] + 1, cur[static_cast<size_t>(j - 1)] + 1, sub});
      row_min = std::min(row_min, cur[static_cast<size_t>(j)]);
    }
    if (row_min > bound) return row_min;  // every extension only grows
    std::swap(prev, cur);
  }
  return prev[static_cast<size_t>(m)];
}

PhoneticNeighborResult mine_phonetic_neighbors(const std::string& target,
                                               const std::vector<std::string>& corpus, int64_t k,
                                               const Lexicon& lexicon) {
  check(k >= 1, "neighbor count must be at least 1");
  check(!corpus.empty(), "phonetic mining over an empty corpus");
  const auto target_words = split_words(target);
  const auto target_ids = lexicon.phrase_ids(target_words);
  const std::string target_norm = join_words(target_words);

  std::vector<PhoneticNeighbor> all;
  all.reserve(corpus.size());
  // Keep a running bound: once k candidates are collected, a candidate can
  // only matter if its distance is <= the current k-th best.
  int64_t bound = INT64_MAX;
  std::vector<int64_t> kth_window;
  for (const auto& phrase : corpus) {
    const auto words = split_words(phrase);
    if (words.empty()) continue;
    const std::string norm = join_words(words);
    if (norm == target_norm) continue;
    const auto ids = lexicon.phrase_ids(words);
    const int64_t d = bound == INT64_MAX ? phoneme_edit_distance(target_ids, ids)
                                         : phoneme_edit_distance_bounded(target_ids, ids, bound);
    if (d > bound) continue;  // provably outside the current top-k
    all.push_back({norm, d});
    kth_window.push_back(d);
    if (static_cast<int64_t>(kth_window.size()) >= k) {
      std::nth_element(kth_window.begin(), kth_window.begin() + (k - 1), kth_window.end());
      bound = kth_window[static_cast<size_t>(k - 1)];
      kth_window.resize(static_cast<size_t>(k));
    }
  }
  std::sort(all.begin(), all.end(), [](const PhoneticNeighbor& x, const PhoneticNeighbor& y) {
    return x.distance != y.distance ? x.distance < y.distance : x.phrase < y.phrase;
  });
  PhoneticNeighborResult res;
  res.truncated = static_cast<int64_t>(all.size()) < k;
  if (static_cast<int64_t>(all.size()) > k) all.resize(static_cast<size_t>(k));
  res.neighbors = std::move(all);
  return res;
}

std::vector<SemanticNeighbor> mine_semantic_neighbors(const std::string& target,
                                                      const SemanticTable& table, int64_t k) {
  check(k >= 1, "neighbor count must be at least 1");
  const std::string norm = normalize_word(target);
  check(table.contains(norm), "word not in semantic table: " + norm);
  const auto& tv = table.vector_of(norm);
  std::vector<SemanticNeighbor> all;
  for (const auto& [word, vec] : table.vectors()) {
    if (word == norm) continue;
    all.push_back({word, cosine(tv, vec)});
  }
  std::sort(all.begin(), all.end(), [](const SemanticNeighbor& x, const SemanticNeighbor& y) {
    return x.cosine != y.cosine ? x.cosine > y.cosine : x.word < y.word;
  });
  if (static_cast<int64_t>(all.size()) > k) all.resize(static_cast<size_t>(k));
  return all;
}

std::vector<std::vector<std::string>> permute_words(const std::vector<std::string>& phrase) {
  check(phrase.size() >= 2, "permutation needs at least two words");
  std::vector<std::string> sorted = phrase;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<std::string>> out;
  // next_permutation over the sorted multiset enumerates every distinct
  // ordering exactly once, in lexicographic order.
  std::vector<std::string> p = sorted;
  do {
    if (p != phrase) {
      out.push_back(p);
      if (static_cast<int64_t>(out.size()) == kMaxPermutations) break;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) s.push_back(' ');
    s += words[i];
  }
  return s;
}

ConfusableSet mine_confusables(const std::string& target, const std::vector<std::string>& corpus,
                               const SemanticTable& table, int64_t k, const Lexicon& lexicon) {
  ConfusableSet set;
  const auto words = split_words(target);
  check(!words.empty(), "confusable mining for an empty target");
  set.target = join_words(words);

  auto phon = mine_phonetic_neighbors(set.target, corpus, k, lexicon);
  set.phonetic = std::move(phon.neighbors);
  set.phonetic_truncated = phon.truncated;

  std::map<std::string, double> best;
  for (const auto& w : words) {
    if (!table.contains(w)) continue;
    for (const auto& n : mine_semantic_neighbors(w, table, k)) {
      auto it = best.find(n.word);
      if (it == best.end() || n.cosine > it->second) best[n.word] = n.cosine;
    }
  }
  for (const auto& [word, cos] : best) set.semantic.push_back({word, cos});
  std::sort(set.semantic.begin(), set.semantic.end(),
            [](const SemanticNeighbor& x, const SemanticNeighbor& y) {
              return x.cosine != y.cosine ? x.cosine > y.cosine : x.word < y.word;
            });
  if (static_cast<int64_t>(set.semantic.size()) > k) set.semantic.resize(static_cast<size_t>(k));

  if (words.size() >= 2) {
    for (const auto& p : permute_words(words)) set.permutations.push_back(join_words(p));
  }
  return set;
}

}  // namespace mmkws
