#include "mmkws/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mmkws/error.hpp"
#include "mmkws/io.hpp"
#include "mmkws/mining.hpp"
#include "mmkws/rng.hpp"

namespace mmkws {

using nlohmann::json;

void CorpusSpec::validate() const {
  check(n_train_keywords >= 1, "corpus spec: n_train_keywords must be >= 1");
  check(n_test_keywords >= 1, "corpus spec: n_test_keywords must be >= 1");
  check(min_words >= 1, "corpus spec: min_words must be >= 1");
  check(max_words >= min_words, "corpus spec: max_words must be >= min_words");
  check(pos_per_keyword >= 1, "corpus spec: pos_per_keyword must be >= 1");
  check(easy_per_keyword >= 1, "corpus spec: easy_per_keyword must be >= 1");
  check(hard_per_keyword >= 1, "corpus spec: hard_per_keyword must be >= 1");
  check(n_templates >= 0, "corpus spec: n_templates must be >= 0");
  check(hard_distance >= 1, "corpus spec: hard_distance must be >= 1");
  check(mine_k >= 1, "corpus spec: mine_k must be >= 1");
  check(profile.feat_dim >= 1, "corpus spec: profile.feat_dim must be >= 1");
  check(profile.min_duration >= 1 && profile.max_duration >= profile.min_duration,
        "corpus spec: profile durations invalid");
}

json CorpusSpec::to_json() const {
  return json{{"n_train_keywords", n_train_keywords},
              {"n_test_keywords", n_test_keywords},
              {"min_words", min_words},
              {"max_words", max_words},
              {"pos_per_keyword", pos_per_keyword},
              {"easy_per_keyword", easy_per_keyword},
              {"hard_per_keyword", hard_per_keyword},
              {"n_templates", n_templates},
              {"hard_distance", hard_distance},
              {"mine_k", mine_k},
              {"seed", seed},
              {"profile",
               json{{"feat_dim", profile.feat_dim},
                    {"corpus_seed", profile.corpus_seed},
                    {"noise_level", profile.noise_level},
                    {"min_duration", profile.min_duration},
                    {"max_duration", profile.max_duration}}}};
}

CorpusSpec CorpusSpec::from_json(const json& j) {
  CorpusSpec s;
  s.n_train_keywords = j.at("n_train_keywords").get<int64_t>();
  s.n_test_keywords = j.at("n_test_keywords").get<int64_t>();
  s.min_words = j.at("min_words").get<int64_t>();
  s.max_words = j.at("max_words").get<int64_t>();
  s.pos_per_keyword = j.at("pos_per_keyword").get<int64_t>();
  s.easy_per_keyword = j.at("easy_per_keyword").get<int64_t>();
  s.hard_per_keyword = j.at("hard_per_keyword").get<int64_t>();
  s.n_templates = j.at("n_templates").get<int64_t>();
  s.hard_distance = j.at("hard_distance").get<int64_t>();
  s.mine_k = j.at("mine_k").get<int64_t>();
  s.seed = j.at("seed").get<uint64_t>();
  const json& p = j.at("profile");
  s.profile.feat_dim = p.at("feat_dim").get<int64_t>();
  s.profile.corpus_seed = p.at("corpus_seed").get<uint64_t>();
  s.profile.noise_level = p.at("noise_level").get<double>();
  s.profile.min_duration = p.at("min_duration").get<int64_t>();
  s.profile.max_duration = p.at("max_duration").get<int64_t>();
  return s;
}

namespace {

uint64_t render_seed(const CorpusSpec& spec, std::string_view tag, int64_t kid, int64_t idx) {
  return mix_seed(mix_seed(spec.seed, tag, static_cast<uint64_t>(kid)),
                  static_cast<uint64_t>(idx));
}

// All words within phoneme edit distance [1, max_d] of `word`, ascending
// distance then alphabetical. Cached because hard-negative generation and
// confusable mining both walk these lists for every keyword.
class WordNeighborCache {
 public:
  WordNeighborCache(const std::vector<std::string>& pool, const Lexicon& lexicon, int64_t max_d)
      : pool_(pool), lexicon_(lexicon), max_d_(max_d) {}

  const std::vector<std::pair<std::string, int64_t>>& neighbors(const std::string& word) {
    auto it = cache_.find(word);
    if (it != cache_.end()) return it->second;
    std::vector<std::pair<std::string, int64_t>> out;
    const std::vector<int64_t> ids = lexicon_.g2p_ids(word);
    for (const std::string& other : pool_) {
      if (other == word) continue;
      int64_t d = phoneme_edit_distance_bounded(ids, lexicon_.g2p_ids(other), max_d_);
      if (d >= 1 && d <= max_d_) out.emplace_back(other, d);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    return cache_.emplace(word, std::move(out)).first->second;
  }

 private:
  const std::vector<std::string>& pool_;
  const Lexicon& lexicon_;
  int64_t max_d_;
  std::unordered_map<std::string, std::vector<std::pair<std::string, int64_t>>> cache_;
};

// Single-word substitutions of `words`, interleaved across positions so the
// list does not fixate on position 0: rank-0 neighbors of every position
// first, then rank-1, and so on.
std::vector<std::vector<std::string>> substitution_variants(const std::vector<std::string>& words,
                                                            WordNeighborCache& cache,
                                                            int64_t limit) {
  std::vector<std::vector<std::string>> out;
  size_t max_rank = 0;
  for (const std::string& w : words) max_rank = std::max(max_rank, cache.neighbors(w).size());
  for (size_t rank = 0; rank < max_rank; ++rank) {
    for (size_t i = 0; i < words.size(); ++i) {
      const auto& ns = cache.neighbors(words[i]);
      if (rank >= ns.size()) continue;
      std::vector<std::string> variant = words;
      variant[i] = ns[rank].first;
      out.push_back(std::move(variant));
      if (static_cast<int64_t>(out.size()) >= limit) return out;
    }
  }
  return out;
}

std::vector<std::string> sample_phrase(Rng& rng, const std::vector<std::string>& pool,
                                       const CorpusSpec& spec) {
  int64_t len = rng.uniform_int(spec.min_words, spec.max_words);
  std::vector<std::string> words;
  words.reserve(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i)
    words.push_back(pool[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))]);
  return words;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const json& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

json pair_to_json(const PairRecord& p) {
  return json{{"pair_id", p.pair_id},       {"query_feat", p.query_feat},
              {"query_text", p.query_text}, {"enroll_text", p.enroll_text},
              {"n_templates", p.n_templates}, {"label", p.label},
              {"split", p.split}};
}

PairRecord pair_from_json(const json& j) {
  PairRecord p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.query_feat = j.at("query_feat").get<std::string>();
  p.query_text = j.at("query_text").get<std::string>();
  p.enroll_text = j.at("enroll_text").get<std::string>();
  p.n_templates = j.at("n_templates").get<int64_t>();
  p.label = j.at("label").get<int>();
  p.split = j.at("split").get<std::string>();
  return p;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::istringstream in(io::read_text_file(path));
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(json::parse(line));
  }
  return rows;
}

}  // namespace

CorpusManifest build_corpus(const CorpusSpec& spec, const Lexicon& lexicon,
                            const SemanticTable& semantics, const std::string& out_dir) {
  spec.validate();

  std::vector<std::string> pool;
  pool.reserve(lexicon.entries().size());
  for (const auto& [word, _] : lexicon.entries()) pool.push_back(word);
  check(static_cast<int64_t>(pool.size()) >= 2,
        "corpus: lexicon must contain at least 2 words to sample keyword phrases");

  // ---- sample disjoint train/test keyword phrases ----
  Rng rng(mix_seed(spec.seed, "corpus"));
  const int64_t n_total = spec.n_train_keywords + spec.n_test_keywords;
  std::set<std::string> taken;
  std::vector<std::vector<std::string>> phrases;
  int64_t attempts = 0;
  const int64_t max_attempts = 200 * n_total;
  while (static_cast<int64_t>(phrases.size()) < n_total) {
    check(attempts++ < max_attempts,
          "corpus: vocabulary too small to sample " + std::to_string(n_total) +
              " distinct keyword phrases (pool of " + std::to_string(pool.size()) + " words)");
    std::vector<std::string> words = sample_phrase(rng, pool, spec);
    if (taken.insert(join_words(words)).second) phrases.push_back(std::move(words));
  }

  CorpusManifest m;
  m.spec = spec;
  WordNeighborCache cache(pool, lexicon, spec.hard_distance);

  std::unordered_set<std::string> test_texts;
  for (int64_t i = 0; i < spec.n_test_keywords; ++i)
    test_texts.insert(join_words(phrases[static_cast<size_t>(spec.n_train_keywords + i)]));

  // ---- training keywords: phrase + mined confusables ----
  std::vector<std::string> train_texts;
  for (int64_t i = 0; i < spec.n_train_keywords; ++i)
    train_texts.push_back(join_words(phrases[static_cast<size_t>(i)]));

  for (int64_t i = 0; i < spec.n_train_keywords; ++i) {
    KeywordRecord kw;
    kw.id = i;
    kw.words = phrases[static_cast<size_t>(i)];
    const std::string text = train_texts[static_cast<size_t>(i)];

    // Candidate phrases for phonetic mining: close single-word substitutions
    // of this keyword plus every other training keyword.
    std::vector<std::string> candidates;
    for (const auto& v : substitution_variants(kw.words, cache, 4 * spec.mine_k))
      candidates.push_back(join_words(v));
    for (const std::string& other : train_texts)
      if (other != text) candidates.push_back(other);

    ConfusableSet set;
    if (!candidates.empty())
      set = mine_confusables(text, candidates, semantics, spec.mine_k, lexicon);

    std::set<std::string> seen;
    auto add = [&](const std::vector<std::string>& words) {
      if (static_cast<int64_t>(kw.confusables.size()) >= spec.mine_k) return;
      std::string t = join_words(words);
      if (t == text || test_texts.count(t) > 0) return;  // keep splits disjoint
      if (!seen.insert(t).second) return;
      kw.confusables.push_back(words);
    };
    for (const PhoneticNeighbor& n : set.phonetic) add(split_words(n.phrase));
    // Semantic neighbors are single words; turn them into phrases by
    // substituting at each position where the table knows the original word.
    for (size_t pos = 0; pos < kw.words.size(); ++pos) {
      if (!semantics.contains(kw.words[pos])) continue;
      for (const SemanticNeighbor& n : mine_semantic_neighbors(kw.words[pos], semantics, 2)) {
        std::vector<std::string> variant = kw.words;
        variant[pos] = n.word;
        add(variant);
      }
    }
    if (kw.words.size() >= 2)
      for (const std::string& p : set.permutations) add(split_words(p));

    m.train_keywords.push_back(std::move(kw));
  }

  // ---- test keywords: templates, positives, hard/easy negatives ----
  io::ensure_dir(out_dir);
  io::ensure_dir(out_dir + "/feats");

  for (int64_t i = 0; i < spec.n_test_keywords; ++i) {
    KeywordRecord kw;
    kw.id = i;
    kw.words = phrases[static_cast<size_t>(spec.n_train_keywords + i)];
    const std::string text = join_words(kw.words);
    const std::string stem = "t" + std::to_string(i);
    const std::vector<int64_t> kw_ids = lexicon.phrase_ids(kw.words);

    for (int64_t t = 0; t < spec.n_templates; ++t) {
      std::string rel = "feats/" + stem + ".tmpl" + std::to_string(t) + ".feat";
      io::write_feat(out_dir + "/" + rel,
                     render_synthetic_speech(kw_ids, render_seed(spec, "render.tmpl", i, t),
                                             spec.profile));
      kw.template_feats.push_back(std::move(rel));
    }

    auto add_pair = [&](const std::string& pair_id, const std::string& rel,
                        const std::string& query_text, int label, const std::string& split) {
      PairRecord p;
      p.pair_id = pair_id;
      p.query_feat = rel;
      p.query_text = query_text;
      p.enroll_text = text;
      p.n_templates = spec.n_templates;
      p.label = label;
      p.split = split;
      m.pairs.push_back(std::move(p));
    };

    // Positives: one rendering each, listed in both splits so easy and hard
    // subsets are both complete binary tasks.
    for (int64_t p = 0; p < spec.pos_per_keyword; ++p) {
      std::string rel = "feats/" + stem + ".pos" + std::to_string(p) + ".feat";
      io::write_feat(out_dir + "/" + rel,
                     render_synthetic_speech(kw_ids, render_seed(spec, "render.pos", i, p),
                                             spec.profile));
      add_pair(stem + ".pos" + std::to_string(p) + ".easy", rel, text, 1, "easy");
      add_pair(stem + ".pos" + std::to_string(p) + ".hard", rel, text, 1, "hard");
    }

    // Hard negatives: single-word substitutions re-checked at phrase level.
    std::vector<std::vector<std::string>> hard;
    for (const auto& v : substitution_variants(kw.words, cache, 1024)) {
      if (static_cast<int64_t>(hard.size()) >= spec.hard_per_keyword) break;
      int64_t d = phoneme_edit_distance(kw_ids, lexicon.phrase_ids(v));
      if (d < 1 || d > spec.hard_distance) continue;
      if (std::find(hard.begin(), hard.end(), v) != hard.end()) continue;
      hard.push_back(v);
    }
    check(static_cast<int64_t>(hard.size()) >= spec.hard_per_keyword,
          "corpus: vocabulary too small for " + std::to_string(spec.hard_per_keyword) +
              " hard negatives within phoneme distance " + std::to_string(spec.hard_distance) +
              " of keyword '" + text + "' (found " + std::to_string(hard.size()) + ")");
    for (int64_t h = 0; h < spec.hard_per_keyword; ++h) {
      const auto& v = hard[static_cast<size_t>(h)];
      std::string rel = "feats/" + stem + ".hard" + std::to_string(h) + ".feat";
      io::write_feat(out_dir + "/" + rel,
                     render_synthetic_speech(lexicon.phrase_ids(v),
                                             render_seed(spec, "render.hard", i, h),
                                             spec.profile));
      add_pair(stem + ".hard" + std::to_string(h), rel, join_words(v), 0, "hard");
    }

    // Easy negatives: random phrases strictly farther than the hard band.
    std::set<std::string> used_easy;
    for (int64_t e = 0; e < spec.easy_per_keyword; ++e) {
      std::vector<std::string> v;
      int64_t tries = 0;
      for (;; ++tries) {
        check(tries < 1000,
              "corpus: vocabulary too small to sample an easy negative farther than phoneme "
              "distance " +
                  std::to_string(spec.hard_distance) + " from keyword '" + text + "'");
        v = sample_phrase(rng, pool, spec);
        std::string vt = join_words(v);
        if (vt == text || used_easy.count(vt) > 0) continue;
        if (phoneme_edit_distance(kw_ids, lexicon.phrase_ids(v)) <= spec.hard_distance) continue;
        used_easy.insert(vt);
        break;
      }
      std::string rel = "feats/" + stem + ".easy" + std::to_string(e) + ".feat";
      io::write_feat(out_dir + "/" + rel,
                     render_synthetic_speech(lexicon.phrase_ids(v),
                                             render_seed(spec, "render.easy", i, e),
                                             spec.profile));
      add_pair(stem + ".easy" + std::to_string(e), rel, join_words(v), 0, "easy");
    }

    m.test_keywords.push_back(std::move(kw));
  }

  // ---- manifests ----
  std::vector<json> rows;
  for (const KeywordRecord& kw : m.train_keywords) {
    json conf = json::array();
    for (const auto& c : kw.confusables) conf.push_back(c);
    rows.push_back(json{{"id", kw.id}, {"words", kw.words}, {"confusables", conf}});
  }
  io::write_text_file(out_dir + "/train_keywords.jsonl", jsonl(rows));

  rows.clear();
  for (const KeywordRecord& kw : m.test_keywords)
    rows.push_back(json{{"id", kw.id}, {"words", kw.words}, {"templates", kw.template_feats}});
  io::write_text_file(out_dir + "/test_keywords.jsonl", jsonl(rows));

  rows.clear();
  for (const PairRecord& p : m.pairs) rows.push_back(pair_to_json(p));
  io::write_text_file(out_dir + "/pairs.jsonl", jsonl(rows));

  json spec_json = spec.to_json();
  json meta{{"spec", spec_json},
            {"config_hash", io::config_hash(spec_json)},
            {"counts", json{{"train_keywords", m.train_keywords.size()},
                            {"test_keywords", m.test_keywords.size()},
                            {"pairs", m.pairs.size()}}}};
  io::write_text_file(out_dir + "/meta.json", meta.dump(2) + "\n");

  return m;
}

CorpusManifest load_corpus(const std::string& dir) {
  CorpusManifest m;
  json meta = json::parse(io::read_text_file(dir + "/meta.json"));
  m.spec = CorpusSpec::from_json(meta.at("spec"));

  for (const json& j : read_jsonl(dir + "/train_keywords.jsonl")) {
    KeywordRecord kw;
    kw.id = j.at("id").get<int64_t>();
    kw.words = j.at("words").get<std::vector<std::string>>();
    for (const json& c : j.at("confusables"))
      kw.confusables.push_back(c.get<std::vector<std::string>>());
    m.train_keywords.push_back(std::move(kw));
  }
  for (const json& j : read_jsonl(dir + "/test_keywords.jsonl")) {
    KeywordRecord kw;
    kw.id = j.at("id").get<int64_t>();
    kw.words = j.at("words").get<std::vector<std::string>>();
    kw.template_feats = j.at("templates").get<std::vector<std::string>>();
    m.test_keywords.push_back(std::move(kw));
  }
  for (const json& j : read_jsonl(dir + "/pairs.jsonl")) m.pairs.push_back(pair_from_json(j));

  check(static_cast<int64_t>(m.train_keywords.size()) == m.spec.n_train_keywords &&
            static_cast<int64_t>(m.test_keywords.size()) == m.spec.n_test_keywords,
        "corpus: keyword manifests in " + dir + " disagree with meta.json counts");
  return m;
}

Episode build_multiclass_episode(const CorpusManifest& manifest, const Lexicon& lexicon,
                                 int64_t n_targets, int64_t n_unknown,
                                 int64_t queries_per_keyword, uint64_t seed) {
  check(n_targets >= 1 && n_unknown >= 0 && queries_per_keyword >= 1,
        "episode: n_targets and queries_per_keyword must be >= 1, n_unknown >= 0");
  const int64_t need = n_targets + n_unknown;
  const int64_t have = static_cast<int64_t>(manifest.test_keywords.size());
  check(have >= need, "episode: needs " + std::to_string(need) +
                          " distinct test keywords, corpus has " + std::to_string(have));

  // Seeded shuffle of keyword indices; the prefix enrolls, the next block
  // plays impostor. No keyword serves both roles.
  std::vector<int64_t> order(static_cast<size_t>(have));
  for (int64_t i = 0; i < have; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(mix_seed(seed, "episode"));
  for (int64_t i = have - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(0, i))]);

  Episode ep;
  for (int64_t i = 0; i < n_targets; ++i)
    ep.targets.push_back(
        manifest.test_keywords[static_cast<size_t>(order[static_cast<size_t>(i)])].words);
  for (int64_t i = 0; i < n_unknown; ++i)
    ep.unknowns.push_back(
        manifest.test_keywords[static_cast<size_t>(order[static_cast<size_t>(n_targets + i)])]
            .words);

  // Queries reuse the corpus render profile; seeds are derived from the
  // episode seed so the same manifest + seed always yields the same features.
  int64_t qi = 0;
  auto render_queries = [&](const std::vector<std::string>& words, int64_t target_index) {
    const std::vector<int64_t> ids = lexicon.phrase_ids(words);
    for (int64_t q = 0; q < queries_per_keyword; ++q) {
      EpisodeQuery eq;
      eq.words = words;
      eq.features = render_synthetic_speech(ids, mix_seed(seed, "episode.query", ++qi),
                                            manifest.spec.profile);
      eq.target_index = target_index;
      ep.queries.push_back(std::move(eq));
    }
  };
  for (int64_t i = 0; i < n_targets; ++i) render_queries(ep.targets[static_cast<size_t>(i)], i);
  for (const auto& words : ep.unknowns) render_queries(words, -1);
  return ep;
}

}  // namespace mmkws
