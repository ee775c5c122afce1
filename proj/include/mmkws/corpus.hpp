#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkws/features.hpp"
#include "mmkws/lexicon.hpp"

namespace mmkws {

// Sizes and difficulty knobs of one synthetic dataset. Everything that
// affects generated bytes lives here, so a spec + seed is a full recipe.
struct CorpusSpec {
  int64_t n_train_keywords = 300;
  int64_t n_test_keywords = 60;
  int64_t min_words = 2;  // words per keyword phrase
  int64_t max_words = 6;
  int64_t pos_per_keyword = 3;   // rendered positive queries per test keyword
  int64_t easy_per_keyword = 3;  // distant negatives per test keyword
  int64_t hard_per_keyword = 3;  // confusable negatives per test keyword
  int64_t n_templates = 1;       // enrollment speech templates per test keyword
  int64_t hard_distance = 2;     // hard negatives: phrase phoneme distance in [1, this]
  int64_t mine_k = 10;           // confusable phrases kept per training keyword
  uint64_t seed = 7;
  RenderProfile profile;

  void validate() const;
  nlohmann::json to_json() const;
  static CorpusSpec from_json(const nlohmann::json& j);
};

struct KeywordRecord {
  int64_t id = 0;
  std::vector<std::string> words;
  std::vector<std::vector<std::string>> confusables;  // mined; training side only
  std::vector<std::string> template_feats;            // FEAT paths; test side only
};

// One evaluation pair, mirroring the JSONL manifest schema field for field.
struct PairRecord {
  std::string pair_id;
  std::string query_feat;  // path relative to the corpus directory
  std::string query_text;
  std::string enroll_text;
  int64_t n_templates = 0;
  int label = 0;
  std::string split;  // "easy" | "hard"
};

struct CorpusManifest {
  CorpusSpec spec;
  std::vector<KeywordRecord> train_keywords;
  std::vector<KeywordRecord> test_keywords;
  std::vector<PairRecord> pairs;
};

// Samples disjoint train/test keyword phrases, mines confusables for the
// training side, renders queries and templates, and writes the whole dataset
// under out_dir (meta.json, train_keywords.jsonl, test_keywords.jsonl,
// pairs.jsonl, feats/*.feat). Deterministic given the spec; regeneration
// produces byte-identical files. Positive queries appear as one feature file
// shared by an easy-split and a hard-split manifest row.
CorpusManifest build_corpus(const CorpusSpec& spec, const Lexicon& lexicon,
                            const SemanticTable& semantics, const std::string& out_dir);

CorpusManifest load_corpus(const std::string& dir);

// Multiclass episode: n_targets enrolled keywords, n_unknown distractor
// keywords, queries rendered from all of them. target_index is the position
// in `targets`, or -1 for queries of unknown keywords.
struct EpisodeQuery {
  std::vector<std::string> words;
  FeatureMatrix features;
  int64_t target_index = -1;
};

struct Episode {
  std::vector<std::vector<std::string>> targets;
  std::vector<std::vector<std::string>> unknowns;
  std::vector<EpisodeQuery> queries;
};

// Draws target/unknown keywords from the manifest's test side and renders
// queries_per_keyword fresh queries for each keyword. In-memory and
// deterministic given (manifest, seed); enrollment templates are rendered by
// the caller so template count can vary over one fixed episode.
Episode build_multiclass_episode(const CorpusManifest& manifest, const Lexicon& lexicon,
                                 int64_t n_targets, int64_t n_unknown,
                                 int64_t queries_per_keyword, uint64_t seed);

}  // namespace mmkws
