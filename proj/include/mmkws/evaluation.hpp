#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkws/corpus.hpp"
#include "mmkws/lexicon.hpp"
#include "mmkws/model.hpp"

namespace mmkws {

struct ScoredPair {
  std::string pair_id;
  double score = 0.0;
  int label = 0;
};

// Probability that a random positive outscores a random negative, ties
// counting one half. Errors unless both classes are present.
double compute_auc(std::vector<ScoredPair> pairs);

// Equal error rate of the accept-if-score>=threshold rule: the sweep visits
// every distinct score and the FAR/FRR crossing is linearly interpolated
// between adjacent thresholds. Errors unless both classes are present.
double compute_eer(std::vector<ScoredPair> pairs);

// Element-wise mean over the final layer's head maps, detached.
Tensor mean_final_layer_map(const std::vector<AttnMapRef>& maps);

// How monotonically the support rows of an attention map advance through the
// query columns: Spearman rank correlation (midranks) between support row
// index and that row's argmax query column. Fewer than two support rows, or
// argmax columns with zero variance, give 0.
double monotonicity_score(const Tensor& map, const std::vector<int64_t>& boundaries);

Enrollment make_enrollment(const std::vector<std::string>& words, const Lexicon& lexicon,
                           const Vocab& vocab, std::vector<FeatureMatrix> templates = {});

// Forward-only utterance probability for one pair.
double score_probability(const Model& model, const FeatureMatrix& query, const Enrollment& enr);

// Index of the best score; -1 when open_set and every score is below the
// threshold. Closed-set classification ignores the threshold.
int64_t classify_scores(const std::vector<double>& scores, double threshold, bool open_set);
int64_t multiclass_classify(const Model& model, const FeatureMatrix& query,
                            const std::vector<Enrollment>& enrollments, double threshold,
                            bool open_set);

// Score matrix of one episode: scores[q][t] = p_utt of query q against
// enrolled target t; truth[q] = target index or -1 for unknown keywords.
struct EpisodeScores {
  std::vector<std::vector<double>> scores;
  std::vector<int64_t> truth;
};

EpisodeScores score_episode(const Model& model, const Episode& episode, const Lexicon& lexicon,
                            const Vocab& vocab, const RenderProfile& profile, int64_t n_templates,
                            uint64_t template_seed);

// Smallest rejection threshold maximizing open-set accuracy; selected on a
// held-out development episode.
double select_threshold(const EpisodeScores& dev);

struct EpisodeMetrics {
  double acc_close = 0.0;  // target queries only, threshold ignored
  double acc_open = 0.0;   // all queries, unknowns must be rejected
};
EpisodeMetrics episode_metrics(const EpisodeScores& s, double threshold);

struct EvalOptions {
  int64_t n_targets = 10;
  int64_t n_unknown = 20;
  int64_t queries_per_keyword = 3;
  int64_t episode_templates = 1;
  uint64_t episode_seed = 1;
};

struct EvalReport {
  double auc_easy = 0.0, auc_hard = 0.0;
  double eer_easy = 0.0, eer_hard = 0.0;
  double acc_close = 0.0, acc_open = 0.0;
  double open_threshold = 0.0;
  int64_t n_pairs = 0;
  std::string config_hash;
  std::vector<ScoredPair> easy, hard;  // per-pair scores behind the metrics

  nlohmann::json to_json() const;  // the eight reported fields
};

// Scores every manifest pair (features read from corpus_dir), computes
// easy/hard AUC and EER over deterministically ordered score sets, and runs
// one development + one test episode for the multiclass accuracies.
EvalReport evaluate(const Model& model, const CorpusManifest& manifest,
                    const std::string& corpus_dir, const Lexicon& lexicon, const Vocab& vocab,
                    const EvalOptions& opts = {});

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int64_t samples = 0;
};

// Wall time of single-pair scoring: `reps` timed repetitions after 10
// warmup runs.
LatencyStats bench_latency(const Model& model, const FeatureMatrix& query, const Enrollment& enr,
                           int64_t reps);

}  // namespace mmkws
