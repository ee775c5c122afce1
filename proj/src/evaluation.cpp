#include "mmkws/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "mmkws/error.hpp"
#include "mmkws/io.hpp"
#include "mmkws/mining.hpp"
#include "mmkws/rng.hpp"
#include "mmkws/tape.hpp"

namespace mmkws {

using nlohmann::json;

namespace {

// Deterministic score order regardless of how callers accumulated the pairs.
void canonical_sort(std::vector<ScoredPair>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
    return a.score != b.score ? a.score < b.score : a.pair_id < b.pair_id;
  });
}

void check_two_classes(const std::vector<ScoredPair>& pairs, const std::string& metric) {
  int64_t pos = 0, neg = 0;
  for (const ScoredPair& p : pairs) (p.label == 1 ? pos : neg)++;
  check(pos >= 1 && neg >= 1,
        metric + " needs at least one positive and one negative pair (got " +
            std::to_string(pos) + " positive, " + std::to_string(neg) + " negative)");
}

// Midranks of the canonical order: tied scores share the average rank.
std::vector<double> midranks(const std::vector<ScoredPair>& sorted) {
  const size_t n = sorted.size();
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && sorted[j + 1].score == sorted[i].score) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) rank[k] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double compute_auc(std::vector<ScoredPair> pairs) {
  check_two_classes(pairs, "auc");
  canonical_sort(pairs);
  const std::vector<double> rank = midranks(pairs);
  double pos_rank_sum = 0.0;
  int64_t n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label == 1) {
      pos_rank_sum += rank[i];
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double compute_eer(std::vector<ScoredPair> pairs) {
  check_two_classes(pairs, "eer");
  canonical_sort(pairs);

  int64_t n_pos = 0, n_neg = 0;
  for (const ScoredPair& p : pairs) (p.label == 1 ? n_pos : n_neg)++;

  // Sweep the accept threshold downward over every distinct score. Point 0
  // rejects everything (FAR 0, FRR 1); each following point lowers the
  // threshold to the next distinct score, accepting it and its ties.
  std::vector<double> far{0.0}, frr{1.0};
  int64_t neg_accepted = 0, pos_accepted = 0;
  size_t i = pairs.size();
  while (i > 0) {
    const double s = pairs[i - 1].score;
    while (i > 0 && pairs[i - 1].score == s) {
      (pairs[i - 1].label == 1 ? pos_accepted : neg_accepted)++;
      --i;
    }
    far.push_back(static_cast<double>(neg_accepted) / static_cast<double>(n_neg));
    frr.push_back(static_cast<double>(n_pos - pos_accepted) / static_cast<double>(n_pos));
  }

  for (size_t k = 0; k < far.size(); ++k) {
    if (far[k] < frr[k]) continue;
    if (far[k] == frr[k]) return far[k];
    // Crossing lies strictly inside segment (k-1, k); k >= 1 because the
    // sweep starts at FAR 0 < FRR 1.
    const double dfar = far[k] - far[k - 1];
    const double dfrr = frr[k] - frr[k - 1];
    const double alpha = (frr[k - 1] - far[k - 1]) / (dfar - dfrr);
    return far[k - 1] + alpha * dfar;
  }
  fail("eer sweep found no crossing");  // unreachable: the last point has FAR 1, FRR 0
}

Tensor mean_final_layer_map(const std::vector<AttnMapRef>& maps) {
  check(!maps.empty(), "mean_final_layer_map: no attention maps given");
  int32_t last = maps[0].layer;
  for (const AttnMapRef& m : maps) last = std::max(last, m.layer);
  Tensor out;
  int64_t count = 0;
  for (const AttnMapRef& m : maps) {
    if (m.layer != last) continue;
    if (count == 0) {
      out = *m.map;
      out.requires_grad = false;
    } else {
      check(m.map->shape == out.shape, "mean_final_layer_map: head map shapes disagree");
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += m.map->data[i];
    }
    ++count;
  }
  for (double& v : out.data) v /= static_cast<double>(count);
  return out;
}

double monotonicity_score(const Tensor& map, const std::vector<int64_t>& boundaries) {
  check(map.shape.size() == 2 && map.rows() == map.cols(),
        "monotonicity_score: attention map must be square");
  check(!boundaries.empty(), "monotonicity_score: boundaries empty");
  int64_t total = 0;
  for (int64_t b : boundaries) {
    check(b >= 1, "monotonicity_score: empty segment");
    total += b;
  }
  check(total == map.rows(), "monotonicity_score: boundaries do not add up to the map size");

  const int64_t q = boundaries[0];       // query columns [0, q)
  const int64_t m = map.rows() - q;      // support rows [q, end)
  if (m <= 1) return 0.0;

  // Per support row: the query column it attends to most (first max on ties).
  std::vector<double> peak(static_cast<size_t>(m));
  for (int64_t r = 0; r < m; ++r) {
    const double* row = &map.data[static_cast<size_t>((q + r) * map.cols())];
    int64_t best = 0;
    for (int64_t c = 1; c < q; ++c)
      if (row[c] > row[best]) best = c;
    peak[static_cast<size_t>(r)] = static_cast<double>(best);
  }

  // Spearman correlation of row order vs peak order, midranks for ties.
  std::vector<size_t> idx(peak.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return peak[a] < peak[b]; });
  std::vector<double> y_rank(peak.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && peak[idx[j + 1]] == peak[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) y_rank[idx[k]] = r;
    i = j + 1;
  }

  const double n = static_cast<double>(m);
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int64_t r = 0; r < m; ++r) {
    const double dx = static_cast<double>(r + 1) - mean;  // row ranks are 1..m
    const double dy = y_rank[static_cast<size_t>(r)] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Enrollment make_enrollment(const std::vector<std::string>& words, const Lexicon& lexicon,
                           const Vocab& vocab, std::vector<FeatureMatrix> templates) {
  check(!words.empty(), "make_enrollment: empty keyword");
  Enrollment enr;
  enr.words = words;
  enr.subword_ids = vocab.encode(words);
  enr.phoneme_ids = lexicon.phrase_ids(words);
  enr.templates = std::move(templates);
  return enr;
}

double score_probability(const Model& model, const FeatureMatrix& query, const Enrollment& enr) {
  Tape tape;
  return model.score_pair(tape, query, enr).p_utt->data[0];
}

int64_t classify_scores(const std::vector<double>& scores, double threshold, bool open_set) {
  check(!scores.empty(), "classify_scores: no candidate scores");
  int64_t best = 0;
  for (int64_t i = 1; i < static_cast<int64_t>(scores.size()); ++i)
    if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(best)]) best = i;
  if (open_set && scores[static_cast<size_t>(best)] < threshold) return -1;
  return best;
}

int64_t multiclass_classify(const Model& model, const FeatureMatrix& query,
                            const std::vector<Enrollment>& enrollments, double threshold,
                            bool open_set) {
  check(!enrollments.empty(), "multiclass_classify: no enrollments");
  std::vector<double> scores;
  scores.reserve(enrollments.size());
  for (const Enrollment& enr : enrollments) scores.push_back(score_probability(model, query, enr));
  return classify_scores(scores, threshold, open_set);
}

EpisodeScores score_episode(const Model& model, const Episode& episode, const Lexicon& lexicon,
                            const Vocab& vocab, const RenderProfile& profile, int64_t n_templates,
                            uint64_t template_seed) {
  check(n_templates >= 0, "score_episode: n_templates must be >= 0");
  std::vector<Enrollment> enrollments;
  for (size_t i = 0; i < episode.targets.size(); ++i) {
    std::vector<FeatureMatrix> templates;
    const std::vector<int64_t> ids = lexicon.phrase_ids(episode.targets[i]);
    for (int64_t t = 0; t < n_templates; ++t)
      templates.push_back(render_synthetic_speech(
          ids, mix_seed(mix_seed(template_seed, "episode.tmpl", static_cast<uint64_t>(i)),
                        static_cast<uint64_t>(t)),
          profile));
    enrollments.push_back(make_enrollment(episode.targets[i], lexicon, vocab,
                                          std::move(templates)));
  }

  EpisodeScores out;
  for (const EpisodeQuery& q : episode.queries) {
    std::vector<double> row;
    row.reserve(enrollments.size());
    for (const Enrollment& enr : enrollments)
      row.push_back(score_probability(model, q.features, enr));
    out.scores.push_back(std::move(row));
    out.truth.push_back(q.target_index);
  }
  return out;
}

namespace {

double open_accuracy(const EpisodeScores& s, double threshold) {
  int64_t correct = 0;
  for (size_t q = 0; q < s.scores.size(); ++q)
    if (classify_scores(s.scores[q], threshold, true) == s.truth[q]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(s.scores.size());
}

}  // namespace

double select_threshold(const EpisodeScores& dev) {
  check(!dev.scores.empty(), "select_threshold: empty development episode");
  // Scores are probabilities, so 0 accepts everything and 1 rejects
  // everything; between those, only the per-query maxima change behavior.
  std::set<double> candidates{0.0, 1.0};
  for (const auto& row : dev.scores)
    candidates.insert(*std::max_element(row.begin(), row.end()));
  double best_t = 0.0, best_acc = -1.0;
  for (double t : candidates) {
    const double acc = open_accuracy(dev, t);
    if (acc > best_acc) {
      best_acc = acc;
      best_t = t;
    }
  }
  return best_t;
}

EpisodeMetrics episode_metrics(const EpisodeScores& s, double threshold) {
  check(!s.scores.empty(), "episode_metrics: empty episode");
  EpisodeMetrics m;
  int64_t closed_correct = 0, closed_total = 0;
  for (size_t q = 0; q < s.scores.size(); ++q) {
    if (s.truth[q] < 0) continue;
    ++closed_total;
    if (classify_scores(s.scores[q], 0.0, false) == s.truth[q]) ++closed_correct;
  }
  check(closed_total > 0, "episode_metrics: episode has no target queries");
  m.acc_close = static_cast<double>(closed_correct) / static_cast<double>(closed_total);
  m.acc_open = open_accuracy(s, threshold);
  return m;
}

json EvalReport::to_json() const {
  return json{{"auc_easy", auc_easy},   {"auc_hard", auc_hard},
              {"eer_easy", eer_easy},   {"eer_hard", eer_hard},
              {"acc_close", acc_close}, {"acc_open", acc_open},
              {"n_pairs", n_pairs},     {"config_hash", config_hash}};
}

EvalReport evaluate(const Model& model, const CorpusManifest& manifest,
                    const std::string& corpus_dir, const Lexicon& lexicon, const Vocab& vocab,
                    const EvalOptions& opts) {
  check(!manifest.pairs.empty(), "evaluate: corpus has no pairs");

  // Enrollments per test keyword, templates loaded from the corpus.
  std::map<std::string, Enrollment> enroll_by_text;
  for (const KeywordRecord& kw : manifest.test_keywords) {
    std::vector<FeatureMatrix> templates;
    for (const std::string& rel : kw.template_feats)
      templates.push_back(io::read_feat(corpus_dir + "/" + rel));
    enroll_by_text.emplace(join_words(kw.words),
                           make_enrollment(kw.words, lexicon, vocab, std::move(templates)));
  }

  EvalReport rep;
  rep.n_pairs = static_cast<int64_t>(manifest.pairs.size());
  rep.config_hash = io::config_hash(model.config().to_json());

  // Positive pairs appear once per split over the same rendering, so scores
  // are cached by (query file, keyword).
  std::map<std::pair<std::string, std::string>, double> cache;
  for (const PairRecord& p : manifest.pairs) {
    auto it = enroll_by_text.find(p.enroll_text);
    check(it != enroll_by_text.end(),
          "evaluate: pair " + p.pair_id + " enrolls unknown keyword '" + p.enroll_text + "'");
    const auto key = std::make_pair(p.query_feat, p.enroll_text);
    auto hit = cache.find(key);
    double s;
    if (hit != cache.end()) {
      s = hit->second;
    } else {
      s = score_probability(model, io::read_feat(corpus_dir + "/" + p.query_feat), it->second);
      cache.emplace(key, s);
    }
    (p.split == "hard" ? rep.hard : rep.easy).push_back(ScoredPair{p.pair_id, s, p.label});
  }

  rep.auc_easy = compute_auc(rep.easy);
  rep.auc_hard = compute_auc(rep.hard);
  rep.eer_easy = compute_eer(rep.easy);
  rep.eer_hard = compute_eer(rep.hard);

  Episode dev = build_multiclass_episode(manifest, lexicon, opts.n_targets, opts.n_unknown,
                                         opts.queries_per_keyword,
                                         mix_seed(opts.episode_seed, "dev"));
  Episode test = build_multiclass_episode(manifest, lexicon, opts.n_targets, opts.n_unknown,
                                          opts.queries_per_keyword,
                                          mix_seed(opts.episode_seed, "test"));
  EpisodeScores dev_scores =
      score_episode(model, dev, lexicon, vocab, manifest.spec.profile, opts.episode_templates,
                    mix_seed(opts.episode_seed, "dev.tmpl"));
  EpisodeScores test_scores =
      score_episode(model, test, lexicon, vocab, manifest.spec.profile, opts.episode_templates,
                    mix_seed(opts.episode_seed, "test.tmpl"));
  rep.open_threshold = select_threshold(dev_scores);
  EpisodeMetrics m = episode_metrics(test_scores, rep.open_threshold);
  rep.acc_close = m.acc_close;
  rep.acc_open = m.acc_open;
  return rep;
}

LatencyStats bench_latency(const Model& model, const FeatureMatrix& query, const Enrollment& enr,
                           int64_t reps) {
  check(reps >= 1, "bench_latency: reps must be >= 1");
  for (int i = 0; i < 10; ++i) (void)score_probability(model, query, enr);

  std::vector<double> ms(static_cast<size_t>(reps));
  for (int64_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)score_probability(model, query, enr);
    const auto t1 = std::chrono::steady_clock::now();
    ms[static_cast<size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  LatencyStats st;
  st.samples = reps;
  const size_t n = ms.size();
  st.median_ms = 0.5 * (ms[(n - 1) / 2] + ms[n / 2]);
  const size_t p95_idx = std::min(n - 1, static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1);
  st.p95_ms = ms[p95_idx];
  return st;
}

}  // namespace mmkws
