#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkws/corpus.hpp"
#include "mmkws/features.hpp"
#include "mmkws/lexicon.hpp"
#include "mmkws/model.hpp"
#include "mmkws/tape.hpp"

namespace mmkws {

// Supervision for one (query, enrollment) pair.
struct Labels {
  int label_utt = 0;
  std::vector<double> labels_phon;  // one per enrollment phoneme
  std::vector<double> labels_text;  // one per enrollment word
};

// Utterance label: exact word-sequence match. Word labels: enrollment word
// appears anywhere in the transcript. Phoneme labels: multiset containment —
// each enrollment phoneme consumes one matching transcript phoneme.
// Every transcript and enrollment word must be a lexicon entry.
Labels make_labels(const std::vector<std::string>& query_words, const Enrollment& enr,
                   const Lexicon& lexicon);

struct TrainingPair {
  std::string id;
  FeatureMatrix query;
  std::vector<std::string> query_words;
  Enrollment enrollment;
  Labels labels;
};

// The three-term objective, still attached to the tape.
struct LossParts {
  TensorPtr total;
  TensorPtr utt;
  TensorPtr phon;
  TensorPtr text;
};

// total = bce(p_utt) + mean_j bce(p_phon[j]) + mean_i bce(p_text[i]);
// with aux_losses=false only the utterance term contributes.
LossParts total_loss(Tape& tape, const MatchResult& result, const Labels& labels,
                     bool aux_losses = true);

class Adam {
 public:
  Adam(std::vector<TensorPtr> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Applies one update from gradients accumulated per parameter, in the
  // same order as the constructor's parameter list.
  void step(const std::vector<std::vector<double>>& grads);

  const std::vector<TensorPtr>& params() const { return params_; }

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct TrainConfig {
  int64_t steps = 2000;
  int64_t anchors_per_step = 6;  // each anchor yields 3 pairs
  double lr = 1e-3;
  uint64_t seed = 7;
  int64_t n_templates = 1;
  double template_dropout = 0.2;  // chance a training pair carries no template
  bool use_templates = true;      // off: support-speech branch never used
  bool aux_losses = true;         // off: only the utterance loss trains
  bool use_confusables = true;    // off: hard negatives replaced by random ones
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// One keyword available for training, with its pre-mined confusable phrases.
struct TrainKeyword {
  std::vector<std::string> words;
  std::vector<int64_t> subword_ids;
  std::vector<int64_t> phoneme_ids;
  std::vector<std::vector<std::string>> confusables;  // word lists
};

struct TrainCorpus {
  std::vector<TrainKeyword> keywords;
  RenderProfile profile;
  const Lexicon* lexicon = nullptr;
  const Vocab* vocab = nullptr;
};

// Bridges a generated corpus to the trainer: encodes every training keyword
// with the given lexicon and vocabulary and carries the render profile over.
// The lexicon and vocabulary must outlive the returned corpus.
TrainCorpus make_train_corpus(const CorpusManifest& manifest, const Lexicon& lexicon,
                              const Vocab& vocab);

nlohmann::json train_config_to_json(const TrainConfig& tc);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossRow {
  int64_t step = 0;
  double utt = 0, phon = 0, text = 0, total = 0;
};

// One optimizer update over an explicit batch; returns the mean loss parts.
// Aborts with a diagnostic naming the step and pair ids if the loss is not
// finite.
LossRow train_step(const Model& model, Adam& opt, const std::vector<TrainingPair>& batch,
                   int64_t step, bool aux_losses);

struct TrainResult {
  std::vector<LossRow> curve;
};

// Full loop: per step, per sampled anchor keyword, one positive, one
// confusable, and one random negative pair. Deterministic given tc.seed.
TrainResult train(const Model& model, const TrainCorpus& corpus, const TrainConfig& tc);

// CSV serialization of a loss curve: "step,loss_utt,loss_phon,loss_text,total".
std::string loss_curve_csv(const std::vector<LossRow>& curve);

}  // namespace mmkws
