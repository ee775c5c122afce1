#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmkws/features.hpp"
#include "mmkws/tape.hpp"
#include "mmkws/tensor.hpp"

namespace mmkws {

// Architecture and initialization settings. Everything that changes tensor
// shapes or the computation graph lives here and is embedded in checkpoints.
struct ModelConfig {
  int64_t d = 16;          // common embedding width
  int64_t feat_dim = 40;   // acoustic feature bins F
  int64_t subsample = 2;   // temporal subsampling of audio branches
  int64_t enc_layers = 2;  // audio encoder depth
  int64_t enc_heads = 2;
  int64_t d_phon = 8;      // raw phoneme table width
  int64_t d_text = 12;     // raw subword table width
  int64_t qtam_layers = 2;
  int64_t qtam_heads = 2;
  int64_t qaam_layers = 2;
  int64_t qaam_heads = 2;
  int64_t gru_hidden = 16;
  int64_t n_phonemes = 0;  // phoneme inventory size, from the lexicon
  int64_t n_subwords = 0;  // vocabulary size
  bool freeze_support_speech = true;
  uint64_t seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Multi-modal enrollment of one keyword: its text (as subword ids), its
// pronunciation (phoneme ids), and zero or more speech templates.
struct Enrollment {
  std::vector<std::string> words;
  std::vector<int64_t> subword_ids;
  std::vector<int64_t> phoneme_ids;
  std::vector<FeatureMatrix> templates;
};

// Joint embedding over concatenated segments; boundaries record the segment
// lengths in concatenation order.
struct JointEmbedding {
  TensorPtr rows;
  std::vector<int64_t> boundaries;
};

// One attention map: the row-stochastic L x L softmax output of a single
// layer/head, still attached to the tape.
struct AttnMapRef {
  int32_t layer = 0;
  int32_t head = 0;
  TensorPtr map;
};

// Everything score_pair produces for one (query, enrollment) pair.
struct MatchResult {
  TensorPtr p_utt;   // 1 x 1
  TensorPtr p_phon;  // T_p x 1
  TensorPtr p_text;  // T_t x 1
  JointEmbedding joint_ta;
  std::optional<JointEmbedding> joint_aa;  // absent without templates
  std::vector<AttnMapRef> qtam_maps;
  std::vector<AttnMapRef> qaam_maps;
};

// Sinusoidal position encoding rows [0, t); constant, no gradient.
TensorPtr sinusoidal_positions(int64_t t, int64_t d);

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, TensorPtr>>& parameters() const { return params_; }
  std::vector<std::pair<std::string, TensorPtr>> trainable_parameters() const;
  const TensorPtr& param(const std::string& name) const;

  // ---- feature extractor ----
  TensorPtr encode_query_audio(Tape& tape, const FeatureMatrix& f) const;
  TensorPtr encode_support_speech(Tape& tape, const FeatureMatrix& f) const;
  TensorPtr embed_phonemes(Tape& tape, const std::vector<int64_t>& ids) const;
  TensorPtr embed_subwords(Tape& tape, const std::vector<int64_t>& ids) const;
  // The named affine mapper applied to raw embedding rows ("phoneme",
  // "subword", or "speech").
  TensorPtr map_to_common(Tape& tape, const TensorPtr& raw, const std::string& which) const;

  // ---- pattern extractor ----
  // Adds per-segment-restarting sinusoidal positions plus the named type code.
  TensorPtr add_pos_type(Tape& tape, const TensorPtr& e, const std::string& type_code) const;
  std::pair<JointEmbedding, std::vector<AttnMapRef>> qtam(Tape& tape, const TensorPtr& eq,
                                                          const TensorPtr& ep,
                                                          const TensorPtr& et) const;
  // Returns nullopt when the support embedding is absent (text-only enrollment).
  std::optional<std::pair<JointEmbedding, std::vector<AttnMapRef>>> qaam(
      Tape& tape, const TensorPtr& eq, const std::optional<TensorPtr>& ea) const;

  // ---- discriminator ----
  TensorPtr utterance_score(Tape& tape, const JointEmbedding& ta,
                            const std::optional<JointEmbedding>& aa) const;
  std::pair<TensorPtr, TensorPtr> unit_scores(Tape& tape, const JointEmbedding& ta) const;

  // ---- full pipeline for one pair ----
  MatchResult score_pair(Tape& tape, const FeatureMatrix& query, const Enrollment& enr) const;

  // Overwrites parameter values from (name, tensor) pairs; every parameter
  // must be covered exactly once with matching shape.
  void load_values(const std::vector<std::pair<std::string, Tensor>>& values);

 private:
  TensorPtr register_param(const std::string& name, std::vector<int64_t> shape, double scale,
                           bool trainable);
  void register_layer_norm(const std::string& prefix, bool trainable);
  void register_block_core(const std::string& lp, bool trainable);
  void register_encoder(const std::string& prefix, bool trainable);
  void register_attention_stack(const std::string& prefix, int64_t layers);
  GruParams gru_params(const std::string& prefix) const;

  struct AttnOut {
    TensorPtr out;
    std::vector<TensorPtr> head_maps;
  };
  AttnOut self_attention(Tape& tape, const TensorPtr& x, const std::string& prefix,
                         int64_t heads) const;
  TensorPtr feed_forward(Tape& tape, const TensorPtr& x, const std::string& prefix) const;
  TensorPtr layer_norm_named(Tape& tape, const TensorPtr& x, const std::string& prefix) const;
  TensorPtr encoder_stack(Tape& tape, const TensorPtr& x0, const std::string& prefix) const;
  std::pair<JointEmbedding, std::vector<AttnMapRef>> attention_module(
      Tape& tape, const std::vector<TensorPtr>& segments, const std::string& prefix,
      int64_t layers, int64_t heads) const;
  TensorPtr affine(Tape& tape, const TensorPtr& x, const std::string& w_name,
                   const std::string& b_name) const;

  ModelConfig cfg_;
  std::vector<std::pair<std::string, TensorPtr>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace mmkws
