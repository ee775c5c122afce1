#include "mmkws/model.hpp"

#include <cmath>

#include "mmkws/error.hpp"
#include "mmkws/rng.hpp"

namespace mmkws {

void ModelConfig::validate() const {
  check(d >= 2 && feat_dim >= 1 && subsample >= 1, "bad core dimensions");
  check(enc_layers >= 1 && qtam_layers >= 1 && qaam_layers >= 1, "layer counts must be positive");
  check(enc_heads >= 1 && qtam_heads >= 1 && qaam_heads >= 1, "head counts must be positive");
  check(d % enc_heads == 0, "embedding width must divide evenly across encoder heads");
  check(d % qtam_heads == 0 && d % qaam_heads == 0,
        "embedding width must divide evenly across attention heads");
  check(d_phon >= 1 && d_text >= 1 && gru_hidden >= 1, "bad branch dimensions");
  check(n_phonemes >= 1, "phoneme inventory size not set");
  check(n_subwords >= 1, "subword vocabulary size not set");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["d"] = d;
  j["feat_dim"] = feat_dim;
  j["subsample"] = subsample;
  j["enc_layers"] = enc_layers;
  j["enc_heads"] = enc_heads;
  j["d_phon"] = d_phon;
  j["d_text"] = d_text;
  j["qtam_layers"] = qtam_layers;
  j["qtam_heads"] = qtam_heads;
  j["qaam_layers"] = qaam_layers;
  j["qaam_heads"] = qaam_heads;
  j["gru_hidden"] = gru_hidden;
  j["n_phonemes"] = n_phonemes;
  j["n_subwords"] = n_subwords;
  j["freeze_support_speech"] = freeze_support_speech;
  j["seed"] = seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int64_t>();
  c.feat_dim = j.at("feat_dim").get<int64_t>();
  c.subsample = j.at("subsample").get<int64_t>();
  c.enc_layers = j.at("enc_layers").get<int64_t>();
  c.enc_heads = j.at("enc_heads").get<int64_t>();
  c.d_phon = j.at("d_phon").get<int64_t>();
  c.d_text = j.at("d_text").get<int64_t>();
  c.qtam_layers = j.at("qtam_layers").get<int64_t>();
  c.qtam_heads = j.at("qtam_heads").get<int64_t>();
  c.qaam_layers = j.at("qaam_layers").get<int64_t>();
  c.qaam_heads = j.at("qaam_heads").get<int64_t>();
  c.gru_hidden = j.at("gru_hidden").get<int64_t>();
  c.n_phonemes = j.at("n_phonemes").get<int64_t>();
  c.n_subwords = j.at("n_subwords").get<int64_t>();
  c.freeze_support_speech = j.at("freeze_support_speech").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

TensorPtr sinusoidal_positions(int64_t t, int64_t d) {
  check(t >= 1 && d >= 1, "bad position encoding size");
  auto pos = tensor({t, d}, /*requires_grad=*/false);
  for (int64_t r = 0; r < t; ++r) {
    for (int64_t j = 0; j < d; ++j) {
      const int64_t i = j / 2;
      const double angle =
          static_cast<double>(r) /
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      pos->at(r, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pos;
}

TensorPtr Model::register_param(const std::string& name, std::vector<int64_t> shape, double scale,
                                bool trainable) {
  check(index_.count(name) == 0, "duplicate parameter name: " + name);
  auto t = tensor(std::move(shape), trainable);
  if (scale != 0.0) {
    // Seed derived from the parameter name, so initialization is independent
    // of registration order.
    Rng rng(mix_seed(cfg_.seed, name));
    for (auto& v : t->data) v = scale * rng.normal();
  }
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(t));
  return params_.back().second;
}

void Model::register_layer_norm(const std::string& prefix, bool trainable) {
  auto g = register_param(prefix + ".g", {1, cfg_.d}, 0.0, trainable);
  for (auto& v : g->data) v = 1.0;
  register_param(prefix + ".b", {1, cfg_.d}, 0.0, trainable);
}

void Model::register_block_core(const std::string& lp, bool trainable) {
  const int64_t d = cfg_.d;
  const double ws = 1.0 / std::sqrt(static_cast<double>(d));
  register_layer_norm(lp + ".attn.ln", trainable);
  for (const char* n : {"wq", "wk", "wv", "wo"})
    register_param(lp + ".attn." + std::string(n), {d, d}, ws, trainable);
  for (const char* n : {"bq", "bk", "bv", "bo"})
    register_param(lp + ".attn." + std::string(n), {1, d}, 0.0, trainable);
  register_layer_norm(lp + ".ffn.ln", trainable);
  register_param(lp + ".ffn.w1", {d, 2 * d}, ws, trainable);
  register_param(lp + ".ffn.b1", {1, 2 * d}, 0.0, trainable);
  register_param(lp + ".ffn.w2", {2 * d, d}, 1.0 / std::sqrt(static_cast<double>(2 * d)),
                 trainable);
  register_param(lp + ".ffn.b2", {1, d}, 0.0, trainable);
}

void Model::register_attention_stack(const std::string& prefix, int64_t layers) {
  for (int64_t l = 0; l < layers; ++l)
    register_block_core(prefix + ".l" + std::to_string(l), true);
}

void Model::register_encoder(const std::string& prefix, bool trainable) {
  const int64_t d = cfg_.d;
  const int64_t in_dim = cfg_.feat_dim * cfg_.subsample;
  register_param(prefix + ".in.w", {in_dim, d}, 1.0 / std::sqrt(static_cast<double>(in_dim)),
                 trainable);
  register_param(prefix + ".in.b", {1, d}, 0.0, trainable);
  const double ws = 1.0 / std::sqrt(static_cast<double>(d));
  for (int64_t l = 0; l < cfg_.enc_layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    register_layer_norm(lp + ".conv.ln", trainable);
    register_param(lp + ".conv.k", {3, d}, ws, trainable);
    register_block_core(lp, trainable);
  }
  register_param(prefix + ".out.w", {d, d}, ws, trainable);
  register_param(prefix + ".out.b", {1, d}, 0.0, trainable);
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int64_t d = cfg_.d, h = cfg_.gru_hidden;

  register_encoder("query_enc", true);
  register_encoder("support_enc", !cfg_.freeze_support_speech);

  register_param("phoneme_table", {cfg_.n_phonemes, cfg_.d_phon}, 1.0, true);
  register_param("phoneme_map.w", {cfg_.d_phon, d},
                 1.0 / std::sqrt(static_cast<double>(cfg_.d_phon)), true);
  register_param("phoneme_map.b", {1, d}, 0.0, true);
  register_param("subword_table", {cfg_.n_subwords, cfg_.d_text}, 1.0, true);
  register_param("subword_map.w", {cfg_.d_text, d},
                 1.0 / std::sqrt(static_cast<double>(cfg_.d_text)), true);
  register_param("subword_map.b", {1, d}, 0.0, true);
  register_param("speech_map.w", {d, d}, 1.0 / std::sqrt(static_cast<double>(d)), true);
  register_param("speech_map.b", {1, d}, 0.0, true);

  for (const char* n :
       {"type.qtam_query", "type.qtam_phoneme", "type.qtam_text", "type.qaam_query",
        "type.qaam_support"})
    register_param(n, {1, d}, 0.5, true);

  register_attention_stack("qtam", cfg_.qtam_layers);
  register_attention_stack("qaam", cfg_.qaam_layers);

  for (const std::string g : {"gru_t", "gru_a"}) {
    const double xs = 1.0 / std::sqrt(static_cast<double>(d));
    const double hs = 1.0 / std::sqrt(static_cast<double>(h));
    for (const char* n : {"wz", "wr", "wh"}) register_param(g + "." + n, {d, h}, xs, true);
    for (const char* n : {"uz", "ur", "uh"}) register_param(g + "." + n, {h, h}, hs, true);
    for (const char* n : {"bz", "br", "bh"}) register_param(g + "." + n, {1, h}, 0.0, true);
  }
  register_param("fuse.w", {h, 1}, 1.0 / std::sqrt(static_cast<double>(h)), true);
  register_param("fuse.b", {1, 1}, 0.0, true);
  register_param("phon_head.w", {d, 1}, 1.0 / std::sqrt(static_cast<double>(d)), true);
  register_param("phon_head.b", {1, 1}, 0.0, true);
  register_param("text_head.w", {d, 1}, 1.0 / std::sqrt(static_cast<double>(d)), true);
  register_param("text_head.b", {1, 1}, 0.0, true);
}

const TensorPtr& Model::param(const std::string& name) const {
  auto it = index_.find(name);
  check(it != index_.end(), "unknown parameter: " + name);
  return params_[it->second].second;
}

std::vector<std::pair<std::string, TensorPtr>> Model::trainable_parameters() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (const auto& [name, t] : params_)
    if (t->requires_grad) out.emplace_back(name, t);
  return out;
}

void Model::load_values(const std::vector<std::pair<std::string, Tensor>>& values) {
  check(values.size() == params_.size(), "parameter count mismatch: expected " +
                                             std::to_string(params_.size()) + ", found " +
                                             std::to_string(values.size()));
  auto shape_str = [](const std::vector<int64_t>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
  };
  for (const auto& [name, t] : values) {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter in checkpoint: " + name);
    auto& dst = params_[it->second].second;
    check(dst->shape == t.shape, "shape mismatch for " + name + ": expected " +
                                     shape_str(dst->shape) + ", found " + shape_str(t.shape));
    dst->data = t.data;
  }
}

TensorPtr Model::affine(Tape& tape, const TensorPtr& x, const std::string& w_name,
                        const std::string& b_name) const {
  return tape.add_rowvec(tape.matmul(x, param(w_name)), param(b_name));
}

TensorPtr Model::layer_norm_named(Tape& tape, const TensorPtr& x,
                                  const std::string& prefix) const {
  return tape.layer_norm(x, param(prefix + ".g"), param(prefix + ".b"));
}

Model::AttnOut Model::self_attention(Tape& tape, const TensorPtr& x, const std::string& prefix,
                                     int64_t heads) const {
  const int64_t d = cfg_.d;
  const int64_t hd = d / heads;
  auto q = affine(tape, x, prefix + ".wq", prefix + ".bq");
  auto k = affine(tape, x, prefix + ".wk", prefix + ".bk");
  auto v = affine(tape, x, prefix + ".wv", prefix + ".bv");
  std::vector<TensorPtr> contexts, maps;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int64_t h = 0; h < heads; ++h) {
    auto qh = tape.slice_cols(q, h * hd, (h + 1) * hd);
    auto kh = tape.slice_cols(k, h * hd, (h + 1) * hd);
    auto vh = tape.slice_cols(v, h * hd, (h + 1) * hd);
    auto scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt);
    auto probs = tape.softmax_rows(scores);
    maps.push_back(probs);
    contexts.push_back(tape.matmul(probs, vh));
  }
  auto ctx = heads == 1 ? contexts[0] : tape.concat_cols(contexts);
  AttnOut out;
  out.out = affine(tape, ctx, prefix + ".wo", prefix + ".bo");
  out.head_maps = std::move(maps);
  return out;
}

TensorPtr Model::feed_forward(Tape& tape, const TensorPtr& x, const std::string& prefix) const {
  auto h = tape.tanh(affine(tape, x, prefix + ".w1", prefix + ".b1"));
  return affine(tape, h, prefix + ".w2", prefix + ".b2");
}

TensorPtr Model::encoder_stack(Tape& tape, const TensorPtr& x0, const std::string& prefix) const {
  auto h = affine(tape, x0, prefix + ".in.w", prefix + ".in.b");
  for (int64_t l = 0; l < cfg_.enc_layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    h = tape.add(h, tape.dwconv3(layer_norm_named(tape, h, lp + ".conv.ln"),
                                 param(lp + ".conv.k")));
    h = tape.add(h, self_attention(tape, layer_norm_named(tape, h, lp + ".attn.ln"),
                                   lp + ".attn", cfg_.enc_heads)
                        .out);
    h = tape.add(h, feed_forward(tape, layer_norm_named(tape, h, lp + ".ffn.ln"), lp + ".ffn"));
  }
  return affine(tape, h, prefix + ".out.w", prefix + ".out.b");
}

TensorPtr Model::encode_query_audio(Tape& tape, const FeatureMatrix& f) const {
  check(f.t() >= 1, "query features are empty");
  check(f.f() == cfg_.feat_dim, "feature width does not match the configured bins");
  return encoder_stack(tape, stack_frames(f, cfg_.subsample), "query_enc");
}

TensorPtr Model::encode_support_speech(Tape& tape, const FeatureMatrix& f) const {
  check(f.t() >= 1, "support features are empty");
  check(f.f() == cfg_.feat_dim, "feature width does not match the configured bins");
  auto enc = encoder_stack(tape, stack_frames(f, cfg_.subsample), "support_enc");
  return map_to_common(tape, enc, "speech");
}

TensorPtr Model::embed_phonemes(Tape& tape, const std::vector<int64_t>& ids) const {
  check(!ids.empty(), "empty phoneme sequence");
  return map_to_common(tape, tape.embedding(param("phoneme_table"), ids), "phoneme");
}

TensorPtr Model::embed_subwords(Tape& tape, const std::vector<int64_t>& ids) const {
  check(!ids.empty(), "empty subword sequence");
  return map_to_common(tape, tape.embedding(param("subword_table"), ids), "subword");
}

TensorPtr Model::map_to_common(Tape& tape, const TensorPtr& raw, const std::string& which) const {
  check(which == "phoneme" || which == "subword" || which == "speech",
        "unknown mapper: " + which);
  const std::string prefix = which + "_map";
  check(raw->cols() == param(prefix + ".w")->rows(),
        "mapper input width mismatch for " + which);
  return affine(tape, raw, prefix + ".w", prefix + ".b");
}

TensorPtr Model::add_pos_type(Tape& tape, const TensorPtr& e, const std::string& type_code) const {
  check(e->cols() == cfg_.d, "embedding width mismatch in position/type coding");
  auto pos = sinusoidal_positions(e->rows(), cfg_.d);
  return tape.add_rowvec(tape.add(e, pos), param(type_code));
}

std::pair<JointEmbedding, std::vector<AttnMapRef>> Model::attention_module(
    Tape& tape, const std::vector<TensorPtr>& segments, const std::string& prefix, int64_t layers,
    int64_t heads) const {
  JointEmbedding joint;
  for (const auto& s : segments) joint.boundaries.push_back(s->rows());
  auto h = segments.size() == 1 ? segments[0] : tape.concat_rows(segments);
  std::vector<AttnMapRef> maps;
  for (int64_t l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    auto attn = self_attention(tape, layer_norm_named(tape, h, lp + ".attn.ln"), lp + ".attn",
                               heads);
    h = tape.add(h, attn.out);
    for (size_t i = 0; i < attn.head_maps.size(); ++i)
      maps.push_back({static_cast<int32_t>(l), static_cast<int32_t>(i), attn.head_maps[i]});
    h = tape.add(h, feed_forward(tape, layer_norm_named(tape, h, lp + ".ffn.ln"), lp + ".ffn"));
  }
  joint.rows = h;
  return {std::move(joint), std::move(maps)};
}

std::pair<JointEmbedding, std::vector<AttnMapRef>> Model::qtam(Tape& tape, const TensorPtr& eq,
                                                               const TensorPtr& ep,
                                                               const TensorPtr& et) const {
  check(eq != nullptr && ep != nullptr && et != nullptr, "QTAM requires all three segments");
  auto q = add_pos_type(tape, eq, "type.qtam_query");
  auto p = add_pos_type(tape, ep, "type.qtam_phoneme");
  auto t = add_pos_type(tape, et, "type.qtam_text");
  return attention_module(tape, {q, p, t}, "qtam", cfg_.qtam_layers, cfg_.qtam_heads);
}

std::optional<std::pair<JointEmbedding, std::vector<AttnMapRef>>> Model::qaam(
    Tape& tape, const TensorPtr& eq, const std::optional<TensorPtr>& ea) const {
  check(eq != nullptr, "QAAM requires a query embedding");
  if (!ea.has_value()) return std::nullopt;
  auto q = add_pos_type(tape, eq, "type.qaam_query");
  auto a = add_pos_type(tape, *ea, "type.qaam_support");
  return attention_module(tape, {q, a}, "qaam", cfg_.qaam_layers, cfg_.qaam_heads);
}

GruParams Model::gru_params(const std::string& prefix) const {
  GruParams p;
  p.wz = param(prefix + ".wz");
  p.wr = param(prefix + ".wr");
  p.wh = param(prefix + ".wh");
  p.uz = param(prefix + ".uz");
  p.ur = param(prefix + ".ur");
  p.uh = param(prefix + ".uh");
  p.bz = param(prefix + ".bz");
  p.br = param(prefix + ".br");
  p.bh = param(prefix + ".bh");
  return p;
}

TensorPtr Model::utterance_score(Tape& tape, const JointEmbedding& ta,
                                 const std::optional<JointEmbedding>& aa) const {
  check(ta.rows != nullptr, "utterance scoring requires the joint text-audio embedding");
  auto h_t = tape.gru(ta.rows, gru_params("gru_t"));
  TensorPtr h_sum = h_t;
  if (aa.has_value()) {
    auto h_a = tape.gru(aa->rows, gru_params("gru_a"));
    h_sum = tape.add(h_t, h_a);
  }
  return tape.sigmoid(affine(tape, h_sum, "fuse.w", "fuse.b"));
}

std::pair<TensorPtr, TensorPtr> Model::unit_scores(Tape& tape, const JointEmbedding& ta) const {
  check(ta.boundaries.size() == 3, "unit scores need query/phoneme/text boundaries");
  const int64_t tq = ta.boundaries[0], tp = ta.boundaries[1], tt = ta.boundaries[2];
  check(ta.rows->rows() == tq + tp + tt, "joint embedding rows do not match its boundaries");
  auto phon_rows = tape.slice_rows(ta.rows, tq, tq + tp);
  auto text_rows = tape.slice_rows(ta.rows, tq + tp, tq + tp + tt);
  auto p_phon = tape.sigmoid(affine(tape, phon_rows, "phon_head.w", "phon_head.b"));
  auto p_text = tape.sigmoid(affine(tape, text_rows, "text_head.w", "text_head.b"));
  return {p_phon, p_text};
}

MatchResult Model::score_pair(Tape& tape, const FeatureMatrix& query,
                              const Enrollment& enr) const {
  check(!enr.phoneme_ids.empty() && !enr.subword_ids.empty(),
        "enrollment must carry phonemes and subwords");
  MatchResult r;
  auto eq = encode_query_audio(tape, query);
  auto ep = embed_phonemes(tape, enr.phoneme_ids);
  auto et = embed_subwords(tape, enr.subword_ids);
  auto [ta, ta_maps] = qtam(tape, eq, ep, et);
  r.joint_ta = ta;
  r.qtam_maps = std::move(ta_maps);

  std::optional<TensorPtr> ea;
  if (!enr.templates.empty()) {
    std::vector<TensorPtr> encoded;
    for (const auto& f : enr.templates) encoded.push_back(encode_support_speech(tape, f));
    ea = encoded.size() == 1 ? encoded[0] : tape.concat_rows(encoded);
  }
  auto aa = qaam(tape, eq, ea);
  if (aa.has_value()) {
    r.joint_aa = aa->first;
    r.qaam_maps = std::move(aa->second);
  }

  r.p_utt = utterance_score(tape, r.joint_ta, r.joint_aa);
  auto [p_phon, p_text] = unit_scores(tape, r.joint_ta);
  r.p_phon = p_phon;
  r.p_text = p_text;
  return r;
}

}  // namespace mmkws
