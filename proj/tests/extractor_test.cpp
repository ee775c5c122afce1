#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmkws/error.hpp"
#include "mmkws/model.hpp"
#include "mmkws/rng.hpp"
#include "mmkws/tape.hpp"

#include "testutil.hpp"

using namespace mmkws;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d = 4;
  c.feat_dim = 6;
  c.subsample = 2;
  c.enc_layers = 1;
  c.enc_heads = 1;
  c.d_phon = 3;
  c.d_text = 3;
  c.qtam_layers = 1;
  c.qtam_heads = 1;
  c.qaam_layers = 1;
  c.qaam_heads = 1;
  c.gru_hidden = 4;
  c.n_phonemes = 6;
  c.n_subwords = 8;
  c.seed = 11;
  return c;
}

FeatureMatrix random_features(int64_t t, int64_t f, Rng& rng) {
  FeatureMatrix m;
  m.frames = *testutil::random_tensor({t, f}, rng, /*requires_grad=*/false);
  return m;
}

}  // namespace

TEST_CASE("stacking frames pads the tail with zeros") {
  FeatureMatrix f;
  f.frames = *tensor_of({3, 2}, {1, 2, 3, 4, 5, 6}, false);
  auto s = stack_frames(f, 2);
  REQUIRE(s->shape == std::vector<int64_t>({2, 4}));
  CHECK(!s->requires_grad);
  CHECK(s->data == std::vector<double>({1, 2, 3, 4, 5, 6, 0, 0}));

  auto s1 = stack_frames(f, 1);  // no-op stacking keeps the frames
  REQUIRE(s1->shape == std::vector<int64_t>({3, 2}));
  CHECK(s1->data == f.frames.data);
}

TEST_CASE("query encoder output length is ceil(T / subsample)") {
  const Model model(tiny_config());
  Rng rng(3);
  for (int64_t t : {1, 2, 3, 4, 5, 9}) {
    Tape tape;
    auto f = random_features(t, 6, rng);
    auto e = model.encode_query_audio(tape, f);
    CHECK(e->rows() == (t + 1) / 2);
    CHECK(e->cols() == 4);
    CHECK(e->all_finite());
  }
}

TEST_CASE("zero features encode to exactly zero at initialization") {
  // Every bias starts at zero, layer norms shift to zero mean, and the
  // attention/conv/FFN paths are all linear-or-odd around zero, so an
  // all-zero input must propagate to an all-zero encoding.
  const Model model(tiny_config());
  FeatureMatrix f;
  f.frames = *tensor({5, 6}, false);
  Tape tape;
  auto e = model.encode_query_audio(tape, f);
  for (double v : e->data) CHECK(v == 0.0);
}

TEST_CASE("token embeddings do not depend on their neighbors") {
  const Model model(tiny_config());
  Tape tape;
  auto full = model.embed_phonemes(tape, {1, 2, 3});
  auto solo = model.embed_phonemes(tape, {2});
  for (int64_t c = 0; c < full->cols(); ++c) CHECK(full->at(1, c) == solo->at(0, c));

  auto full_sub = model.embed_subwords(tape, {4, 5});
  auto solo_sub = model.embed_subwords(tape, {5});
  for (int64_t c = 0; c < full_sub->cols(); ++c) CHECK(full_sub->at(1, c) == solo_sub->at(0, c));
}

TEST_CASE("embedding branch applies table row, mapper weight, then bias") {
  const Model model(tiny_config());
  const auto& table = model.param("phoneme_table");
  const auto& w = model.param("phoneme_map.w");
  const auto& b = model.param("phoneme_map.b");

  const int64_t id = 3;
  Tape tape;
  auto e = model.embed_phonemes(tape, {id});
  for (int64_t c = 0; c < e->cols(); ++c) {
    double want = b->at(0, c);
    for (int64_t k = 0; k < table->cols(); ++k) want += table->at(id, k) * w->at(k, c);
    CHECK(e->at(0, c) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("speech mapper is the common-space affine map") {
  const Model model(tiny_config());
  Rng rng(5);
  auto raw = testutil::random_tensor({2, 4}, rng, false);
  Tape tape;
  auto mapped = model.map_to_common(tape, raw, "speech");
  const auto& w = model.param("speech_map.w");
  const auto& b = model.param("speech_map.b");
  for (int64_t r = 0; r < 2; ++r) {
    for (int64_t c = 0; c < 4; ++c) {
      double want = b->at(0, c);
      for (int64_t k = 0; k < 4; ++k) want += raw->at(r, k) * w->at(k, c);
      CHECK(mapped->at(r, c) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(model.map_to_common(tape, raw, "acoustic"), Error);
}

TEST_CASE("support encoder is frozen but its mapper still trains") {
  const Model model(tiny_config());
  REQUIRE(model.config().freeze_support_speech);
  Rng rng(7);
  Tape tape;
  auto f = random_features(6, 6, rng);
  auto enc = model.encode_support_speech(tape, f);
  auto loss = tape.mean_all(enc);
  const GradTable gt = tape.backward(loss);

  CHECK(gt.find(model.param("support_enc.in.w")) == nullptr);
  CHECK(gt.find(model.param("support_enc.l0.attn.wq")) == nullptr);
  const auto* g = gt.find(model.param("speech_map.w"));
  REQUIRE(g != nullptr);
  double mag = 0;
  for (double v : *g) mag += std::abs(v);
  CHECK(mag > 0.0);

  // The frozen parameters are excluded from the trainable list entirely.
  for (const auto& [name, p] : model.trainable_parameters()) {
    CHECK(name.rfind("support_enc.", 0) != 0);
  }
}

TEST_CASE("unfreezing the support encoder makes it trainable") {
  ModelConfig cfg = tiny_config();
  cfg.freeze_support_speech = false;
  const Model model(cfg);
  Rng rng(7);
  Tape tape;
  auto enc = model.encode_support_speech(tape, random_features(6, 6, rng));
  const GradTable gt = tape.backward(tape.mean_all(enc));
  CHECK(gt.find(model.param("support_enc.in.w")) != nullptr);
}

TEST_CASE("query and support encoders are distinct parameterizations") {
  const Model model(tiny_config());
  Rng rng(9);
  auto f = random_features(4, 6, rng);
  Tape tape;
  auto q = model.encode_query_audio(tape, f);
  auto s = model.encode_support_speech(tape, f);
  bool any_diff = false;
  for (size_t i = 0; i < q->data.size(); ++i) any_diff |= (q->data[i] != s->data[i]);
  CHECK(any_diff);
}

TEST_CASE("malformed extractor inputs are rejected") {
  const Model model(tiny_config());
  Rng rng(13);
  Tape tape;
  auto wrong_width = random_features(4, 5, rng);
  CHECK_THROWS_AS(model.encode_query_audio(tape, wrong_width), Error);
  CHECK_THROWS_AS(model.encode_support_speech(tape, wrong_width), Error);
  CHECK_THROWS_AS(model.embed_phonemes(tape, {}), Error);
  CHECK_THROWS_AS(model.embed_subwords(tape, {}), Error);
}

TEST_CASE("encoder gradients match finite differences end to end") {
  Rng rng(17);
  for (int seed = 0; seed < 3; ++seed) {
    ModelConfig cfg = tiny_config();
    cfg.seed = static_cast<uint64_t>(100 + seed);
    const Model model(cfg);
    Tape tape;
    auto f = random_features(5, 6, rng);
    auto e = model.encode_query_audio(tape, f);
    auto loss = tape.mean_all(e);
    std::vector<TensorPtr> leaves;
    for (const auto& [name, p] : model.trainable_parameters()) {
      if (name.rfind("query_enc.", 0) == 0) leaves.push_back(p);
    }
    CHECK(testutil::max_grad_rel_err(tape, loss, leaves) < 1e-3);
  }
}
