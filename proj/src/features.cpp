#include "mmkws/features.hpp"

#include "mmkws/error.hpp"
#include "mmkws/rng.hpp"

namespace mmkws {

std::vector<double> phoneme_prototype(int64_t phoneme_id, const RenderProfile& profile) {
  check(phoneme_id >= 0, "negative phoneme id");
  check(profile.feat_dim >= 1, "feature dimension must be positive");
  Rng rng(mix_seed(profile.corpus_seed, "phoneme-prototype", static_cast<uint64_t>(phoneme_id)));
  std::vector<double> proto(static_cast<size_t>(profile.feat_dim));
  for (auto& v : proto) v = rng.normal();
  return proto;
}

FeatureMatrix render_synthetic_speech(const std::vector<int64_t>& phonemes, uint64_t seed,
                                      const RenderProfile& profile) {
  check(!phonemes.empty(), "cannot render an empty phoneme sequence");
  check(profile.min_duration >= 1 && profile.max_duration >= profile.min_duration,
        "invalid duration range");
  Rng rng(mix_seed(seed, "render"));
  std::vector<int64_t> durations(phonemes.size());
  int64_t total = 0;
  for (size_t i = 0; i < phonemes.size(); ++i) {
    durations[i] = rng.uniform_int(profile.min_duration, profile.max_duration);
    total += durations[i];
  }
  FeatureMatrix out;
  out.frames.shape = {total, profile.feat_dim};
  out.frames.data.assign(static_cast<size_t>(total * profile.feat_dim), 0.0);
  int64_t row = 0;
  for (size_t i = 0; i < phonemes.size(); ++i) {
    const auto proto = phoneme_prototype(phonemes[i], profile);
    for (int64_t r = 0; r < durations[i]; ++r, ++row) {
      double* dst = out.frames.data.data() + row * profile.feat_dim;
      for (int64_t j = 0; j < profile.feat_dim; ++j) {
        const double noise = profile.noise_level == 0.0 ? 0.0 : profile.noise_level * rng.normal();
        dst[j] = proto[static_cast<size_t>(j)] + noise;
      }
    }
  }
  return out;
}

TensorPtr stack_frames(const FeatureMatrix& f, int64_t subsample) {
  check(subsample >= 1, "subsample factor must be at least 1");
  const int64_t t = f.t(), fd = f.f();
  check(t >= 1, "feature matrix has no frames");
  const int64_t rows = (t + subsample - 1) / subsample;
  auto out = tensor({rows, fd * subsample}, /*requires_grad=*/false);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t s = 0; s < subsample; ++s) {
      const int64_t src = r * subsample + s;
      if (src >= t) break;  // tail rows keep their zero padding
      for (int64_t j = 0; j < fd; ++j)
        out->data[static_cast<size_t>(r * fd * subsample + s * fd + j)] =
            f.frames.data[static_cast<size_t>(src * fd + j)];
    }
  }
  return out;
}

}  // namespace mmkws
