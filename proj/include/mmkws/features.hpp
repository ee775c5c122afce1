#pragma once

#include <cstdint>
#include <vector>

#include "mmkws/tensor.hpp"

namespace mmkws {

// Framewise acoustic features: T x F matrix plus the frame rate.
struct FeatureMatrix {
  Tensor frames;               // shape {T, F}
  double frame_rate_hz = 100.0;

  int64_t t() const { return frames.rows(); }
  int64_t f() const { return frames.cols(); }
};

// How synthetic speech is rendered from a phoneme sequence. `corpus_seed`
// fixes the per-phoneme spectral prototypes; the per-rendering seed drives
// durations and additive noise.
struct RenderProfile {
  int64_t feat_dim = 40;
  uint64_t corpus_seed = 1;
  double noise_level = 0.1;
  int64_t min_duration = 3;  // frames per phoneme, inclusive
  int64_t max_duration = 8;
};

// The fixed F-dim spectral prototype for one phoneme id.
std::vector<double> phoneme_prototype(int64_t phoneme_id, const RenderProfile& profile);

// Deterministic stand-in for a TTS system: each phoneme becomes a run of
// duration-sampled frames around its prototype, plus seeded noise.
FeatureMatrix render_synthetic_speech(const std::vector<int64_t>& phonemes, uint64_t seed,
                                      const RenderProfile& profile);

// Stacks `subsample` consecutive frames into each output row (zero-padded at
// the tail), giving ceil(T/subsample) rows of width F*subsample. Pure input
// preparation; the result does not require gradients.
TensorPtr stack_frames(const FeatureMatrix& f, int64_t subsample);

}  // namespace mmkws
