#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmkws/features.hpp"
#include "mmkws/tensor.hpp"

namespace mmkws::io {

using json = nlohmann::json;

// ---- plain files ----
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

// ---- feature container ----
// magic "FEAT", version u8, T i32, F i32, frame_rate f64, then T*F f64,
// everything little-endian.
void write_feat(const std::string& path, const FeatureMatrix& f);
FeatureMatrix read_feat(const std::string& path);

// ---- attention-map container ----
// magic "ATTN", version u8, n_blocks i32, then per block: layer i32, head
// i32, L i32, L*L f64.
struct AttnBlock {
  int32_t layer = 0;
  int32_t head = 0;
  Tensor map;  // L x L
};
void write_attn(const std::string& path, const std::vector<AttnBlock>& blocks);
std::vector<AttnBlock> read_attn(const std::string& path);

// ---- checkpoint container ----
// magic "MMKW", version u8, manifest length u32, manifest JSON (UTF-8, canonical
// key order), then each tensor's values as f64 in manifest order.
struct Checkpoint {
  json config;
  std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order
};
void save_checkpoint(const std::string& path, const json& config,
                     const std::vector<std::pair<std::string, TensorPtr>>& tensors);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the canonical JSON dump, as fixed-width hex.
std::string config_hash(const json& config);

}  // namespace mmkws::io
