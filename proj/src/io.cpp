#include "mmkws/io.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mmkws/error.hpp"
#include "mmkws/rng.hpp"

namespace mmkws::io {

namespace {

void put_u8(std::string& b, uint8_t v) { b.push_back(static_cast<char>(v)); }

void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& b, int32_t v) { put_u32(b, static_cast<uint32_t>(v)); }

void put_f64(std::string& b, double v) {
  const uint64_t u = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

// Cursor over a loaded file with bounds-checked reads.
struct Reader {
  const std::string& buf;
  size_t pos = 0;
  std::string context;

  void need(size_t n) const {
    check(pos + n <= buf.size(), "truncated " + context + " file");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), "cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  check(out.good(), "write failed: " + path);
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  check(!ec, "cannot create directory: " + path);
}

void write_feat(const std::string& path, const FeatureMatrix& f) {
  check(f.t() >= 1 && f.f() >= 1, "feature matrix must be nonempty");
  std::string b;
  b += "FEAT";
  put_u8(b, 1);
  put_i32(b, static_cast<int32_t>(f.t()));
  put_i32(b, static_cast<int32_t>(f.f()));
  put_f64(b, f.frame_rate_hz);
  for (double v : f.frames.data) put_f64(b, v);
  write_text_file(path, b);
}

FeatureMatrix read_feat(const std::string& path) {
  const std::string buf = read_text_file(path);
  Reader r{buf, 0, "feature"};
  check(r.bytes(4) == "FEAT", "bad feature header in " + path);
  check(r.u8() == 1, "unsupported feature format version in " + path);
  const int32_t t = r.i32(), f = r.i32();
  check(t >= 1 && f >= 1, "bad feature dimensions in " + path);
  FeatureMatrix m;
  m.frame_rate_hz = r.f64();
  m.frames.shape = {t, f};
  m.frames.data.resize(static_cast<size_t>(t) * static_cast<size_t>(f));
  for (auto& v : m.frames.data) v = r.f64();
  check(r.pos == buf.size(), "trailing bytes in feature file " + path);
  return m;
}

void write_attn(const std::string& path, const std::vector<AttnBlock>& blocks) {
  std::string b;
  b += "ATTN";
  put_u8(b, 1);
  put_i32(b, static_cast<int32_t>(blocks.size()));
  for (const auto& blk : blocks) {
    check(blk.map.rows() == blk.map.cols(), "attention map must be square");
    put_i32(b, blk.layer);
    put_i32(b, blk.head);
    put_i32(b, static_cast<int32_t>(blk.map.rows()));
    for (double v : blk.map.data) put_f64(b, v);
  }
  write_text_file(path, b);
}

std::vector<AttnBlock> read_attn(const std::string& path) {
  const std::string buf = read_text_file(path);
  Reader r{buf, 0, "attention"};
  check(r.bytes(4) == "ATTN", "bad attention header in " + path);
  check(r.u8() == 1, "unsupported attention format version in " + path);
  const int32_t n = r.i32();
  check(n >= 0, "bad attention block count in " + path);
  std::vector<AttnBlock> blocks(static_cast<size_t>(n));
  for (auto& blk : blocks) {
    blk.layer = r.i32();
    blk.head = r.i32();
    const int32_t l = r.i32();
    check(l >= 1, "bad attention map size in " + path);
    blk.map.shape = {l, l};
    blk.map.data.resize(static_cast<size_t>(l) * static_cast<size_t>(l));
    for (auto& v : blk.map.data) v = r.f64();
  }
  check(r.pos == buf.size(), "trailing bytes in attention file " + path);
  return blocks;
}

void save_checkpoint(const std::string& path, const json& config,
                     const std::vector<std::pair<std::string, TensorPtr>>& tensors) {
  json manifest;
  manifest["format"] = 1;
  manifest["config"] = config;
  manifest["config_hash"] = config_hash(config);
  json tlist = json::array();
  for (const auto& [name, t] : tensors) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t->shape;
    tlist.push_back(entry);
  }
  manifest["tensors"] = tlist;
  const std::string mdump = manifest.dump();

  std::string b;
  b += "MMKW";
  put_u8(b, 1);
  put_u32(b, static_cast<uint32_t>(mdump.size()));
  b += mdump;
  for (const auto& [name, t] : tensors)
    for (double v : t->data) put_f64(b, v);
  write_text_file(path, b);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_text_file(path);
  Reader r{buf, 0, "checkpoint"};
  check(r.bytes(4) == "MMKW", "bad checkpoint header in " + path);
  check(r.u8() == 1, "unsupported checkpoint format version in " + path);
  const uint32_t mlen = r.u32();
  const std::string mdump = r.bytes(mlen);
  json manifest;
  try {
    manifest = json::parse(mdump);
  } catch (const std::exception& e) {
    fail("unparsable checkpoint manifest in " + path + ": " + e.what());
  }
  check(manifest.contains("config") && manifest.contains("tensors"),
        "checkpoint manifest missing fields in " + path);
  Checkpoint ck;
  ck.config = manifest["config"];
  for (const auto& entry : manifest["tensors"]) {
    Tensor t;
    t.shape = entry["shape"].get<std::vector<int64_t>>();
    t.data.resize(static_cast<size_t>(numel_of(t.shape)));
    for (auto& v : t.data) v = r.f64();
    ck.tensors.emplace_back(entry["name"].get<std::string>(), std::move(t));
  }
  check(r.pos == buf.size(), "trailing bytes in checkpoint file " + path);
  return ck;
}

std::string config_hash(const json& config) {
  const uint64_t h = hash_str(config.dump());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace mmkws::io
