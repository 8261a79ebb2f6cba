#include "fsr/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fsr/errors.hpp"

namespace fsr {

FeatureMap Model::reconstruct(const FeatureMap& features, AttentionTrace* trace) const {
  const TokenSequence tokens = tokenize(features, proj);
  const TokenSequence with_pos = add_positions(tokens, pos_table);
  const TokenSequence restored = restore(with_pos, params, trace);
  FeatureMap out = detokenize(restored, proj);
  out.origin = features.origin;
  return out;
}

Model init_model(const RunConfig& config, int feature_channels) {
  config.validate();
  Model model;
  model.config = config;
  uint64_t s1 = config.seed, s2 = config.seed;
  (void)detail::splitmix64(s1);
  const uint64_t proj_seed = detail::splitmix64(s1);
  (void)detail::splitmix64(s2);
  (void)detail::splitmix64(s2);
  const uint64_t net_seed = detail::splitmix64(s2);

  Rng proj_rng(proj_seed);
  model.proj =
      init_patch_projection(config.patch, feature_channels, config.width, proj_rng);
  model.params =
      init_params(config.depth, config.width, config.heads, config.mlp_ratio, net_seed);
  model.pos_table = positional_table<float>(model.sequence_length(), config.width);
  return model;
}

namespace {

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {}
  void bytes(const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n));
  }
  void u16(uint16_t v) { bytes(&v, 2); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(uint32_t(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const float* data, const std::vector<uint32_t>& dims) {
    str(name);
    u32(uint32_t(dims.size()));
    size_t n = 1;
    for (uint32_t d : dims) {
      u32(d);
      n *= d;
    }
    bytes(data, n * sizeof(float));
  }
};

struct ReaderCk {
  std::ifstream in;
  std::string path;
  explicit ReaderCk(const std::string& p) : in(p, std::ios::binary), path(p) {}
  void bytes(void* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(n));
    if (!in) throw DataError("checkpoint: truncated file " + path);
  }
  uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
  std::string str() {
    const uint32_t n = u32();
    if (n > (1u << 24)) throw DataError("checkpoint: oversized string in " + path);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  namespace fs = std::filesystem;
  if (fs::path(path).has_parent_path())
    fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    Writer w(tmp);
    if (!w.out) throw DataError("checkpoint: cannot write " + tmp);
    w.bytes("FSR1", 4);
    w.u16(1);
    w.str(ckpt.model.config.serialize());
    w.u64(ckpt.epoch);
    w.u64(ckpt.step);
    for (uint64_t s : ckpt.rng_state) w.u64(s);
    w.out.put(ckpt.has_optimizer ? 1 : 0);
    w.u64(ckpt.optimizer.t);

    // Count tensors first.
    uint32_t count = 0;
    Model& model = const_cast<Model&>(ckpt.model);
    visit_model_tensors(model, [&](const std::string&, float*, size_t) { ++count; });
    if (ckpt.has_optimizer) count *= 3;
    w.u32(count);

    visit_model_tensors(model, [&](const std::string& name, float* data, size_t n) {
      w.tensor(name, data, {uint32_t(n)});
    });
    if (ckpt.has_optimizer) {
      visit_model_tensors(model, [&](const std::string& name, float*, size_t n) {
        const auto it = ckpt.optimizer.m.find(name);
        if (it == ckpt.optimizer.m.end() || it->second.size() != n)
          throw ConfigError("checkpoint: optimizer state missing for " + name);
        w.tensor("opt.m." + name, it->second.data(), {uint32_t(n)});
      });
      visit_model_tensors(model, [&](const std::string& name, float*, size_t n) {
        const auto it = ckpt.optimizer.v.find(name);
        if (it == ckpt.optimizer.v.end() || it->second.size() != n)
          throw ConfigError("checkpoint: optimizer state missing for " + name);
        w.tensor("opt.v." + name, it->second.data(), {uint32_t(n)});
      });
    }
    if (!w.out) throw DataError("checkpoint: write failed " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  ReaderCk r(path);
  if (!r.in) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "FSR1", 4) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  if (r.u16() != 1) throw DataError("checkpoint: unsupported version in " + path);

  Checkpoint ckpt;
  const std::string echo = r.str();
  ckpt.model.config = RunConfig::from_string(echo);
  ckpt.epoch = r.u64();
  ckpt.step = r.u64();
  for (auto& s : ckpt.rng_state) s = r.u64();
  char has_opt = 0;
  r.bytes(&has_opt, 1);
  ckpt.has_optimizer = has_opt != 0;
  ckpt.optimizer.t = r.u64();
  const uint32_t count = r.u32();

  // Raw named tensors.
  std::map<std::string, std::vector<float>> tensors;
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const uint32_t rank = r.u32();
    if (rank > 4) throw DataError("checkpoint: bad tensor rank in " + path);
    size_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) n *= r.u32();
    if (n > (size_t(1) << 30)) throw DataError("checkpoint: oversized tensor in " + path);
    std::vector<float> data(n, 0.f);
    r.bytes(data.data(), n * sizeof(float));
    tensors.emplace(name, std::move(data));
  }

  // Rebuild the architecture from the echo, then shape-check every tensor.
  const RunConfig& cfg = ckpt.model.config;
  // Feature channel count is recovered from the stored embed weight shape.
  const auto embed_it = tensors.find("proj.embed_w");
  if (embed_it == tensors.end())
    throw DataError("checkpoint: missing proj.embed_w in " + path);
  const size_t block = embed_it->second.size() / size_t(cfg.width);
  if (block * size_t(cfg.width) != embed_it->second.size() ||
      block % size_t(cfg.patch * cfg.patch) != 0)
    throw ConfigError("checkpoint/config shape mismatch: embed weight in " + path);
  const int channels = int(block / size_t(cfg.patch * cfg.patch));

  ckpt.model = init_model(cfg, channels);
  bool mismatch = false;
  std::string bad_name;
  visit_model_tensors(ckpt.model, [&](const std::string& name, float* data, size_t n) {
    const auto it = tensors.find(name);
    if (it == tensors.end() || it->second.size() != n) {
      mismatch = true;
      if (bad_name.empty()) bad_name = name;
      return;
    }
    std::copy(it->second.begin(), it->second.end(), data);
  });
  if (mismatch)
    throw ConfigError("checkpoint/config shape mismatch: tensor " + bad_name + " in " + path);

  if (ckpt.has_optimizer) {
    visit_model_tensors(ckpt.model, [&](const std::string& name, float*, size_t n) {
      const auto mit = tensors.find("opt.m." + name);
      const auto vit = tensors.find("opt.v." + name);
      if (mit == tensors.end() || vit == tensors.end() || mit->second.size() != n ||
          vit->second.size() != n)
        throw ConfigError("checkpoint: incomplete optimizer state in " + path);
      ckpt.optimizer.m[name] = mit->second;
      ckpt.optimizer.v[name] = vit->second;
    });
  }
  return ckpt;
}

}  // namespace fsr
