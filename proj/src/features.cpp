#include "fsr/features.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsr/errors.hpp"
#include "fsr/interp.hpp"
#include "fsr/kernels.hpp"
#include "fsr/rng.hpp"

namespace fsr {

namespace {

struct Activation {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;  // CHW
  float* plane(int ch) { return v.data() + size_t(ch) * h * w; }
  const float* plane(int ch) const { return v.data() + size_t(ch) * h * w; }
};

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// im2col + gemm; weights are [cout, cin*kh*kw] row-major.
Activation conv2d(const Activation& in, const std::vector<float>& weights,
                  const std::vector<float>& bias, int cout, int kh, int kw, int stride,
                  int pad) {
  const int ho = conv_out(in.h, kh, stride, pad);
  const int wo = conv_out(in.w, kw, stride, pad);
  const int patch = in.c * kh * kw;

  std::vector<float> cols(size_t(ho) * wo * patch, 0.f);
  for (int y = 0; y < ho; ++y) {
    for (int x = 0; x < wo; ++x) {
      float* dst = cols.data() + (size_t(y) * wo + x) * patch;
      int idx = 0;
      for (int c = 0; c < in.c; ++c) {
        const float* src = in.plane(c);
        for (int dy = 0; dy < kh; ++dy) {
          const int sy = y * stride + dy - pad;
          for (int dx = 0; dx < kw; ++dx, ++idx) {
            const int sx = x * stride + dx - pad;
            if (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w)
              dst[idx] = src[size_t(sy) * in.w + sx];
          }
        }
      }
    }
  }

  std::vector<float> prod(size_t(ho) * wo * cout);
  kern::gemm_nt(cols.data(), weights.data(), prod.data(), ho * wo, cout, patch);

  Activation out;
  out.c = cout;
  out.h = ho;
  out.w = wo;
  out.v.assign(size_t(cout) * ho * wo, 0.f);
  for (int c = 0; c < cout; ++c) {
    float* dst = out.plane(c);
    const float b = bias.empty() ? 0.f : bias[size_t(c)];
    for (int i = 0; i < ho * wo; ++i) dst[i] = prod[size_t(i) * cout + c] + b;
  }
  return out;
}

Activation maxpool(const Activation& in, int k, int stride, int pad) {
  const int ho = conv_out(in.h, k, stride, pad);
  const int wo = conv_out(in.w, k, stride, pad);
  Activation out;
  out.c = in.c;
  out.h = ho;
  out.w = wo;
  out.v.assign(size_t(in.c) * ho * wo, 0.f);
  for (int c = 0; c < in.c; ++c) {
    const float* src = in.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        float best = -std::numeric_limits<float>::infinity();
        for (int dy = 0; dy < k; ++dy) {
          const int sy = y * stride + dy - pad;
          if (sy < 0 || sy >= in.h) continue;
          for (int dx = 0; dx < k; ++dx) {
            const int sx = x * stride + dx - pad;
            if (sx < 0 || sx >= in.w) continue;
            best = std::max(best, src[size_t(sy) * in.w + sx]);
          }
        }
        dst[size_t(y) * wo + x] = best;
      }
  }
  return out;
}

FeatureMap to_hwc(const Activation& act) {
  FeatureMap map(act.h, act.w, act.c);
  for (int c = 0; c < act.c; ++c) {
    const float* src = act.plane(c);
    for (int y = 0; y < act.h; ++y)
      for (int x = 0; x < act.w; ++x) map.at(y, x)[c] = src[size_t(y) * act.w + x];
  }
  return map;
}

Activation image_to_activation(const ImageTensor& image) {
  Activation act;
  act.c = image.c;
  act.h = image.h;
  act.w = image.w;
  act.v = image.v;
  return act;
}

// ---------------------------------------------------------------------------
// Synthetic backbone: one seeded 3x3 conv + tanh per stage.
// ---------------------------------------------------------------------------

class SyntheticBackbone final : public FeatureExtractor {
 public:
  SyntheticBackbone(uint64_t seed, const std::vector<SyntheticStageSpec>& spec) {
    if (spec.empty()) throw ConfigError("synthetic backbone needs at least one stage");
    std::ostringstream desc;
    desc << "synthetic:seed=" << seed << ":stages=";
    int prev_stride = 1;
    int prev_channels = 3;
    Rng rng(seed);
    for (size_t i = 0; i < spec.size(); ++i) {
      const auto& s = spec[i];
      if (s.channels <= 0 || s.stride <= 0)
        throw ConfigError("synthetic backbone: channels and stride must be positive");
      if (s.stride % prev_stride != 0 || s.stride < prev_stride)
        throw ConfigError("synthetic backbone: strides must be non-decreasing multiples");
      Stage st;
      st.stride = s.stride / prev_stride;
      st.cin = prev_channels;
      st.cout = s.channels;
      const int fan_in = st.cin * 9;
      const float scale = 1.5f / std::sqrt(float(fan_in));
      st.weights.resize(size_t(st.cout) * fan_in);
      for (auto& w : st.weights) w = float(rng.normal()) * scale;
      st.bias.resize(size_t(st.cout));
      for (auto& b : st.bias) b = 0.1f * float(rng.normal());
      stages_impl_.push_back(std::move(st));

      stages_.push_back({s.channels, s.stride});
      desc << (i ? "," : "") << s.channels << "x" << s.stride;
      prev_stride = s.stride;
      prev_channels = s.channels;
    }
    descriptor_ = desc.str();
  }

 protected:
  std::vector<FeatureMap> run_all_stages(const ImageTensor& image) const override {
    std::vector<FeatureMap> out;
    Activation act = image_to_activation(image);
    for (const auto& st : stages_impl_) {
      act = conv2d(act, st.weights, st.bias, st.cout, 3, 3, st.stride, 1);
      for (auto& x : act.v) x = std::tanh(x);
      out.push_back(to_hwc(act));
    }
    return out;
  }

 private:
  struct Stage {
    int stride = 1, cin = 0, cout = 0;
    std::vector<float> weights, bias;
  };
  std::vector<Stage> stages_impl_;
};

// ---------------------------------------------------------------------------
// Weights-file backbone: executes a per-stage op list from an FSRW container.
// ---------------------------------------------------------------------------

struct ConvOp {
  int kh = 0, kw = 0, stride = 1, pad = 0, cin = 0, cout = 0;
  std::vector<float> weights, bias;
};

struct Op {
  enum Kind : uint8_t { kConv = 0, kRelu = 1, kMaxPool = 2, kResidualPush = 3, kResidualAdd = 4 };
  Kind kind = kRelu;
  ConvOp conv;          // kConv, or projection for kResidualPush
  bool has_proj = false;  // kResidualPush only
  int pool_k = 0, pool_stride = 0, pool_pad = 0;
};

struct WeightsProgram {
  std::string descriptor;
  std::vector<StageSpec> stage_meta;
  std::vector<std::vector<Op>> stage_ops;
};

struct Reader {
  std::istream& in;
  std::string path;

  void bytes(void* dst, size_t n) {
    in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (!in) throw DataError("parse error: " + path + ": truncated file");
  }
  uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
  uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  std::string str() {
    const uint32_t n = u32();
    if (n > (1u << 20)) throw DataError("parse error: " + path + ": oversized string");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void floats(std::vector<float>& v, size_t n) {
    v.resize(n);
    bytes(v.data(), n * sizeof(float));
  }
};

ConvOp read_conv(Reader& r) {
  ConvOp c;
  c.kh = r.u8();
  c.kw = r.u8();
  c.stride = r.u8();
  c.pad = r.u8();
  c.cin = int(r.u32());
  c.cout = int(r.u32());
  if (c.kh <= 0 || c.kw <= 0 || c.stride <= 0 || c.cin <= 0 || c.cout <= 0 ||
      c.cout > (1 << 14) || c.cin > (1 << 14))
    throw DataError("parse error: " + r.path + ": bad conv header");
  r.floats(c.weights, size_t(c.cout) * c.cin * c.kh * c.kw);
  r.floats(c.bias, size_t(c.cout));
  return c;
}

class WeightsBackbone final : public FeatureExtractor {
 public:
  explicit WeightsBackbone(WeightsProgram prog) : prog_(std::move(prog)) {
    descriptor_ = prog_.descriptor;
    stages_ = prog_.stage_meta;
  }

 protected:
  std::vector<FeatureMap> run_all_stages(const ImageTensor& image) const override {
    std::vector<FeatureMap> out;
    Activation act = image_to_activation(image);
    for (size_t s = 0; s < prog_.stage_ops.size(); ++s) {
      std::vector<Activation> saved;
      for (const auto& op : prog_.stage_ops[s]) {
        switch (op.kind) {
          case Op::kConv:
            act = conv2d(act, op.conv.weights, op.conv.bias, op.conv.cout, op.conv.kh,
                         op.conv.kw, op.conv.stride, op.conv.pad);
            break;
          case Op::kRelu:
            for (auto& x : act.v) x = std::max(0.f, x);
            break;
          case Op::kMaxPool:
            act = maxpool(act, op.pool_k, op.pool_stride, op.pool_pad);
            break;
          case Op::kResidualPush: {
            Activation branch = act;
            if (op.has_proj)
              branch = conv2d(branch, op.conv.weights, op.conv.bias, op.conv.cout,
                              op.conv.kh, op.conv.kw, op.conv.stride, op.conv.pad);
            saved.push_back(std::move(branch));
            break;
          }
          case Op::kResidualAdd: {
            if (saved.empty())
              throw DataError("weights backbone: residual add without push");
            const Activation& skip = saved.back();
            if (skip.c != act.c || skip.h != act.h || skip.w != act.w)
              throw DataError("weights backbone: residual shape mismatch");
            kern::vadd(act.v.data(), skip.v.data(), act.v.data(), int(act.v.size()));
            saved.pop_back();
            break;
          }
        }
      }
      if (act.c != prog_.stage_meta[s].channels)
        throw DataError("weights backbone: stage " + std::to_string(s + 1) +
                        " emitted " + std::to_string(act.c) + " channels, header says " +
                        std::to_string(prog_.stage_meta[s].channels));
      out.push_back(to_hwc(act));
    }
    return out;
  }

 private:
  WeightsProgram prog_;
};

}  // namespace

std::vector<FeatureMap> FeatureExtractor::extract_stages(
    const ImageTensor& image, const std::vector<int>& stage_ids) const {
  for (int id : stage_ids)
    if (id < 1 || id > int(stages_.size()))
      throw ConfigError("invalid stage id " + std::to_string(id) + " (backbone has " +
                        std::to_string(stages_.size()) + " stages)");
  auto all = run_all_stages(image);
  std::vector<FeatureMap> out;
  out.reserve(stage_ids.size());
  for (int id : stage_ids) out.push_back(std::move(all[size_t(id - 1)]));
  return out;
}

std::unique_ptr<FeatureExtractor> make_synthetic_backbone(
    uint64_t seed, const std::vector<SyntheticStageSpec>& stage_spec) {
  return std::make_unique<SyntheticBackbone>(seed, stage_spec);
}

std::unique_ptr<FeatureExtractor> load_weights_backbone(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights file: " + path);
  Reader r{in, path};

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "FSRW", 4) != 0)
    throw DataError("parse error: " + path + ": bad magic");
  const uint16_t version = r.u16();
  if (version != 1) throw DataError("parse error: " + path + ": unsupported version");

  WeightsProgram prog;
  prog.descriptor = r.str();
  const uint16_t n_stages = r.u16();
  if (n_stages == 0 || n_stages > 16)
    throw DataError("parse error: " + path + ": bad stage count");
  for (int s = 0; s < n_stages; ++s) {
    StageSpec meta;
    meta.channels = int(r.u32());
    meta.stride = int(r.u32());
    prog.stage_meta.push_back(meta);
    const uint16_t n_ops = r.u16();
    std::vector<Op> ops;
    for (int o = 0; o < n_ops; ++o) {
      Op op;
      const uint8_t kind = r.u8();
      switch (kind) {
        case Op::kConv:
          op.kind = Op::kConv;
          op.conv = read_conv(r);
          break;
        case Op::kRelu:
          op.kind = Op::kRelu;
          break;
        case Op::kMaxPool:
          op.kind = Op::kMaxPool;
          op.pool_k = r.u8();
          op.pool_stride = r.u8();
          op.pool_pad = r.u8();
          break;
        case Op::kResidualPush:
          op.kind = Op::kResidualPush;
          op.has_proj = r.u8() != 0;
          if (op.has_proj) op.conv = read_conv(r);
          break;
        case Op::kResidualAdd:
          op.kind = Op::kResidualAdd;
          break;
        default:
          throw DataError("parse error: " + path + ": unknown op " + std::to_string(kind));
      }
      ops.push_back(std::move(op));
    }
    prog.stage_ops.push_back(std::move(ops));
  }
  return std::make_unique<WeightsBackbone>(std::move(prog));
}

std::unique_ptr<FeatureExtractor> backbone_from_descriptor(const std::string& descriptor) {
  if (descriptor.rfind("synthetic:", 0) == 0) {
    uint64_t seed = 0;
    std::vector<SyntheticStageSpec> spec;
    const auto seed_pos = descriptor.find("seed=");
    const auto stages_pos = descriptor.find(":stages=");
    if (seed_pos == std::string::npos || stages_pos == std::string::npos)
      throw ConfigError("malformed synthetic descriptor: " + descriptor);
    seed = std::stoull(descriptor.substr(seed_pos + 5, stages_pos - (seed_pos + 5)));
    std::stringstream list(descriptor.substr(stages_pos + 8));
    std::string item;
    while (std::getline(list, item, ',')) {
      const auto x = item.find('x');
      if (x == std::string::npos)
        throw ConfigError("malformed synthetic descriptor: " + descriptor);
      spec.push_back({std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
    }
    return make_synthetic_backbone(seed, spec);
  }
  if (descriptor.rfind("weights:", 0) == 0)
    return load_weights_backbone(descriptor.substr(8));
  throw ConfigError("unknown backbone descriptor: " + descriptor);
}

FeatureMap fuse_features(const std::vector<FeatureMap>& stage_maps, int target_h,
                         int target_w) {
  if (stage_maps.empty()) throw ConfigError("fuse_features: empty stage list");
  int total_c = 0;
  for (const auto& m : stage_maps) total_c += m.c;

  FeatureMap fused(target_h, target_w, total_c, stage_maps.front().origin);
  std::vector<float> plane, resized(size_t(target_h) * target_w);
  int c_off = 0;
  for (const auto& m : stage_maps) {
    plane.resize(size_t(m.h) * m.w);
    for (int c = 0; c < m.c; ++c) {
      for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) plane[size_t(y) * m.w + x] = m.at(y, x)[c];
      bilinear_resize_plane(plane.data(), m.h, m.w, resized.data(), target_h, target_w);
      for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x)
          fused.at(y, x)[c_off + c] = resized[size_t(y) * target_w + x];
    }
    c_off += m.c;
  }
  return fused;
}

FeatureMap extract_fused(const FeatureExtractor& extractor, const ImageTensor& image,
                         const std::vector<int>& stage_ids, int target_h, int target_w) {
  auto maps = extractor.extract_stages(image, stage_ids);
  FeatureMap fused = fuse_features(maps, target_h, target_w);
  fused.origin = image.source_path;
  return fused;
}

// ---------------------------------------------------------------------------
// FSRF cache
// ---------------------------------------------------------------------------

namespace {

void write_str(std::ofstream& out, const std::string& s) {
  const uint32_t n = uint32_t(s.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(s.data(), std::streamsize(s.size()));
}

}  // namespace

void write_feature_cache(const FeatureMap& map, const std::string& path,
                         const std::string& descriptor) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out.write("FSRF", 4);
    const uint16_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 2);
    write_str(out, descriptor);
    write_str(out, map.origin);
    const uint32_t shape[3] = {uint32_t(map.h), uint32_t(map.w), uint32_t(map.c)};
    out.write(reinterpret_cast<const char*>(shape), 12);
    out.write(reinterpret_cast<const char*>(map.v.data()),
              std::streamsize(map.v.size() * sizeof(float)));
    if (!out) throw DataError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

FeatureMap read_feature_cache(const std::string& path, std::string* descriptor_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file: " + path);
  Reader r{in, path};
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "FSRF", 4) != 0)
    throw DataError("parse error: " + path + ": bad magic");
  if (r.u16() != 1) throw DataError("parse error: " + path + ": unsupported version");
  const std::string descriptor = r.str();
  const std::string origin = r.str();
  const uint32_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0 || size_t(h) * w * c > (size_t(1) << 30))
    throw DataError("parse error: " + path + ": bad shape");
  FeatureMap map(int(h), int(w), int(c), origin);
  r.bytes(map.v.data(), map.v.size() * sizeof(float));
  if (descriptor_out != nullptr) *descriptor_out = descriptor;
  return map;
}

FeatureMap read_feature_cache_checked(const std::string& path,
                                      const std::string& expected_descriptor) {
  std::string descriptor;
  FeatureMap map = read_feature_cache(path, &descriptor);
  if (descriptor != expected_descriptor)
    throw DataError("cache descriptor mismatch: " + path + " carries \"" + descriptor +
                    "\", active config expects \"" + expected_descriptor + "\"");
  return map;
}

}  // namespace fsr
