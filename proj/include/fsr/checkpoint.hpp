// The trained model bundle and its on-disk container.
//
// Checkpoint layout ("FSR1"): magic, version u16, length-prefixed config echo,
// epoch/step counters, RNG state, then named little-endian float32 tensors
// with shape headers. Optimizer moments ride along as opt.m.* / opt.v.*
// tensors when present.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fsr/config.hpp"
#include "fsr/fsr_core.hpp"
#include "fsr/restoration.hpp"
#include "fsr/rng.hpp"

namespace fsr {

struct Model {
  RunConfig config;
  PatchProjection proj;
  RestorationParams params;
  Mat pos_table;  // L x D; fixed sinusoidal unless config.learnable_positions

  int tokens_per_side() const { return config.feature_size / config.patch; }
  int sequence_length() const { return tokens_per_side() * tokens_per_side(); }

  // Test-time forward path: tokenize, add positions, restore, de-tokenize.
  // Never shuffles.
  FeatureMap reconstruct(const FeatureMap& features, AttentionTrace* trace = nullptr) const;
};

// Builds a freshly initialized model for the given fused channel count.
Model init_model(const RunConfig& config, int feature_channels);

// Stable enumeration of every trainable tensor; shared by the checkpoint
// writer, the loader, and the optimizer. fn(name, pointer, element_count).
template <class Fn>
void visit_model_tensors(Model& model, Fn&& fn) {
  for_each_tensor(model.proj, fn);
  for_each_tensor(model.params, fn);
  if (model.config.learnable_positions)
    fn(std::string("pos.table"), model.pos_table.v.data(), model.pos_table.size());
}

struct OptimizerState {
  uint64_t t = 0;  // bias-correction step counter
  std::map<std::string, std::vector<float>> m, v;
};

struct Checkpoint {
  Model model;
  uint64_t epoch = 0;
  uint64_t step = 0;
  Rng::State rng_state{};
  bool has_optimizer = false;
  OptimizerState optimizer;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fsr
