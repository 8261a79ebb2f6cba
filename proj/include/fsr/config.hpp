// Experiment configuration: flat key=value files with strict unknown-key
// rejection, named presets for the three settings, and a canonical
// serialization used as the checkpoint/report config echo.
#pragma once

#include <string>
#include <vector>

#include "fsr/dataset.hpp"
#include "fsr/scoring.hpp"

namespace fsr {

struct OptimizerConfig {
  float lr = 1e-3f;
  float weight_decay = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct RunConfig {
  // Setting
  SettingMode setting = SettingMode::kSeparate;
  std::vector<std::string> categories;  // empty = every category under data_root
  int k = 8;                            // few-shot sample count
  uint64_t seed = 1;

  // Pretext task
  double tau = 0.1;
  bool per_sample_shuffle = false;  // default: one pattern per batch per iteration

  // Architecture
  int image_size = 256;
  int feature_size = 64;
  int patch = 4;
  int depth = 8;
  int width = 768;
  int heads = 12;
  int mlp_ratio = 4;
  bool learnable_positions = false;  // ablation; default fixed sinusoidal

  // Training
  int epochs = 300;
  long max_steps = 0;  // 0: run the full epoch budget
  int batch_size = 0;  // 0: per-setting default (1 few-shot, 8 otherwise)
  int checkpoint_every = 50;
  int threads = 0;  // 0: auto
  OptimizerConfig optim;

  // Scoring
  ImageScoreMode image_score = ImageScoreMode::kStd;
  float smoothing_sigma = 0.f;

  // Features
  std::string backbone = "synthetic:seed=1:stages=256x4,512x8,1024x16";
  std::vector<int> stages;  // empty = all backbone stages
  Normalization norm;

  // Paths
  std::string data_root;
  std::string out_dir = "runs";
  std::string cache_dir;

  int effective_batch() const {
    if (batch_size > 0) return batch_size;
    return setting == SettingMode::kFewShot ? 1 : 8;
  }
  int effective_threads() const;

  void validate() const;  // throws ConfigError
  std::string serialize() const;

  // Named presets carrying the per-setting optima: fewshot (tau 0.1, batch 1),
  // separate (tau 0.3, batch 8), unified (tau 0.9, batch 8).
  void apply_preset(const std::string& name);

  static RunConfig from_string(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

}  // namespace fsr
