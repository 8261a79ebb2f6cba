// Self-contained synthetic benchmark: seeded periodic textures with injected
// square/ellipse anomalies, used to compare plain reconstruction (tau = 0)
// against shuffling-and-restoration at a range of rates on CPU-sized models.
#pragma once

#include <string>
#include <vector>

#include "fsr/config.hpp"
#include "fsr/tensor.hpp"
#include "fsr/train.hpp"

namespace fsr {

struct BenchSpec {
  int textures = 3;  // 1 emulates the separate setting, 3 the unified one
  int image_size = 64;
  int train_per_texture = 16;
  int test_normal_per_texture = 6;
  int test_anomalous_per_texture = 6;
  uint64_t seed = 1;
};

struct BenchSample {
  ImageTensor image;
  BinaryMask mask;
  bool is_anomalous = false;
  std::string id;
};

struct BenchData {
  std::vector<ImageTensor> train_images;  // source_path carries the sample id
  std::vector<BenchSample> test_samples;
};

BenchData generate_bench_data(const BenchSpec& spec);

struct BenchRow {
  double tau = 0.0;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double final_loss = 0.0;
};

struct BenchReport {
  BenchSpec spec;
  std::vector<BenchRow> rows;  // first row is the tau = 0 reconstruction baseline

  const BenchRow& rec_baseline() const { return rows.front(); }
  BenchRow best_fsr() const;  // highest pixel AUROC among tau > 0 rows

  std::string to_csv() const;
  std::string to_svg() const;  // AUROC-vs-tau line chart
};

// Desk-scale model/config defaults used by the benchmark runner; callers may
// override fields (steps, seed, threads) before passing it in.
RunConfig bench_config(const BenchSpec& spec, long steps);

// Trains one model per tau in {0} + taus (deduplicated) and evaluates each on
// the shared synthetic test set. Artifacts (checkpoints, loss logs) land under
// config.out_dir.
BenchReport run_bench(const BenchSpec& spec, const RunConfig& config,
                      const std::vector<double>& taus);

}  // namespace fsr
