// Experiment orchestration: the training loop (shuffle -> restore -> loss ->
// AdamW step), deterministic end to end for a given config and seed, plus
// evaluation and single-image prediction.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fsr/checkpoint.hpp"
#include "fsr/config.hpp"
#include "fsr/dataset.hpp"
#include "fsr/features.hpp"
#include "fsr/objective.hpp"
#include "fsr/scoring.hpp"

namespace fsr {

// Maps an image path to its fused feature map. Implementations may read a
// cache, compute through a backbone, or serve from memory.
using FeatureSource = std::function<FeatureMap(const std::string& path)>;

// Cache-aware source: reads <cache_dir>/<hash>.fsrf when present, computes and
// writes it otherwise. Without a cache_dir it always computes.
FeatureSource disk_feature_source(const RunConfig& config,
                                  std::shared_ptr<const FeatureExtractor> extractor);

struct TrainResult {
  std::string set_name;
  std::string checkpoint_path;            // final checkpoint
  std::vector<LossBreakdown> loss_log;    // one row per step
  uint64_t steps = 0;
};

// Trains one model per training set; checkpoints and loss CSVs land under
// <out_dir>/<set_name>/.
TrainResult train_one(const RunConfig& config, const TrainingSet& set,
                      const FeatureSource& features);
std::vector<TrainResult> train(const RunConfig& config,
                               const std::vector<TrainingSet>& sets,
                               const FeatureSource& features);

// In-memory evaluation unit: fused features plus ground truth.
struct EvalSample {
  FeatureMap features;
  BinaryMask mask;  // all-zero for normal images
  bool is_anomalous = false;
  std::string id;
};

struct EvalOutcome {
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  std::vector<AnomalyMap> maps;       // ordered like the input samples
  std::vector<double> image_scores;
  std::vector<int> labels;
};

EvalOutcome evaluate_samples(const Model& model, const std::vector<EvalSample>& samples);

// Full evaluation over dataset indices: per-category image/pixel AUROC and
// their means. Never invokes the shuffle.
MetricsReport evaluate(const Model& model, const std::vector<DatasetIndex>& indices,
                       const FeatureSource& features);

struct PredictResult {
  AnomalyMap map;
  std::string raster_path;
  std::string heatmap_path;
};

// Single-image inference; writes the raw float raster (FSRF container) and an
// 8-bit heatmap under out_dir.
PredictResult predict(const Model& model, const std::string& image_path,
                      const std::string& out_dir);

}  // namespace fsr
