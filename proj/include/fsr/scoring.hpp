// Anomaly-map construction, AUROC metrics, and the two theory probes
// (exact mutual-information enumeration and the identical-shortcut witness).
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsr/fsr_core.hpp"
#include "fsr/image.hpp"
#include "fsr/restoration.hpp"
#include "fsr/tensor.hpp"

namespace fsr {

struct AnomalyMap {
  int h = 0, w = 0;
  std::vector<float> scores;  // >= 0 elementwise, image resolution
  float image_score = 0.f;
  std::string source;

  float at(int y, int x) const { return scores[size_t(y) * w + x]; }
};

enum class ImageScoreMode { kStd, kMax };  // std is the default; max is an alternative

// Per-position squared-error and cosine-distance factors at feature
// resolution (pre-resize), in that order.
std::pair<Mat, Mat> anomaly_factors(const FeatureMap& test_features,
                                    const FeatureMap& restored);

// Elementwise product of the factors, bilinear-resized to image resolution;
// image score is the standard deviation of the resized map (or its max).
// smoothing_sigma > 0 applies a Gaussian blur to the resized map; default off.
AnomalyMap anomaly_map(const FeatureMap& test_features, const FeatureMap& restored,
                       int image_h, int image_w,
                       ImageScoreMode mode = ImageScoreMode::kStd,
                       float smoothing_sigma = 0.f);

// Rank-based AUROC with half credit for ties (Mann-Whitney). Throws DataError
// "degenerate labels" when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// AUROC over the pooled pixels of all test images.
double pixel_auroc(const std::vector<AnomalyMap>& maps, const std::vector<BinaryMask>& masks);

struct CategoryMetrics {
  std::string category;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  int n_test = 0;
  int n_anomalous = 0;
};

struct MetricsReport {
  std::vector<CategoryMetrics> categories;
  double mean_image_auroc = 0.0;
  double mean_pixel_auroc = 0.0;
  std::string config_echo;

  void finalize();  // fills the means
  std::string to_json() const;
  std::string to_csv() const;
};

// Discrete model for the mutual-information probe: i.i.d. symbols over an
// alphabet of size A, sequence length L, shuffled at rate tau.
struct DiscreteSequenceModel {
  int alphabet = 2;
  int length = 4;
  std::vector<double> symbol_probs;  // size = alphabet, sums to 1
};

// Exact I(X*_tau; X) in bits by brute-force enumeration over all sequences
// and all shuffle outcomes, via the decomposition H(X) + E[log P(x | x*)].
// Requires A^L <= 4096.
std::vector<std::pair<double, double>> mutual_information_probe(
    const DiscreteSequenceModel& model, const std::vector<double>& taus);

// Exact H(X) in bits for the same model.
double sequence_entropy_bits(const DiscreteSequenceModel& model);

// Identical-shortcut witness: with zero output projections the network is the
// identity, so the plain reconstruction error is 0 while the shuffled
// restoration error stays positive whenever distinct tokens moved.
struct ShortcutWitness {
  double rec_error = 0.0;  // || restore(seq) - seq ||_F
  double fsr_error = 0.0;  // || restore(shuffle(seq)) - seq ||_F
  ShuffleRecord record;
};

ShortcutWitness shortcut_witness(const RestorationParams& params_zeroed,
                                 const TokenSequence& seq, double tau, Rng& rng);

// 8-bit heatmap for eyeballing anomaly maps (min-max normalized color ramp).
ImageU8 heatmap_image(const AnomalyMap& map);

}  // namespace fsr
