// Multi-scale feature extraction: frozen backbones, cross-scale fusion, and
// the on-disk feature cache.
//
// Two backbone families share the FeatureExtractor interface:
//  - a seeded synthetic backbone (random frozen convs + tanh) so the whole
//    toolkit runs without external weights, and
//  - a weights-file backbone that executes a small conv program loaded from an
//    "FSRW" container (conv / relu / maxpool / residual ops per stage), which
//    is how real pretrained stacks are plugged in.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fsr/tensor.hpp"

namespace fsr {

struct StageSpec {
  int channels = 0;
  int stride = 0;  // cumulative stride relative to the input image
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  const std::string& descriptor() const { return descriptor_; }
  const std::vector<StageSpec>& stages() const { return stages_; }

  // One H_m x W_m x C_m map per requested 1-based stage id.
  std::vector<FeatureMap> extract_stages(const ImageTensor& image,
                                         const std::vector<int>& stage_ids) const;

 protected:
  virtual std::vector<FeatureMap> run_all_stages(const ImageTensor& image) const = 0;

  std::string descriptor_;
  std::vector<StageSpec> stages_;
};

struct SyntheticStageSpec {
  int channels = 0;
  int stride = 0;  // cumulative, must be divisible by the previous stage's
};

std::unique_ptr<FeatureExtractor> make_synthetic_backbone(
    uint64_t seed, const std::vector<SyntheticStageSpec>& stage_spec);

std::unique_ptr<FeatureExtractor> load_weights_backbone(const std::string& path);

// Reconstructs a backbone from its descriptor ("synthetic:..." round-trips
// exactly; "weights:<path>" reloads the container).
std::unique_ptr<FeatureExtractor> backbone_from_descriptor(const std::string& descriptor);

// Cross-scale fusion: bilinear-resize every stage map to target and concatenate
// along channels.
FeatureMap fuse_features(const std::vector<FeatureMap>& stage_maps, int target_h,
                         int target_w);

// Convenience: extract requested stages and fuse; origin is the source path.
FeatureMap extract_fused(const FeatureExtractor& extractor, const ImageTensor& image,
                         const std::vector<int>& stage_ids, int target_h, int target_w);

// FSRF cache container: magic "FSRF", version u16, descriptor, source id,
// shape triple, float32 little-endian payload (h-major, then w, then channel).
void write_feature_cache(const FeatureMap& map, const std::string& path,
                         const std::string& descriptor);
FeatureMap read_feature_cache(const std::string& path, std::string* descriptor_out = nullptr);
// Throws DataError "cache descriptor mismatch" when the stored descriptor
// differs from the active one.
FeatureMap read_feature_cache_checked(const std::string& path,
                                      const std::string& expected_descriptor);

}  // namespace fsr
