// Dataset ingest for MVTec-style trees and the few-shot / separate / unified
// training-set builders.
//
// Expected layout under <root>:
//   <category>/train/good/*.png|jpg|bmp
//   <category>/test/good/*.png|jpg|bmp
//   <category>/test/<defect_type>/*.png|jpg|bmp
//   <category>/ground_truth/<defect_type>/<stem>_mask.png  (or <stem>.png)
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsr/tensor.hpp"

namespace fsr {

struct TestImage {
  std::string path;
  std::string defect_type;
  bool is_anomalous = false;
};

struct DatasetIndex {
  std::string category;
  std::vector<std::string> train_images;           // lexicographic
  std::vector<TestImage> test_images;              // lexicographic by path
  std::map<std::string, std::string> mask_paths;   // anomalous test path -> mask
};

enum class SettingMode { kFewShot, kSeparate, kUnified };

struct SettingSpec {
  SettingMode mode = SettingMode::kSeparate;
  std::vector<std::string> categories;  // empty = all provided indices
  std::optional<int> k;                 // few-shot sample count
  uint64_t seed = 1;
};

struct TrainingSet {
  std::string name;  // category, or "unified"
  std::vector<std::string> paths;
};

const char* setting_mode_name(SettingMode mode);
SettingMode parse_setting_mode(const std::string& name);

// Throws DataError for layout problems ("layout error: ..." /
// "mask missing: ...").
DatasetIndex scan_dataset(const std::string& root, const std::string& category);

// Lists category directories under root (those containing a train/ subdir).
std::vector<std::string> list_categories(const std::string& root);

// Pure function of (indices, spec); throws ConfigError for invalid specs and
// "insufficient samples" when k exceeds a category's train set.
std::vector<TrainingSet> build_setting(const std::vector<DatasetIndex>& indices,
                                       const SettingSpec& spec);

struct Normalization {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

// Decode, bilinear-resize to size x size, scale to [0,1], standardize.
ImageTensor load_image(const std::string& path, int size, const Normalization& norm);

// Decode grayscale, nearest-resize to size x size, threshold >0 into {0,1}.
BinaryMask load_mask(const std::string& path, int size);

}  // namespace fsr
