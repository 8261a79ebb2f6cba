#include "fsr/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "fsr/errors.hpp"
#include "fsr/image.hpp"
#include "fsr/interp.hpp"
#include "fsr/rng.hpp"

namespace fs = std::filesystem;

namespace fsr {

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".ppm" || ext == ".pgm";
}

std::vector<std::string> list_images(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path()))
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> list_subdirs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

void require_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw DataError("layout error: missing directory " + p.string());
}

}  // namespace

const char* setting_mode_name(SettingMode mode) {
  switch (mode) {
    case SettingMode::kFewShot: return "few-shot";
    case SettingMode::kSeparate: return "separate";
    case SettingMode::kUnified: return "unified";
  }
  return "?";
}

SettingMode parse_setting_mode(const std::string& name) {
  if (name == "few-shot" || name == "few_shot" || name == "fewshot")
    return SettingMode::kFewShot;
  if (name == "separate") return SettingMode::kSeparate;
  if (name == "unified") return SettingMode::kUnified;
  throw ConfigError("unknown setting mode: " + name);
}

DatasetIndex scan_dataset(const std::string& root, const std::string& category) {
  const fs::path base = fs::path(root) / category;
  require_dir(base);
  require_dir(base / "train" / "good");
  require_dir(base / "test");

  DatasetIndex index;
  index.category = category;
  index.train_images = list_images(base / "train" / "good");

  for (const auto& defect : list_subdirs(base / "test")) {
    const bool anomalous = defect != "good";
    for (const auto& path : list_images(base / "test" / defect)) {
      index.test_images.push_back({path, defect, anomalous});
      if (anomalous) {
        const fs::path stem = fs::path(path).stem();
        const fs::path gt_dir = base / "ground_truth" / defect;
        const fs::path with_suffix = gt_dir / (stem.string() + "_mask.png");
        const fs::path bare = gt_dir / (stem.string() + ".png");
        if (fs::is_regular_file(with_suffix)) {
          index.mask_paths[path] = with_suffix.string();
        } else if (fs::is_regular_file(bare)) {
          index.mask_paths[path] = bare.string();
        } else {
          throw DataError("mask missing: " + path);
        }
      }
    }
  }
  std::sort(index.test_images.begin(), index.test_images.end(),
            [](const TestImage& a, const TestImage& b) { return a.path < b.path; });
  return index;
}

std::vector<std::string> list_categories(const std::string& root) {
  require_dir(root);
  std::vector<std::string> out;
  for (const auto& name : list_subdirs(root))
    if (fs::is_directory(fs::path(root) / name / "train")) out.push_back(name);
  return out;
}

std::vector<TrainingSet> build_setting(const std::vector<DatasetIndex>& indices,
                                       const SettingSpec& spec) {
  // Resolve the category selection against the provided indices.
  std::vector<const DatasetIndex*> chosen;
  if (spec.categories.empty()) {
    for (const auto& idx : indices) chosen.push_back(&idx);
  } else {
    for (const auto& name : spec.categories) {
      auto it = std::find_if(indices.begin(), indices.end(),
                             [&](const DatasetIndex& i) { return i.category == name; });
      if (it == indices.end()) throw ConfigError("category not in indices: " + name);
      chosen.push_back(&*it);
    }
  }
  if (chosen.empty()) throw ConfigError("no categories selected");

  std::vector<TrainingSet> out;
  switch (spec.mode) {
    case SettingMode::kSeparate: {
      for (const auto* idx : chosen) out.push_back({idx->category, idx->train_images});
      break;
    }
    case SettingMode::kUnified: {
      if (chosen.size() < 2)
        throw ConfigError("unified setting requires at least 2 categories");
      TrainingSet pooled{"unified", {}};
      for (const auto* idx : chosen)
        pooled.paths.insert(pooled.paths.end(), idx->train_images.begin(),
                            idx->train_images.end());
      out.push_back(std::move(pooled));
      break;
    }
    case SettingMode::kFewShot: {
      if (!spec.k.has_value() || *spec.k < 1)
        throw ConfigError("few-shot setting requires k >= 1");
      const int k = *spec.k;
      Rng rng(spec.seed);
      for (const auto* idx : chosen) {
        const int avail = int(idx->train_images.size());
        if (k > avail)
          throw ConfigError("insufficient samples: category " + idx->category + " has " +
                            std::to_string(avail) + " train images, k=" + std::to_string(k));
        auto perm = rng.permutation(uint32_t(avail));
        std::vector<std::string> picked;
        picked.reserve(size_t(k));
        for (int i = 0; i < k; ++i) picked.push_back(idx->train_images[perm[i]]);
        std::sort(picked.begin(), picked.end());
        out.push_back({idx->category, std::move(picked)});
      }
      break;
    }
  }
  return out;
}

ImageTensor load_image(const std::string& path, int size, const Normalization& norm) {
  const ImageU8 img = decode_image(path);

  // To RGB floats in [0,1] (gray replicates into all three channels).
  std::vector<float> plane(size_t(img.h) * img.w);
  ImageTensor out(3, size, size);
  out.source_path = path;
  std::vector<float> resized(size_t(size) * size);
  for (int c = 0; c < 3; ++c) {
    const int src_c = img.channels == 3 ? c : 0;
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        plane[size_t(y) * img.w + x] = float(img.at(y, x)[src_c]) / 255.f;
    bilinear_resize_plane(plane.data(), img.h, img.w, resized.data(), size, size);
    float* dst = out.plane(c);
    for (size_t i = 0; i < resized.size(); ++i)
      dst[i] = (resized[i] - norm.mean[size_t(c)]) / norm.std[size_t(c)];
  }
  return out;
}

BinaryMask load_mask(const std::string& path, int size) {
  const ImageU8 img = decode_image(path);
  // Anything nonzero in any channel counts as anomalous.
  std::vector<uint8_t> gray(size_t(img.h) * img.w, 0);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const uint8_t* p = img.at(y, x);
      uint8_t v = 0;
      for (int c = 0; c < img.channels; ++c) v = std::max(v, p[c]);
      gray[size_t(y) * img.w + x] = v;
    }
  BinaryMask mask(size, size);
  std::vector<uint8_t> resized(size_t(size) * size);
  nearest_resize_plane(gray.data(), img.h, img.w, resized.data(), size, size);
  for (size_t i = 0; i < resized.size(); ++i) mask.v[i] = resized[i] > 0 ? 1 : 0;
  return mask;
}

}  // namespace fsr
