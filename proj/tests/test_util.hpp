// Shared helpers for the test suites.
#pragma once

#include <filesystem>
#include <string>

#include "fsr/image.hpp"
#include "fsr/rng.hpp"
#include "fsr/tensor.hpp"

namespace fsrtest {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fsr_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline fsr::ImageU8 random_image(fsr::Rng& rng, int w, int h, int channels) {
  fsr::ImageU8 img(w, h, channels);
  for (auto& p : img.px) p = uint8_t(rng.below(256));
  return img;
}

inline fsr::FeatureMap random_map(fsr::Rng& rng, int h, int w, int c, float scale = 1.f) {
  fsr::FeatureMap map(h, w, c);
  for (auto& x : map.v) x = scale * (2.f * rng.next_float() - 1.f);
  return map;
}

}  // namespace fsrtest
