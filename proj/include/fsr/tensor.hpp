// Small dense containers used throughout: row-major L x D matrices and
// H x W x C feature maps (channel-last, so per-position channel vectors are
// contiguous). Templated on the scalar so gradient checks can run in double.
#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace fsr {

template <class T>
struct MatT {
  int rows = 0, cols = 0;
  std::vector<T> v;

  MatT() = default;
  MatT(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), T(0)) {}

  T* row(int r) { return v.data() + size_t(r) * cols; }
  const T* row(int r) const { return v.data() + size_t(r) * cols; }
  T& at(int r, int c) { return v[size_t(r) * cols + c]; }
  T at(int r, int c) const { return v[size_t(r) * cols + c]; }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

using Mat = MatT<float>;

// Fused multi-scale feature map. Layout matches the FSRF cache payload:
// h-major, then w, then channel.
template <class T>
struct FeatureMapT {
  int h = 0, w = 0, c = 0;
  std::vector<T> v;
  std::string origin;  // source image identifier

  FeatureMapT() = default;
  FeatureMapT(int h_, int w_, int c_, std::string origin_ = {})
      : h(h_), w(w_), c(c_), v(size_t(h_) * w_ * c_, T(0)), origin(std::move(origin_)) {}

  T* at(int y, int x) { return v.data() + (size_t(y) * w + x) * c; }
  const T* at(int y, int x) const { return v.data() + (size_t(y) * w + x) * c; }
  size_t size() const { return v.size(); }

  template <class U>
  FeatureMapT<U> cast() const {
    FeatureMapT<U> out(h, w, c, origin);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
    return out;
  }
};

using FeatureMap = FeatureMapT<float>;

// Normalized image, channel-first (c x h x w) like the ingest pipeline emits.
struct ImageTensor {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;
  std::string source_path;

  ImageTensor() = default;
  ImageTensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.f) {}

  float* plane(int ch) { return v.data() + size_t(ch) * h * w; }
  const float* plane(int ch) const { return v.data() + size_t(ch) * h * w; }
};

// {0,1} ground-truth mask at image resolution.
struct BinaryMask {
  int h = 0, w = 0;
  std::vector<uint8_t> v;

  BinaryMask() = default;
  BinaryMask(int h_, int w_) : h(h_), w(w_), v(size_t(h_) * w_, 0) {}
  uint8_t at(int y, int x) const { return v[size_t(y) * w + x]; }
};

}  // namespace fsr
