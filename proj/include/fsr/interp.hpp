// Plane resampling shared by image loading, feature fusion, and anomaly-map
// upsampling. Bilinear uses half-pixel centers (align-corners off).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace fsr {

inline void bilinear_resize_plane(const float* src, int sh, int sw, float* dst,
                                  int dh, int dw) {
  if (sh == dh && sw == dw) {
    std::copy(src, src + size_t(sh) * sw, dst);
    return;
  }
  const float sy_scale = float(sh) / float(dh);
  const float sx_scale = float(sw) / float(dw);
  for (int y = 0; y < dh; ++y) {
    float fy = (float(y) + 0.5f) * sy_scale - 0.5f;
    fy = std::max(0.f, std::min(fy, float(sh - 1)));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const float wy = fy - float(y0);
    for (int x = 0; x < dw; ++x) {
      float fx = (float(x) + 0.5f) * sx_scale - 0.5f;
      fx = std::max(0.f, std::min(fx, float(sw - 1)));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const float wx = fx - float(x0);
      const float top = src[y0 * sw + x0] * (1.f - wx) + src[y0 * sw + x1] * wx;
      const float bot = src[y1 * sw + x0] * (1.f - wx) + src[y1 * sw + x1] * wx;
      dst[y * dw + x] = top * (1.f - wy) + bot * wy;
    }
  }
}

template <class T>
void nearest_resize_plane(const T* src, int sh, int sw, T* dst, int dh, int dw) {
  for (int y = 0; y < dh; ++y) {
    int sy = int((float(y) + 0.5f) * float(sh) / float(dh));
    sy = std::min(sy, sh - 1);
    for (int x = 0; x < dw; ++x) {
      int sx = int((float(x) + 0.5f) * float(sw) / float(dw));
      sx = std::min(sx, sw - 1);
      dst[y * dw + x] = src[sy * sw + sx];
    }
  }
}

}  // namespace fsr
