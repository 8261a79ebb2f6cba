// The restoration loss: per-position squared error, per-position cosine
// distance, and a global cosine distance over the flattened maps, summed with
// unit weights. Norm denominators carry an epsilon inside the square root so
// gradients stay finite on zero vectors.
#pragma once

#include <cmath>

#include "fsr/errors.hpp"
#include "fsr/kernels.hpp"
#include "fsr/tensor.hpp"

namespace fsr {

template <class T>
struct LossBreakdownT {
  T local_mse = 0;
  T local_cos = 0;
  T global_cos = 0;
  T total = 0;
};

using LossBreakdown = LossBreakdownT<float>;

namespace detail {

constexpr double kNormEps = 1e-8;

template <class T>
void check_same_shape(const FeatureMapT<T>& a, const FeatureMapT<T>& b, const char* op) {
  if (a.h != b.h || a.w != b.w || a.c != b.c)
    throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(a.h) + "x" +
                      std::to_string(a.w) + "x" + std::to_string(a.c) + " vs " +
                      std::to_string(b.h) + "x" + std::to_string(b.w) + "x" +
                      std::to_string(b.c) + ")");
}

template <class T>
T stable_norm(const T* v, int n) {
  return std::sqrt(kern::sumsq(v, n) + T(kNormEps));
}

}  // namespace detail

// Mean over positions of the channel-wise squared L2 difference. The mean is
// over H*W only; the channel sum lives inside the norm.
template <class T>
T local_mse(const FeatureMapT<T>& target, const FeatureMapT<T>& restored) {
  detail::check_same_shape(target, restored, "local_mse");
  const int positions = target.h * target.w;
  T acc = 0;
  for (int p = 0; p < positions; ++p)
    acc += kern::sumsq_diff(target.v.data() + size_t(p) * target.c,
                            restored.v.data() + size_t(p) * target.c, target.c);
  return acc / T(positions);
}

// Mean over positions of (1 - cosine similarity of the channel vectors).
template <class T>
T local_cos(const FeatureMapT<T>& target, const FeatureMapT<T>& restored) {
  detail::check_same_shape(target, restored, "local_cos");
  const int positions = target.h * target.w;
  T acc = 0;
  for (int p = 0; p < positions; ++p) {
    const T* f = target.v.data() + size_t(p) * target.c;
    const T* g = restored.v.data() + size_t(p) * target.c;
    const T cosine = kern::dot(f, g, target.c) /
                     (detail::stable_norm(f, target.c) * detail::stable_norm(g, target.c));
    acc += T(1) - cosine;
  }
  return acc / T(positions);
}

// 1 - cosine between the vec-flattened maps.
template <class T>
T global_cos(const FeatureMapT<T>& target, const FeatureMapT<T>& restored) {
  detail::check_same_shape(target, restored, "global_cos");
  const int n = int(target.v.size());
  const T cosine = kern::dot(target.v.data(), restored.v.data(), n) /
                   (detail::stable_norm(target.v.data(), n) *
                    detail::stable_norm(restored.v.data(), n));
  return T(1) - cosine;
}

template <class T>
LossBreakdownT<T> restoration_loss(const FeatureMapT<T>& target,
                                   const FeatureMapT<T>& restored) {
  LossBreakdownT<T> out;
  out.local_mse = local_mse(target, restored);
  out.local_cos = local_cos(target, restored);
  out.global_cos = global_cos(target, restored);
  out.total = out.local_mse + out.local_cos + out.global_cos;
  return out;
}

// Loss plus analytic d(total)/d(restored), accumulated into grad_restored
// (which must be zero-initialized to the right shape by the caller).
template <class T>
LossBreakdownT<T> restoration_loss_grad(const FeatureMapT<T>& target,
                                        const FeatureMapT<T>& restored,
                                        FeatureMapT<T>& grad_restored) {
  detail::check_same_shape(target, restored, "restoration_loss");
  detail::check_same_shape(target, grad_restored, "restoration_loss");
  const int positions = target.h * target.w;
  const int c = target.c;
  const T inv_p = T(1) / T(positions);

  LossBreakdownT<T> out;
  for (int p = 0; p < positions; ++p) {
    const T* f = target.v.data() + size_t(p) * c;
    const T* g = restored.v.data() + size_t(p) * c;
    T* dg = grad_restored.v.data() + size_t(p) * c;

    out.local_mse += kern::sumsq_diff(f, g, c) * inv_p;
    const T nf = detail::stable_norm(f, c);
    const T ng = detail::stable_norm(g, c);
    const T fg = kern::dot(f, g, c);
    out.local_cos += (T(1) - fg / (nf * ng)) * inv_p;

    const T mse_coeff = T(2) * inv_p;
    const T cos_f_coeff = -inv_p / (nf * ng);
    const T cos_g_coeff = inv_p * fg / (nf * ng * ng * ng);
    for (int i = 0; i < c; ++i)
      dg[i] += mse_coeff * (g[i] - f[i]) + cos_f_coeff * f[i] + cos_g_coeff * g[i];
  }

  const int n = int(target.v.size());
  const T nf = detail::stable_norm(target.v.data(), n);
  const T ng = detail::stable_norm(restored.v.data(), n);
  const T fg = kern::dot(target.v.data(), restored.v.data(), n);
  out.global_cos = T(1) - fg / (nf * ng);
  const T gf_coeff = -T(1) / (nf * ng);
  const T gg_coeff = fg / (nf * ng * ng * ng);
  for (int i = 0; i < n; ++i)
    grad_restored.v[size_t(i)] += gf_coeff * target.v[size_t(i)] + gg_coeff * restored.v[size_t(i)];

  out.total = out.local_mse + out.local_cos + out.global_cos;
  return out;
}

}  // namespace fsr
