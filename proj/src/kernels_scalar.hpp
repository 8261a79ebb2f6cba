// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against; loop order is chosen for cache behaviour, not cleverness.
#pragma once

#include <cmath>

namespace fsr::kern::scalar {

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + size_t(i) * k;
    T* ci = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + size_t(j) * k;
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0;
    const T* ai = a + size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const T s = ai[p];
      const T* bp = b + size_t(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

template <class T>
void gemm_acc_nn(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + size_t(i) * k;
    const T* ai = a + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T s = ai[j];
      const T* bj = b + size_t(j) * k;
      for (int p = 0; p < k; ++p) ci[p] += s * bj[p];
    }
  }
}

template <class T>
void gemm_acc_tn(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + size_t(i) * n;
    const T* bi = b + size_t(i) * k;
    for (int j = 0; j < n; ++j) {
      const T s = ai[j];
      T* cj = c + size_t(j) * k;
      for (int p = 0; p < k; ++p) cj[p] += s * bi[p];
    }
  }
}

template <class T>
T dot(const T* a, const T* b, int n) {
  T acc = 0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
T sumsq(const T* a, int n) {
  T acc = 0;
  for (int i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

template <class T>
T sumsq_diff(const T* a, const T* b, int n) {
  T acc = 0;
  for (int i = 0; i < n; ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void vadd(const T* a, const T* b, T* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void vsub(const T* a, const T* b, T* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <class T>
void vmul(const T* a, const T* b, T* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void vscale(T alpha, T* a, int n) {
  for (int i = 0; i < n; ++i) a[i] *= alpha;
}

template <class T>
void adamw_step(T* p, T* m, T* v, const T* g, int n, T lr, T beta1, T beta2,
                T eps, T wd, T inv_bc1, T inv_bc2) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] * inv_bc1;
    const T vhat = v[i] * inv_bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

}  // namespace fsr::kern::scalar
