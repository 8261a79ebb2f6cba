// AVX2+FMA variants of the float kernels. This translation unit is compiled
// with -mavx2 -mfma and must only be entered after a runtime CPU check.
#include "kernels_avx2.hpp"

#ifdef FSR_HAVE_AVX2_TU

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace fsr::kern::avx2 {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  __m128 s = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, s);
  s = _mm_add_ss(s, sh);
  return _mm_cvtss_f32(s);
}

// y[0..n) += alpha * x[0..n)
inline void axpy_inner(float alpha, const float* x, float* y, int n) {
  const __m256 va = _mm256_set1_ps(alpha);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

inline float dot_inner(const float* a, const float* b, int n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  int i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + size_t(i) * k;
    float* ci = c + size_t(i) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = b + size_t(j) * k;
      const float* b1 = b0 + k;
      const float* b2 = b1 + k;
      const float* b3 = b2 + k;
      __m256 s0 = _mm256_setzero_ps();
      __m256 s1 = _mm256_setzero_ps();
      __m256 s2 = _mm256_setzero_ps();
      __m256 s3 = _mm256_setzero_ps();
      int p = 0;
      for (; p + 8 <= k; p += 8) {
        const __m256 va = _mm256_loadu_ps(ai + p);
        s0 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b0 + p), s0);
        s1 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b1 + p), s1);
        s2 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b2 + p), s2);
        s3 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b3 + p), s3);
      }
      float r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        const float va = ai[p];
        r0 += va * b0[p];
        r1 += va * b1[p];
        r2 += va * b2[p];
        r3 += va * b3[p];
      }
      ci[j] = r0;
      ci[j + 1] = r1;
      ci[j + 2] = r2;
      ci[j + 3] = r3;
    }
    for (; j < n; ++j) ci[j] = dot_inner(ai, b + size_t(j) * k, k);
  }
}

void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    float* ci = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.f;
    const float* ai = a + size_t(i) * k;
    for (int p = 0; p < k; ++p) axpy_inner(ai[p], b + size_t(p) * n, ci, n);
  }
}

void gemm_acc_nn(const float* a, const float* b, float* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    float* ci = c + size_t(i) * k;
    const float* ai = a + size_t(i) * n;
    for (int j = 0; j < n; ++j) axpy_inner(ai[j], b + size_t(j) * k, ci, k);
  }
}

void gemm_acc_tn(const float* a, const float* b, float* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + size_t(i) * n;
    const float* bi = b + size_t(i) * k;
    for (int j = 0; j < n; ++j) axpy_inner(ai[j], bi, c + size_t(j) * k, k);
  }
}

float dot(const float* a, const float* b, int n) { return dot_inner(a, b, n); }

float sumsq(const float* a, int n) { return dot_inner(a, a, n); }

float sumsq_diff(const float* a, const float* b, int n) {
  __m256 acc = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    acc = _mm256_fmadd_ps(d, d, acc);
  }
  float r = hsum(acc);
  for (; i < n; ++i) {
    const float d = a[i] - b[i];
    r += d * d;
  }
  return r;
}

void axpy(float alpha, const float* x, float* y, int n) { axpy_inner(alpha, x, y, n); }

void vadd(const float* a, const float* b, float* out, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub(const float* a, const float* b, float* out, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul(const float* a, const float* b, float* out, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale(float alpha, float* a, int n) {
  const __m256 va = _mm256_set1_ps(alpha);
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(a + i, _mm256_mul_ps(va, _mm256_loadu_ps(a + i)));
  for (; i < n; ++i) a[i] *= alpha;
}

void adamw_step(float* p, float* m, float* v, const float* g, int n, float lr,
                float beta1, float beta2, float eps, float wd, float inv_bc1,
                float inv_bc2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 v1mb1 = _mm256_set1_ps(1.f - beta1);
  const __m256 v1mb2 = _mm256_set1_ps(1.f - beta2);
  const __m256 vibc1 = _mm256_set1_ps(inv_bc1);
  const __m256 vibc2 = _mm256_set1_ps(inv_bc2);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 vwd = _mm256_set1_ps(wd);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_fmadd_ps(v1mb1, vg, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vv = _mm256_fmadd_ps(v1mb2, _mm256_mul_ps(vg, vg),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(vm, vibc1);
    const __m256 vhat = _mm256_mul_ps(vv, vibc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    __m256 vp = _mm256_loadu_ps(p + i);
    const __m256 upd = _mm256_fmadd_ps(vwd, vp, _mm256_div_ps(mhat, denom));
    vp = _mm256_fnmadd_ps(vlr, upd, vp);
    _mm256_storeu_ps(p + i, vp);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    const float mhat = m[i] * inv_bc1;
    const float vhat = v[i] * inv_bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

}  // namespace fsr::kern::avx2

#endif  // FSR_HAVE_AVX2_TU
