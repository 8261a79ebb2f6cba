// Runtime backend selection and the double (scalar-only) entry points.
#include "fsr/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_avx2.hpp"
#include "kernels_scalar.hpp"

namespace fsr::kern {

namespace {

struct FloatOps {
  void (*gemm_nt)(const float*, const float*, float*, int, int, int);
  void (*gemm_nn)(const float*, const float*, float*, int, int, int);
  void (*gemm_acc_nn)(const float*, const float*, float*, int, int, int);
  void (*gemm_acc_tn)(const float*, const float*, float*, int, int, int);
  float (*dot)(const float*, const float*, int);
  float (*sumsq)(const float*, int);
  float (*sumsq_diff)(const float*, const float*, int);
  void (*axpy)(float, const float*, float*, int);
  void (*vadd)(const float*, const float*, float*, int);
  void (*vsub)(const float*, const float*, float*, int);
  void (*vmul)(const float*, const float*, float*, int);
  void (*vscale)(float, float*, int);
  void (*adamw_step)(float*, float*, float*, const float*, int, float, float,
                     float, float, float, float, float);
};

constexpr FloatOps kScalarOps = {
    scalar::gemm_nt<float>,    scalar::gemm_nn<float>,
    scalar::gemm_acc_nn<float>, scalar::gemm_acc_tn<float>,
    scalar::dot<float>,        scalar::sumsq<float>,
    scalar::sumsq_diff<float>, scalar::axpy<float>,
    scalar::vadd<float>,       scalar::vsub<float>,
    scalar::vmul<float>,       scalar::vscale<float>,
    scalar::adamw_step<float>};

#ifdef FSR_HAVE_AVX2_TU
constexpr FloatOps kAvx2Ops = {
    avx2::gemm_nt,    avx2::gemm_nn,    avx2::gemm_acc_nn, avx2::gemm_acc_tn,
    avx2::dot,        avx2::sumsq,      avx2::sumsq_diff,  avx2::axpy,
    avx2::vadd,       avx2::vsub,       avx2::vmul,        avx2::vscale,
    avx2::adamw_step};
#endif

struct Dispatch {
  const FloatOps* ops;
  Backend backend;
  const char* name;
};

bool cpu_has_avx2() {
#if defined(FSR_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Dispatch resolve(Backend requested) {
  if (requested == Backend::kAuto) {
    const char* env = std::getenv("FSR_KERNELS");
    if (env != nullptr) {
      if (std::strcmp(env, "scalar") == 0) requested = Backend::kScalar;
      if (std::strcmp(env, "avx2") == 0) requested = Backend::kAvx2;
    }
  }
#ifdef FSR_HAVE_AVX2_TU
  const bool want_avx2 = requested == Backend::kAvx2 ||
                         (requested == Backend::kAuto && cpu_has_avx2());
  if (want_avx2 && cpu_has_avx2()) return {&kAvx2Ops, Backend::kAvx2, "avx2"};
#endif
  return {&kScalarOps, Backend::kScalar, "scalar"};
}

Dispatch g_dispatch = resolve(Backend::kAuto);

}  // namespace

Backend set_backend(Backend requested) {
  g_dispatch = resolve(requested);
  return g_dispatch.backend;
}

Backend active_backend() { return g_dispatch.backend; }
const char* backend_name() { return g_dispatch.name; }
bool avx2_supported() { return cpu_has_avx2(); }

void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k) {
  g_dispatch.ops->gemm_nt(a, b, c, m, n, k);
}
void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k) {
  g_dispatch.ops->gemm_nn(a, b, c, m, n, k);
}
void gemm_acc_nn(const float* a, const float* b, float* c, int m, int n, int k) {
  g_dispatch.ops->gemm_acc_nn(a, b, c, m, n, k);
}
void gemm_acc_tn(const float* a, const float* b, float* c, int m, int n, int k) {
  g_dispatch.ops->gemm_acc_tn(a, b, c, m, n, k);
}
float dot(const float* a, const float* b, int n) { return g_dispatch.ops->dot(a, b, n); }
float sumsq(const float* a, int n) { return g_dispatch.ops->sumsq(a, n); }
float sumsq_diff(const float* a, const float* b, int n) {
  return g_dispatch.ops->sumsq_diff(a, b, n);
}
void axpy(float alpha, const float* x, float* y, int n) {
  g_dispatch.ops->axpy(alpha, x, y, n);
}
void vadd(const float* a, const float* b, float* out, int n) {
  g_dispatch.ops->vadd(a, b, out, n);
}
void vsub(const float* a, const float* b, float* out, int n) {
  g_dispatch.ops->vsub(a, b, out, n);
}
void vmul(const float* a, const float* b, float* out, int n) {
  g_dispatch.ops->vmul(a, b, out, n);
}
void vscale(float alpha, float* a, int n) { g_dispatch.ops->vscale(alpha, a, n); }
void adamw_step(float* p, float* m, float* v, const float* g, int n, float lr,
                float beta1, float beta2, float eps, float wd, float inv_bc1,
                float inv_bc2) {
  g_dispatch.ops->adamw_step(p, m, v, g, n, lr, beta1, beta2, eps, wd, inv_bc1, inv_bc2);
}

void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  scalar::gemm_nt(a, b, c, m, n, k);
}
void gemm_nn(const double* a, const double* b, double* c, int m, int n, int k) {
  scalar::gemm_nn(a, b, c, m, n, k);
}
void gemm_acc_nn(const double* a, const double* b, double* c, int m, int n, int k) {
  scalar::gemm_acc_nn(a, b, c, m, n, k);
}
void gemm_acc_tn(const double* a, const double* b, double* c, int m, int n, int k) {
  scalar::gemm_acc_tn(a, b, c, m, n, k);
}
double dot(const double* a, const double* b, int n) { return scalar::dot(a, b, n); }
double sumsq(const double* a, int n) { return scalar::sumsq(a, n); }
double sumsq_diff(const double* a, const double* b, int n) {
  return scalar::sumsq_diff(a, b, n);
}
void axpy(double alpha, const double* x, double* y, int n) { scalar::axpy(alpha, x, y, n); }
void vadd(const double* a, const double* b, double* out, int n) {
  scalar::vadd(a, b, out, n);
}
void vsub(const double* a, const double* b, double* out, int n) {
  scalar::vsub(a, b, out, n);
}
void vmul(const double* a, const double* b, double* out, int n) {
  scalar::vmul(a, b, out, n);
}
void vscale(double alpha, double* a, int n) { scalar::vscale(alpha, a, n); }
void adamw_step(double* p, double* m, double* v, const double* g, int n, double lr,
                double beta1, double beta2, double eps, double wd, double inv_bc1,
                double inv_bc2) {
  scalar::adamw_step(p, m, v, g, n, lr, beta1, beta2, eps, wd, inv_bc1, inv_bc2);
}

}  // namespace fsr::kern
