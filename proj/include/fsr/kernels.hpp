// Arithmetic kernels behind the model math. Float entry points dispatch at
// runtime between the scalar reference implementation and the AVX2 variants
// (equivalence-tested against each other); double entry points always take
// the scalar path and exist for the finite-difference test harness.
//
// GEMM naming: n = as stored (row-major), t = transposed operand.
//   gemm_nt     c[m,n]  = sum_k a[m,k] * b[n,k]
//   gemm_nn     c[m,n]  = sum_k a[m,k] * b[k,n]
//   gemm_acc_nn c[m,k] += sum_n a[m,n] * b[n,k]
//   gemm_acc_tn c[n,k] += sum_m a[m,n] * b[m,k]
#pragma once

#include <cstddef>

namespace fsr::kern {

enum class Backend { kAuto, kScalar, kAvx2 };

// Select the active float backend. kAuto probes CPU features and honors the
// FSR_KERNELS environment variable ("scalar" / "avx2"). Returns the backend
// actually selected.
Backend set_backend(Backend requested);
Backend active_backend();
const char* backend_name();
bool avx2_supported();

// ---- float API (dispatched) ----
void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k);
void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k);
void gemm_acc_nn(const float* a, const float* b, float* c, int m, int n, int k);
void gemm_acc_tn(const float* a, const float* b, float* c, int m, int n, int k);
float dot(const float* a, const float* b, int n);
float sumsq(const float* a, int n);
float sumsq_diff(const float* a, const float* b, int n);
void axpy(float alpha, const float* x, float* y, int n);
void vadd(const float* a, const float* b, float* out, int n);
void vsub(const float* a, const float* b, float* out, int n);
void vmul(const float* a, const float* b, float* out, int n);
void vscale(float alpha, float* a, int n);

// Decoupled-weight-decay adaptive moment update, applied in place.
// inv_bc1/inv_bc2 are 1/(1-beta1^t), 1/(1-beta2^t).
void adamw_step(float* p, float* m, float* v, const float* g, int n, float lr,
                float beta1, float beta2, float eps, float wd, float inv_bc1,
                float inv_bc2);

// ---- double API (scalar only; used by gradient-check instantiations) ----
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k);
void gemm_nn(const double* a, const double* b, double* c, int m, int n, int k);
void gemm_acc_nn(const double* a, const double* b, double* c, int m, int n, int k);
void gemm_acc_tn(const double* a, const double* b, double* c, int m, int n, int k);
double dot(const double* a, const double* b, int n);
double sumsq(const double* a, int n);
double sumsq_diff(const double* a, const double* b, int n);
void axpy(double alpha, const double* x, double* y, int n);
void vadd(const double* a, const double* b, double* out, int n);
void vsub(const double* a, const double* b, double* out, int n);
void vmul(const double* a, const double* b, double* out, int n);
void vscale(double alpha, double* a, int n);
void adamw_step(double* p, double* m, double* v, const double* g, int n, double lr,
                double beta1, double beta2, double eps, double wd, double inv_bc1,
                double inv_bc2);

}  // namespace fsr::kern
