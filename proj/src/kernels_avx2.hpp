// Declarations of the AVX2 kernel variants (see kernels_avx2.cpp).
#pragma once

#ifdef FSR_HAVE_AVX2_TU

namespace fsr::kern::avx2 {

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
void adamw_step(float* p, float* m, float* v, const float* g, int n, float lr,
                float beta1, float beta2, float eps, float wd, float inv_bc1,
                float inv_bc2);

}  // namespace fsr::kern::avx2

#endif
