// The restoration network: a stack of pre-norm vision-transformer blocks
//   x' = x + MSA(LN(x));  out = x' + MLP(LN(x'))
// with inspectable attention and a hand-written backward pass. All math is
// templated so the finite-difference harness can instantiate it in double.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fsr/errors.hpp"
#include "fsr/fsr_core.hpp"
#include "fsr/kernels.hpp"
#include "fsr/rng.hpp"
#include "fsr/tensor.hpp"

namespace fsr {

template <class T>
struct BlockParamsT {
  MatT<T> wq, wk, wv, wo;                      // D x D, row = output unit
  std::vector<T> bq, bk, bv, bo;               // D
  std::vector<T> ln1_g, ln1_b, ln2_g, ln2_b;   // D
  MatT<T> w1;                                  // hidden x D
  std::vector<T> b1;                           // hidden
  MatT<T> w2;                                  // D x hidden
  std::vector<T> b2;                           // D
};

template <class T>
struct RestorationParamsT {
  int depth = 0, dim = 0, heads = 0, mlp_ratio = 4;
  std::vector<BlockParamsT<T>> blocks;

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& b : blocks)
      n += b.wq.size() + b.wk.size() + b.wv.size() + b.wo.size() + b.bq.size() +
           b.bk.size() + b.bv.size() + b.bo.size() + b.ln1_g.size() + b.ln1_b.size() +
           b.ln2_g.size() + b.ln2_b.size() + b.w1.size() + b.b1.size() + b.w2.size() +
           b.b2.size();
    return n;
  }

  template <class U>
  RestorationParamsT<U> cast() const;
};

using RestorationParams = RestorationParamsT<float>;

// Parameter count as a pure function of the architecture.
inline size_t restoration_parameter_count(int depth, int dim, int mlp_ratio) {
  const size_t d = size_t(dim), r = size_t(mlp_ratio);
  return size_t(depth) * ((4 + 2 * r) * d * d + (9 + r) * d);
}

// Per-block, per-head L x L row-stochastic attention matrices.
template <class T>
struct AttentionTraceT {
  std::vector<std::vector<MatT<T>>> blocks;  // [block][head] -> L x L
};

using AttentionTrace = AttentionTraceT<float>;

namespace detail {

template <class T>
BlockParamsT<T> zero_block(int dim, int hidden) {
  BlockParamsT<T> b;
  b.wq = MatT<T>(dim, dim);
  b.wk = MatT<T>(dim, dim);
  b.wv = MatT<T>(dim, dim);
  b.wo = MatT<T>(dim, dim);
  b.bq.assign(size_t(dim), T(0));
  b.bk.assign(size_t(dim), T(0));
  b.bv.assign(size_t(dim), T(0));
  b.bo.assign(size_t(dim), T(0));
  b.ln1_g.assign(size_t(dim), T(0));
  b.ln1_b.assign(size_t(dim), T(0));
  b.ln2_g.assign(size_t(dim), T(0));
  b.ln2_b.assign(size_t(dim), T(0));
  b.w1 = MatT<T>(hidden, dim);
  b.b1.assign(size_t(hidden), T(0));
  b.w2 = MatT<T>(dim, hidden);
  b.b2.assign(size_t(dim), T(0));
  return b;
}

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(-x * x / T(2)) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

constexpr double kLnEps = 1e-5;

// y = g * (x - mean) / sqrt(var + eps) + b; caches xhat and rstd per row.
template <class T>
void layer_norm(const MatT<T>& x, const std::vector<T>& gain, const std::vector<T>& bias,
                MatT<T>& y, MatT<T>& xhat, std::vector<T>& rstd) {
  const int rows = x.rows, d = x.cols;
  y = MatT<T>(rows, d);
  xhat = MatT<T>(rows, d);
  rstd.assign(size_t(rows), T(0));
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.row(r);
    T mean = 0;
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= T(d);
    T var = 0;
    for (int i = 0; i < d; ++i) {
      const T c = xr[i] - mean;
      var += c * c;
    }
    var /= T(d);
    const T rs = T(1) / std::sqrt(var + T(kLnEps));
    rstd[size_t(r)] = rs;
    T* xh = xhat.row(r);
    T* yr = y.row(r);
    for (int i = 0; i < d; ++i) {
      xh[i] = (xr[i] - mean) * rs;
      yr[i] = gain[size_t(i)] * xh[i] + bias[size_t(i)];
    }
  }
}

template <class T>
void layer_norm_backward(const MatT<T>& dy, const MatT<T>& xhat, const std::vector<T>& rstd,
                         const std::vector<T>& gain, MatT<T>& dx_acc,
                         std::vector<T>& dgain, std::vector<T>& dbias) {
  const int rows = dy.rows, d = dy.cols;
  std::vector<T> dxhat(size_t(d), T(0));
  for (int r = 0; r < rows; ++r) {
    const T* dyr = dy.row(r);
    const T* xh = xhat.row(r);
    T sum_dxhat = 0, sum_dxhat_xhat = 0;
    for (int i = 0; i < d; ++i) {
      dgain[size_t(i)] += dyr[i] * xh[i];
      dbias[size_t(i)] += dyr[i];
      dxhat[size_t(i)] = dyr[i] * gain[size_t(i)];
      sum_dxhat += dxhat[size_t(i)];
      sum_dxhat_xhat += dxhat[size_t(i)] * xh[i];
    }
    const T inv_d = T(1) / T(d);
    T* dxr = dx_acc.row(r);
    const T rs = rstd[size_t(r)];
    for (int i = 0; i < d; ++i)
      dxr[i] += rs * (dxhat[size_t(i)] - inv_d * sum_dxhat - xh[i] * inv_d * sum_dxhat_xhat);
  }
}

template <class T>
void add_bias_rows(MatT<T>& m, const std::vector<T>& bias) {
  for (int r = 0; r < m.rows; ++r) kern::vadd(m.row(r), bias.data(), m.row(r), m.cols);
}

template <class T>
void bias_grad(const MatT<T>& d, std::vector<T>& db) {
  for (int r = 0; r < d.rows; ++r)
    for (int c = 0; c < d.cols; ++c) db[size_t(c)] += d.at(r, c);
}

template <class T>
MatT<T> head_slice(const MatT<T>& m, int head, int head_dim) {
  MatT<T> out(m.rows, head_dim);
  for (int r = 0; r < m.rows; ++r)
    std::copy(m.row(r) + size_t(head) * head_dim, m.row(r) + size_t(head + 1) * head_dim,
              out.row(r));
  return out;
}

template <class T>
void head_scatter_acc(const MatT<T>& slice, int head, MatT<T>& full) {
  const int hd = slice.cols;
  for (int r = 0; r < slice.rows; ++r) {
    T* dst = full.row(r) + size_t(head) * hd;
    for (int c = 0; c < hd; ++c) dst[c] += slice.at(r, c);
  }
}

}  // namespace detail

// Saved activations for one block's backward pass.
template <class T>
struct BlockCacheT {
  MatT<T> x_in;
  MatT<T> xhat1, xn;
  std::vector<T> rstd1;
  MatT<T> q, k, v;
  std::vector<MatT<T>> attn;  // per head, L x L post-softmax
  MatT<T> ctx;
  MatT<T> x_res;
  MatT<T> xhat2, xn2;
  std::vector<T> rstd2;
  MatT<T> hpre, hact;
};

inline RestorationParams init_params(int depth, int dim, int heads, int mlp_ratio,
                                     uint64_t seed) {
  if (depth < 0 || dim <= 0 || heads <= 0 || mlp_ratio <= 0)
    throw ConfigError("restoration params: sizes must be positive");
  if (dim % heads != 0)
    throw ConfigError("model width " + std::to_string(dim) +
                      " is not divisible by head count " + std::to_string(heads));
  RestorationParams params;
  params.depth = depth;
  params.dim = dim;
  params.heads = heads;
  params.mlp_ratio = mlp_ratio;

  Rng rng(seed);
  // Output projections start small so every block opens near the identity.
  const float out_scale = depth > 0 ? 1.f / std::sqrt(2.f * float(depth)) : 1.f;
  for (int b = 0; b < depth; ++b) {
    auto blk = detail::zero_block<float>(dim, dim * mlp_ratio);
    for (auto& w : blk.wq.v) w = float(rng.trunc_normal(0.02));
    for (auto& w : blk.wk.v) w = float(rng.trunc_normal(0.02));
    for (auto& w : blk.wv.v) w = float(rng.trunc_normal(0.02));
    for (auto& w : blk.wo.v) w = float(rng.trunc_normal(0.02)) * out_scale;
    for (auto& w : blk.w1.v) w = float(rng.trunc_normal(0.02));
    for (auto& w : blk.w2.v) w = float(rng.trunc_normal(0.02)) * out_scale;
    std::fill(blk.ln1_g.begin(), blk.ln1_g.end(), 1.f);
    std::fill(blk.ln2_g.begin(), blk.ln2_g.end(), 1.f);
    params.blocks.push_back(std::move(blk));
  }
  return params;
}

// Exact zeroing of both residual-branch outputs; turns every block into the
// identity map (the shortcut configuration).
template <class T>
void zero_output_projections(RestorationParamsT<T>& params) {
  for (auto& b : params.blocks) {
    b.wo.zero();
    std::fill(b.bo.begin(), b.bo.end(), T(0));
    b.w2.zero();
    std::fill(b.b2.begin(), b.b2.end(), T(0));
  }
}

template <class T>
RestorationParamsT<T> zeros_like(const RestorationParamsT<T>& p) {
  RestorationParamsT<T> g;
  g.depth = p.depth;
  g.dim = p.dim;
  g.heads = p.heads;
  g.mlp_ratio = p.mlp_ratio;
  for (int b = 0; b < p.depth; ++b)
    g.blocks.push_back(detail::zero_block<T>(p.dim, p.dim * p.mlp_ratio));
  return g;
}

template <class T>
template <class U>
RestorationParamsT<U> RestorationParamsT<T>::cast() const {
  RestorationParamsT<U> out;
  out.depth = depth;
  out.dim = dim;
  out.heads = heads;
  out.mlp_ratio = mlp_ratio;
  auto cast_mat = [](const MatT<T>& m) {
    MatT<U> r(m.rows, m.cols);
    for (size_t i = 0; i < m.v.size(); ++i) r.v[i] = U(m.v[i]);
    return r;
  };
  for (const auto& b : blocks) {
    BlockParamsT<U> o;
    o.wq = cast_mat(b.wq);
    o.wk = cast_mat(b.wk);
    o.wv = cast_mat(b.wv);
    o.wo = cast_mat(b.wo);
    o.bq.assign(b.bq.begin(), b.bq.end());
    o.bk.assign(b.bk.begin(), b.bk.end());
    o.bv.assign(b.bv.begin(), b.bv.end());
    o.bo.assign(b.bo.begin(), b.bo.end());
    o.ln1_g.assign(b.ln1_g.begin(), b.ln1_g.end());
    o.ln1_b.assign(b.ln1_b.begin(), b.ln1_b.end());
    o.ln2_g.assign(b.ln2_g.begin(), b.ln2_g.end());
    o.ln2_b.assign(b.ln2_b.begin(), b.ln2_b.end());
    o.w1 = cast_mat(b.w1);
    o.b1.assign(b.b1.begin(), b.b1.end());
    o.w2 = cast_mat(b.w2);
    o.b2.assign(b.b2.begin(), b.b2.end());
    out.blocks.push_back(std::move(o));
  }
  return out;
}

// One block: the two-residual pre-norm composition. Fills `cache` when given (needed
// for backward) and `trace_heads` when attention is being inspected.
template <class T>
MatT<T> block_forward_impl(const MatT<T>& x, const BlockParamsT<T>& blk, int heads,
                           BlockCacheT<T>* cache, std::vector<MatT<T>>* trace_heads) {
  const int L = x.rows, d = x.cols;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));

  MatT<T> xn, xhat1;
  std::vector<T> rstd1;
  detail::layer_norm(x, blk.ln1_g, blk.ln1_b, xn, xhat1, rstd1);

  MatT<T> q(L, d), k(L, d), v(L, d);
  kern::gemm_nt(xn.v.data(), blk.wq.v.data(), q.v.data(), L, d, d);
  kern::gemm_nt(xn.v.data(), blk.wk.v.data(), k.v.data(), L, d, d);
  kern::gemm_nt(xn.v.data(), blk.wv.v.data(), v.v.data(), L, d, d);
  detail::add_bias_rows(q, blk.bq);
  detail::add_bias_rows(k, blk.bk);
  detail::add_bias_rows(v, blk.bv);

  MatT<T> ctx(L, d);
  std::vector<MatT<T>> attn(size_t(heads), MatT<T>{});
  for (int h = 0; h < heads; ++h) {
    const MatT<T> qh = detail::head_slice(q, h, hd);
    const MatT<T> kh = detail::head_slice(k, h, hd);
    const MatT<T> vh = detail::head_slice(v, h, hd);
    MatT<T> scores(L, L);
    kern::gemm_nt(qh.v.data(), kh.v.data(), scores.v.data(), L, L, hd);
    for (auto& s : scores.v) s *= scale;
    // Row softmax with max subtraction.
    for (int r = 0; r < L; ++r) {
      T* row = scores.row(r);
      T mx = row[0];
      for (int c = 1; c < L; ++c) mx = std::max(mx, row[c]);
      T sum = 0;
      for (int c = 0; c < L; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
      }
      const T inv = T(1) / sum;
      for (int c = 0; c < L; ++c) row[c] *= inv;
    }
    MatT<T> ctx_h(L, hd);
    kern::gemm_nn(scores.v.data(), vh.v.data(), ctx_h.v.data(), L, hd, L);
    detail::head_scatter_acc(ctx_h, h, ctx);
    attn[size_t(h)] = std::move(scores);
  }

  MatT<T> att_out(L, d);
  kern::gemm_nt(ctx.v.data(), blk.wo.v.data(), att_out.v.data(), L, d, d);
  detail::add_bias_rows(att_out, blk.bo);

  MatT<T> x_res(L, d);
  kern::vadd(x.v.data(), att_out.v.data(), x_res.v.data(), int(x.v.size()));

  MatT<T> xn2, xhat2;
  std::vector<T> rstd2;
  detail::layer_norm(x_res, blk.ln2_g, blk.ln2_b, xn2, xhat2, rstd2);

  const int hidden = blk.w1.rows;
  MatT<T> hpre(L, hidden);
  kern::gemm_nt(xn2.v.data(), blk.w1.v.data(), hpre.v.data(), L, hidden, d);
  detail::add_bias_rows(hpre, blk.b1);
  MatT<T> hact(L, hidden);
  for (size_t i = 0; i < hpre.v.size(); ++i) hact.v[i] = detail::gelu(hpre.v[i]);

  MatT<T> mlp_out(L, d);
  kern::gemm_nt(hact.v.data(), blk.w2.v.data(), mlp_out.v.data(), L, d, hidden);
  detail::add_bias_rows(mlp_out, blk.b2);

  MatT<T> out(L, d);
  kern::vadd(x_res.v.data(), mlp_out.v.data(), out.v.data(), int(out.v.size()));

  if (trace_heads != nullptr) *trace_heads = attn;
  if (cache != nullptr) {
    cache->x_in = x;
    cache->xhat1 = std::move(xhat1);
    cache->xn = std::move(xn);
    cache->rstd1 = std::move(rstd1);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->ctx = std::move(ctx);
    cache->x_res = std::move(x_res);
    cache->xhat2 = std::move(xhat2);
    cache->xn2 = std::move(xn2);
    cache->rstd2 = std::move(rstd2);
    cache->hpre = std::move(hpre);
    cache->hact = std::move(hact);
  }
  return out;
}

// Backward through one block; accumulates into `grads` and returns dL/dx.
template <class T>
MatT<T> block_backward_impl(const MatT<T>& dout, const BlockParamsT<T>& blk, int heads,
                            const BlockCacheT<T>& cache, BlockParamsT<T>& grads) {
  const int L = dout.rows, d = dout.cols;
  const int hd = d / heads;
  const int hidden = blk.w1.rows;
  const T scale = T(1) / std::sqrt(T(hd));

  // out = x_res + mlp_out
  const MatT<T>& dmlp = dout;
  MatT<T> dx_res = dout;  // residual branch

  // mlp_out = gelu(xn2 W1^T + b1) W2^T + b2
  MatT<T> dhact(L, hidden);
  kern::gemm_nn(dmlp.v.data(), blk.w2.v.data(), dhact.v.data(), L, hidden, d);
  kern::gemm_acc_tn(dmlp.v.data(), cache.hact.v.data(), grads.w2.v.data(), L, d, hidden);
  detail::bias_grad(dmlp, grads.b2);

  MatT<T> dhpre(L, hidden);
  for (size_t i = 0; i < dhpre.v.size(); ++i)
    dhpre.v[i] = dhact.v[i] * detail::gelu_grad(cache.hpre.v[i]);

  MatT<T> dxn2(L, d);
  kern::gemm_nn(dhpre.v.data(), blk.w1.v.data(), dxn2.v.data(), L, d, hidden);
  kern::gemm_acc_tn(dhpre.v.data(), cache.xn2.v.data(), grads.w1.v.data(), L, hidden, d);
  detail::bias_grad(dhpre, grads.b1);

  detail::layer_norm_backward(dxn2, cache.xhat2, cache.rstd2, blk.ln2_g, dx_res,
                              grads.ln2_g, grads.ln2_b);

  // x_res = x + ctx Wo^T + bo
  MatT<T> dx = dx_res;
  MatT<T> dctx(L, d);
  kern::gemm_nn(dx_res.v.data(), blk.wo.v.data(), dctx.v.data(), L, d, d);
  kern::gemm_acc_tn(dx_res.v.data(), cache.ctx.v.data(), grads.wo.v.data(), L, d, d);
  detail::bias_grad(dx_res, grads.bo);

  MatT<T> dq(L, d), dk(L, d), dv(L, d);
  for (int h = 0; h < heads; ++h) {
    const MatT<T> dctx_h = detail::head_slice(dctx, h, hd);
    const MatT<T> qh = detail::head_slice(cache.q, h, hd);
    const MatT<T> kh = detail::head_slice(cache.k, h, hd);
    const MatT<T> vh = detail::head_slice(cache.v, h, hd);
    const MatT<T>& p = cache.attn[size_t(h)];

    MatT<T> dp(L, L);
    kern::gemm_nt(dctx_h.v.data(), vh.v.data(), dp.v.data(), L, L, hd);
    MatT<T> dvh(L, hd);
    kern::gemm_acc_tn(p.v.data(), dctx_h.v.data(), dvh.v.data(), L, L, hd);

    // Softmax backward per row.
    MatT<T> ds(L, L);
    for (int r = 0; r < L; ++r) {
      const T* pr = p.row(r);
      const T* dpr = dp.row(r);
      T rowdot = 0;
      for (int c = 0; c < L; ++c) rowdot += pr[c] * dpr[c];
      T* dsr = ds.row(r);
      for (int c = 0; c < L; ++c) dsr[c] = pr[c] * (dpr[c] - rowdot) * scale;
    }

    MatT<T> dqh(L, hd), dkh(L, hd);
    kern::gemm_nn(ds.v.data(), kh.v.data(), dqh.v.data(), L, hd, L);
    kern::gemm_acc_tn(ds.v.data(), qh.v.data(), dkh.v.data(), L, L, hd);

    detail::head_scatter_acc(dqh, h, dq);
    detail::head_scatter_acc(dkh, h, dk);
    detail::head_scatter_acc(dvh, h, dv);
  }

  MatT<T> dxn(L, d);
  kern::gemm_nn(dq.v.data(), blk.wq.v.data(), dxn.v.data(), L, d, d);
  kern::gemm_acc_nn(dk.v.data(), blk.wk.v.data(), dxn.v.data(), L, d, d);
  kern::gemm_acc_nn(dv.v.data(), blk.wv.v.data(), dxn.v.data(), L, d, d);
  kern::gemm_acc_tn(dq.v.data(), cache.xn.v.data(), grads.wq.v.data(), L, d, d);
  kern::gemm_acc_tn(dk.v.data(), cache.xn.v.data(), grads.wk.v.data(), L, d, d);
  kern::gemm_acc_tn(dv.v.data(), cache.xn.v.data(), grads.wv.v.data(), L, d, d);
  detail::bias_grad(dq, grads.bq);
  detail::bias_grad(dk, grads.bk);
  detail::bias_grad(dv, grads.bv);

  detail::layer_norm_backward(dxn, cache.xhat1, cache.rstd1, blk.ln1_g, dx, grads.ln1_g,
                              grads.ln1_b);
  return dx;
}

// Single-block entry point with its attention trace.
template <class T>
std::pair<TokenSequenceT<T>, std::vector<MatT<T>>> block_forward(
    const TokenSequenceT<T>& x, const BlockParamsT<T>& blk, int heads) {
  std::vector<MatT<T>> trace;
  TokenSequenceT<T> out = x;
  out.tokens = block_forward_impl(x.tokens, blk, heads, static_cast<BlockCacheT<T>*>(nullptr),
                                  &trace);
  return {std::move(out), std::move(trace)};
}

// Sequential application of all N blocks; traces collected only on request.
template <class T>
TokenSequenceT<T> restore(const TokenSequenceT<T>& seq, const RestorationParamsT<T>& params,
                          AttentionTraceT<T>* trace = nullptr) {
  if (seq.dim() != params.dim && params.depth > 0)
    throw ConfigError("restore: token width " + std::to_string(seq.dim()) +
                      " != model width " + std::to_string(params.dim));
  TokenSequenceT<T> out = seq;
  if (trace != nullptr) trace->blocks.clear();
  for (const auto& blk : params.blocks) {
    std::vector<MatT<T>> heads_trace;
    out.tokens = block_forward_impl(out.tokens, blk, params.heads, static_cast<BlockCacheT<T>*>(nullptr),
                                    trace != nullptr ? &heads_trace : nullptr);
    if (trace != nullptr) trace->blocks.push_back(std::move(heads_trace));
  }
  return out;
}

template <class T>
TokenSequenceT<T> restore_training(const TokenSequenceT<T>& seq,
                                   const RestorationParamsT<T>& params,
                                   std::vector<BlockCacheT<T>>& caches) {
  caches.assign(size_t(params.depth), BlockCacheT<T>{});
  TokenSequenceT<T> out = seq;
  for (int b = 0; b < params.depth; ++b)
    out.tokens = block_forward_impl(out.tokens, params.blocks[size_t(b)], params.heads,
                                    &caches[size_t(b)], static_cast<std::vector<MatT<T>>*>(nullptr));
  return out;
}

template <class T>
MatT<T> restore_backward(const MatT<T>& grad_out, const RestorationParamsT<T>& params,
                         const std::vector<BlockCacheT<T>>& caches,
                         RestorationParamsT<T>& grads) {
  MatT<T> d = grad_out;
  for (int b = params.depth - 1; b >= 0; --b)
    d = block_backward_impl(d, params.blocks[size_t(b)], params.heads, caches[size_t(b)],
                            grads.blocks[size_t(b)]);
  return d;
}

// Named-tensor visitation (checkpointing, optimizer state, gradient sweeps).
// fn(name, pointer, element_count); order is stable.
template <class T, class Fn>
void for_each_tensor(RestorationParamsT<T>& params, Fn&& fn) {
  for (int i = 0; i < params.depth; ++i) {
    auto& b = params.blocks[size_t(i)];
    const std::string p = "block" + std::to_string(i) + ".";
    fn(p + "wq", b.wq.v.data(), b.wq.size());
    fn(p + "bq", b.bq.data(), b.bq.size());
    fn(p + "wk", b.wk.v.data(), b.wk.size());
    fn(p + "bk", b.bk.data(), b.bk.size());
    fn(p + "wv", b.wv.v.data(), b.wv.size());
    fn(p + "bv", b.bv.data(), b.bv.size());
    fn(p + "wo", b.wo.v.data(), b.wo.size());
    fn(p + "bo", b.bo.data(), b.bo.size());
    fn(p + "ln1_g", b.ln1_g.data(), b.ln1_g.size());
    fn(p + "ln1_b", b.ln1_b.data(), b.ln1_b.size());
    fn(p + "ln2_g", b.ln2_g.data(), b.ln2_g.size());
    fn(p + "ln2_b", b.ln2_b.data(), b.ln2_b.size());
    fn(p + "w1", b.w1.v.data(), b.w1.size());
    fn(p + "b1", b.b1.data(), b.b1.size());
    fn(p + "w2", b.w2.v.data(), b.w2.size());
    fn(p + "b2", b.b2.data(), b.b2.size());
  }
}

template <class T, class Fn>
void for_each_tensor(PatchProjectionT<T>& proj, Fn&& fn) {
  fn(std::string("proj.embed_w"), proj.embed_w.v.data(), proj.embed_w.size());
  fn(std::string("proj.embed_b"), proj.embed_b.data(), proj.embed_b.size());
  fn(std::string("proj.unembed_w"), proj.unembed_w.v.data(), proj.unembed_w.size());
  fn(std::string("proj.unembed_b"), proj.unembed_b.data(), proj.unembed_b.size());
}

}  // namespace fsr
