// Tokenization of fused feature maps into non-overlapping P x P blocks, the
// shuffling-rate-controlled random shuffle, fixed sinusoidal positional
// encoding, and de-tokenization of restored sequences.
//
// Shuffle semantics (rate tau in [0,1], sequence length L):
//   num_s = floor(L * tau) slots are drawn without replacement; their
//   contents are permuted uniformly among themselves (fixed points allowed);
//   every other slot is untouched. A ShuffleRecord captures the draw exactly
//   and replays bit-for-bit.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "fsr/errors.hpp"
#include "fsr/kernels.hpp"
#include "fsr/rng.hpp"
#include "fsr/tensor.hpp"

namespace fsr {

template <class T>
struct TokenSequenceT {
  MatT<T> tokens;  // L x D, slot-major
  int grid_rows = 0, grid_cols = 0, patch = 0;

  int length() const { return tokens.rows; }
  int dim() const { return tokens.cols; }

  template <class U>
  TokenSequenceT<U> cast() const {
    TokenSequenceT<U> out;
    out.tokens = MatT<U>(tokens.rows, tokens.cols);
    for (size_t i = 0; i < tokens.v.size(); ++i) out.tokens.v[i] = U(tokens.v[i]);
    out.grid_rows = grid_rows;
    out.grid_cols = grid_cols;
    out.patch = patch;
    return out;
  }
};

using TokenSequence = TokenSequenceT<float>;

struct ShuffleRecord {
  double tau = 0.0;
  std::vector<uint32_t> selected;  // distinct slots, in draw order
  std::vector<uint32_t> sources;   // sources[j] lands at selected[j]; bijection on selected

  bool empty() const { return selected.empty(); }

  // Wire format: version byte, tau as float64 LE, u32 count, then the two
  // index lists as little-endian u32 arrays.
  std::vector<uint8_t> serialize() const;
  static ShuffleRecord deserialize(const std::vector<uint8_t>& bytes);
};

// Trainable affine maps between P x P x C blocks and D-dim tokens.
template <class T>
struct PatchProjectionT {
  MatT<T> embed_w;            // D x (P*P*C)
  std::vector<T> embed_b;     // D
  MatT<T> unembed_w;          // (P*P*C) x D
  std::vector<T> unembed_b;   // P*P*C
  int patch = 0, channels = 0, dim = 0;

  int block_size() const { return patch * patch * channels; }
  size_t parameter_count() const {
    return embed_w.size() + embed_b.size() + unembed_w.size() + unembed_b.size();
  }

  template <class U>
  PatchProjectionT<U> cast() const {
    PatchProjectionT<U> out;
    out.embed_w = MatT<U>(embed_w.rows, embed_w.cols);
    for (size_t i = 0; i < embed_w.v.size(); ++i) out.embed_w.v[i] = U(embed_w.v[i]);
    out.embed_b.assign(embed_b.begin(), embed_b.end());
    out.unembed_w = MatT<U>(unembed_w.rows, unembed_w.cols);
    for (size_t i = 0; i < unembed_w.v.size(); ++i) out.unembed_w.v[i] = U(unembed_w.v[i]);
    out.unembed_b.assign(unembed_b.begin(), unembed_b.end());
    out.patch = patch;
    out.channels = channels;
    out.dim = dim;
    return out;
  }
};

using PatchProjection = PatchProjectionT<float>;

inline PatchProjection init_patch_projection(int patch, int channels, int dim, Rng& rng) {
  if (patch <= 0 || channels <= 0 || dim <= 0)
    throw ConfigError("patch projection: sizes must be positive");
  PatchProjection proj;
  proj.patch = patch;
  proj.channels = channels;
  proj.dim = dim;
  const int block = patch * patch * channels;
  proj.embed_w = Mat(dim, block);
  for (auto& w : proj.embed_w.v) w = float(rng.trunc_normal(0.02));
  proj.embed_b.assign(size_t(dim), 0.f);
  proj.unembed_w = Mat(block, dim);
  for (auto& w : proj.unembed_w.v) w = float(rng.trunc_normal(0.02));
  proj.unembed_b.assign(size_t(block), 0.f);
  return proj;
}

// Row-major block traversal: slot l = block_row * grid_cols + block_col, and
// a block vector is laid out (py * P + px) * C + c, matching the map layout.
template <class T>
MatT<T> blocks_from_map(const FeatureMapT<T>& map, int patch) {
  if (patch <= 0 || map.h % patch != 0 || map.w % patch != 0)
    throw ConfigError("tokenize: patch size " + std::to_string(patch) +
                      " does not divide feature map " + std::to_string(map.h) + "x" +
                      std::to_string(map.w));
  const int rows = map.h / patch, cols = map.w / patch;
  const int block = patch * patch * map.c;
  MatT<T> blocks(rows * cols, block);
  for (int br = 0; br < rows; ++br)
    for (int bc = 0; bc < cols; ++bc) {
      T* dst = blocks.row(br * cols + bc);
      for (int py = 0; py < patch; ++py) {
        const T* src = map.at(br * patch + py, bc * patch);
        std::copy(src, src + size_t(patch) * map.c, dst + size_t(py) * patch * map.c);
      }
    }
  return blocks;
}

template <class T>
FeatureMapT<T> map_from_blocks(const MatT<T>& blocks, int grid_rows, int grid_cols,
                               int patch, int channels) {
  FeatureMapT<T> map(grid_rows * patch, grid_cols * patch, channels);
  for (int br = 0; br < grid_rows; ++br)
    for (int bc = 0; bc < grid_cols; ++bc) {
      const T* src = blocks.row(br * grid_cols + bc);
      for (int py = 0; py < patch; ++py) {
        T* dst = map.at(br * patch + py, bc * patch);
        std::copy(src + size_t(py) * patch * channels,
                  src + size_t(py + 1) * patch * channels, dst);
      }
    }
  return map;
}

template <class T>
MatT<T> embed_blocks(const MatT<T>& blocks, const PatchProjectionT<T>& proj) {
  MatT<T> tokens(blocks.rows, proj.dim);
  kern::gemm_nt(blocks.v.data(), proj.embed_w.v.data(), tokens.v.data(), blocks.rows,
                proj.dim, proj.block_size());
  for (int l = 0; l < tokens.rows; ++l)
    kern::vadd(tokens.row(l), proj.embed_b.data(), tokens.row(l), proj.dim);
  return tokens;
}

template <class T>
TokenSequenceT<T> tokenize(const FeatureMapT<T>& map, const PatchProjectionT<T>& proj) {
  if (map.c != proj.channels)
    throw ConfigError("tokenize: map has " + std::to_string(map.c) +
                      " channels, projection expects " + std::to_string(proj.channels));
  const MatT<T> blocks = blocks_from_map(map, proj.patch);
  TokenSequenceT<T> seq;
  seq.grid_rows = map.h / proj.patch;
  seq.grid_cols = map.w / proj.patch;
  seq.patch = proj.patch;
  seq.tokens = embed_blocks(blocks, proj);
  return seq;
}

template <class T>
FeatureMapT<T> detokenize(const TokenSequenceT<T>& seq, const PatchProjectionT<T>& proj) {
  if (seq.dim() != proj.dim || seq.length() != seq.grid_rows * seq.grid_cols)
    throw ConfigError("detokenize: sequence/projection shape mismatch");
  const int block = proj.block_size();
  MatT<T> blocks(seq.length(), block);
  kern::gemm_nt(seq.tokens.v.data(), proj.unembed_w.v.data(), blocks.v.data(),
                seq.length(), block, proj.dim);
  for (int l = 0; l < blocks.rows; ++l)
    kern::vadd(blocks.row(l), proj.unembed_b.data(), blocks.row(l), block);
  return map_from_blocks(blocks, seq.grid_rows, seq.grid_cols, proj.patch, proj.channels);
}

// Sinusoidal table: t[l, 2i] = sin(l / 10000^(2i/D)),
// t[l, 2i+1] = cos(l / 10000^(2i/D)). No trainable parameters.
template <class T>
MatT<T> positional_table(int length, int dim) {
  if (dim % 2 != 0) throw ConfigError("positional table requires an even dimension");
  MatT<T> table(length, dim);
  for (int l = 0; l < length; ++l) {
    T* row = table.row(l);
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = double(l) / std::pow(10000.0, (2.0 * i) / double(dim));
      row[2 * i] = T(std::sin(angle));
      row[2 * i + 1] = T(std::cos(angle));
    }
  }
  return table;
}

// The table is indexed by slot position, never by token provenance.
template <class T>
TokenSequenceT<T> add_positions(const TokenSequenceT<T>& seq, const MatT<T>& table) {
  if (table.rows != seq.length() || table.cols != seq.dim())
    throw ConfigError("add_positions: table shape mismatch");
  TokenSequenceT<T> out = seq;
  kern::vadd(out.tokens.v.data(), table.v.data(), out.tokens.v.data(),
             int(out.tokens.v.size()));
  return out;
}

template <class T>
PatchProjectionT<T> zeros_like(const PatchProjectionT<T>& proj) {
  PatchProjectionT<T> g;
  g.patch = proj.patch;
  g.channels = proj.channels;
  g.dim = proj.dim;
  g.embed_w = MatT<T>(proj.embed_w.rows, proj.embed_w.cols);
  g.embed_b.assign(proj.embed_b.size(), T(0));
  g.unembed_w = MatT<T>(proj.unembed_w.rows, proj.unembed_w.cols);
  g.unembed_b.assign(proj.unembed_b.size(), T(0));
  return g;
}

// Backward of detokenize: routes dL/dMap into dL/dTokens and accumulates the
// unembed parameter gradients. `tokens` is the forward input sequence.
template <class T>
MatT<T> detokenize_backward(const FeatureMapT<T>& grad_map, const MatT<T>& tokens,
                            const PatchProjectionT<T>& proj, PatchProjectionT<T>& grads) {
  const MatT<T> grad_blocks = blocks_from_map(grad_map, proj.patch);
  const int block = proj.block_size();
  MatT<T> grad_tokens(tokens.rows, proj.dim);
  kern::gemm_nn(grad_blocks.v.data(), proj.unembed_w.v.data(), grad_tokens.v.data(),
                grad_blocks.rows, proj.dim, block);
  kern::gemm_acc_tn(grad_blocks.v.data(), tokens.v.data(), grads.unembed_w.v.data(),
                    grad_blocks.rows, block, proj.dim);
  for (int l = 0; l < grad_blocks.rows; ++l)
    kern::vadd(grads.unembed_b.data(), grad_blocks.row(l), grads.unembed_b.data(), block);
  return grad_tokens;
}

// Backward of tokenize: routes dL/dTokens into dL/dMap and accumulates the
// embed parameter gradients. `blocks` is the forward block matrix.
template <class T>
FeatureMapT<T> tokenize_backward(const MatT<T>& grad_tokens, const MatT<T>& blocks,
                                 const PatchProjectionT<T>& proj, PatchProjectionT<T>& grads,
                                 int grid_rows, int grid_cols) {
  const int block = proj.block_size();
  MatT<T> grad_blocks(blocks.rows, block);
  kern::gemm_nn(grad_tokens.v.data(), proj.embed_w.v.data(), grad_blocks.v.data(),
                grad_tokens.rows, block, proj.dim);
  kern::gemm_acc_tn(grad_tokens.v.data(), blocks.v.data(), grads.embed_w.v.data(),
                    grad_tokens.rows, proj.dim, block);
  for (int l = 0; l < grad_tokens.rows; ++l)
    kern::vadd(grads.embed_b.data(), grad_tokens.row(l), grads.embed_b.data(), proj.dim);
  return map_from_blocks(grad_blocks, grid_rows, grid_cols, proj.patch, proj.channels);
}

// Instrumentation: evaluate/predict assert this stays flat at test time.
inline std::atomic<uint64_t>& shuffle_invocation_count() {
  static std::atomic<uint64_t> count{0};
  return count;
}

ShuffleRecord make_shuffle_record(int length, double tau, Rng& rng);

template <class T>
TokenSequenceT<T> apply_shuffle(const TokenSequenceT<T>& seq, const ShuffleRecord& rec) {
  TokenSequenceT<T> out = seq;
  for (size_t j = 0; j < rec.selected.size(); ++j) {
    if (rec.selected[j] >= uint32_t(seq.length()) || rec.sources[j] >= uint32_t(seq.length()))
      throw ConfigError("shuffle record index out of range");
    std::copy(seq.tokens.row(int(rec.sources[j])),
              seq.tokens.row(int(rec.sources[j])) + seq.dim(),
              out.tokens.row(int(rec.selected[j])));
  }
  return out;
}

template <class T>
std::pair<TokenSequenceT<T>, ShuffleRecord> random_shuffle(const TokenSequenceT<T>& seq,
                                                           double tau, Rng& rng) {
  const ShuffleRecord rec = make_shuffle_record(seq.length(), tau, rng);
  return {apply_shuffle(seq, rec), rec};
}

// Gradient of apply_shuffle: routes each shuffled slot's gradient back to the
// token that produced it.
template <class T>
MatT<T> shuffle_backward(const MatT<T>& grad_out, const ShuffleRecord& rec) {
  MatT<T> grad_in = grad_out;
  for (size_t j = 0; j < rec.selected.size(); ++j)
    std::copy(grad_out.row(int(rec.selected[j])),
              grad_out.row(int(rec.selected[j])) + grad_out.cols,
              grad_in.row(int(rec.sources[j])));
  return grad_in;
}

}  // namespace fsr
