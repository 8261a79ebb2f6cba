#include "fsr/fsr_core.hpp"

#include <cstring>

namespace fsr {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("shuffle record: truncated");
  const uint32_t v = uint32_t(in[pos]) | (uint32_t(in[pos + 1]) << 8) |
                     (uint32_t(in[pos + 2]) << 16) | (uint32_t(in[pos + 3]) << 24);
  pos += 4;
  return v;
}

}  // namespace

ShuffleRecord make_shuffle_record(int length, double tau, Rng& rng) {
  if (tau < 0.0 || tau > 1.0)
    throw ConfigError("shuffling rate must lie in [0,1], got " + std::to_string(tau));
  if (length < 0) throw ConfigError("shuffle: negative sequence length");
  shuffle_invocation_count().fetch_add(1, std::memory_order_relaxed);

  ShuffleRecord rec;
  rec.tau = tau;
  const int num_s = int(double(length) * tau);  // floor, as in the pseudo-code
  if (num_s <= 0) return rec;

  const auto perm = rng.permutation(uint32_t(length));
  rec.selected.assign(perm.begin(), perm.begin() + num_s);
  const auto inner = rng.permutation(uint32_t(num_s));
  rec.sources.resize(size_t(num_s));
  for (int j = 0; j < num_s; ++j) rec.sources[size_t(j)] = rec.selected[inner[size_t(j)]];
  return rec;
}

std::vector<uint8_t> ShuffleRecord::serialize() const {
  std::vector<uint8_t> out;
  out.push_back(1);  // version
  uint64_t tau_bits;
  static_assert(sizeof(tau_bits) == sizeof(tau));
  std::memcpy(&tau_bits, &tau, 8);
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(tau_bits >> (8 * i)));
  put_u32(out, uint32_t(selected.size()));
  for (uint32_t v : selected) put_u32(out, v);
  for (uint32_t v : sources) put_u32(out, v);
  return out;
}

ShuffleRecord ShuffleRecord::deserialize(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 13) throw DataError("shuffle record: truncated");
  if (bytes[0] != 1) throw DataError("shuffle record: unsupported version");
  ShuffleRecord rec;
  uint64_t tau_bits = 0;
  for (int i = 0; i < 8; ++i) tau_bits |= uint64_t(bytes[size_t(1 + i)]) << (8 * i);
  std::memcpy(&rec.tau, &tau_bits, 8);
  size_t pos = 9;
  const uint32_t n = get_u32(bytes, pos);
  rec.selected.resize(n);
  for (uint32_t& v : rec.selected) v = get_u32(bytes, pos);
  rec.sources.resize(n);
  for (uint32_t& v : rec.sources) v = get_u32(bytes, pos);
  return rec;
}

}  // namespace fsr
