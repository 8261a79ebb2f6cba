#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fsr/errors.hpp"
#include "fsr/fsr_core.hpp"
#include "fsr/rng.hpp"
#include "test_util.hpp"

using namespace fsr;

namespace {

TokenSequence random_sequence(Rng& rng, int grid, int dim, int patch = 4) {
  TokenSequence seq;
  seq.grid_rows = grid;
  seq.grid_cols = grid;
  seq.patch = patch;
  seq.tokens = Mat(grid * grid, dim);
  for (auto& v : seq.tokens.v) v = 2.f * rng.next_float() - 1.f;
  return seq;
}

void check_record_invariants(const ShuffleRecord& rec, int length) {
  const int num_s = int(double(length) * rec.tau);
  REQUIRE(int(rec.selected.size()) == num_s);
  REQUIRE(rec.sources.size() == rec.selected.size());
  std::set<uint32_t> sel(rec.selected.begin(), rec.selected.end());
  REQUIRE(int(sel.size()) == num_s);  // distinct
  for (uint32_t s : rec.selected) REQUIRE(s < uint32_t(length));
  // sources is a bijection on selected: same multiset.
  std::multiset<uint32_t> src(rec.sources.begin(), rec.sources.end());
  std::multiset<uint32_t> selm(rec.selected.begin(), rec.selected.end());
  REQUIRE(src == selm);
}

}  // namespace

TEST_CASE("tokenize geometry and identity-like projection") {
  // 64x64 map, P=4 -> 256 tokens on a 16x16 grid (the (H/P)*(W/P) formula).
  Rng rng(1);
  FeatureMap map = fsrtest::random_map(rng, 64, 64, 2);
  PatchProjection proj = init_patch_projection(4, 2, 8, rng);
  const TokenSequence seq = tokenize(map, proj);
  CHECK(seq.length() == 256);
  CHECK(seq.grid_rows == 16);
  CHECK(seq.grid_cols == 16);
  CHECK(seq.dim() == 8);

  // Identity embedding (D = P*P*C, unit matrix, zero bias) on a constant map
  // makes all tokens equal.
  const int patch = 2, chans = 3, dim = patch * patch * chans;
  PatchProjection ident;
  ident.patch = patch;
  ident.channels = chans;
  ident.dim = dim;
  ident.embed_w = Mat(dim, dim);
  for (int i = 0; i < dim; ++i) ident.embed_w.at(i, i) = 1.f;
  ident.embed_b.assign(size_t(dim), 0.f);
  ident.unembed_w = Mat(dim, dim);
  for (int i = 0; i < dim; ++i) ident.unembed_w.at(i, i) = 1.f;
  ident.unembed_b.assign(size_t(dim), 0.f);

  FeatureMap constant(6, 6, chans);
  std::fill(constant.v.begin(), constant.v.end(), 0.75f);
  const TokenSequence tokens = tokenize(constant, ident);
  for (int l = 1; l < tokens.length(); ++l)
    for (int d = 0; d < tokens.dim(); ++d)
      CHECK(tokens.tokens.at(l, d) == tokens.tokens.at(0, d));

  // Identity projections round-trip the map exactly.
  FeatureMap arbitrary = fsrtest::random_map(rng, 6, 6, chans);
  const FeatureMap back = detokenize(tokenize(arbitrary, ident), ident);
  for (size_t i = 0; i < arbitrary.v.size(); ++i)
    CHECK(back.v[i] == doctest::Approx(arbitrary.v[i]).epsilon(1e-6));

  // Non-divisible patch fails before any compute.
  FeatureMap odd(5, 5, 2);
  CHECK_THROWS_AS((void)tokenize(odd, proj), ConfigError);
}

TEST_CASE("tokenize/detokenize round trip through a pseudo-inverse") {
  // Random embed matrix with D = block size; unembed = its inverse.
  Rng rng(7);
  const int patch = 2, chans = 2, dim = 8;  // block = 8 = dim
  PatchProjection proj = init_patch_projection(patch, chans, dim, rng);

  // Build the inverse of embed_w by Gauss-Jordan in double.
  const int n = dim;
  std::vector<double> aug(size_t(n) * 2 * n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) aug[size_t(r) * 2 * n + c] = double(proj.embed_w.at(r, c));
    aug[size_t(r) * 2 * n + n + r] = 1.0;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(aug[size_t(r) * 2 * n + col]) > std::fabs(aug[size_t(piv) * 2 * n + col]))
        piv = r;
    for (int c = 0; c < 2 * n; ++c)
      std::swap(aug[size_t(col) * 2 * n + c], aug[size_t(piv) * 2 * n + c]);
    const double d = aug[size_t(col) * 2 * n + col];
    REQUIRE(std::fabs(d) > 1e-9);
    for (int c = 0; c < 2 * n; ++c) aug[size_t(col) * 2 * n + c] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug[size_t(r) * 2 * n + col];
      for (int c = 0; c < 2 * n; ++c)
        aug[size_t(r) * 2 * n + c] -= f * aug[size_t(col) * 2 * n + c];
    }
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) proj.unembed_w.at(r, c) = float(aug[size_t(r) * 2 * n + n + c]);
  std::fill(proj.embed_b.begin(), proj.embed_b.end(), 0.f);
  std::fill(proj.unembed_b.begin(), proj.unembed_b.end(), 0.f);

  FeatureMap map = fsrtest::random_map(rng, 8, 8, chans);
  const FeatureMap back = detokenize(tokenize(map, proj), proj);
  for (size_t i = 0; i < map.v.size(); ++i)
    CHECK(std::fabs(back.v[i] - map.v[i]) <= 1e-5f);
}

TEST_CASE("detokenize places blocks locally") {
  Rng rng(3);
  const int patch = 2, chans = 1, dim = 4;
  PatchProjection proj = init_patch_projection(patch, chans, dim, rng);

  // Zero tokens + zero bias -> zero map.
  TokenSequence zero;
  zero.grid_rows = 3;
  zero.grid_cols = 3;
  zero.patch = patch;
  zero.tokens = Mat(9, dim);
  const FeatureMap zmap = detokenize(zero, proj);
  for (float v : zmap.v) CHECK(v == 0.f);

  // A one-hot token touches exactly its own P x P block.
  TokenSequence onehot = zero;
  onehot.tokens.at(4, 1) = 1.f;  // center block of the 3x3 grid
  const FeatureMap omap = detokenize(onehot, proj);
  for (int y = 0; y < omap.h; ++y)
    for (int x = 0; x < omap.w; ++x) {
      const bool inside = y >= 2 && y < 4 && x >= 2 && x < 4;
      if (!inside) CHECK(omap.at(y, x)[0] == 0.f);
    }
  float magnitude = 0.f;
  for (float v : omap.v) magnitude += std::fabs(v);
  CHECK(magnitude > 0.f);
}

TEST_CASE("positional table matches the sinusoid definition") {
  const int length = 20, dim = 16;
  const Mat table = positional_table<float>(length, dim);

  // l = 0: alternating 0 / 1.
  for (int i = 0; i < dim / 2; ++i) {
    CHECK(table.at(0, 2 * i) == 0.f);
    CHECK(table.at(0, 2 * i + 1) == 1.f);
  }
  // (l=1, i=0): sin(1).
  CHECK(table.at(1, 0) == doctest::Approx(0.841471).epsilon(1e-6));
  CHECK(table.at(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-6));

  // Direct evaluation across the table.
  for (int l = 0; l < length; ++l)
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = l / std::pow(10000.0, 2.0 * i / dim);
      CHECK(table.at(l, 2 * i) == doctest::Approx(std::sin(angle)).epsilon(1e-6));
      CHECK(table.at(l, 2 * i + 1) == doctest::Approx(std::cos(angle)).epsilon(1e-6));
    }

  // Every row has squared norm D/2; entries lie in [-1, 1].
  for (int l = 0; l < length; ++l) {
    float norm2 = 0.f;
    for (int d = 0; d < dim; ++d) {
      norm2 += table.at(l, d) * table.at(l, d);
      CHECK(table.at(l, d) >= -1.f);
      CHECK(table.at(l, d) <= 1.f);
    }
    CHECK(norm2 == doctest::Approx(dim / 2.0).epsilon(1e-6));
  }

  // Purity and the even-dimension requirement.
  const Mat again = positional_table<float>(length, dim);
  CHECK(again.v == table.v);
  CHECK_THROWS_AS((void)positional_table<float>(4, 7), ConfigError);
}

TEST_CASE("add_positions is slot-indexed, not content-indexed") {
  Rng rng(11);
  TokenSequence seq = random_sequence(rng, 3, 6);
  const Mat table = positional_table<float>(seq.length(), seq.dim());

  // Zero table -> identity; zero tokens -> the table itself.
  Mat zero_table(seq.length(), seq.dim());
  CHECK(add_positions(seq, zero_table).tokens.v == seq.tokens.v);
  TokenSequence zeros = seq;
  zeros.tokens.zero();
  CHECK(add_positions(zeros, table).tokens.v == table.v);

  // shuffle-then-add differs from add-then-shuffle whenever tokens moved.
  Rng s1(5);
  const ShuffleRecord rec = make_shuffle_record(seq.length(), 1.0, s1);
  const TokenSequence a = add_positions(apply_shuffle(seq, rec), table);
  const TokenSequence b = apply_shuffle(add_positions(seq, table), rec);
  bool moved = false;
  for (size_t j = 0; j < rec.selected.size(); ++j)
    if (rec.selected[j] != rec.sources[j]) moved = true;
  REQUIRE(moved);
  CHECK(a.tokens.v != b.tokens.v);

  Mat bad(seq.length() + 1, seq.dim());
  CHECK_THROWS_AS((void)add_positions(seq, bad), ConfigError);
}

TEST_CASE("shuffle: record semantics, replay, and bounds") {
  Rng rng(17);

  // tau = 0 is the identity with an empty record.
  TokenSequence seq = random_sequence(rng, 4, 8);
  auto [same, empty_rec] = random_shuffle(seq, 0.0, rng);
  CHECK(same.tokens.v == seq.tokens.v);
  CHECK(empty_rec.empty());

  // L = 256, tau = 0.1 -> exactly 25 slots.
  TokenSequence big = random_sequence(rng, 16, 4);
  auto [shuffled_big, rec_big] = random_shuffle(big, 0.1, rng);
  CHECK(rec_big.selected.size() == 25);
  check_record_invariants(rec_big, big.length());

  // tau = 1, L = 9: full permutation; replay reproduces output bit-exactly and
  // untouched slots stay untouched.
  TokenSequence three = random_sequence(rng, 3, 5);
  auto [shuffled, rec] = random_shuffle(three, 1.0, rng);
  check_record_invariants(rec, three.length());
  const TokenSequence replay = apply_shuffle(three, rec);
  CHECK(replay.tokens.v == shuffled.tokens.v);
  for (size_t j = 0; j < rec.selected.size(); ++j)
    for (int d = 0; d < three.dim(); ++d)
      CHECK(shuffled.tokens.at(int(rec.selected[j]), d) ==
            three.tokens.at(int(rec.sources[j]), d));

  CHECK_THROWS_AS((void)random_shuffle(seq, -0.1, rng), ConfigError);
  CHECK_THROWS_AS((void)random_shuffle(seq, 1.5, rng), ConfigError);
}

TEST_CASE("shuffle properties over seeded draws") {
  Rng rng(23);
  const int length = 32;

  for (int iter = 0; iter < 200; ++iter) {
    const double tau = rng.next_double();
    TokenSequence seq = random_sequence(rng, 4, 6);
    REQUIRE(seq.length() == 16);
    auto [out, rec] = random_shuffle(seq, tau, rng);
    check_record_invariants(rec, seq.length());

    // Hamming bound: at most floor(L*tau) slots differ.
    int moved = 0;
    for (int l = 0; l < seq.length(); ++l)
      if (!std::equal(seq.tokens.row(l), seq.tokens.row(l) + seq.dim(), out.tokens.row(l)))
        ++moved;
    CHECK(moved <= int(seq.length() * tau));

    // Conservation: the multiset of tokens is preserved.
    auto fingerprint = [&](const Mat& m) {
      std::multiset<float> f;
      for (int l = 0; l < m.rows; ++l) f.insert(kern::sumsq(m.row(l), m.cols));
      return f;
    };
    CHECK(fingerprint(out.tokens) == fingerprint(seq.tokens));
  }

  // Monotone expected displacement over tau in {0, .25, .5, .75, 1}.
  std::vector<double> mean_moved;
  for (const double tau : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Rng draws(99);
    long total = 0;
    const int trials = 1200;
    for (int t = 0; t < trials; ++t) {
      const ShuffleRecord rec = make_shuffle_record(length, tau, draws);
      for (size_t j = 0; j < rec.selected.size(); ++j)
        if (rec.selected[j] != rec.sources[j]) ++total;
    }
    mean_moved.push_back(double(total) / trials);
  }
  for (size_t i = 1; i < mean_moved.size(); ++i) CHECK(mean_moved[i] >= mean_moved[i - 1]);
}

TEST_CASE("shuffle record serialization round trip") {
  Rng rng(31);
  const ShuffleRecord rec = make_shuffle_record(64, 0.37, rng);
  const auto bytes = rec.serialize();
  const ShuffleRecord back = ShuffleRecord::deserialize(bytes);
  CHECK(back.tau == rec.tau);
  CHECK(back.selected == rec.selected);
  CHECK(back.sources == rec.sources);

  std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + 8);
  CHECK_THROWS_AS((void)ShuffleRecord::deserialize(truncated), DataError);
}

TEST_CASE("shuffle_backward inverts the routing") {
  Rng rng(41);
  TokenSequence seq = random_sequence(rng, 3, 4);
  auto [out, rec] = random_shuffle(seq, 0.8, rng);

  // Forward then backward on gradients is the identity permutation overall:
  // shuffle_backward(apply_shuffle(g)) == g for any g.
  Mat g(seq.length(), seq.dim());
  for (auto& v : g.v) v = 2.f * rng.next_float() - 1.f;
  TokenSequence gs = seq;
  gs.tokens = g;
  const Mat routed = apply_shuffle(gs, rec).tokens;
  const Mat back = shuffle_backward(routed, rec);
  CHECK(back.v == g.v);
}

TEST_CASE("batch shuffling shares one record across members") {
  Rng rng(53);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_sequence(rng, 4, 8));
  const ShuffleRecord rec = make_shuffle_record(batch[0].length(), 0.5, rng);
  for (const auto& member : batch) {
    const TokenSequence out = apply_shuffle(member, rec);
    for (size_t j = 0; j < rec.selected.size(); ++j)
      for (int d = 0; d < member.dim(); ++d)
        CHECK(out.tokens.at(int(rec.selected[j]), d) ==
              member.tokens.at(int(rec.sources[j]), d));
  }
}
