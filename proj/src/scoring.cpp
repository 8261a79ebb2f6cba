#include "fsr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fsr/errors.hpp"
#include "fsr/image.hpp"
#include "fsr/interp.hpp"
#include "fsr/objective.hpp"

namespace fsr {

std::pair<Mat, Mat> anomaly_factors(const FeatureMap& test_features,
                                    const FeatureMap& restored) {
  if (test_features.h != restored.h || test_features.w != restored.w ||
      test_features.c != restored.c)
    throw ConfigError("anomaly_factors: shape mismatch");
  const int h = test_features.h, w = test_features.w, c = test_features.c;
  Mat as_mse(h, w), as_cos(h, w);
  for (int p = 0; p < h * w; ++p) {
    const float* f = test_features.v.data() + size_t(p) * c;
    const float* g = restored.v.data() + size_t(p) * c;
    as_mse.v[size_t(p)] = kern::sumsq_diff(f, g, c);
    const float cosine =
        kern::dot(f, g, c) / (detail::stable_norm(f, c) * detail::stable_norm(g, c));
    as_cos.v[size_t(p)] = 1.f - cosine;
  }
  return {std::move(as_mse), std::move(as_cos)};
}

namespace {

void gaussian_blur_inplace(std::vector<float>& img, int h, int w, float sigma) {
  const int radius = std::max(1, int(std::ceil(3.f * sigma)));
  std::vector<float> kernel(size_t(2 * radius + 1));
  float sum = 0.f;
  for (int i = -radius; i <= radius; ++i) {
    kernel[size_t(i + radius)] = std::exp(-0.5f * float(i) * float(i) / (sigma * sigma));
    sum += kernel[size_t(i + radius)];
  }
  for (auto& k : kernel) k /= sum;

  std::vector<float> tmp(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += kernel[size_t(i + radius)] * img[size_t(y) * w + sx];
      }
      tmp[size_t(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += kernel[size_t(i + radius)] * tmp[size_t(sy) * w + x];
      }
      img[size_t(y) * w + x] = acc;
    }
}

}  // namespace

AnomalyMap anomaly_map(const FeatureMap& test_features, const FeatureMap& restored,
                       int image_h, int image_w, ImageScoreMode mode,
                       float smoothing_sigma) {
  auto [as_mse, as_cos] = anomaly_factors(test_features, restored);
  Mat product(test_features.h, test_features.w);
  kern::vmul(as_mse.v.data(), as_cos.v.data(), product.v.data(), int(product.v.size()));

  AnomalyMap out;
  out.h = image_h;
  out.w = image_w;
  out.source = test_features.origin;
  out.scores.resize(size_t(image_h) * image_w);
  bilinear_resize_plane(product.v.data(), product.rows, product.cols, out.scores.data(),
                        image_h, image_w);
  if (smoothing_sigma > 0.f)
    gaussian_blur_inplace(out.scores, image_h, image_w, smoothing_sigma);

  if (mode == ImageScoreMode::kMax) {
    out.image_score = *std::max_element(out.scores.begin(), out.scores.end());
  } else {
    // Population standard deviation of the resized map.
    double mean = 0.0;
    for (float v : out.scores) mean += v;
    mean /= double(out.scores.size());
    double var = 0.0;
    for (float v : out.scores) var += (v - mean) * (v - mean);
    var /= double(out.scores.size());
    out.image_score = float(std::sqrt(var));
  }
  return out;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ConfigError("auroc: scores and labels differ in length");
  size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw DataError("degenerate labels: need both classes");

  // Average ranks over ties, then the Mann-Whitney statistic.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (double(i + 1) + double(j + 1));
    for (size_t t = i; t <= j; ++t)
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - double(n_pos) * (double(n_pos) + 1.0) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

double pixel_auroc(const std::vector<AnomalyMap>& maps,
                   const std::vector<BinaryMask>& masks) {
  if (maps.size() != masks.size())
    throw ConfigError("pixel_auroc: map/mask count mismatch");
  std::vector<double> scores;
  std::vector<int> labels;
  for (size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].h != masks[i].h || maps[i].w != masks[i].w)
      throw ConfigError("pixel_auroc: map/mask resolution mismatch for " + maps[i].source);
    for (size_t p = 0; p < maps[i].scores.size(); ++p) {
      scores.push_back(double(maps[i].scores[p]));
      labels.push_back(masks[i].v[p] != 0 ? 1 : 0);
    }
  }
  return auroc(scores, labels);
}

void MetricsReport::finalize() {
  mean_image_auroc = 0.0;
  mean_pixel_auroc = 0.0;
  if (categories.empty()) return;
  for (const auto& c : categories) {
    mean_image_auroc += c.image_auroc;
    mean_pixel_auroc += c.pixel_auroc;
  }
  mean_image_auroc /= double(categories.size());
  mean_pixel_auroc /= double(categories.size());
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["config"] = config_echo;
  j["mean"] = {{"image_auroc", mean_image_auroc}, {"pixel_auroc", mean_pixel_auroc}};
  j["categories"] = nlohmann::json::array();
  for (const auto& c : categories)
    j["categories"].push_back({{"category", c.category},
                               {"image_auroc", c.image_auroc},
                               {"pixel_auroc", c.pixel_auroc},
                               {"n_test", c.n_test},
                               {"n_anomalous", c.n_anomalous}});
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "category,image_auroc,pixel_auroc\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& c : categories)
    out << c.category << "," << c.image_auroc << "," << c.pixel_auroc << "\n";
  out << "mean," << mean_image_auroc << "," << mean_pixel_auroc << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Mutual-information probe (exact enumeration)
// ---------------------------------------------------------------------------

namespace {

void validate_model(const DiscreteSequenceModel& model) {
  if (model.alphabet < 2 || model.length < 1)
    throw ConfigError("mi probe: alphabet >= 2 and length >= 1 required");
  if (int(model.symbol_probs.size()) != model.alphabet)
    throw ConfigError("mi probe: symbol distribution size must equal the alphabet");
  double sum = 0.0;
  for (double p : model.symbol_probs) {
    if (p < 0.0) throw ConfigError("mi probe: negative probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("mi probe: probabilities must sum to 1");
  double states = 1.0;
  for (int i = 0; i < model.length; ++i) {
    states *= double(model.alphabet);
    if (states > 4096.0)
      throw ConfigError("mi probe: state space too large (A^L must be <= 4096)");
  }
}

// All (selection, bijection) shuffle outcomes for num_s slots out of L, each
// with equal probability. An outcome maps slot selected[j] <- selected[p[j]].
struct ShuffleOutcome {
  std::vector<int> selected;
  std::vector<int> inner;  // permutation of [0, num_s)
};

void enumerate_subsets(int length, int num_s, std::vector<std::vector<int>>& out) {
  // Iterative combination generation in lexicographic order.
  std::vector<int> cur(size_t(num_s), 0);
  for (int i = 0; i < num_s; ++i) cur[size_t(i)] = i;
  if (num_s == 0) {
    out.push_back({});
    return;
  }
  for (;;) {
    out.push_back(cur);
    int i = num_s - 1;
    while (i >= 0 && cur[size_t(i)] == length - num_s + i) --i;
    if (i < 0) break;
    ++cur[size_t(i)];
    for (int j = i + 1; j < num_s; ++j) cur[size_t(j)] = cur[size_t(j - 1)] + 1;
  }
}

std::vector<ShuffleOutcome> enumerate_outcomes(int length, int num_s) {
  std::vector<std::vector<int>> subsets;
  enumerate_subsets(length, num_s, subsets);
  std::vector<ShuffleOutcome> outcomes;
  for (const auto& sel : subsets) {
    std::vector<int> perm(size_t(num_s), 0);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      outcomes.push_back({sel, perm});
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return outcomes;
}

}  // namespace

double sequence_entropy_bits(const DiscreteSequenceModel& model) {
  validate_model(model);
  const int states = int(std::pow(double(model.alphabet), double(model.length)) + 0.5);
  double h = 0.0;
  for (int x = 0; x < states; ++x) {
    double p = 1.0;
    int rem = x;
    for (int i = 0; i < model.length; ++i) {
      p *= model.symbol_probs[size_t(rem % model.alphabet)];
      rem /= model.alphabet;
    }
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

std::vector<std::pair<double, double>> mutual_information_probe(
    const DiscreteSequenceModel& model, const std::vector<double>& taus) {
  validate_model(model);
  const int a = model.alphabet, len = model.length;
  const int states = int(std::pow(double(a), double(len)) + 0.5);

  // Sequence probabilities (i.i.d. symbols).
  std::vector<double> px(size_t(states), 0.0);
  std::vector<std::vector<int>> digits(size_t(states), std::vector<int>(size_t(len), 0));
  for (int x = 0; x < states; ++x) {
    double p = 1.0;
    int rem = x;
    for (int i = 0; i < len; ++i) {
      digits[size_t(x)][size_t(i)] = rem % a;
      p *= model.symbol_probs[size_t(rem % a)];
      rem /= a;
    }
    px[size_t(x)] = p;
  }

  double h_x = 0.0;
  for (double p : px)
    if (p > 0.0) h_x -= p * std::log2(p);

  std::vector<std::pair<double, double>> result;
  for (double tau : taus) {
    if (tau < 0.0 || tau > 1.0) throw ConfigError("mi probe: tau outside [0,1]");
    const int num_s = int(double(len) * tau);
    const auto outcomes = enumerate_outcomes(len, std::max(num_s, 0));
    if (double(states) * double(outcomes.size()) > 2e7)
      throw ConfigError("mi probe: state space too large for enumeration");
    const double p_outcome = 1.0 / double(outcomes.size());

    // Joint P(x, x*) and the marginal P(x*).
    std::map<std::pair<int, int>, double> joint;
    std::vector<double> pxs(size_t(states), 0.0);
    std::vector<int> shuffled(size_t(len), 0);
    for (int x = 0; x < states; ++x) {
      if (px[size_t(x)] == 0.0) continue;
      for (const auto& o : outcomes) {
        shuffled = digits[size_t(x)];
        for (size_t j = 0; j < o.selected.size(); ++j)
          shuffled[size_t(o.selected[j])] =
              digits[size_t(x)][size_t(o.selected[size_t(o.inner[j])])];
        int xs = 0;
        for (int i = len - 1; i >= 0; --i) xs = xs * a + shuffled[size_t(i)];
        joint[{x, xs}] += px[size_t(x)] * p_outcome;
        pxs[size_t(xs)] += px[size_t(x)] * p_outcome;
      }
    }

    // I = H(X) + E[log2 P(x | x*)]
    double e_log_cond = 0.0;
    for (const auto& [key, pxy] : joint) {
      const double cond = pxy / pxs[size_t(key.second)];
      e_log_cond += pxy * std::log2(cond);
    }
    result.emplace_back(tau, h_x + e_log_cond);
  }
  return result;
}

ShortcutWitness shortcut_witness(const RestorationParams& params_zeroed,
                                 const TokenSequence& seq, double tau, Rng& rng) {
  ShortcutWitness out;
  const TokenSequence rec = restore(seq, params_zeroed);
  out.rec_error = std::sqrt(double(
      kern::sumsq_diff(rec.tokens.v.data(), seq.tokens.v.data(), int(seq.tokens.v.size()))));

  auto [shuffled, record] = random_shuffle(seq, tau, rng);
  const TokenSequence res = restore(shuffled, params_zeroed);
  out.fsr_error = std::sqrt(double(
      kern::sumsq_diff(res.tokens.v.data(), seq.tokens.v.data(), int(seq.tokens.v.size()))));
  out.record = std::move(record);
  return out;
}

ImageU8 heatmap_image(const AnomalyMap& map) {
  float lo = map.scores.empty() ? 0.f : map.scores[0];
  float hi = lo;
  for (float v : map.scores) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = hi > lo ? hi - lo : 1.f;

  ImageU8 img(map.w, map.h, 3);
  for (int y = 0; y < map.h; ++y)
    for (int x = 0; x < map.w; ++x) {
      const float t = (map.at(y, x) - lo) / span;
      // Compact blue -> cyan -> yellow -> red ramp.
      uint8_t* px = img.at(y, x);
      px[0] = uint8_t(255.f * std::clamp(1.5f * t - 0.25f, 0.f, 1.f));
      px[1] = uint8_t(255.f * std::clamp(1.5f - std::fabs(2.f * t - 1.f) * 1.5f, 0.f, 1.f));
      px[2] = uint8_t(255.f * std::clamp(1.25f - 1.5f * t, 0.f, 1.f));
    }
  return img;
}

}  // namespace fsr
