#include "fsr/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fsr/errors.hpp"
#include "fsr/features.hpp"

namespace fsr {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Three visually distinct periodic families. `phase` carries the per-image
// jitter; colors mix the scalar field into three channels per texture.
float texture_value(int family, float x, float y, int size, const float phase[2]) {
  const float s = float(size);
  switch (family % 3) {
    case 0:  // diagonal stripes
      return std::sin(float(kTwoPi) * (3.f * x + 7.f * y) / s + phase[0]);
    case 1:  // grid
      return std::sin(float(kTwoPi) * 5.f * x / s + phase[0]) *
             std::sin(float(kTwoPi) * 5.f * y / s + phase[1]);
    default: {  // rings
      const float cx = s * (0.5f + 0.08f * std::sin(phase[1]));
      const float cy = s * (0.5f + 0.08f * std::cos(phase[1]));
      const float r = std::hypot(x - cx, y - cy);
      return std::sin(float(kTwoPi) * 4.f * r / s + phase[0]);
    }
  }
}

constexpr float kMix[3][3] = {{0.9f, 0.4f, -0.3f}, {-0.2f, 0.8f, 0.5f}, {0.5f, -0.5f, 0.8f}};
constexpr float kBase[3] = {0.1f, -0.05f, 0.0f};

ImageTensor render_texture(int family, int size, Rng& rng) {
  ImageTensor img(3, size, size);
  float phase[2] = {0.3f * float(rng.normal()), 0.3f * float(rng.normal())};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float v = texture_value(family, float(x), float(y), size, phase);
      for (int c = 0; c < 3; ++c)
        img.plane(c)[size_t(y) * size + x] =
            v * kMix[family % 3][c] + kBase[family % 3] + 0.02f * float(rng.normal());
    }
  return img;
}

// Paints a square or elliptical patch of a different texture family into the
// image and marks the mask.
void inject_anomaly(ImageTensor& img, BinaryMask& mask, int family, Rng& rng) {
  const int size = img.h;
  const int extent = size / 5 + int(rng.below(uint64_t(size / 8)));
  const int cx = extent + int(rng.below(uint64_t(size - 2 * extent)));
  const int cy = extent + int(rng.below(uint64_t(size - 2 * extent)));
  const bool ellipse = rng.below(2) == 1;
  const int other = (family + 1 + int(rng.below(2))) % 3;
  float phase[2] = {float(kTwoPi * rng.next_double()), float(kTwoPi * rng.next_double())};

  for (int y = cy - extent; y <= cy + extent; ++y)
    for (int x = cx - extent; x <= cx + extent; ++x) {
      if (y < 0 || y >= size || x < 0 || x >= size) continue;
      if (ellipse) {
        const float dx = float(x - cx) / float(extent);
        const float dy = float(y - cy) / float(extent);
        if (dx * dx + dy * dy > 1.f) continue;
      }
      const float v = texture_value(other, float(x), float(y), size, phase);
      for (int c = 0; c < 3; ++c)
        img.plane(c)[size_t(y) * size + x] = v * kMix[other][c] + kBase[other];
      mask.v[size_t(y) * size + x] = 1;
    }
}

}  // namespace

BenchData generate_bench_data(const BenchSpec& spec) {
  if (spec.textures < 1 || spec.textures > 3)
    throw ConfigError("bench: textures must be 1..3");
  BenchData data;
  Rng rng(spec.seed);
  for (int t = 0; t < spec.textures; ++t) {
    Rng texture_rng = rng.fork(uint64_t(100 + t));
    for (int i = 0; i < spec.train_per_texture; ++i) {
      ImageTensor img = render_texture(t, spec.image_size, texture_rng);
      img.source_path = "bench://t" + std::to_string(t) + "/train/" + std::to_string(i);
      data.train_images.push_back(std::move(img));
    }
    for (int i = 0; i < spec.test_normal_per_texture; ++i) {
      BenchSample s;
      s.image = render_texture(t, spec.image_size, texture_rng);
      s.mask = BinaryMask(spec.image_size, spec.image_size);
      s.is_anomalous = false;
      s.id = "bench://t" + std::to_string(t) + "/good/" + std::to_string(i);
      s.image.source_path = s.id;
      data.test_samples.push_back(std::move(s));
    }
    for (int i = 0; i < spec.test_anomalous_per_texture; ++i) {
      BenchSample s;
      s.image = render_texture(t, spec.image_size, texture_rng);
      s.mask = BinaryMask(spec.image_size, spec.image_size);
      inject_anomaly(s.image, s.mask, t, texture_rng);
      s.is_anomalous = true;
      s.id = "bench://t" + std::to_string(t) + "/defect/" + std::to_string(i);
      s.image.source_path = s.id;
      data.test_samples.push_back(std::move(s));
    }
  }
  return data;
}

RunConfig bench_config(const BenchSpec& spec, long steps) {
  RunConfig cfg;
  cfg.setting = spec.textures > 1 ? SettingMode::kUnified : SettingMode::kSeparate;
  cfg.seed = spec.seed;
  cfg.image_size = spec.image_size;
  cfg.feature_size = 16;
  cfg.patch = 4;
  cfg.depth = 2;
  cfg.width = 64;
  cfg.heads = 4;
  cfg.mlp_ratio = 4;
  cfg.batch_size = 8;
  cfg.max_steps = steps;
  cfg.epochs = 1 << 20;  // step budget governs
  cfg.checkpoint_every = 0;
  cfg.backbone = "synthetic:seed=7:stages=8x2,16x4";
  cfg.out_dir = "bench_runs";
  return cfg;
}

BenchRow BenchReport::best_fsr() const {
  BenchRow best;
  best.pixel_auroc = -1.0;
  for (const auto& row : rows)
    if (row.tau > 0.0 && row.pixel_auroc > best.pixel_auroc) best = row;
  return best;
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "tau,image_auroc,pixel_auroc,final_loss\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& r : rows)
    out << r.tau << "," << r.image_auroc << "," << r.pixel_auroc << "," << r.final_loss
        << "\n";
  return out.str();
}

std::string BenchReport::to_svg() const {
  const int width = 480, height = 320, margin = 48;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto px = [&](double tau) { return margin + tau * (width - 2 * margin); };
  auto py = [&](double auroc) {
    return height - margin - std::clamp(auroc, 0.0, 1.0) * (height - 2 * margin);
  };
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  for (double g : {0.5, 0.75, 1.0})
    svg << "<text x=\"8\" y=\"" << py(g) + 4 << "\" font-size=\"10\">" << g << "</text>\n";
  svg << "<text x=\"" << width / 2 - 10 << "\" y=\"" << height - 12
      << "\" font-size=\"11\">tau</text>\n";

  auto polyline = [&](const char* color, bool pixel) {
    std::ostringstream pts;
    for (const auto& r : rows)
      pts << px(r.tau) << "," << py(pixel ? r.pixel_auroc : r.image_auroc) << " ";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << pts.str() << "\"/>\n";
    for (const auto& r : rows)
      svg << "<circle cx=\"" << px(r.tau) << "\" cy=\""
          << py(pixel ? r.pixel_auroc : r.image_auroc) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
  };
  polyline("#1f77b4", false);  // image AUROC
  polyline("#2ca02c", true);   // pixel AUROC
  svg << "<text x=\"" << width - margin - 120 << "\" y=\"" << margin
      << "\" font-size=\"11\" fill=\"#1f77b4\">image AUROC</text>\n";
  svg << "<text x=\"" << width - margin - 120 << "\" y=\"" << margin + 14
      << "\" font-size=\"11\" fill=\"#2ca02c\">pixel AUROC</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

BenchReport run_bench(const BenchSpec& spec, const RunConfig& config,
                      const std::vector<double>& taus) {
  BenchReport report;
  report.spec = spec;

  const BenchData data = generate_bench_data(spec);
  auto extractor = backbone_from_descriptor(config.backbone);
  const std::vector<int> all_stages = {1, 2};

  // Extract every feature map once; the source serves them by id.
  std::map<std::string, FeatureMap> features;
  for (const auto& img : data.train_images)
    features[img.source_path] = extract_fused(*extractor, img, all_stages,
                                              config.feature_size, config.feature_size);
  std::vector<EvalSample> eval_samples;
  for (const auto& s : data.test_samples) {
    EvalSample e;
    e.features = extract_fused(*extractor, s.image, all_stages, config.feature_size,
                               config.feature_size);
    e.mask = s.mask;
    e.is_anomalous = s.is_anomalous;
    e.id = s.id;
    eval_samples.push_back(std::move(e));
  }
  FeatureSource source = [&features](const std::string& id) -> FeatureMap {
    const auto it = features.find(id);
    if (it == features.end()) throw DataError("bench: unknown sample id " + id);
    return it->second;
  };

  TrainingSet set;
  set.name = spec.textures > 1 ? "bench_unified" : "bench_separate";
  for (const auto& img : data.train_images) set.paths.push_back(img.source_path);

  std::vector<double> sweep{0.0};
  for (double t : taus)
    if (t > 0.0 && std::find(sweep.begin(), sweep.end(), t) == sweep.end())
      sweep.push_back(t);

  for (double tau : sweep) {
    RunConfig run = config;
    run.tau = tau;
    std::ostringstream name;
    name << set.name << "_tau" << tau;
    TrainingSet tagged = set;
    tagged.name = name.str();

    const TrainResult trained = train_one(run, tagged, source);
    const Checkpoint ckpt = load_checkpoint(trained.checkpoint_path);
    const EvalOutcome outcome = evaluate_samples(ckpt.model, eval_samples);

    BenchRow row;
    row.tau = tau;
    row.image_auroc = outcome.image_auroc;
    row.pixel_auroc = outcome.pixel_auroc;
    row.final_loss = trained.loss_log.empty() ? 0.0 : double(trained.loss_log.back().total);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace fsr
