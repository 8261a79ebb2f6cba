#include "fsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fsr/errors.hpp"
#include "fsr/image.hpp"
#include "fsr/kernels.hpp"

namespace fs = std::filesystem;

namespace fsr {

namespace {

// Static-partition parallel loop with deterministic output placement.
void parallel_for(int n, int n_threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> workers;
  const int per = (n + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const int lo = t * per, hi = std::min(n, lo + per);
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& w : workers) w.join();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::vector<int> stage_selection(const RunConfig& config, const FeatureExtractor& bb) {
  if (!config.stages.empty()) return config.stages;
  std::vector<int> all;
  for (int i = 1; i <= int(bb.stages().size()); ++i) all.push_back(i);
  return all;
}

// Gradient buffers matching the model's trainable tensors.
struct GradBuffers {
  PatchProjection proj;
  RestorationParams params;
  Mat pos;

  explicit GradBuffers(const Model& model)
      : proj(zeros_like(model.proj)),
        params(zeros_like(model.params)),
        pos(model.pos_table.rows, model.pos_table.cols) {}

  void add(const GradBuffers& other) {
    auto acc = [](float* dst, const float* src, size_t n) {
      kern::vadd(dst, src, dst, int(n));
    };
    acc(proj.embed_w.v.data(), other.proj.embed_w.v.data(), proj.embed_w.size());
    acc(proj.embed_b.data(), other.proj.embed_b.data(), proj.embed_b.size());
    acc(proj.unembed_w.v.data(), other.proj.unembed_w.v.data(), proj.unembed_w.size());
    acc(proj.unembed_b.data(), other.proj.unembed_b.data(), proj.unembed_b.size());
    for (size_t b = 0; b < params.blocks.size(); ++b) {
      auto& d = params.blocks[b];
      const auto& s = other.params.blocks[b];
      acc(d.wq.v.data(), s.wq.v.data(), d.wq.size());
      acc(d.bq.data(), s.bq.data(), d.bq.size());
      acc(d.wk.v.data(), s.wk.v.data(), d.wk.size());
      acc(d.bk.data(), s.bk.data(), d.bk.size());
      acc(d.wv.v.data(), s.wv.v.data(), d.wv.size());
      acc(d.bv.data(), s.bv.data(), d.bv.size());
      acc(d.wo.v.data(), s.wo.v.data(), d.wo.size());
      acc(d.bo.data(), s.bo.data(), d.bo.size());
      acc(d.ln1_g.data(), s.ln1_g.data(), d.ln1_g.size());
      acc(d.ln1_b.data(), s.ln1_b.data(), d.ln1_b.size());
      acc(d.ln2_g.data(), s.ln2_g.data(), d.ln2_g.size());
      acc(d.ln2_b.data(), s.ln2_b.data(), d.ln2_b.size());
      acc(d.w1.v.data(), s.w1.v.data(), d.w1.size());
      acc(d.b1.data(), s.b1.data(), d.b1.size());
      acc(d.w2.v.data(), s.w2.v.data(), d.w2.size());
      acc(d.b2.data(), s.b2.data(), d.b2.size());
    }
    acc(pos.v.data(), other.pos.v.data(), pos.size());
  }

  template <class Fn>
  void visit(Model& model, Fn&& fn) {
    // Mirrors visit_model_tensors ordering.
    for_each_tensor(proj, fn);
    for_each_tensor(params, fn);
    if (model.config.learnable_positions)
      fn(std::string("pos.table"), pos.v.data(), pos.size());
  }
};

// Forward + backward for one sample against its unshuffled target.
LossBreakdown sample_pass(const Model& model, const FeatureMap& target,
                          const ShuffleRecord& record, GradBuffers& grads) {
  const Mat blocks = blocks_from_map(target, model.config.patch);

  TokenSequence seq;
  seq.grid_rows = seq.grid_cols = model.tokens_per_side();
  seq.patch = model.config.patch;
  seq.tokens = embed_blocks(blocks, model.proj);

  const TokenSequence shuffled = apply_shuffle(seq, record);
  const TokenSequence input = add_positions(shuffled, model.pos_table);

  std::vector<BlockCacheT<float>> caches;
  const TokenSequence out = restore_training(input, model.params, caches);
  const FeatureMap restored = detokenize(out, model.proj);

  FeatureMap grad_map(target.h, target.w, target.c);
  const LossBreakdown loss = restoration_loss_grad(target, restored, grad_map);

  const Mat d_out = detokenize_backward(grad_map, out.tokens, model.proj, grads.proj);
  const Mat d_in = restore_backward(d_out, model.params, caches, grads.params);
  if (model.config.learnable_positions)
    for (int l = 0; l < d_in.rows; ++l)
      kern::vadd(grads.pos.row(l), d_in.row(l), grads.pos.row(l), d_in.cols);

  const Mat d_tokens = shuffle_backward(d_in, record);
  (void)tokenize_backward(d_tokens, blocks, model.proj, grads.proj, seq.grid_rows,
                          seq.grid_cols);
  return loss;
}

void write_loss_csv(const std::string& path, const std::vector<LossBreakdown>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "step,local_mse,local_cos,global_cos,total\n";
  char line[192];
  for (size_t i = 0; i < log.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", i + 1,
                  double(log[i].local_mse), double(log[i].local_cos),
                  double(log[i].global_cos), double(log[i].total));
    out << line;
  }
}

}  // namespace

FeatureSource disk_feature_source(const RunConfig& config,
                                  std::shared_ptr<const FeatureExtractor> extractor) {
  const std::vector<int> stages = stage_selection(config, *extractor);
  return [config, extractor, stages](const std::string& path) -> FeatureMap {
    std::string cache_path;
    if (!config.cache_dir.empty()) {
      cache_path = (fs::path(config.cache_dir) /
                    (hex64(fnv1a(extractor->descriptor() + "|" + path)) + ".fsrf"))
                       .string();
      if (fs::exists(cache_path))
        return read_feature_cache_checked(cache_path, extractor->descriptor());
    }
    const ImageTensor image = load_image(path, config.image_size, config.norm);
    FeatureMap fused = extract_fused(*extractor, image, stages, config.feature_size,
                                     config.feature_size);
    if (!cache_path.empty()) {
      fs::create_directories(config.cache_dir);
      write_feature_cache(fused, cache_path, extractor->descriptor());
    }
    return fused;
  };
}

TrainResult train_one(const RunConfig& config, const TrainingSet& set,
                      const FeatureSource& features) {
  config.validate();
  if (set.paths.empty())
    throw ConfigError("empty training set: " + set.name);

  const fs::path run_dir = fs::path(config.out_dir) / set.name;
  fs::create_directories(run_dir);

  // Probe one sample for the fused channel count.
  const FeatureMap probe = features(set.paths.front());
  if (probe.h != config.feature_size || probe.w != config.feature_size)
    throw ConfigError("feature maps are " + std::to_string(probe.h) + "x" +
                      std::to_string(probe.w) + ", config expects " +
                      std::to_string(config.feature_size));
  Model model = init_model(config, probe.c);

  OptimizerState opt;
  visit_model_tensors(model, [&](const std::string& name, float*, size_t n) {
    opt.m[name].assign(n, 0.f);
    opt.v[name].assign(n, 0.f);
  });

  Rng base(config.seed);
  Rng shuffle_rng = base.fork(2);
  Rng data_rng = base.fork(3);

  const int n = int(set.paths.size());
  const int batch = std::min(config.effective_batch(), n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = config.max_steps > 0 ? config.max_steps
                                                : long(config.epochs) * steps_per_epoch;
  const int n_threads = config.effective_threads();
  const int L = model.sequence_length();

  TrainResult result;
  result.set_name = set.name;

  long step = 0;
  for (long epoch = 1; step < total_steps; ++epoch) {
    const auto order = data_rng.permutation(uint32_t(n));
    for (long b0 = 0; b0 < n && step < total_steps; b0 += batch) {
      ++step;
      const int bsz = int(std::min<long>(batch, n - b0));

      // One shuffle pattern per batch per iteration (per-sample optional).
      std::vector<ShuffleRecord> records;
      if (config.per_sample_shuffle) {
        for (int i = 0; i < bsz; ++i)
          records.push_back(make_shuffle_record(L, config.tau, shuffle_rng));
      } else {
        records.push_back(make_shuffle_record(L, config.tau, shuffle_rng));
      }

      // Per-thread gradient buffers, combined in a fixed order.
      const int workers = std::max(1, std::min(n_threads, bsz));
      std::vector<GradBuffers> grads;
      for (int t = 0; t < workers; ++t) grads.emplace_back(model);
      std::vector<LossBreakdown> losses(size_t(bsz), LossBreakdown{});
      const int per = (bsz + workers - 1) / workers;
      parallel_for(workers, workers, [&](int t) {
        for (int i = t * per; i < std::min(bsz, (t + 1) * per); ++i) {
          const FeatureMap target = features(set.paths[order[size_t(b0 + i)]]);
          const ShuffleRecord& rec =
              config.per_sample_shuffle ? records[size_t(i)] : records.front();
          losses[size_t(i)] = sample_pass(model, target, rec, grads[size_t(t)]);
        }
      });
      for (int t = 1; t < workers; ++t) grads[0].add(grads[size_t(t)]);

      LossBreakdown mean;
      for (const auto& l : losses) {
        mean.local_mse += l.local_mse / float(bsz);
        mean.local_cos += l.local_cos / float(bsz);
        mean.global_cos += l.global_cos / float(bsz);
      }
      mean.total = mean.local_mse + mean.local_cos + mean.global_cos;
      if (!std::isfinite(mean.total)) throw DivergenceError(step);
      result.loss_log.push_back(mean);

      // AdamW over every registered tensor; gradients averaged over the batch.
      const float inv_b = 1.f / float(bsz);
      const float ibc1 = 1.f / (1.f - std::pow(config.optim.beta1, float(step)));
      const float ibc2 = 1.f / (1.f - std::pow(config.optim.beta2, float(step)));
      GradBuffers& g = grads[0];
      std::vector<std::pair<float*, std::pair<std::string, size_t>>> param_list;
      visit_model_tensors(model, [&](const std::string& name, float* p, size_t cnt) {
        param_list.push_back({p, {name, cnt}});
      });
      size_t idx = 0;
      g.visit(model, [&](const std::string& name, float* grad, size_t cnt) {
        float* p = param_list[idx].first;
        if (param_list[idx].second.first != name || param_list[idx].second.second != cnt)
          throw ConfigError("internal: optimizer registry mismatch at " + name);
        ++idx;
        kern::vscale(inv_b, grad, int(cnt));
        kern::adamw_step(p, opt.m[name].data(), opt.v[name].data(), grad, int(cnt),
                         config.optim.lr, config.optim.beta1, config.optim.beta2,
                         config.optim.eps, config.optim.weight_decay, ibc1, ibc2);
      });
      opt.t = uint64_t(step);
    }

    const bool last = step >= total_steps;
    if (!last && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      Checkpoint ckpt{model, uint64_t(epoch), uint64_t(step), shuffle_rng.state(), true, opt};
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%06ld.fsr1", epoch);
      save_checkpoint((run_dir / name).string(), ckpt);
    }
    if (last) {
      Checkpoint ckpt{model, uint64_t(epoch), uint64_t(step), shuffle_rng.state(), true, opt};
      result.checkpoint_path = (run_dir / "checkpoint_final.fsr1").string();
      save_checkpoint(result.checkpoint_path, ckpt);
    }
  }

  write_loss_csv((run_dir / "loss.csv").string(), result.loss_log);
  result.steps = uint64_t(step);
  return result;
}

std::vector<TrainResult> train(const RunConfig& config, const std::vector<TrainingSet>& sets,
                               const FeatureSource& features) {
  if (sets.empty()) throw ConfigError("no training sets");
  std::vector<TrainResult> out;
  for (const auto& set : sets) out.push_back(train_one(config, set, features));
  return out;
}

EvalOutcome evaluate_samples(const Model& model, const std::vector<EvalSample>& samples) {
  const uint64_t shuffles_before = shuffle_invocation_count().load();

  EvalOutcome out;
  out.maps.resize(samples.size());
  parallel_for(int(samples.size()), model.config.effective_threads(), [&](int i) {
    const EvalSample& s = samples[size_t(i)];
    const FeatureMap restored = model.reconstruct(s.features);
    out.maps[size_t(i)] =
        anomaly_map(s.features, restored, s.mask.h, s.mask.w, model.config.image_score,
                    model.config.smoothing_sigma);
    out.maps[size_t(i)].source = s.id;
  });

  std::vector<BinaryMask> masks;
  for (size_t i = 0; i < samples.size(); ++i) {
    out.image_scores.push_back(double(out.maps[i].image_score));
    out.labels.push_back(samples[i].is_anomalous ? 1 : 0);
    masks.push_back(samples[i].mask);
  }
  out.image_auroc = auroc(out.image_scores, out.labels);
  out.pixel_auroc = pixel_auroc(out.maps, masks);

  if (shuffle_invocation_count().load() != shuffles_before)
    throw std::logic_error("random_shuffle invoked during evaluation");
  return out;
}

MetricsReport evaluate(const Model& model, const std::vector<DatasetIndex>& indices,
                       const FeatureSource& features) {
  MetricsReport report;
  report.config_echo = model.config.serialize();
  const int size = model.config.image_size;

  for (const auto& index : indices) {
    std::vector<EvalSample> samples;
    for (const auto& test : index.test_images) {
      EvalSample s;
      s.features = features(test.path);
      s.is_anomalous = test.is_anomalous;
      s.id = test.path;
      s.mask = test.is_anomalous ? load_mask(index.mask_paths.at(test.path), size)
                                 : BinaryMask(size, size);
      samples.push_back(std::move(s));
    }
    const EvalOutcome outcome = evaluate_samples(model, samples);
    CategoryMetrics cm;
    cm.category = index.category;
    cm.image_auroc = outcome.image_auroc;
    cm.pixel_auroc = outcome.pixel_auroc;
    cm.n_test = int(samples.size());
    cm.n_anomalous = int(std::count(outcome.labels.begin(), outcome.labels.end(), 1));
    report.categories.push_back(cm);
  }
  report.finalize();
  return report;
}

PredictResult predict(const Model& model, const std::string& image_path,
                      const std::string& out_dir) {
  const uint64_t shuffles_before = shuffle_invocation_count().load();

  auto extractor = backbone_from_descriptor(model.config.backbone);
  const std::vector<int> stages = stage_selection(model.config, *extractor);
  const ImageTensor image = load_image(image_path, model.config.image_size, model.config.norm);
  const FeatureMap fused = extract_fused(*extractor, image, stages,
                                         model.config.feature_size, model.config.feature_size);
  const FeatureMap restored = model.reconstruct(fused);

  PredictResult result;
  result.map = anomaly_map(fused, restored, model.config.image_size, model.config.image_size,
                           model.config.image_score, model.config.smoothing_sigma);
  result.map.source = image_path;

  fs::create_directories(out_dir);
  const std::string stem = fs::path(image_path).stem().string();
  result.raster_path = (fs::path(out_dir) / (stem + "_anomaly.fsrf")).string();
  result.heatmap_path = (fs::path(out_dir) / (stem + "_heatmap.png")).string();

  FeatureMap raster(result.map.h, result.map.w, 1, image_path);
  std::copy(result.map.scores.begin(), result.map.scores.end(), raster.v.begin());
  write_feature_cache(raster, result.raster_path, "anomaly-map:v1");
  write_png(result.heatmap_path, heatmap_image(result.map));

  if (shuffle_invocation_count().load() != shuffles_before)
    throw std::logic_error("random_shuffle invoked during prediction");
  return result;
}

}  // namespace fsr
