// fsr: train / evaluate / predict / bench / probe-mi command-line front end.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fsr/bench.hpp"
#include "fsr/checkpoint.hpp"
#include "fsr/dataset.hpp"
#include "fsr/errors.hpp"
#include "fsr/kernels.hpp"
#include "fsr/scoring.hpp"
#include "fsr/train.hpp"

namespace {

using namespace fsr;

std::vector<double> parse_tau_list(const std::string& csv) {
  std::vector<double> taus;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) taus.push_back(std::stod(item));
  return taus;
}

std::vector<DatasetIndex> scan_categories(const std::string& root,
                                          const std::vector<std::string>& wanted) {
  std::vector<std::string> names = wanted;
  if (names.empty()) names = list_categories(root);
  if (names.empty()) throw DataError("no categories found under " + root);
  std::vector<DatasetIndex> indices;
  for (const auto& name : names) indices.push_back(scan_dataset(root, name));
  return indices;
}

void write_text(const std::string& path, const std::string& text) {
  if (std::filesystem::path(path).has_parent_path())
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

int cmd_train(const std::string& config_path, const std::string& tau_opt,
              const std::string& setting_opt, int k_opt, long seed_opt,
              const std::string& data_opt, const std::string& out_opt) {
  RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  if (!tau_opt.empty()) config.tau = std::stod(tau_opt);
  if (!setting_opt.empty()) config.setting = parse_setting_mode(setting_opt);
  if (k_opt > 0) config.k = k_opt;
  if (seed_opt >= 0) config.seed = uint64_t(seed_opt);
  if (!data_opt.empty()) config.data_root = data_opt;
  if (!out_opt.empty()) config.out_dir = out_opt;
  config.validate();
  if (config.data_root.empty()) throw ConfigError("train: --data or data_root is required");

  const auto indices = scan_categories(config.data_root, config.categories);
  SettingSpec spec;
  spec.mode = config.setting;
  spec.seed = config.seed;
  if (config.setting == SettingMode::kFewShot) spec.k = config.k;
  const auto sets = build_setting(indices, spec);

  auto extractor = std::shared_ptr<const FeatureExtractor>(
      backbone_from_descriptor(config.backbone).release());
  const FeatureSource source = disk_feature_source(config, extractor);

  std::printf("training %zu set(s), setting=%s tau=%.3g seed=%llu\n", sets.size(),
              setting_mode_name(config.setting), config.tau,
              (unsigned long long)config.seed);
  for (const auto& result : train(config, sets, source))
    std::printf("  %-16s steps=%-6llu final_loss=%.6g -> %s\n", result.set_name.c_str(),
                (unsigned long long)result.steps,
                result.loss_log.empty() ? 0.0 : double(result.loss_log.back().total),
                result.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data,
             const std::string& category, const std::string& report_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig config = ckpt.model.config;
  if (!data.empty()) config.data_root = data;
  if (config.data_root.empty()) throw ConfigError("eval: --data is required");
  std::vector<std::string> wanted = config.categories;
  if (!category.empty()) wanted = {category};

  const auto indices = scan_categories(config.data_root, wanted);
  auto extractor = std::shared_ptr<const FeatureExtractor>(
      backbone_from_descriptor(config.backbone).release());
  const FeatureSource source = disk_feature_source(config, extractor);

  const MetricsReport report = evaluate(ckpt.model, indices, source);
  std::printf("%-16s %12s %12s\n", "category", "image_auroc", "pixel_auroc");
  for (const auto& c : report.categories)
    std::printf("%-16s %12.4f %12.4f\n", c.category.c_str(), c.image_auroc, c.pixel_auroc);
  std::printf("%-16s %12.4f %12.4f\n", "mean", report.mean_image_auroc,
              report.mean_pixel_auroc);

  if (!report_path.empty()) {
    write_text(report_path, report.to_json());
    std::filesystem::path csv = report_path;
    csv.replace_extension(".csv");
    write_text(csv.string(), report.to_csv());
    std::printf("report written to %s and %s\n", report_path.c_str(), csv.string().c_str());
  }
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& image,
                const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const PredictResult result = predict(ckpt.model, image, out_dir);
  std::printf("image_score=%.6g\n", double(result.map.image_score));
  std::printf("raster:  %s\nheatmap: %s\n", result.raster_path.c_str(),
              result.heatmap_path.c_str());
  return 0;
}

int cmd_bench(const std::string& taus_csv, int textures, long steps, long seed,
              const std::string& out_dir) {
  BenchSpec spec;
  spec.textures = textures;
  spec.seed = uint64_t(seed);
  RunConfig config = bench_config(spec, steps);
  config.out_dir = (std::filesystem::path(out_dir) / "runs").string();

  const std::vector<double> taus = parse_tau_list(taus_csv);
  const BenchReport report = run_bench(spec, config, taus);

  std::printf("%-8s %12s %12s %12s\n", "tau", "image_auroc", "pixel_auroc", "final_loss");
  for (const auto& row : report.rows)
    std::printf("%-8.3g %12.4f %12.4f %12.5f\n", row.tau, row.image_auroc, row.pixel_auroc,
                row.final_loss);
  const BenchRow best = report.best_fsr();
  std::printf("best FSR pixel AUROC %.4f at tau=%.3g (Rec baseline %.4f, gap %+.4f)\n",
              best.pixel_auroc, best.tau, report.rec_baseline().pixel_auroc,
              best.pixel_auroc - report.rec_baseline().pixel_auroc);

  write_text((std::filesystem::path(out_dir) / "bench_report.csv").string(), report.to_csv());
  write_text((std::filesystem::path(out_dir) / "bench_report.svg").string(), report.to_svg());
  return 0;
}

int cmd_probe_mi(int alphabet, int length, const std::string& taus_csv) {
  DiscreteSequenceModel model;
  model.alphabet = alphabet;
  model.length = length;
  model.symbol_probs.assign(size_t(alphabet), 1.0 / alphabet);

  std::vector<double> taus = parse_tau_list(taus_csv);
  if (taus.empty()) taus = {0.0, 0.25, 0.5, 0.75, 1.0};

  const double h = sequence_entropy_bits(model);
  std::printf("H(X) = %.6f bits (alphabet %d, length %d, uniform symbols)\n", h, alphabet,
              length);
  std::printf("%-8s %14s\n", "tau", "I(X*_tau;X) bits");
  for (const auto& [tau, mi] : mutual_information_probe(model, taus))
    std::printf("%-8.3g %14.6f\n", tau, mi);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature shuffling and restoration toolkit for unsupervised "
               "anomaly detection"};
  app.require_subcommand(1);
  app.footer("exit codes: 0 ok, 1 config/validation error, 2 data error, "
             "3 numerical divergence\n"
             "An epoch is one pass over the training set regardless of batch size.\n"
             "Kernel backend: auto-detected; override with FSR_KERNELS=scalar|avx2.");

  std::string config_path, tau_opt, setting_opt, data, out, ckpt, image, category, report;
  int k_opt = 0;
  long seed_opt = -1;

  auto* train_cmd = app.add_subcommand("train", "Train restoration model(s)");
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--tau", tau_opt, "shuffling rate in [0,1]");
  train_cmd->add_option("--setting", setting_opt, "few-shot | separate | unified");
  train_cmd->add_option("--k", k_opt, "few-shot sample count");
  train_cmd->add_option("--seed", seed_opt, "random seed");
  train_cmd->add_option("--data", data, "dataset root directory");
  train_cmd->add_option("--out", out, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", data, "dataset root directory");
  eval_cmd->add_option("--category", category, "restrict to one category");
  eval_cmd->add_option("--report", report, "write JSON (+ CSV) report here");

  auto* predict_cmd = app.add_subcommand("predict", "Score a single image");
  predict_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  predict_cmd->add_option("--image", image, "input image")->required();
  predict_cmd->add_option("--out", out, "output directory")->default_val("predictions");

  std::string taus_csv = "0.25,0.5";
  int textures = 3;
  long steps = 1500, bench_seed = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Synthetic Rec-vs-FSR benchmark");
  bench_cmd->add_option("--taus", taus_csv, "comma-separated shuffling rates");
  bench_cmd->add_option("--textures", textures, "number of texture families (1-3)");
  bench_cmd->add_option("--steps", steps, "training steps per model");
  bench_cmd->add_option("--seed", bench_seed, "benchmark seed");
  bench_cmd->add_option("--out", out, "output directory")->default_val("bench_out");

  int alphabet = 2, length = 4;
  std::string mi_taus;
  auto* mi_cmd = app.add_subcommand("probe-mi", "Exact mutual-information probe");
  mi_cmd->add_option("--alphabet", alphabet, "alphabet size (A^L <= 4096)");
  mi_cmd->add_option("--length", length, "sequence length");
  mi_cmd->add_option("--taus", mi_taus, "comma-separated shuffling rates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train_cmd->parsed())
      return cmd_train(config_path, tau_opt, setting_opt, k_opt, seed_opt, data, out);
    if (eval_cmd->parsed()) return cmd_eval(ckpt, data, category, report);
    if (predict_cmd->parsed()) return cmd_predict(ckpt, image, out);
    if (bench_cmd->parsed()) return cmd_bench(taus_csv, textures, steps, bench_seed, out);
    if (mi_cmd->parsed()) return cmd_probe_mi(alphabet, length, mi_taus);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
