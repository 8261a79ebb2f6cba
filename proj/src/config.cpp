#include "fsr/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "fsr/errors.hpp"

namespace fsr {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config: " + key + " expects a boolean, got \"" + v + "\"");
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got \"" + v + "\"");
  }
}

double parse_float(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got \"" + v + "\"");
  }
}

}  // namespace

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return int(std::clamp(hw, 1u, 4u));
}

void RunConfig::validate() const {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("config: tau must lie in [0,1]");
  if (image_size <= 0 || feature_size <= 0) throw ConfigError("config: sizes must be positive");
  if (patch <= 0 || feature_size % patch != 0)
    throw ConfigError("config: patch must divide feature_size");
  if (width <= 0 || width % 2 != 0)
    throw ConfigError("config: width must be positive and even");
  if (heads <= 0 || width % heads != 0)
    throw ConfigError("config: width must be divisible by heads");
  if (depth < 0 || mlp_ratio <= 0) throw ConfigError("config: bad depth or mlp_ratio");
  if (epochs < 0 || max_steps < 0) throw ConfigError("config: bad training budget");
  if (setting == SettingMode::kFewShot && k < 1)
    throw ConfigError("config: few-shot requires k >= 1");
  if (optim.lr <= 0.f) throw ConfigError("config: lr must be positive");
  if (smoothing_sigma < 0.f) throw ConfigError("config: smoothing_sigma must be >= 0");
}

void RunConfig::apply_preset(const std::string& name) {
  if (name == "fewshot" || name == "few-shot") {
    setting = SettingMode::kFewShot;
    tau = 0.1;
    batch_size = 1;
  } else if (name == "separate") {
    setting = SettingMode::kSeparate;
    tau = 0.3;
    batch_size = 8;
  } else if (name == "unified") {
    setting = SettingMode::kUnified;
    tau = 0.9;
    batch_size = 8;
  } else if (name == "default") {
    tau = 0.1;
  } else {
    throw ConfigError("config: unknown preset \"" + name + "\"");
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out.precision(10);
  out << "setting=" << setting_mode_name(setting) << "\n";
  if (!categories.empty()) {
    out << "categories=";
    for (size_t i = 0; i < categories.size(); ++i)
      out << (i ? "," : "") << categories[i];
    out << "\n";
  }
  out << "k=" << k << "\n";
  out << "seed=" << seed << "\n";
  out << "tau=" << tau << "\n";
  out << "per_sample_shuffle=" << (per_sample_shuffle ? 1 : 0) << "\n";
  out << "image_size=" << image_size << "\n";
  out << "feature_size=" << feature_size << "\n";
  out << "patch=" << patch << "\n";
  out << "depth=" << depth << "\n";
  out << "width=" << width << "\n";
  out << "heads=" << heads << "\n";
  out << "mlp_ratio=" << mlp_ratio << "\n";
  out << "learnable_positions=" << (learnable_positions ? 1 : 0) << "\n";
  out << "epochs=" << epochs << "\n";
  out << "max_steps=" << max_steps << "\n";
  out << "batch_size=" << batch_size << "\n";
  out << "checkpoint_every=" << checkpoint_every << "\n";
  out << "threads=" << threads << "\n";
  out << "lr=" << optim.lr << "\n";
  out << "weight_decay=" << optim.weight_decay << "\n";
  out << "image_score=" << (image_score == ImageScoreMode::kStd ? "std" : "max") << "\n";
  out << "smoothing_sigma=" << smoothing_sigma << "\n";
  out << "backbone=" << backbone << "\n";
  if (!stages.empty()) {
    out << "stages=";
    for (size_t i = 0; i < stages.size(); ++i) out << (i ? "," : "") << stages[i];
    out << "\n";
  }
  out << "norm_mean=" << norm.mean[0] << "," << norm.mean[1] << "," << norm.mean[2] << "\n";
  out << "norm_std=" << norm.std[0] << "," << norm.std[1] << "," << norm.std[2] << "\n";
  out << "data_root=" << data_root << "\n";
  out << "out_dir=" << out_dir << "\n";
  out << "cache_dir=" << cache_dir << "\n";
  return out.str();
}

RunConfig RunConfig::from_string(const std::string& text) {
  // Collect pairs first; an optional preset applies before everything else.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  RunConfig cfg;
  for (const auto& [key, value] : pairs)
    if (key == "preset") cfg.apply_preset(value);

  for (const auto& [key, value] : pairs) {
    if (key == "preset") continue;
    if (key == "setting") cfg.setting = parse_setting_mode(value);
    else if (key == "categories") cfg.categories = split_csv(value);
    else if (key == "k") cfg.k = int(parse_int(key, value));
    else if (key == "seed") cfg.seed = uint64_t(parse_int(key, value));
    else if (key == "tau") cfg.tau = parse_float(key, value);
    else if (key == "per_sample_shuffle") cfg.per_sample_shuffle = parse_bool(key, value);
    else if (key == "image_size") cfg.image_size = int(parse_int(key, value));
    else if (key == "feature_size") cfg.feature_size = int(parse_int(key, value));
    else if (key == "patch") cfg.patch = int(parse_int(key, value));
    else if (key == "depth") cfg.depth = int(parse_int(key, value));
    else if (key == "width") cfg.width = int(parse_int(key, value));
    else if (key == "heads") cfg.heads = int(parse_int(key, value));
    else if (key == "mlp_ratio") cfg.mlp_ratio = int(parse_int(key, value));
    else if (key == "learnable_positions") cfg.learnable_positions = parse_bool(key, value);
    else if (key == "epochs") cfg.epochs = int(parse_int(key, value));
    else if (key == "max_steps") cfg.max_steps = parse_int(key, value);
    else if (key == "batch_size") cfg.batch_size = int(parse_int(key, value));
    else if (key == "checkpoint_every") cfg.checkpoint_every = int(parse_int(key, value));
    else if (key == "threads") cfg.threads = int(parse_int(key, value));
    else if (key == "lr") cfg.optim.lr = float(parse_float(key, value));
    else if (key == "weight_decay") cfg.optim.weight_decay = float(parse_float(key, value));
    else if (key == "image_score") {
      if (value == "std") cfg.image_score = ImageScoreMode::kStd;
      else if (value == "max") cfg.image_score = ImageScoreMode::kMax;
      else throw ConfigError("config: image_score must be std or max");
    } else if (key == "smoothing_sigma") cfg.smoothing_sigma = float(parse_float(key, value));
    else if (key == "backbone") cfg.backbone = value;
    else if (key == "stages") {
      cfg.stages.clear();
      for (const auto& s : split_csv(value)) cfg.stages.push_back(int(parse_int(key, s)));
    } else if (key == "norm_mean" || key == "norm_std") {
      const auto parts = split_csv(value);
      if (parts.size() != 3)
        throw ConfigError("config: " + key + " expects three comma-separated values");
      for (int i = 0; i < 3; ++i) {
        const float f = float(parse_float(key, parts[size_t(i)]));
        if (key == "norm_mean") cfg.norm.mean[size_t(i)] = f;
        else cfg.norm.std[size_t(i)] = f;
      }
    } else if (key == "data_root") cfg.data_root = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "cache_dir") cfg.cache_dir = value;
    else throw ConfigError("config: unknown key \"" + key + "\"");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

}  // namespace fsr
