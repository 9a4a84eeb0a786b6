#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ug/error.hpp"

namespace ug::harness {

/*
 * Flat key=value experiment configuration. Lines starting with '#' and blank
 * lines are ignored. Every key is checked against the known set and every
 * value is parsed when the config is built, before any computation starts.
 */
struct ExperimentConfig {
  // schedule
  std::string schedule = "linear";  // linear | cosine
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // predictor
  std::string predictor = "spectral";  // spectral | dataset | conv
  double spectrum_k0 = 4.0;            // cutoff in cycles per trained-resolution image
  double spectrum_temporal_k0 = 4.0;   // cutoff in cycles per trained clip
  std::string conv_params;

  // data
  std::string dataset = "textures";    // textures | two-class | pgm-dir
  std::string dataset_dir;
  int dataset_size = 8;
  std::uint64_t dataset_seed = 1;

  // shapes
  int channels = 1;
  int trained_size = 16;
  int trained_frames = 16;
  std::vector<std::size_t> plan = {2, 2};

  // guidance
  double cfg_scale = 1.0;
  std::optional<int> cond;
  double ug_theta = 1.0;
  double ug_eta = 1.0;
  bool ablate_time = false;
  bool ablate_power = false;
  std::string composition = "cfg-first";  // cfg-first | ug-inside-cfg

  // sampler
  std::string sampler = "ddim";  // ddim | ddpm
  int steps = 0;                 // 0 = full schedule
  double eta_ddim = 0.0;
  std::uint64_t seed = 0;
  int samples = 16;
  int checkpoint_every = 100;

  // sweep / metrics
  std::vector<double> sweep_theta = {0.0, 0.5, 1.0, 1.5};
  std::vector<double> sweep_eta = {0.2, 0.6, 1.0};
  int projections = 128;

  int workers = 1;
  std::string out = "out";

  void set(const std::string& key, const std::string& value);
  void validate() const;

  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::filesystem::path& path);
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return d;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long d = 0;
  try {
    if (!v.empty() && v[0] != '-') d = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("config key '" + key + "': '" + v + "' is not an unsigned integer");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return v;
  std::string msg = "config key '" + key + "': '" + v + "' is not one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg);
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  auto as_int = [&] { return static_cast<int>(parse_int(key, v)); };
  if (key == "schedule") schedule = one_of(key, v, {"linear", "cosine"});
  else if (key == "T") T = as_int();
  else if (key == "beta_start") beta_start = parse_double(key, v);
  else if (key == "beta_end") beta_end = parse_double(key, v);
  else if (key == "predictor") predictor = one_of(key, v, {"spectral", "dataset", "conv"});
  else if (key == "spectrum_k0") spectrum_k0 = parse_double(key, v);
  else if (key == "spectrum_temporal_k0") spectrum_temporal_k0 = parse_double(key, v);
  else if (key == "conv_params") conv_params = v;
  else if (key == "dataset") dataset = one_of(key, v, {"textures", "two-class", "pgm-dir"});
  else if (key == "dataset_dir") dataset_dir = v;
  else if (key == "dataset_size") dataset_size = as_int();
  else if (key == "dataset_seed") dataset_seed = parse_u64(key, v);
  else if (key == "channels") channels = as_int();
  else if (key == "trained_size") trained_size = as_int();
  else if (key == "trained_frames") trained_frames = as_int();
  else if (key == "plan") {
    plan.clear();
    for (const auto& f : split_list(v)) {
      const auto x = parse_int(key, f);
      if (x < 1) throw ConfigError("config key 'plan': factors must be positive");
      plan.push_back(static_cast<std::size_t>(x));
    }
  } else if (key == "cfg_scale") cfg_scale = parse_double(key, v);
  else if (key == "class") cond = (v == "none") ? std::nullopt : std::optional<int>(as_int());
  else if (key == "ug_theta") ug_theta = parse_double(key, v);
  else if (key == "ug_eta") ug_eta = parse_double(key, v);
  else if (key == "ablate_time") ablate_time = parse_bool(key, v);
  else if (key == "ablate_power") ablate_power = parse_bool(key, v);
  else if (key == "composition") composition = one_of(key, v, {"cfg-first", "ug-inside-cfg"});
  else if (key == "sampler") sampler = one_of(key, v, {"ddim", "ddpm"});
  else if (key == "steps") steps = as_int();
  else if (key == "eta_ddim") eta_ddim = parse_double(key, v);
  else if (key == "seed") seed = parse_u64(key, v);
  else if (key == "samples") samples = as_int();
  else if (key == "checkpoint_every") checkpoint_every = as_int();
  else if (key == "sweep_theta") {
    sweep_theta.clear();
    for (const auto& f : split_list(v)) sweep_theta.push_back(parse_double(key, f));
  } else if (key == "sweep_eta") {
    sweep_eta.clear();
    for (const auto& f : split_list(v)) sweep_eta.push_back(parse_double(key, f));
  } else if (key == "projections") projections = as_int();
  else if (key == "workers") workers = as_int();
  else if (key == "out") out = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void ExperimentConfig::validate() const {
  if (T < 2) throw ConfigError("T must be >= 2");
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (trained_size < 3) throw ConfigError("trained_size must be >= 3");
  if (trained_frames < 1) throw ConfigError("trained_frames must be >= 1");
  if (plan.empty()) throw ConfigError("plan must list at least one factor");
  if (dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
  if (!(spectrum_k0 > 0.0) || !(spectrum_temporal_k0 > 0.0)) throw ConfigError("spectrum cutoffs must be positive");
  if (!(cfg_scale >= 0.0)) throw ConfigError("cfg_scale must be >= 0");
  if (!(ug_theta >= 0.0)) throw ConfigError("ug_theta must be >= 0");
  if (!(ug_eta >= 0.0 && ug_eta <= 1.0)) throw ConfigError("ug_eta must lie in [0, 1]");
  if (steps != 0 && (steps < 2 || steps > T)) throw ConfigError("steps must be 0 (full schedule) or in [2, T]");
  if (!(eta_ddim >= 0.0 && eta_ddim <= 1.0)) throw ConfigError("eta_ddim must lie in [0, 1]");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (projections < 1) throw ConfigError("projections must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (sweep_theta.empty() || sweep_eta.empty()) throw ConfigError("sweep lists must be nonempty");
  for (double th : sweep_theta)
    if (!(th >= 0.0)) throw ConfigError("sweep_theta entries must be >= 0");
  for (double e : sweep_eta)
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("sweep_eta entries must lie in [0, 1]");
  if (predictor == "conv" && conv_params.empty()) throw ConfigError("predictor=conv requires conv_params");
  if (dataset == "pgm-dir" && dataset_dir.empty()) throw ConfigError("dataset=pgm-dir requires dataset_dir");
  if (cond && predictor != "dataset") throw ConfigError("class conditioning requires predictor=dataset");
  if (cond && dataset != "two-class") throw ConfigError("class conditioning requires dataset=two-class");
}

inline ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(detail::trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse(is);
}

}  // namespace ug::harness
