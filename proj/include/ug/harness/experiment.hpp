#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "ug/conv_denoiser.hpp"
#include "ug/dataset_denoiser.hpp"
#include "ug/harness/config.hpp"
#include "ug/harness/image_io.hpp"
#include "ug/sampler.hpp"
#include "ug/spectral.hpp"

namespace ug::harness {

// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
// exception thrown by any task is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nthreads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += nthreads) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline NoiseSchedule build_schedule(const ExperimentConfig& cfg) {
  return cfg.schedule == "cosine" ? make_cosine(cfg.T) : make_linear_beta(cfg.T, cfg.beta_start, cfg.beta_end);
}

inline Shape trained_shape(const ExperimentConfig& cfg, bool temporal = false) {
  const auto s = static_cast<std::size_t>(cfg.trained_size);
  if (temporal) return {static_cast<std::size_t>(cfg.channels), {static_cast<std::size_t>(cfg.trained_frames), s, s}};
  return {static_cast<std::size_t>(cfg.channels), {s, s}};
}

inline ScalePlan build_plan(const ExperimentConfig& cfg, std::size_t axes) {
  if (cfg.plan.size() != axes)
    throw ConfigError("plan has " + std::to_string(cfg.plan.size()) + " factors but the fields have " + std::to_string(axes) +
                      " axes");
  return ScalePlan(cfg.plan);
}

// Band-limited texture spectrum with the cutoff given in cycles per trained image.
inline Spectrum texture_spectrum(const ExperimentConfig& cfg, double k0_scale = 1.0, bool temporal = false) {
  const double spatial = cfg.spectrum_k0 * k0_scale / cfg.trained_size;
  if (temporal) return band_limited_spectrum({cfg.spectrum_temporal_k0 / cfg.trained_frames, spatial, spatial});
  return band_limited_spectrum({spatial, spatial});
}

struct Dataset {
  std::vector<Field> items;
  std::vector<int> labels;
  int classes = 0;
};

/*
 * Procedural datasets at the trained resolution:
 *   textures   band-limited Gaussian textures, unconditional
 *   two-class  class 0 with half the cutoff, class 1 with 1.5x the cutoff
 *   pgm-dir    every *.pgm file of dataset_dir, sorted by name
 */
inline Dataset build_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  const Shape shape = trained_shape(cfg);
  if (cfg.dataset == "pgm-dir") {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(cfg.dataset_dir))
      if (e.path().extension() == ".pgm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .pgm files in " + cfg.dataset_dir);
    for (const auto& f : files) ds.items.push_back(read_pgm(f));
    return ds;
  }
  RngStream rng(cfg.dataset_seed, 0);
  if (cfg.dataset == "textures") {
    const Spectrum s = texture_spectrum(cfg);
    for (int i = 0; i < cfg.dataset_size; ++i) ds.items.push_back(sample_gaussian_field(s, shape, rng));
    return ds;
  }
  const Spectrum smooth = texture_spectrum(cfg, 0.5), detailed = texture_spectrum(cfg, 1.5);
  ds.classes = 2;
  for (int i = 0; i < cfg.dataset_size; ++i) {
    const int label = i % 2;
    ds.items.push_back(sample_gaussian_field(label == 0 ? smooth : detailed, shape, rng));
    ds.labels.push_back(label);
  }
  return ds;
}

inline std::unique_ptr<Predictor> build_predictor(const ExperimentConfig& cfg, const NoiseSchedule& sched, bool temporal = false) {
  if (cfg.predictor == "spectral") return std::make_unique<SpectralGaussianDenoiser>(texture_spectrum(cfg, 1.0, temporal), sched, temporal ? 3 : 2);
  if (temporal) throw ConfigError("temporal experiments require predictor=spectral");
  if (cfg.predictor == "conv") {
    auto conv = ConvDenoiser::load(cfg.conv_params, sched);
    if (conv.channels() != static_cast<std::size_t>(cfg.channels))
      throw ConfigError("conv parameters are for " + std::to_string(conv.channels()) + " channels");
    return std::make_unique<ConvDenoiser>(std::move(conv));
  }
  Dataset ds = build_dataset(cfg);
  return std::make_unique<DatasetDenoiser>(std::move(ds.items), sched, std::move(ds.labels), ds.classes);
}

inline SamplerConfig build_sampler(const ExperimentConfig& cfg) {
  SamplerConfig s;
  s.kind = cfg.sampler == "ddpm" ? SamplerKind::Ancestral : SamplerKind::Deterministic;
  s.steps = cfg.steps == 0 ? full_steps(cfg.T) : strided_steps(cfg.T, cfg.steps);
  s.eta_ddim = cfg.eta_ddim;
  s.checkpoint_every = cfg.checkpoint_every;
  return s;
}

inline GuidanceConfig build_guidance(const ExperimentConfig& cfg, const ScalePlan& plan) {
  GuidanceConfig g;
  g.cfg_scale = cfg.cfg_scale;
  g.ug_theta = cfg.ug_theta;
  g.ug_eta = cfg.ug_eta;
  g.plan = plan;
  g.ablate_time_adjust = cfg.ablate_time;
  g.ablate_power_adjust = cfg.ablate_power;
  g.composition = cfg.composition == "ug-inside-cfg" ? Composition::UgInsideCfg : Composition::CfgFirst;
  g.validate();
  return g;
}

// RNG stream ids per sample index: initial noise pair, target-resolution
// ancestral noise, trained-resolution ancestral noise.
inline RngStream init_stream(std::uint64_t seed, std::size_t i) { return RngStream(seed, 3 * i); }
inline RngStream hi_stream(std::uint64_t seed, std::size_t i) { return RngStream(seed, 3 * i + 1); }
inline RngStream low_stream(std::uint64_t seed, std::size_t i) { return RngStream(seed, 3 * i + 2); }

}  // namespace ug::harness
