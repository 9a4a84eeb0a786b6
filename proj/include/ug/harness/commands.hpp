#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "ug/harness/experiment.hpp"
#include "ug/metrics.hpp"

namespace ug::harness {

namespace fs = std::filesystem;

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

// {experiment}_theta{θ}_eta{η}_seed{seed}_{resolution}_{index}.pgm
inline std::string image_name(const std::string& experiment, double theta, double eta, std::uint64_t seed, const Shape& shape,
                              std::size_t index, const std::string& suffix = {}) {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%03zu", index);
  return experiment + "_theta" + fmt_short(theta) + "_eta" + fmt_short(eta) + "_seed" + std::to_string(seed) + "_" +
         dims_to_string(shape.dims) + "_" + idx + suffix + (shape.channels == 3 ? ".ppm" : ".pgm");
}

// ---------------------------------------------------------------------------
// tau-table

inline std::vector<TauRow> cmd_tau_table(const ExperimentConfig& cfg, std::ostream& log) {
  const NoiseSchedule sched = build_schedule(cfg);
  const ScalePlan plan(cfg.plan);
  const auto rows = tau_table(sched, plan.n());
  const fs::path path = fs::path(cfg.out) / "tau_table.csv";
  auto os = open_output(path);
  os << "t,tau,alpha_t,alpha_tau,P\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.tau << ',' << fmt_num(r.alpha_t) << ',' << fmt_num(r.alpha_tau) << ',' << fmt_num(r.power) << '\n';
  log << "wrote " << rows.size() << " rows for n = " << plan.n() << " to " << path.string() << '\n';
  return rows;
}

// ---------------------------------------------------------------------------
// Paired sampling shared by sample, sweep and ablate.

struct PairedRun {
  std::vector<Field> hi;       // target-resolution samples
  std::vector<Field> low;      // trained-resolution samples from the paired noise
  std::vector<Trajectory> hi_traj;
  std::vector<Trajectory> low_traj;
  CallStats hi_stats;          // guided target-resolution runs, summed over samples
  CallStats low_stats;         // plain trained-resolution runs, summed over samples
};

struct RunSetup {
  NoiseSchedule sched;
  std::unique_ptr<Predictor> predictor;
  ScalePlan plan;
  SamplerConfig sampler;
  Shape shape_low;
  Shape shape_hi;
};

inline RunSetup build_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  NoiseSchedule sched = build_schedule(cfg);
  auto predictor = build_predictor(cfg, sched);
  const Shape shape_low = trained_shape(cfg);
  ScalePlan plan = build_plan(cfg, shape_low.dims.size());
  const Shape shape_hi = plan.upsampled(shape_low);
  SamplerConfig sampler = build_sampler(cfg);
  sampler.validate(cfg.T);
  return {std::move(sched), std::move(predictor), std::move(plan), std::move(sampler), shape_low, shape_hi};
}

/*
 * Samples cfg.samples target-resolution fields under `guide` and, when
 * `with_low` is set, the matching trained-resolution fields from the paired
 * noise. Sample i always draws from the same streams, so runs differing only
 * in guidance are directly comparable.
 */
inline PairedRun run_paired(const ExperimentConfig& cfg, const RunSetup& setup, const GuidanceConfig& guide, bool with_low,
                            const std::function<StepObserver(std::size_t)>& observer_for = {}) {
  const auto count = static_cast<std::size_t>(cfg.samples);
  PairedRun run;
  run.hi.resize(count, Field(setup.shape_hi));
  run.hi_traj.resize(count);
  if (with_low) {
    run.low.resize(count, Field(setup.shape_low));
    run.low_traj.resize(count);
  }
  GuidanceConfig plain = guide;
  plain.ug_theta = 0.0;
  parallel_for(count, cfg.workers, [&](std::size_t i) {
    RngStream init = init_stream(cfg.seed, i);
    NoisePair pair = init_noise_pair(setup.shape_hi, setup.plan, init);
    RngStream hs = hi_stream(cfg.seed, i);
    run.hi_traj[i] = sample_loop(*setup.predictor, guide, setup.sampler, std::move(pair.hi), cfg.cond, hs,
                                 observer_for ? observer_for(i) : StepObserver{});
    run.hi[i] = run.hi_traj[i].x0;
    if (with_low) {
      RngStream ls = low_stream(cfg.seed, i);
      run.low_traj[i] = sample_loop(*setup.predictor, plain, setup.sampler, std::move(pair.low), cfg.cond, ls);
      run.low[i] = run.low_traj[i].x0;
    }
  });
  for (const auto& t : run.hi_traj) run.hi_stats += t.stats;
  for (const auto& t : run.low_traj) run.low_stats += t.stats;
  return run;
}

inline void write_images(const fs::path& dir, const std::string& experiment, const ExperimentConfig& cfg, double theta, double eta,
                         const std::vector<Field>& set) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < set.size(); ++i)
    write_image(dir / image_name(experiment, theta, eta, cfg.seed, set[i].shape(), i), set[i]);
}

inline std::vector<Field> downsampled_all(const std::vector<Field>& set, const ScalePlan& plan) {
  std::vector<Field> out;
  out.reserve(set.size());
  for (const auto& x : set) out.push_back(downsample_box(x, plan));
  return out;
}

// Sliced Wasserstein directions come from one fixed stream so that every cell
// is measured along the same projections.
inline double reference_distance(const std::vector<Field>& hi, const std::vector<Field>& low_ref, const ScalePlan& plan,
                                 const ExperimentConfig& cfg) {
  RngStream dirs(cfg.seed, std::uint64_t{1} << 40);
  return sliced_wasserstein(SampleSet(downsampled_all(hi, plan)), SampleSet(low_ref, Provenance::Reference), cfg.projections,
                            dirs);
}

// Mean power per sample above the trained-resolution Nyquist radius; NaN when
// the fields are not square power-of-two images.
inline double detail_power(const std::vector<Field>& hi, std::size_t trained_size) {
  const auto& d = hi.front().dims();
  if (d.size() != 2 || d[0] != d[1] || !fft::is_power_of_two(d[0])) return std::numeric_limits<double>::quiet_NaN();
  const RadialSpectrum spec = radial_power_spectrum(SampleSet(hi));
  double s = 0.0;
  for (std::size_t b = trained_size / 2 + 1; b < spec.power.size(); ++b) s += spec.power[b];
  return s;
}

// ---------------------------------------------------------------------------
// sample

struct SampleResult {
  PairedRun run;
  long low_calls_per_sample = 0;
};

inline SampleResult cmd_sample(const ExperimentConfig& cfg, std::ostream& log) {
  const RunSetup setup = build_setup(cfg);
  const GuidanceConfig guide = build_guidance(cfg, setup.plan);
  ug::detail::Timer timer;
  SampleResult res{run_paired(cfg, setup, guide, true)};
  const double seconds = timer.seconds();
  const fs::path out(cfg.out);

  write_images(out / "sample" / "target", "sample", cfg, cfg.ug_theta, cfg.ug_eta, res.run.hi);
  write_images(out / "sample" / "trained", "sample", cfg, 0.0, cfg.ug_eta, res.run.low);

  {
    auto os = open_output(out / "trajectory.csv");
    os << "sample,resolution,t,mean,variance\n";
    auto emit = [&](const std::vector<Trajectory>& trajs, const Shape& shape) {
      for (std::size_t i = 0; i < trajs.size(); ++i)
        for (const auto& [t, x] : trajs[i].snapshots) {
          const Moments m = field_moments(x);
          os << i << ',' << dims_to_string(shape.dims) << ',' << t << ',' << fmt_num(m.mean) << ',' << fmt_num(m.variance) << '\n';
        }
    };
    emit(res.run.hi_traj, setup.shape_hi);
    emit(res.run.low_traj, setup.shape_low);
  }

  const auto n = static_cast<long>(cfg.samples);
  res.low_calls_per_sample = res.run.hi_stats.low_calls / n;
  {
    auto os = open_output(out / "calls.csv");
    os << "run,resolution,calls,guidance_calls,entries,guidance_entries\n";
    const auto& g = res.run.hi_stats;
    const auto& b = res.run.low_stats;
    os << "guided," << dims_to_string(setup.shape_hi.dims) << ',' << g.hi_calls / n << ',' << g.low_calls / n << ','
       << g.hi_entries / n << ',' << g.low_entries / n << '\n';
    os << "plain," << dims_to_string(setup.shape_low.dims) << ',' << b.hi_calls / n << ',' << b.low_calls / n << ','
       << b.hi_entries / n << ',' << b.low_entries / n << '\n';
  }

  const auto& g = res.run.hi_stats;
  log << "sampler " << cfg.sampler << ", " << setup.sampler.steps.size() - 1 << " transitions, " << cfg.samples << " samples "
      << dims_to_string(setup.shape_low.dims) << " -> " << dims_to_string(setup.shape_hi.dims) << '\n';
  log << "low-res predictor calls per sample: " << res.low_calls_per_sample << '\n';
  log << "target-res predictor calls per sample: " << g.hi_calls / n << '\n';
  log << "predictor seconds: target " << fmt_short(g.hi_seconds) << ", low-res guidance " << fmt_short(g.low_seconds)
      << ", total wall " << fmt_short(seconds) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  double theta;
  double eta;
  double sliced_wasserstein;
  double global_mean;
  double global_variance;
  double detail_power;
};

inline std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const RunSetup setup = build_setup(cfg);
  const fs::path out(cfg.out);

  // The reference set is the trained-resolution run on the paired noise; it
  // does not depend on the guidance parameters.
  GuidanceConfig ref_guide = build_guidance(cfg, setup.plan);
  ref_guide.ug_theta = 0.0;
  const PairedRun ref = run_paired(cfg, setup, ref_guide, true);

  std::vector<std::pair<double, double>> cells;
  for (double eta : cfg.sweep_eta)
    for (double theta : cfg.sweep_theta) cells.emplace_back(theta, eta);

  std::vector<SweepRow> rows(cells.size());
  ExperimentConfig inner = cfg;
  inner.workers = 1;
  parallel_for(cells.size(), cfg.workers, [&](std::size_t k) {
    GuidanceConfig g = build_guidance(cfg, setup.plan);
    g.ug_theta = cells[k].first;
    g.ug_eta = cells[k].second;
    const PairedRun run = run_paired(inner, setup, g, false);
    const MomentReport mr = moment_report(SampleSet(run.hi));
    rows[k] = {cells[k].first, cells[k].second, reference_distance(run.hi, ref.low, setup.plan, cfg), mr.global_mean,
               mr.global_variance, detail_power(run.hi, static_cast<std::size_t>(cfg.trained_size))};
  });

  {
    auto os = open_output(out / "sweep.csv");
    os << "theta,eta,sliced_wasserstein,global_mean,global_variance,detail_power,n_samples,seed\n";
    for (const auto& r : rows)
      os << fmt_num(r.theta) << ',' << fmt_num(r.eta) << ',' << fmt_num(r.sliced_wasserstein) << ',' << fmt_num(r.global_mean)
         << ',' << fmt_num(r.global_variance) << ',' << fmt_num(r.detail_power) << ',' << cfg.samples << ',' << cfg.seed << '\n';
  }
  {
    std::vector<MetricRow> metrics;
    const auto n = static_cast<std::size_t>(cfg.samples);
    const MomentReport rm = moment_report(SampleSet(ref.low));
    metrics.push_back({"reference_global_variance", rm.global_variance, n, cfg.seed});
    for (const auto& r : rows) {
      const std::string cell = "[theta=" + fmt_short(r.theta) + ";eta=" + fmt_short(r.eta) + "]";
      metrics.push_back({"sliced_wasserstein" + cell, r.sliced_wasserstein, n, cfg.seed});
      metrics.push_back({"global_mean" + cell, r.global_mean, n, cfg.seed});
      metrics.push_back({"global_variance" + cell, r.global_variance, n, cfg.seed});
      metrics.push_back({"detail_power" + cell, r.detail_power, n, cfg.seed});
    }
    auto os = open_output(out / "metrics.csv");
    write_metric_rows(os, metrics);
  }

  for (double eta : cfg.sweep_eta) {
    const SweepRow* best = nullptr;
    for (const auto& r : rows)
      if (r.eta == eta && (!best || r.sliced_wasserstein < best->sliced_wasserstein)) best = &r;
    log << "eta " << fmt_short(eta) << ": argmin theta of sliced Wasserstein = " << fmt_short(best->theta) << " ("
        << fmt_short(best->sliced_wasserstein) << ")\n";
  }
  log << "wrote " << rows.size() << " sweep rows to " << (out / "sweep.csv").string() << '\n';
  return rows;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationRun {
  std::string name;
  bool ablate_time;
  bool ablate_power;
  PairedRun run;
  std::vector<int> steps;              // sampler steps observed, in order
  std::vector<double> input_variance;  // pooled variance of D[x_t]/sqrt(P) per observed step
  std::vector<double> deviation_sigma; // (variance - 1) / sqrt(2 / entries)
};

/*
 * Four runs from identical seeds. The diagnostic is the variance of the input
 * handed to the trained-resolution predictor, pooled over all samples, at
 * every sampler step. Its standard error treats the pooled entries as
 * independent.
 */
inline std::vector<AblationRun> cmd_ablate(const ExperimentConfig& cfg, std::ostream& log) {
  const RunSetup setup = build_setup(cfg);
  const fs::path out(cfg.out);
  const std::size_t nsteps = setup.sampler.steps.size() - 1;
  const auto count = static_cast<std::size_t>(cfg.samples);

  std::vector<AblationRun> runs = {
      {"both", false, false, {}, {}, {}, {}},
      {"no_tau", true, false, {}, {}, {}, {}},
      {"no_power", false, true, {}, {}, {}, {}},
      {"neither", true, true, {}, {}, {}, {}},
  };
  std::vector<MetricRow> metrics;

  PairedRun ref;
  for (auto& r : runs) {
    GuidanceConfig g = build_guidance(cfg, setup.plan);
    g.ablate_time_adjust = r.ablate_time;
    g.ablate_power_adjust = r.ablate_power;
    // per sample, per step: (sum, sum of squares, entries)
    std::vector<std::vector<std::array<double, 3>>> acc(count, std::vector<std::array<double, 3>>(nsteps));
    auto observer_for = [&](std::size_t i) -> StepObserver {
      return [&, i, k = std::size_t{0}](int t, const Field& x) mutable {
        const LowResInput in = low_res_input(x, t, g, setup.sched);
        auto& a = acc[i][k++];
        for (double v : in.field.data()) {
          a[0] += v;
          a[1] += v * v;
        }
        a[2] += static_cast<double>(in.field.size());
      };
    };
    const bool first = &r == &runs.front();
    r.run = run_paired(cfg, setup, g, first, observer_for);
    if (first) ref.low = r.run.low;

    for (std::size_t k = 0; k < nsteps; ++k) {
      double s = 0.0, ss = 0.0, m = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        s += acc[i][k][0];
        ss += acc[i][k][1];
        m += acc[i][k][2];
      }
      const double mean = s / m;
      const double var = ss / m - mean * mean;
      r.steps.push_back(setup.sampler.steps[k]);
      r.input_variance.push_back(var);
      r.deviation_sigma.push_back((var - 1.0) / std::sqrt(2.0 / m));
    }

    write_images(out / r.name, "ablate_" + r.name, cfg, cfg.ug_theta, cfg.ug_eta, r.run.hi);
    const MomentReport mr = moment_report(SampleSet(r.run.hi));
    metrics.push_back({r.name + ".sliced_wasserstein", reference_distance(r.run.hi, ref.low, setup.plan, cfg), count, cfg.seed});
    metrics.push_back({r.name + ".global_variance", mr.global_variance, count, cfg.seed});
    double worst = 0.0;
    for (double d : r.deviation_sigma) worst = std::max(worst, std::abs(d));
    metrics.push_back({r.name + ".max_abs_deviation_sigma", worst, count, cfg.seed});
    log << r.name << ": max |input variance - 1| = " << fmt_short(worst) << " sigma\n";
  }

  {
    auto os = open_output(out / "ablate_variance.csv");
    os << "run,t,alpha_t,input_variance,deviation_sigma\n";
    for (const auto& r : runs)
      for (std::size_t k = 0; k < r.steps.size(); ++k)
        os << r.name << ',' << r.steps[k] << ',' << fmt_num(setup.sched.alpha(r.steps[k])) << ',' << fmt_num(r.input_variance[k])
           << ',' << fmt_num(r.deviation_sigma[k]) << '\n';
  }
  auto os = open_output(out / "ablate_metrics.csv");
  write_metric_rows(os, metrics);
  return runs;
}

// ---------------------------------------------------------------------------
// temporal

struct TemporalResult {
  ScalePlan plan;
  Shape shape_low;
  Shape shape_hi;
  std::vector<Field> ug;
  std::vector<Field> plain;
  std::vector<double> ug_diff_energy;     // per frame pair, averaged over samples
  std::vector<double> plain_diff_energy;
};

// Mean squared difference between consecutive frames of an [F, H, W] field.
inline std::vector<double> frame_diff_energy(const Field& x) {
  const auto& d = x.dims();
  const std::size_t frames = d[0], plane = d[1] * d[2];
  std::vector<double> e(frames - 1, 0.0);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t f = 0; f + 1 < frames; ++f) {
      const std::size_t base = c * x.shape().plane() + f * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double diff = x[base + plane + i] - x[base + i];
        e[f] += diff * diff;
      }
    }
  for (auto& v : e) v /= static_cast<double>(plane * x.channels());
  return e;
}

inline TemporalResult cmd_temporal(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const NoiseSchedule sched = build_schedule(cfg);
  const auto predictor = build_predictor(cfg, sched, true);
  const Shape shape_low = trained_shape(cfg, true);
  const ScalePlan plan = cfg.plan.size() == 3 ? ScalePlan(cfg.plan) : ScalePlan({2, 1, 1});
  const Shape shape_hi = plan.upsampled(shape_low);
  const SamplerConfig sampler = build_sampler(cfg);
  GuidanceConfig ug = build_guidance(cfg, plan);
  GuidanceConfig plain = ug;
  plain.ug_theta = 0.0;

  const auto count = static_cast<std::size_t>(cfg.samples);
  TemporalResult res{plan, shape_low, shape_hi, std::vector<Field>(count, Field(shape_hi)), std::vector<Field>(count, Field(shape_hi)),
                     {}, {}};
  parallel_for(count, cfg.workers, [&](std::size_t i) {
    RngStream init = init_stream(cfg.seed, i);
    const NoisePair pair = init_noise_pair(shape_hi, plan, init);
    RngStream a = hi_stream(cfg.seed, i), b = hi_stream(cfg.seed, i);
    res.ug[i] = sample_loop(*predictor, ug, sampler, pair.hi, std::nullopt, a).x0;
    res.plain[i] = sample_loop(*predictor, plain, sampler, pair.hi, std::nullopt, b).x0;
  });

  auto mean_energy = [&](const std::vector<Field>& set) {
    std::vector<double> e(shape_hi.dims[0] - 1, 0.0);
    for (const auto& x : set) {
      const auto d = frame_diff_energy(x);
      for (std::size_t f = 0; f < e.size(); ++f) e[f] += d[f] / static_cast<double>(set.size());
    }
    return e;
  };
  res.ug_diff_energy = mean_energy(res.ug);
  res.plain_diff_energy = mean_energy(res.plain);

  const fs::path out = fs::path(cfg.out) / "temporal";
  auto emit_frames = [&](const std::string& variant, const std::vector<Field>& set, double theta) {
    const fs::path dir = out / variant;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t f = 0; f < shape_hi.dims[0]; ++f) {
        char frame[16];
        std::snprintf(frame, sizeof frame, "_f%03zu", f);
        write_image(dir / image_name("temporal_" + variant, theta, cfg.ug_eta, cfg.seed, shape_hi, i, frame), set[i], f);
      }
  };
  emit_frames("ug", res.ug, cfg.ug_theta);
  emit_frames("plain", res.plain, 0.0);

  auto os = open_output(out / "temporal_consistency.csv");
  os << "variant,frame_pair,diff_energy\n";
  for (std::size_t f = 0; f < res.ug_diff_energy.size(); ++f) os << "ug," << f << ',' << fmt_num(res.ug_diff_energy[f]) << '\n';
  for (std::size_t f = 0; f < res.plain_diff_energy.size(); ++f)
    os << "plain," << f << ',' << fmt_num(res.plain_diff_energy[f]) << '\n';

  double mu = 0.0, mp = 0.0;
  for (double v : res.ug_diff_energy) mu += v / static_cast<double>(res.ug_diff_energy.size());
  for (double v : res.plain_diff_energy) mp += v / static_cast<double>(res.plain_diff_energy.size());
  log << "frames " << shape_low.dims[0] << " -> " << shape_hi.dims[0] << " (n = " << plan.n() << ")\n";
  log << "mean frame-difference energy: ug " << fmt_short(mu) << ", plain " << fmt_short(mp) << '\n';
  return res;
}

}  // namespace ug::harness
