// Brownian particle-based simulation (PBS) of molecules released by a point
// transmitter among fully absorbing spheres.
//
// Each molecule takes Gaussian steps of standard deviation sqrt(2 D dt) per
// axis. After each step a molecule inside or on a sphere is absorbed there,
// and its raw end-of-step position is logged. No intra-step crossing test is
// performed, so absorbed positions may lie slightly inside the sphere.
//
// Far from every sphere, k consecutive steps are drawn as one Gaussian step
// of standard deviation sqrt(2 D k dt), which has exactly the distribution of
// the k-step sum. k is bounded so that the block displacement would have to
// exceed `far_field_sigmas` standard deviations to reach any sphere, which
// keeps the chance of skipping an intermediate absorption below ~1e-7 per
// block. Next to a sphere, every step is simulated.
//
// Random streams are a pure function of (seed, trial, particle), so logs do
// not depend on scheduling or thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mcbary/core.hpp"

namespace mcbary {

struct AbsorptionEvent {
  std::size_t receiver = 0;  // index into the scenario's receiver list
  double time = 0.0;         // end of the absorbing step, s
  Point3 position;           // raw end-of-step position
};

struct AbsorptionLog {
  std::int64_t trial = 0;
  std::vector<AbsorptionEvent> events;
  std::int64_t free_particles = 0;
};

struct PbsOptions {
  /// Aggregate steps of molecules far from every sphere.
  bool far_field_blocks = true;
  double far_field_sigmas = 6.0;
  /// Worker threads for ensembles; 0 selects hardware concurrency.
  unsigned threads = 0;
};

/// A warning for step sizes that make a desk-scale run impractically long.
[[nodiscard]] inline std::optional<std::string> pbs_step_warning(const PbsParams& p) {
  if (p.dt < 1e-6) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p.dt);
    return std::string("PBS step ") + buf + " s: simulation cost grows as 1/dt near receivers; expect long run times";
  }
  return std::nullopt;
}

namespace detail {

inline std::mt19937_64 particle_engine(std::uint64_t seed, std::int64_t trial, std::int64_t particle) {
  const auto t = static_cast<std::uint64_t>(trial);
  const auto q = static_cast<std::uint64_t>(particle);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32),
                    static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(q >> 32)};
  return std::mt19937_64(seq);
}

inline std::int64_t step_count(double t_end, double dt) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t_end / dt - 1e-9)));
}

}  // namespace detail

/// Simulates one trial: all N_T molecules start at the transmitter at t = 0.
[[nodiscard]] inline AbsorptionLog run_trial(const ValidatedScenario& s, std::int64_t trial_index,
                                             const PbsOptions& opt = {}) {
  const Scenario& sc = s.scenario();
  if (!sc.pbs) throw NonPositiveParameter("run_trial: scenario has no PBS parameters");
  const PbsParams& pp = *sc.pbs;
  const std::int64_t total_steps = detail::step_count(sc.time_grid.t_end, pp.dt);
  const double sigma = std::sqrt(2.0 * s.diffusion() * pp.dt);
  const std::size_t p = s.receiver_count();

  std::vector<Point3> centers(p);
  std::vector<double> radii(p);
  std::vector<double> radii_sq(p);
  for (std::size_t i = 0; i < p; ++i) {
    centers[i] = s.receiver(i).center;
    radii[i] = s.receiver(i).radius;
    radii_sq[i] = radii[i] * radii[i];
  }
  const double block_unit = opt.far_field_sigmas * sigma;

  AbsorptionLog log;
  log.trial = trial_index;
  const std::int64_t n_particles = sc.transmitter.released_molecules;
  for (std::int64_t particle = 0; particle < n_particles; ++particle) {
    auto engine = detail::particle_engine(pp.seed, trial_index, particle);
    std::normal_distribution<double> normal(0.0, 1.0);
    Point3 x = sc.transmitter.position;
    std::int64_t step = 0;
    bool absorbed = false;
    while (step < total_steps) {
      std::int64_t block = 1;
      if (opt.far_field_blocks) {
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < p; ++i) gap = std::min(gap, distance(x, centers[i]) - radii[i]);
        const double ratio = gap / block_unit;
        if (ratio * ratio >= 2.0) {
          const double allowed = std::floor(ratio * ratio);
          const auto remaining = total_steps - step;
          block = allowed >= static_cast<double>(remaining) ? remaining : static_cast<std::int64_t>(allowed);
        }
      }
      const double scale = block == 1 ? sigma : sigma * std::sqrt(static_cast<double>(block));
      const double dx = normal(engine);
      const double dy = normal(engine);
      const double dz = normal(engine);
      x += Point3{scale * dx, scale * dy, scale * dz};
      step += block;

      // Containment: deepest penetration wins, ties go to the lower index.
      std::size_t hit = p;
      double best_depth = -1.0;
      for (std::size_t i = 0; i < p; ++i) {
        const Point3 rel = x - centers[i];
        const double d2 = dot(rel, rel);
        if (d2 <= radii_sq[i]) {
          const double depth = radii[i] - std::sqrt(d2);
          if (depth > best_depth) {
            best_depth = depth;
            hit = i;
          }
        }
      }
      if (hit < p) {
        log.events.push_back({hit, static_cast<double>(step) * pp.dt, x});
        absorbed = true;
        break;
      }
    }
    if (!absorbed) ++log.free_particles;
  }
  return log;
}

/// Per receiver, per output time statistics over an ensemble of trials.
struct EnsembleStats {
  std::vector<double> output_times;
  /// [receiver][time]
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std_dev;
  /// Pooled mean absorption position by each output time; empty when the
  /// receiver had absorbed nothing yet.
  std::vector<std::vector<std::optional<Point3>>> barycenter;
};

struct Ensemble {
  std::vector<AbsorptionLog> logs;  // ordered by trial index
  EnsembleStats stats;
};

namespace detail {

inline bool within(double event_time, double t) { return event_time <= t * (1.0 + 1e-12); }

}  // namespace detail

/// Number of molecules absorbed by `receiver` up to time t in one trial.
[[nodiscard]] inline std::int64_t absorbed_by(const AbsorptionLog& log, std::size_t receiver, double t) {
  std::int64_t n = 0;
  for (const auto& e : log.events) n += (e.receiver == receiver && detail::within(e.time, t)) ? 1 : 0;
  return n;
}

/// Mean of the raw absorption positions of `receiver` with time <= t, pooled
/// across all logs.
[[nodiscard]] inline Point3 empirical_barycenter(std::span<const AbsorptionLog> logs, std::size_t receiver,
                                                 double t) {
  Point3 sum;
  std::int64_t n = 0;
  for (const auto& log : logs) {
    for (const auto& e : log.events) {
      if (e.receiver == receiver && detail::within(e.time, t)) {
        sum += e.position;
        ++n;
      }
    }
  }
  if (n == 0) throw NoAbsorptions("empirical_barycenter: receiver " + std::to_string(receiver) + " absorbed nothing");
  return (1.0 / static_cast<double>(n)) * sum;
}

[[nodiscard]] inline Point3 empirical_barycenter(const Ensemble& e, std::size_t receiver, double t) {
  return empirical_barycenter(std::span<const AbsorptionLog>(e.logs), receiver, t);
}

/// Projection of (empirical barycenter - C) on the unit vector from C toward
/// the transmitter, in units of R. Not clamped.
[[nodiscard]] inline double empirical_gamma(std::span<const AbsorptionLog> logs, const ReceiverGeometry& rcv,
                                            std::size_t receiver, Point3 tx_pos, double t) {
  const Point3 b = empirical_barycenter(logs, receiver, t);
  const Point3 axis = tx_pos - rcv.center;
  return dot(b - rcv.center, axis) / (norm(axis) * rcv.radius);
}

[[nodiscard]] inline double empirical_gamma(const Ensemble& e, const ValidatedScenario& s, std::size_t receiver,
                                            double t) {
  return empirical_gamma(std::span<const AbsorptionLog>(e.logs), s.receiver(receiver), receiver,
                         s.transmitter_position(), t);
}

[[nodiscard]] inline EnsembleStats summarize(const ValidatedScenario& s, std::span<const AbsorptionLog> logs) {
  const std::size_t p = s.receiver_count();
  EnsembleStats st;
  st.output_times = s.scenario().time_grid.output_times;
  const std::size_t nt = st.output_times.size();
  st.mean.assign(p, std::vector<double>(nt, 0.0));
  st.std_dev.assign(p, std::vector<double>(nt, 0.0));
  st.barycenter.assign(p, std::vector<std::optional<Point3>>(nt));
  const auto n = static_cast<double>(logs.size());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < nt; ++k) {
      const double t = st.output_times[k];
      std::vector<double> counts;
      counts.reserve(logs.size());
      for (const auto& log : logs) counts.push_back(static_cast<double>(absorbed_by(log, i, t)));
      double mean = 0.0;
      for (double c : counts) mean += c;
      mean /= n;
      double ss = 0.0;
      for (double c : counts) ss += (c - mean) * (c - mean);
      st.mean[i][k] = mean;
      st.std_dev[i][k] = logs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      try {
        st.barycenter[i][k] = empirical_barycenter(logs, i, t);
      } catch (const NoAbsorptions&) {
        st.barycenter[i][k] = std::nullopt;
      }
    }
  }
  return st;
}

/// Runs `pbs.trials` independent trials (in parallel when allowed) and
/// aggregates them in trial order.
[[nodiscard]] inline Ensemble run_ensemble(const ValidatedScenario& s, const PbsOptions& opt = {}) {
  const Scenario& sc = s.scenario();
  if (!sc.pbs) throw NonPositiveParameter("run_ensemble: scenario has no PBS parameters");
  const auto trials = static_cast<std::size_t>(sc.pbs->trials);
  Ensemble out;
  out.logs.resize(trials);

  unsigned workers = opt.threads != 0 ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, trials));
  if (workers <= 1) {
    for (std::size_t t = 0; t < trials; ++t) out.logs[t] = run_trial(s, static_cast<std::int64_t>(t), opt);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < trials; t = next++) {
          out.logs[t] = run_trial(s, static_cast<std::int64_t>(t), opt);
        }
      });
    }
  }
  out.stats = summarize(s, out.logs);
  return out;
}

}  // namespace mcbary
