// Time-domain solver of the coupled negative-source convolution system
//
//   n_i(t) = N_T f(d(C_i,T), t) - sum_{j != i} (n_j * f(d(C_i,B_j), .))(t)
//
// for p >= 1 fully absorbing receivers. The system is integrated once in t,
//
//   N_i(t) = N_T F_iT(t) - sum_{j != i} int_0^t n_j(tau) F_ij(t - tau) dtau,
//
// with F the closed-form cumulative absorbed fraction. On a uniform grid the
// rates n_j are taken piecewise constant (n_j = dN_j / dt on each step) and
// every convolution panel is integrated exactly against F, whose primitive is
// also closed form. Kernels stay exact however sharply f peaks, so touching
// receivers do not need a finer grid. The newest panel couples the unknown
// increments through a constant p x p matrix that is factorized once.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcbary/analytic.hpp"
#include "mcbary/barycenter.hpp"
#include "mcbary/core.hpp"

namespace mcbary {

struct ReceiverResponse {
  std::string id;
  std::vector<double> rate;        // n_i(t_k), 1/s
  std::vector<double> cumulative;  // N_i(t_k)
};

struct ResponseSeries {
  std::vector<double> times;  // t_0 = 0, ..., t_K = horizon
  std::vector<ReceiverResponse> receivers;

  /// N_i at time t, linearly interpolated between grid nodes.
  [[nodiscard]] double cumulative_at(std::size_t i, double t) const {
    const auto& n = receivers.at(i).cumulative;
    if (t <= times.front()) return n.front();
    if (t >= times.back()) return n.back();
    const double dt = times[1] - times[0];
    const auto k = static_cast<std::size_t>(t / dt);
    const std::size_t k1 = std::min(k + 1, times.size() - 1);
    const double w = (t - times[k]) / dt;
    return (1.0 - w) * n[k] + w * n[k1];
  }
  [[nodiscard]] double final_cumulative(std::size_t i) const { return receivers.at(i).cumulative.back(); }
};

/// Closed-form cumulative kernel of one source/receiver pair: the absorbed
/// fraction F(u) and its primitive H(u) = int_0^u F.
class CumulativeKernel {
 public:
  CumulativeKernel(double distance, double radius, double diffusion)
      : prefactor_(radius / distance),
        c_((distance - radius) / (2.0 * std::sqrt(diffusion))),
        distance_(distance),
        radius_(radius),
        diffusion_(diffusion) {}

  [[nodiscard]] double fraction(double u) const {
    if (u <= 0.0) return 0.0;
    return prefactor_ * erfc(c_ / std::sqrt(u));
  }
  [[nodiscard]] double primitive(double u) const {
    if (u <= 0.0) return 0.0;
    const double su = std::sqrt(u);
    return prefactor_ * ((u + 2.0 * c_ * c_) * erfc(c_ / su) -
                         2.0 * c_ * su / std::sqrt(std::numbers::pi) * std::exp(-c_ * c_ / u));
  }
  [[nodiscard]] double rate(double u) const { return hitting_rate({distance_, radius_, diffusion_}, u); }

 private:
  double prefactor_;
  double c_;
  double distance_;
  double radius_;
  double diffusion_;
};

struct SolverOptions {
  /// Integration horizon; defaults to the scenario's t_end.
  std::optional<double> horizon;
  /// Allowed relative excess of sum_i N_i over N_T.
  double mass_tolerance = 0.01;
};

/// Expected absorption of every receiver with negative sources frozen at
/// `barycenters` over the whole horizon.
[[nodiscard]] inline ResponseSeries solve_simo(const ValidatedScenario& s, const BarycenterSet& barycenters,
                                               const SolverOptions& opt = {}) {
  const std::size_t p = s.receiver_count();
  if (barycenters.receivers.size() != p) {
    throw NonPositiveParameter("solve_simo: barycenter set does not match the receiver list");
  }
  const double horizon = opt.horizon.value_or(s.scenario().time_grid.t_end);
  if (!(horizon > 0.0)) throw NonPositiveParameter("solve_simo: horizon must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / s.scenario().time_grid.dt_solver - 1e-9));
  const std::size_t K = std::max<std::size_t>(steps, 1);
  const double dt = horizon / static_cast<double>(K);
  const double released = s.released();
  const double diff = s.diffusion();

  std::vector<CumulativeKernel> source;
  source.reserve(p);
  for (std::size_t i = 0; i < p; ++i) source.emplace_back(s.center_to_tx(i), s.receiver(i).radius, diff);

  // weight[i*p+j][l]: contribution of the increment dN_j over a panel ending
  // l steps before t_k to N_i(t_k). fdiff[i*p+j][l]: the same for the rate.
  std::vector<std::vector<double>> weight(p * p);
  std::vector<std::vector<double>> fdiff(p * p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i == j) continue;
      const double kernel_distance = distance(s.receiver(i).center, barycenters.at(j));
      if (!(kernel_distance > s.receiver(i).radius)) {
        throw NonPositiveParameter("solve_simo: barycenter of '" + s.receiver(j).id + "' lies inside receiver '" +
                                   s.receiver(i).id + "'");
      }
      const CumulativeKernel kern(kernel_distance, s.receiver(i).radius, diff);
      auto& w = weight[i * p + j];
      auto& fd = fdiff[i * p + j];
      w.resize(K);
      fd.resize(K);
      double h_prev = 0.0;
      double f_prev = 0.0;
      for (std::size_t l = 0; l < K; ++l) {
        const double u = static_cast<double>(l + 1) * dt;
        const double h = kern.primitive(u);
        const double f = kern.fraction(u);
        w[l] = (h - h_prev) / dt;
        fd[l] = (f - f_prev) / dt;
        h_prev = h;
        f_prev = f;
      }
    }
  }

  Eigen::MatrixXd coupling = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i != j) coupling(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight[i * p + j][0];
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(coupling);

  ResponseSeries out;
  out.times.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) out.times[k] = static_cast<double>(k) * dt;
  out.receivers.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    out.receivers[i].id = s.receiver(i).id;
    out.receivers[i].rate.assign(K + 1, 0.0);
    out.receivers[i].cumulative.assign(K + 1, 0.0);
  }
  // increments[j][m-1] = N_j(t_m) - N_j(t_{m-1})
  std::vector<std::vector<double>> increments(p, std::vector<double>(K, 0.0));

  Eigen::VectorXd rhs(static_cast<Eigen::Index>(p));
  for (std::size_t k = 1; k <= K; ++k) {
    const double tk = out.times[k];
    for (std::size_t i = 0; i < p; ++i) {
      double history = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (i == j) continue;
        const auto& w = weight[i * p + j];
        const auto& inc = increments[j];
        for (std::size_t m = 1; m < k; ++m) history += inc[m - 1] * w[k - m];
      }
      rhs(static_cast<Eigen::Index>(i)) =
          released * source[i].fraction(tk) - out.receivers[i].cumulative[k - 1] - history;
    }
    const Eigen::VectorXd step = lu.solve(rhs);
    double total = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      increments[i][k - 1] = step(static_cast<Eigen::Index>(i));
      out.receivers[i].cumulative[k] = out.receivers[i].cumulative[k - 1] + increments[i][k - 1];
      total += out.receivers[i].cumulative[k];
    }
    if (total > released * (1.0 + opt.mass_tolerance)) {
      throw MassBudgetExceeded("solve_simo: total absorption " + std::to_string(total) + " exceeds N_T at t=" +
                               std::to_string(tk));
    }
    // Pointwise rate from the same piecewise-constant representation.
    for (std::size_t i = 0; i < p; ++i) {
      double loss = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (i == j) continue;
        const auto& fd = fdiff[i * p + j];
        const auto& inc = increments[j];
        for (std::size_t m = 1; m <= k; ++m) loss += inc[m - 1] * fd[k - m];
      }
      out.receivers[i].rate[k] = released * source[i].rate(tk) - loss;
    }
  }
  return out;
}

/// Baseline with every negative source at its receiver center.
[[nodiscard]] inline ResponseSeries solve_sito_centered(const ValidatedScenario& s, const SolverOptions& opt = {}) {
  return solve_simo(s, centered_barycenters(s), opt);
}

/// Series inputs of a two-receiver scenario with the given barycenters.
[[nodiscard]] inline SitoConfig sito_config(const ValidatedScenario& s, const BarycenterSet& b) {
  if (s.receiver_count() != 2 || b.receivers.size() != 2) {
    throw NonPositiveParameter("sito_config requires exactly two receivers");
  }
  return {s.receiver(0).radius,
          s.receiver(1).radius,
          s.center_to_tx(0),
          s.center_to_tx(1),
          distance(s.receiver(0).center, b.at(1)),
          distance(s.receiver(1).center, b.at(0)),
          s.released(),
          s.diffusion()};
}

enum class SourcePlacement { barycenter, centered };

/// N_i at each requested output time. With barycentric placement the
/// barycenters are evaluated at that output time and the solve is repeated
/// with a horizon equal to it. Result is indexed [time][receiver].
[[nodiscard]] inline std::vector<std::vector<double>> absorbed_at_times(const ValidatedScenario& s,
                                                                        const std::vector<double>& times,
                                                                        SourcePlacement placement,
                                                                        const QuadratureSpec& q = {}) {
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (double t : times) {
    const BarycenterSet b =
        placement == SourcePlacement::barycenter ? compose_barycenters(s, t, q) : centered_barycenters(s, t);
    SolverOptions opt;
    opt.horizon = t;
    const ResponseSeries r = solve_simo(s, b, opt);
    std::vector<double> row(s.receiver_count());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = r.final_cumulative(i);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace mcbary
