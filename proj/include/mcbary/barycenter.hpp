// Analytic barycenter model of fully absorbing spherical receivers.
//
// A receiver's barycenter (the mean position of the molecules it has
// absorbed) is composed from one attraction component per positive source
// (the transmitter) and one repulsion component per negative source (every
// other receiver). Each component sits on the line through the receiver
// center at a fraction gamma(d, t) of the radius, where gamma is the
// ring-weighted mean of the cos(theta) coordinate of the surface.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "mcbary/core.hpp"
#include "mcbary/numerics.hpp"

namespace mcbary {

/// Source at `distance` from the center of a sphere of `radius`, observed
/// at time `t`.
struct GammaInputs {
  double distance = 0.0;
  double radius = 0.0;
  double diffusion = 0.0;
  double t = 0.0;
};

/// Geometric terms of the ring at polar angle theta (theta = 0 faces the
/// source).
struct RingWeightTerms {
  double alpha = 0.0;  // um^2
  double beta = 0.0;   // um
  double k = 0.0;      // s^(1/2)
  double theta = 0.0;  // rad

  static RingWeightTerms at(double theta, const GammaInputs& g) {
    const double d = g.distance;
    const double r = g.radius;
    RingWeightTerms w;
    w.theta = theta;
    w.alpha = r * r + d * d - 2.0 * d * r * std::cos(theta);
    // The -d sin(theta) term is part of the model as published.
    w.beta = -r + d * std::cos(theta) - d * std::sin(theta);
    w.k = std::sqrt(w.alpha / g.diffusion);
    return w;
  }
};

namespace detail {

inline void check_gamma_inputs(const GammaInputs& g) {
  if (!(g.diffusion > 0.0)) throw NonPositiveParameter("gamma: diffusion must be positive");
  if (!(g.radius > 0.0)) throw NonPositiveParameter("gamma: radius must be positive");
  if (!(g.t > 0.0)) throw NonPositiveParameter("gamma: t must be positive");
  if (!(g.distance >= g.radius * (1.0 + 1e-6))) {
    throw NonPositiveParameter("gamma: distance " + std::to_string(g.distance) + " too close to radius " +
                               std::to_string(g.radius));
  }
}

// Ring weight multiplied by exp((d-R)^2 / (4 D t)). The factor is the same
// for every theta, so ratios of integrals are unchanged while the integrand
// stays representable when the unscaled weight underflows.
inline double ring_weight_scaled(double theta, const GammaInputs& g) {
  const auto w = RingWeightTerms::at(theta, g);
  const double r = g.radius;
  const double dt = g.diffusion * g.t;
  const double z = w.k / (2.0 * std::sqrt(g.t));
  const double excess = 2.0 * g.distance * r * (1.0 - std::cos(theta)) / (4.0 * dt);
  const double first = (w.alpha * r + w.beta * r * r) / (2.0 * std::pow(w.alpha, 1.5)) * erfcx(z);
  const double second = r * r / (2.0 * std::sqrt(std::numbers::pi)) *
                        ((w.k * std::sqrt(g.diffusion) + w.beta) / (w.alpha * std::sqrt(dt)));
  return std::exp(-excess) * (first + second);
}

}  // namespace detail

/// Weight of the ring at angle theta for a fully absorbing sphere: the
/// infinite-reaction-rate limit of the partially absorbing ring fraction.
[[nodiscard]] inline double ring_weight_limit(double theta, const GammaInputs& g) {
  const auto w = RingWeightTerms::at(theta, g);
  const double r = g.radius;
  const double sqrt_t = std::sqrt(g.t);
  const double first = (w.alpha * r + w.beta * r * r) / (2.0 * std::pow(w.alpha, 1.5)) * erfc(w.k / (2.0 * sqrt_t));
  const double second = r * r * std::exp(-w.k * w.k / (4.0 * g.t)) / (2.0 * std::sqrt(std::numbers::pi)) *
                        ((w.k * std::sqrt(g.diffusion) + w.beta) / (w.alpha * std::sqrt(g.diffusion * g.t)));
  return first + second;
}

/// Ring weight of a partially absorbing sphere with reaction rate `w`
/// (um/s). Tends to ring_weight_limit as w grows.
[[nodiscard]] inline double ring_weight_finite(double theta, const GammaInputs& g, double w) {
  if (!(w > 0.0)) throw NonPositiveParameter("ring_weight_finite: reaction rate must be positive");
  const auto rt = RingWeightTerms::at(theta, g);
  const double r = g.radius;
  const double dd = g.diffusion;
  const double sqrt_t = std::sqrt(g.t);
  const double m = (w * r + dd) / (r * std::sqrt(dd));
  const double first = r * r * w / (2.0 * (w * r + dd)) * (rt.alpha + rt.beta * r) / std::pow(rt.alpha, 1.5) *
                       erfc(rt.k / (2.0 * sqrt_t));
  const double second = r * r * w / 2.0 * (w * rt.k * rt.k - rt.beta * (1.0 - m * rt.k)) / (rt.alpha * dd * m * rt.k) *
                        std::exp(-rt.k * rt.k / (4.0 * g.t)) * erfcx(m * sqrt_t + rt.k / (2.0 * sqrt_t));
  return first + second;
}

/// Ring-weighted mean of R cos(theta) over theta in [0, pi], normalized by
/// the total ring weight times R. Not range checked.
[[nodiscard]] inline double gamma_raw(const GammaInputs& g, const QuadratureSpec& q = {}) {
  detail::check_gamma_inputs(g);
  const double r = g.radius;
  const double pi = std::numbers::pi;
  const double num =
      integrate_adaptive([&](double th) { return detail::ring_weight_scaled(th, g) * r * std::cos(th); }, 0.0, pi, q);
  const double den = integrate_adaptive([&](double th) { return detail::ring_weight_scaled(th, g) * r; }, 0.0, pi, q);
  return num / den;
}

/// gamma(d, t) in [0, 1]. Raw values within 1e-9 of [0, 1] are clamped;
/// anything further out throws GammaOutOfRange.
[[nodiscard]] inline double gamma(const GammaInputs& g, const QuadratureSpec& q = {}) {
  const double raw = gamma_raw(g, q);
  if (!std::isfinite(raw) || raw < -1e-9 || raw > 1.0 + 1e-9) {
    throw GammaOutOfRange("gamma(d=" + std::to_string(g.distance) + ", R=" + std::to_string(g.radius) +
                          ", t=" + std::to_string(g.t) + ") = " + std::to_string(raw) + " outside [0,1]");
  }
  return std::clamp(raw, 0.0, 1.0);
}

/// Attraction component: gamma S + (1 - gamma) C, with S the surface point
/// nearest the transmitter.
[[nodiscard]] inline Point3 barycenter_from_tx(const ReceiverGeometry& rcv, Point3 tx_pos, double g) {
  if (!(g >= 0.0 && g <= 1.0)) throw GammaOutOfRange("barycenter_from_tx: gamma outside [0,1]");
  const Point3 s = surface_point(rcv.center, rcv.radius, tx_pos);
  return g * s + (1.0 - g) * rcv.center;
}

/// Repulsion component: -gamma S + (1 + gamma) C, with S the surface point
/// of `rcv` facing `other_center`.
[[nodiscard]] inline Point3 barycenter_from_rx(const ReceiverGeometry& rcv, Point3 other_center, double g) {
  if (!(g >= 0.0 && g <= 1.0)) throw GammaOutOfRange("barycenter_from_rx: gamma outside [0,1]");
  const Point3 s = surface_point(rcv.center, rcv.radius, other_center);
  return (-g) * s + (1.0 + g) * rcv.center;
}

/// Gravitation-style mixing weights of receiver i: `self` for the
/// transmitter component and `cross[j]` (cross[i] == 0) for receiver j.
struct ZetaWeights {
  double self = 1.0;
  std::vector<double> cross;
};

[[nodiscard]] inline ZetaWeights zeta_weights(std::size_t i, const ValidatedScenario& s) {
  const std::size_t p = s.receiver_count();
  const double ri = s.receiver(i).radius;
  ZetaWeights z;
  z.cross.assign(p, 0.0);
  double total = 1.0;
  for (std::size_t k = 0; k < p; ++k) {
    if (k == i) continue;
    const double dk = s.center_to_center(i, k);
    z.cross[k] = ri * s.receiver(k).radius / (dk * dk);
    total += z.cross[k];
  }
  z.self = 1.0 / total;
  for (auto& c : z.cross) c *= z.self;
  return z;
}

struct RepulsionComponent {
  std::size_t source = 0;  // index of the other receiver
  double gamma = 0.0;
  double weight = 0.0;
  Point3 point;
};

struct ReceiverBarycenter {
  std::string id;
  Point3 barycenter;
  double tx_gamma = 0.0;
  double tx_weight = 1.0;
  Point3 from_tx;
  std::vector<RepulsionComponent> from_rx;
};

struct BarycenterSet {
  double eval_time = 0.0;
  std::vector<ReceiverBarycenter> receivers;

  [[nodiscard]] Point3 at(std::size_t i) const { return receivers.at(i).barycenter; }
};

/// Barycenters of every receiver at time t: one pass, gamma arguments are
/// center-to-transmitter and center-to-center distances only.
[[nodiscard]] inline BarycenterSet compose_barycenters(const ValidatedScenario& s, double t,
                                                       const QuadratureSpec& q = {}) {
  if (!(t > 0.0)) throw NonPositiveParameter("compose_barycenters requires t > 0");
  const std::size_t p = s.receiver_count();
  const double diff = s.diffusion();
  BarycenterSet out;
  out.eval_time = t;
  out.receivers.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& rcv = s.receiver(i);
    const ZetaWeights z = zeta_weights(i, s);
    ReceiverBarycenter rb;
    rb.id = rcv.id;
    rb.tx_gamma = gamma({s.center_to_tx(i), rcv.radius, diff, t}, q);
    rb.tx_weight = z.self;
    rb.from_tx = barycenter_from_tx(rcv, s.transmitter_position(), rb.tx_gamma);
    Point3 b = z.self * rb.from_tx;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      RepulsionComponent c;
      c.source = j;
      c.gamma = gamma({s.center_to_center(i, j), rcv.radius, diff, t}, q);
      c.weight = z.cross[j];
      c.point = barycenter_from_rx(rcv, s.receiver(j).center, c.gamma);
      b += c.weight * c.point;
      rb.from_rx.push_back(c);
    }
    rb.barycenter = b;
    out.receivers.push_back(std::move(rb));
  }
  return out;
}

/// Baseline that places every negative source at its receiver center.
[[nodiscard]] inline BarycenterSet centered_barycenters(const ValidatedScenario& s, double t = 0.0) {
  BarycenterSet out;
  out.eval_time = t;
  for (std::size_t i = 0; i < s.receiver_count(); ++i) {
    ReceiverBarycenter rb;
    rb.id = s.receiver(i).id;
    rb.barycenter = s.receiver(i).center;
    rb.from_tx = rb.barycenter;
    out.receivers.push_back(std::move(rb));
  }
  return out;
}

}  // namespace mcbary
