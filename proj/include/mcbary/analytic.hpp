// Closed-form channel responses for one and two fully absorbing receivers.
#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "mcbary/core.hpp"
#include "mcbary/numerics.hpp"

namespace mcbary {

/// Point source at `distance` from the center of an isolated absorbing
/// sphere of `radius`, in a medium with diffusion coefficient `diffusion`.
struct SisoChannel {
  double distance = 0.0;
  double radius = 0.0;
  double diffusion = 0.0;
};

/// Hitting rate f(d, t) of a single fully absorbing sphere, in 1/s.
/// Zero at t = 0 (the continuous limit). Requires d > R strictly.
[[nodiscard]] inline double hitting_rate(const SisoChannel& ch, double t) {
  const double d = ch.distance;
  const double r = ch.radius;
  const double dd = ch.diffusion;
  if (!(d > r)) throw NonPositiveParameter("hitting_rate requires distance > radius");
  if (t < 0.0) throw NonPositiveParameter("hitting_rate requires t >= 0");
  if (t == 0.0) return 0.0;
  const double gap = d - r;
  const double exponent = -gap * gap / (4.0 * dd * t);
  return r * gap / (d * std::sqrt(4.0 * std::numbers::pi * dd * t * t * t)) * std::exp(exponent);
}

/// Fraction of molecules absorbed by time t: (R/d) erfc((d-R)/(2 sqrt(D t))).
/// d == R is admitted and returns 1 for t > 0.
[[nodiscard]] inline double absorbed_fraction(double distance, double radius, double diffusion, double t) {
  if (t <= 0.0) return distance == radius ? 1.0 : 0.0;
  return radius / distance * erfc((distance - radius) / (2.0 * std::sqrt(diffusion * t)));
}

/// Expected cumulative number of molecules absorbed by an isolated sphere.
[[nodiscard]] inline double cum_absorbed_siso(const SisoChannel& ch, double t, double released) {
  if (t < 0.0) throw NonPositiveParameter("cum_absorbed_siso requires t >= 0");
  if (ch.distance < ch.radius) throw NonPositiveParameter("cum_absorbed_siso requires distance >= radius");
  if (ch.distance == ch.radius && t == 0.0) return 0.0;
  return released * absorbed_fraction(ch.distance, ch.radius, ch.diffusion, t);
}

/// Inputs of the closed-form two-receiver series. `d1_b2` is the distance
/// from the center of receiver 1 to the barycenter of receiver 2, and
/// `d2_b1` the converse.
struct SitoConfig {
  double r1 = 0.0;
  double r2 = 0.0;
  double d1_tx = 0.0;
  double d2_tx = 0.0;
  double d1_b2 = 0.0;
  double d2_b1 = 0.0;
  double released = 0.0;
  double diffusion = 0.0;
};

namespace detail {

// N_1(t) of the two-receiver series; N_2 follows by swapping roles.
inline double sito_first(const SitoConfig& c, double t, double tol) {
  const double scale = 2.0 * std::sqrt(c.diffusion * t);
  const double ratio = c.r1 * c.r2 / (c.d1_b2 * c.d2_b1);
  const double loop = c.d1_b2 + c.d2_b1 - c.r1 - c.r2;

  auto direct = [&](std::size_t n) {
    return std::pow(ratio, static_cast<double>(n)) * erfc(((c.d1_tx - c.r1) + n * loop) / scale);
  };
  auto coupled = [&](std::size_t n) {
    return std::pow(ratio, static_cast<double>(n)) *
           erfc(((c.d1_b2 + c.d2_tx - c.r1 - c.r2) + n * loop) / scale);
  };
  const double s_direct = sum_geometric_series(direct, ratio, tol).sum;
  const double s_coupled = sum_geometric_series(coupled, ratio, tol).sum;
  return c.released * c.r1 / c.d1_tx * s_direct - c.released * c.r1 * c.r2 / (c.d1_b2 * c.d2_tx) * s_coupled;
}

}  // namespace detail

/// Expected cumulative absorption (N_1, N_2) of two coupled absorbing
/// spheres at time t > 0, from the closed-form series solution of the
/// negative-source convolution system.
[[nodiscard]] inline std::pair<double, double> cum_absorbed_sito(const SitoConfig& c, double t,
                                                                 double tol = 1e-12) {
  if (!(t > 0.0)) throw NonPositiveParameter("cum_absorbed_sito requires t > 0");
  if (!(c.d1_tx > c.r1) || !(c.d2_tx > c.r2) || !(c.d1_b2 > c.r1) || !(c.d2_b1 > c.r2)) {
    throw NonPositiveParameter("cum_absorbed_sito: every distance must exceed the matching radius");
  }
  const SitoConfig swapped{c.r2, c.r1, c.d2_tx, c.d1_tx, c.d2_b1, c.d1_b2, c.released, c.diffusion};
  return {detail::sito_first(c, t, tol), detail::sito_first(swapped, t, tol)};
}

}  // namespace mcbary
