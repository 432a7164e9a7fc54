// Special functions, adaptive quadrature and series summation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mcbary/core.hpp"

namespace mcbary {

/// Complementary error function, 1 - erf(x). Underflows gracefully to 0.
[[nodiscard]] inline double erfc(double x) { return std::erfc(x); }

/// Scaled complementary error function exp(x^2) * erfc(x), free of overflow
/// for large x.
[[nodiscard]] inline double erfcx(double x) {
  constexpr double inv_sqrt_pi = std::numbers::inv_sqrtpi;
  if (x < 0.0) {
    // Only used by callers outside the documented range; exp(x^2) is finite
    // for |x| < 26.
    return std::exp(x * x) * std::erfc(x);
  }
  if (x < 8.0) return std::exp(x * x) * std::erfc(x);
  // Continued fraction erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
  // evaluated bottom-up. 60 levels are far beyond convergence for x >= 8.
  double tail = x;
  for (int n = 60; n >= 1; --n) tail = x + (0.5 * n) / tail;
  return inv_sqrt_pi / tail;
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

struct QuadratureSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  std::size_t max_subdivisions = 200;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t subdivisions = 0;
};

/// Globally adaptive Gauss-Kronrod (G10/K21) integration on [a, b]: the
/// panel with the largest error estimate is bisected until the summed error
/// estimate is at most max(abs_tol, rel_tol * |result|).
///
/// Throws MaxSubdivisionsExceeded when the panel budget is exhausted first.
template <class F>
[[nodiscard]] QuadratureResult integrate_adaptive_ex(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
  if (!(spec.abs_tol > 0.0) || !(spec.rel_tol > 0.0)) {
    throw NonPositiveParameter("quadrature tolerances must be positive");
  }
  using rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  struct Panel {
    double lo, hi, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    double err = 0.0;
    const double v = rule::integrate(f, lo, hi, 0, 0.0, &err);
    return Panel{lo, hi, v, err};
  };

  std::priority_queue<Panel> panels;
  Panel first = eval(a, b);
  double total = first.value;
  double total_err = first.error;
  panels.push(first);
  std::size_t subdivisions = 1;

  auto converged = [&] { return total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };
  while (!converged()) {
    if (subdivisions >= spec.max_subdivisions) {
      throw MaxSubdivisionsExceeded("integrate_adaptive: " + std::to_string(subdivisions) +
                                    " subdivisions used, error estimate " + std::to_string(total_err));
    }
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Panel left = eval(worst.lo, mid);
    const Panel right = eval(mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++subdivisions;
  }

  // Re-sum to shed the drift of the running updates.
  double value = 0.0;
  double error = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    error += panels.top().error;
    panels.pop();
  }
  return {value, error, subdivisions};
}

template <class F>
[[nodiscard]] double integrate_adaptive(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
  return integrate_adaptive_ex(std::forward<F>(f), a, b, spec).value;
}

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

struct SeriesResult {
  double sum = 0.0;
  std::size_t terms_used = 0;
};

/// Sums term(0) + term(1) + ... of an eventually geometric series. Stops
/// after the first term with |term(n)| <= tol * |partial sum| (that term
/// included). `ratio_bound` is the caller's bound on |term(n+1)/term(n)| and
/// must lie in (0, 1).
template <class Term>
[[nodiscard]] SeriesResult sum_geometric_series(Term&& term, double ratio_bound, double tol = 1e-12,
                                                std::size_t n_max = 200) {
  if (!(ratio_bound > 0.0 && ratio_bound < 1.0)) {
    throw NotConverged("sum_geometric_series: ratio bound " + std::to_string(ratio_bound) + " not in (0,1)");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < n_max; ++n) {
    const double t = term(n);
    sum += t;
    if (std::abs(t) <= tol * std::abs(sum)) return {sum, n + 1};
  }
  throw NotConverged("sum_geometric_series: tolerance " + std::to_string(tol) + " unmet after " +
                     std::to_string(n_max) + " terms");
}

}  // namespace mcbary
