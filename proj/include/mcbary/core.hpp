// Scenario and geometry data model shared by every mcbary module.
//
// Units are fixed throughout the library: lengths in micrometers, times in
// seconds, diffusion coefficients in um^2/s. There is no conversion layer.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcbary {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransmitterInsideReceiver : public Error {
 public:
  using Error::Error;
};
class OverlappingReceivers : public Error {
 public:
  using Error::Error;
};
class NonPositiveParameter : public Error {
 public:
  using Error::Error;
};
class MaxSubdivisionsExceeded : public Error {
 public:
  using Error::Error;
};
class NotConverged : public Error {
 public:
  using Error::Error;
};
class GammaOutOfRange : public Error {
 public:
  using Error::Error;
};
class MassBudgetExceeded : public Error {
 public:
  using Error::Error;
};
class NoAbsorptions : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Point3 operator*(double s, Point3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Point3 operator*(Point3 a, double s) { return s * a; }
  friend constexpr bool operator==(const Point3&, const Point3&) = default;

  constexpr Point3& operator+=(Point3 o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  [[nodiscard]] bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

[[nodiscard]] constexpr double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
[[nodiscard]] inline double norm(Point3 a) { return std::sqrt(dot(a, a)); }
[[nodiscard]] inline double distance(Point3 a, Point3 b) { return norm(a - b); }

struct Medium {
  double diffusion_coefficient = 0.0;  // um^2/s
  friend bool operator==(const Medium&, const Medium&) = default;
};

struct Transmitter {
  Point3 position;
  std::int64_t released_molecules = 0;
  friend bool operator==(const Transmitter&, const Transmitter&) = default;
};

struct ReceiverGeometry {
  std::string id;
  Point3 center;
  double radius = 0.0;  // um
  friend bool operator==(const ReceiverGeometry&, const ReceiverGeometry&) = default;
};

struct TimeGrid {
  double t_end = 0.0;      // s
  double dt_solver = 0.0;  // s
  std::vector<double> output_times;
  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct PbsParams {
  double dt = 0.0;  // s
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const PbsParams&, const PbsParams&) = default;
};

struct Scenario {
  Medium medium;
  Transmitter transmitter;
  std::vector<ReceiverGeometry> receivers;
  TimeGrid time_grid;
  std::optional<PbsParams> pbs;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A scenario whose physical preconditions have been checked, together with
/// the center-to-transmitter and center-to-center distances. Immutable.
class ValidatedScenario {
 public:
  [[nodiscard]] const Scenario& scenario() const { return scenario_; }
  [[nodiscard]] std::size_t receiver_count() const { return scenario_.receivers.size(); }
  [[nodiscard]] const ReceiverGeometry& receiver(std::size_t i) const { return scenario_.receivers.at(i); }
  [[nodiscard]] double diffusion() const { return scenario_.medium.diffusion_coefficient; }
  [[nodiscard]] double released() const { return static_cast<double>(scenario_.transmitter.released_molecules); }
  [[nodiscard]] Point3 transmitter_position() const { return scenario_.transmitter.position; }

  /// |C_i - T|
  [[nodiscard]] double center_to_tx(std::size_t i) const { return to_tx_.at(i); }
  /// |C_i - C_j|; zero on the diagonal.
  [[nodiscard]] double center_to_center(std::size_t i, std::size_t j) const {
    return between_.at(i * receiver_count() + j);
  }

  friend bool operator==(const ValidatedScenario&, const ValidatedScenario&) = default;

 private:
  friend ValidatedScenario validate_scenario(Scenario s);
  explicit ValidatedScenario(Scenario s) : scenario_(std::move(s)) {}

  Scenario scenario_;
  std::vector<double> to_tx_;
  std::vector<double> between_;
};

namespace detail {

inline void require_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw NonPositiveParameter(what + " must be positive and finite (got " + std::to_string(v) + ")");
  }
}

}  // namespace detail

/// Checks every physical precondition of a scenario and caches distances.
/// Touching receivers (|C_i - C_j| == R_i + R_j) are accepted; any
/// interpenetration is rejected.
inline ValidatedScenario validate_scenario(Scenario s) {
  using detail::require_positive;
  require_positive(s.medium.diffusion_coefficient, "medium.diffusion_coefficient");
  if (s.transmitter.released_molecules < 1) {
    throw NonPositiveParameter("transmitter.released_molecules must be >= 1 (got " +
                               std::to_string(s.transmitter.released_molecules) + ")");
  }
  if (!s.transmitter.position.is_finite()) throw NonPositiveParameter("transmitter.position must be finite");

  const auto& tg = s.time_grid;
  require_positive(tg.t_end, "time_grid.t_end");
  require_positive(tg.dt_solver, "time_grid.dt_solver");
  if (tg.dt_solver > tg.t_end) {
    throw NonPositiveParameter("time_grid.dt_solver must not exceed time_grid.t_end");
  }
  for (double t : tg.output_times) {
    if (!(t > 0.0) || !(t <= tg.t_end)) {
      throw NonPositiveParameter("time_grid.output_times entry " + std::to_string(t) + " outside (0, t_end]");
    }
  }
  for (std::size_t k = 1; k < tg.output_times.size(); ++k) {
    if (!(tg.output_times[k] > tg.output_times[k - 1])) {
      throw NonPositiveParameter("time_grid.output_times must be strictly increasing");
    }
  }
  if (s.pbs) {
    require_positive(s.pbs->dt, "pbs.dt");
    if (s.pbs->trials < 1) throw NonPositiveParameter("pbs.trials must be >= 1");
  }

  const std::size_t p = s.receivers.size();
  for (const auto& r : s.receivers) {
    require_positive(r.radius, "receiver '" + r.id + "' radius");
    if (!r.center.is_finite()) throw NonPositiveParameter("receiver '" + r.id + "' center must be finite");
  }

  ValidatedScenario v(std::move(s));
  const Scenario& sc = v.scenario_;
  v.to_tx_.resize(p);
  v.between_.assign(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& ri = sc.receivers[i];
    v.to_tx_[i] = distance(ri.center, sc.transmitter.position);
    if (!(v.to_tx_[i] > ri.radius)) {
      throw TransmitterInsideReceiver("transmitter lies inside or on receiver '" + ri.id + "'");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& rj = sc.receivers[j];
      const double d = distance(ri.center, rj.center);
      // Relative slack of 1e-12 so that touching receivers placed by angle
      // survive rounding of their center coordinates.
      if (d < (ri.radius + rj.radius) * (1.0 - 1e-12)) {
        throw OverlappingReceivers("receivers '" + rj.id + "' and '" + ri.id + "' interpenetrate");
      }
      v.between_[i * p + j] = d;
      v.between_[j * p + i] = d;
    }
  }
  return v;
}

/// Validating an already validated scenario is the identity.
inline ValidatedScenario validate_scenario(const ValidatedScenario& s) { return s; }

// ---------------------------------------------------------------------------
// Surface points
// ---------------------------------------------------------------------------

/// Point on the sphere (center, radius) nearest to `toward`.
[[nodiscard]] inline Point3 surface_point(Point3 center, double radius, Point3 toward) {
  const Point3 dir = toward - center;
  return center + (radius / norm(dir)) * dir;
}

}  // namespace mcbary
