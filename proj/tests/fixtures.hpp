#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcbary/core.hpp"
#include "mcbary/harness.hpp"

namespace mcbary::test {

inline constexpr double kD = 79.4;

inline Scenario base_scenario(std::vector<ReceiverGeometry> receivers, double t_end = 2.0,
                              std::optional<PbsParams> pbs = std::nullopt) {
  Scenario s;
  s.medium.diffusion_coefficient = kD;
  s.transmitter = {{0.0, 0.0, 0.0}, 10000};
  s.receivers = std::move(receivers);
  s.time_grid = {t_end, 1e-3, {t_end}};
  s.pbs = pbs;
  return s;
}

inline ValidatedScenario siso(double d, double radius = 1.0, std::optional<PbsParams> pbs = std::nullopt) {
  return validate_scenario(base_scenario({{"R1", {d, 0.0, 0.0}, radius}}, 2.0, pbs));
}

inline ValidatedScenario two_receivers(double d12, double omega_deg, double r1 = 1.0, double r2 = 1.0,
                                       double t_end = 2.0) {
  Placement pl;
  pl.d_c1c2 = d12;
  pl.omega_deg = omega_deg;
  return validate_scenario(place_receivers(
      base_scenario({{"R1", {}, r1}, {"R2", {}, r2}}, t_end), SweepLayout::two_receiver, pl));
}

}  // namespace mcbary::test
