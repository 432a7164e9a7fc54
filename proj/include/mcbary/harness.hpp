// Scenario files, figure-style sweeps, analytic-vs-PBS comparison rows and
// CSV emission.
//
// Scenario file (JSON, units in the key names; unknown keys are rejected):
//
//   {
//     "medium":      { "diffusion_um2_per_s": 79.4 },
//     "transmitter": { "position_um": [0, 0, 0], "released_molecules": 10000 },
//     "receivers":   [ { "id": "R1", "center_um": [6, 0, 0], "radius_um": 1.0 } ],
//     "time_grid":   { "t_end_s": 2.0, "dt_solver_s": 0.001, "output_times_s": [0.5, 1.0, 2.0] },
//     "pbs":         { "dt_s": 1e-05, "trials": 20, "seed": 1 }          // optional
//   }
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mcbary/barycenter.hpp"
#include "mcbary/core.hpp"
#include "mcbary/pbs.hpp"
#include "mcbary/solver.hpp"

namespace mcbary {

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(where + ": unknown field '" + key + "'");
    }
  }
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

inline double number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

inline Point3 point(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    throw ParseError(where + "." + key + ": expected [x, y, z]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline json point_json(Point3 p) { return json::array({p.x, p.y, p.z}); }

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
  return 1 + static_cast<std::size_t>(std::count(text.begin(), end, '\n'));
}

inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Builds an unvalidated scenario from parsed JSON.
[[nodiscard]] inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace detail;
  reject_unknown_keys(j, {"medium", "transmitter", "receivers", "time_grid", "pbs"}, "scenario");
  Scenario s;

  const json& med = require(j, "medium", "scenario");
  reject_unknown_keys(med, {"diffusion_um2_per_s"}, "medium");
  s.medium.diffusion_coefficient = number(med, "diffusion_um2_per_s", "medium");

  const json& tx = require(j, "transmitter", "scenario");
  reject_unknown_keys(tx, {"position_um", "released_molecules"}, "transmitter");
  s.transmitter.position = point(tx, "position_um", "transmitter");
  s.transmitter.released_molecules = integer(tx, "released_molecules", "transmitter");

  const json& rx = require(j, "receivers", "scenario");
  if (!rx.is_array()) throw ParseError("receivers: expected an array");
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const std::string where = "receivers[" + std::to_string(i) + "]";
    reject_unknown_keys(rx[i], {"id", "center_um", "radius_um"}, where);
    ReceiverGeometry r;
    const json& id = require(rx[i], "id", where);
    if (!id.is_string()) throw ParseError(where + ".id: expected a string");
    r.id = id.get<std::string>();
    if (r.id.empty()) throw ParseError(where + ".id: must not be empty");
    for (const auto& prev : s.receivers) {
      if (prev.id == r.id) throw ParseError(where + ".id: duplicate id '" + r.id + "'");
    }
    r.center = point(rx[i], "center_um", where);
    r.radius = number(rx[i], "radius_um", where);
    s.receivers.push_back(std::move(r));
  }

  const json& tg = require(j, "time_grid", "scenario");
  reject_unknown_keys(tg, {"t_end_s", "dt_solver_s", "output_times_s"}, "time_grid");
  s.time_grid.t_end = number(tg, "t_end_s", "time_grid");
  s.time_grid.dt_solver = number(tg, "dt_solver_s", "time_grid");
  const json& ot = require(tg, "output_times_s", "time_grid");
  if (!ot.is_array()) throw ParseError("time_grid.output_times_s: expected an array");
  for (const auto& t : ot) {
    if (!t.is_number()) throw ParseError("time_grid.output_times_s: expected numbers");
    s.time_grid.output_times.push_back(t.get<double>());
  }

  if (const auto it = j.find("pbs"); it != j.end()) {
    reject_unknown_keys(*it, {"dt_s", "trials", "seed"}, "pbs");
    PbsParams p;
    p.dt = number(*it, "dt_s", "pbs");
    p.trials = integer(*it, "trials", "pbs");
    const json& seed = require(*it, "seed", "pbs");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
      throw ParseError("pbs.seed: expected a non-negative integer");
    }
    p.seed = seed.get<std::uint64_t>();
    s.pbs = p;
  }
  return s;
}

[[nodiscard]] inline nlohmann::json scenario_to_json(const Scenario& s) {
  using detail::point_json;
  nlohmann::json j;
  j["medium"] = {{"diffusion_um2_per_s", s.medium.diffusion_coefficient}};
  j["transmitter"] = {{"position_um", point_json(s.transmitter.position)},
                      {"released_molecules", s.transmitter.released_molecules}};
  j["receivers"] = nlohmann::json::array();
  for (const auto& r : s.receivers) {
    j["receivers"].push_back({{"id", r.id}, {"center_um", point_json(r.center)}, {"radius_um", r.radius}});
  }
  j["time_grid"] = {{"t_end_s", s.time_grid.t_end},
                    {"dt_solver_s", s.time_grid.dt_solver},
                    {"output_times_s", s.time_grid.output_times}};
  if (s.pbs) j["pbs"] = {{"dt_s", s.pbs->dt}, {"trials", s.pbs->trials}, {"seed", s.pbs->seed}};
  return j;
}

[[nodiscard]] inline ValidatedScenario parse_scenario(const std::string& text, const std::string& source = "<text>") {
  return validate_scenario(scenario_from_json(detail::parse_text(text, source)));
}

/// Reads, parses and validates a scenario file.
[[nodiscard]] inline ValidatedScenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(detail::read_file(path), path.string());
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << scenario_to_json(s).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepLayout { two_receiver, five_receiver };
enum class SweepParameter { omega_deg, alpha_deg, distance_um };

/// Receiver placement in the xy-plane, relative to the transmitter.
///
/// two_receiver: C1 = T + (d_c1t, 0, 0); C2 = C1 + d_c1c2 (-cos omega, sin omega, 0),
///   so omega = 0 puts receiver 2 on the line of sight between T and receiver 1.
/// five_receiver: receivers 1, 3, 4, 5 fixed at (-2, 0), (8, -2), (8, 2), (0, 3);
///   receiver 2 at d_c2t (cos alpha, sin alpha).
struct Placement {
  double d_c1t = 6.0;
  double d_c1c2 = 4.0;
  double omega_deg = 0.0;
  double alpha_deg = 0.0;
  double d_c2t = 6.0;
};

struct SweepSpec {
  Scenario base;
  SweepLayout layout = SweepLayout::two_receiver;
  SweepParameter parameter = SweepParameter::omega_deg;
  std::vector<double> values;
  Placement placement;
  /// Extra summaries requested from the CLI: "counts", "barycenters", "gamma", "errors".
  std::set<std::string> outputs{"counts"};
};

struct ComparisonRow {
  double sweep_value = 0.0;
  std::string receiver_id;
  double n_analytic = 0.0;
  double n_centered = 0.0;
  double n_pbs_mean = 0.0;
  double n_pbs_std = 0.0;
  Point3 barycenter_analytic;
  Point3 barycenter_empirical;
};

namespace detail {

inline void check_angle(double deg, const std::string& what) {
  if (!(deg >= 0.0 && deg < 360.0)) throw NonPositiveParameter(what + " must lie in [0, 360)");
}

inline Point3 polar_xy(double radius, double deg) {
  const double a = deg * std::numbers::pi / 180.0;
  return {radius * std::cos(a), radius * std::sin(a), 0.0};
}

}  // namespace detail

/// The base scenario with receivers placed per the layout.
[[nodiscard]] inline Scenario place_receivers(const Scenario& base, SweepLayout layout, const Placement& pl) {
  Scenario s = base;
  const Point3 t = base.transmitter.position;
  if (layout == SweepLayout::two_receiver) {
    if (s.receivers.size() != 2) throw NonPositiveParameter("two_receiver layout needs exactly 2 receivers");
    detail::check_angle(pl.omega_deg, "omega_deg");
    const Point3 c1 = t + Point3{pl.d_c1t, 0.0, 0.0};
    const double a = pl.omega_deg * std::numbers::pi / 180.0;
    s.receivers[0].center = c1;
    s.receivers[1].center = c1 + pl.d_c1c2 * Point3{-std::cos(a), std::sin(a), 0.0};
  } else {
    if (s.receivers.size() != 5) throw NonPositiveParameter("five_receiver layout needs exactly 5 receivers");
    detail::check_angle(pl.alpha_deg, "alpha_deg");
    s.receivers[0].center = t + Point3{-2.0, 0.0, 0.0};
    s.receivers[1].center = t + detail::polar_xy(pl.d_c2t, pl.alpha_deg);
    s.receivers[2].center = t + Point3{8.0, -2.0, 0.0};
    s.receivers[3].center = t + Point3{8.0, 2.0, 0.0};
    s.receivers[4].center = t + Point3{0.0, 3.0, 0.0};
  }
  return s;
}

[[nodiscard]] inline Placement with_value(Placement pl, SweepParameter param, double v) {
  switch (param) {
    case SweepParameter::omega_deg: pl.omega_deg = v; break;
    case SweepParameter::alpha_deg: pl.alpha_deg = v; break;
    case SweepParameter::distance_um: pl.d_c1c2 = v; break;
  }
  return pl;
}

struct ComparisonOptions {
  PbsOptions pbs;
  QuadratureSpec quadrature;
  /// Sweep points evaluated concurrently; 0 selects hardware concurrency.
  unsigned threads = 0;
};

/// Analytic (barycenter), centered and PBS results for every receiver of one
/// scenario, evaluated at t_end.
[[nodiscard]] inline std::vector<ComparisonRow> compare_scenario(const ValidatedScenario& s, double sweep_value,
                                                                 const ComparisonOptions& opt = {}) {
  if (!s.scenario().pbs) throw NonPositiveParameter("comparison needs PBS parameters");
  const double t = s.scenario().time_grid.t_end;
  const BarycenterSet bary = compose_barycenters(s, t, opt.quadrature);
  SolverOptions so;
  so.horizon = t;
  const ResponseSeries analytic = solve_simo(s, bary, so);
  const ResponseSeries centered = solve_sito_centered(s, so);
  const Ensemble ens = run_ensemble(s, opt.pbs);

  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < s.receiver_count(); ++i) {
    ComparisonRow r;
    r.sweep_value = sweep_value;
    r.receiver_id = s.receiver(i).id;
    r.n_analytic = analytic.final_cumulative(i);
    r.n_centered = centered.final_cumulative(i);
    std::vector<std::int64_t> counts;
    double mean = 0.0;
    for (const auto& log : ens.logs) mean += static_cast<double>(absorbed_by(log, i, t));
    mean /= static_cast<double>(ens.logs.size());
    double ss = 0.0;
    for (const auto& log : ens.logs) {
      const double c = static_cast<double>(absorbed_by(log, i, t)) - mean;
      ss += c * c;
    }
    r.n_pbs_mean = mean;
    r.n_pbs_std = ens.logs.size() > 1 ? std::sqrt(ss / static_cast<double>(ens.logs.size() - 1)) : 0.0;
    r.barycenter_analytic = bary.at(i);
    r.barycenter_empirical = empirical_barycenter(ens, i, t);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Evaluates every sweep value and returns rows ordered by sweep value
/// position, then receiver.
[[nodiscard]] inline std::vector<ComparisonRow> run_sweep(const SweepSpec& spec, const ComparisonOptions& opt = {}) {
  if (spec.values.empty()) throw NonPositiveParameter("sweep: value list is empty");
  const bool angle = spec.parameter != SweepParameter::distance_um;
  for (double v : spec.values) {
    if (angle) detail::check_angle(v, "sweep value");
    else if (!(v > 0.0)) throw NonPositiveParameter("sweep distance values must be positive");
  }
  if (spec.layout == SweepLayout::five_receiver && spec.parameter != SweepParameter::alpha_deg) {
    throw NonPositiveParameter("five_receiver sweeps vary alpha_deg");
  }
  if (spec.layout == SweepLayout::two_receiver && spec.parameter == SweepParameter::alpha_deg) {
    throw NonPositiveParameter("two_receiver sweeps vary omega_deg or distance_um");
  }

  // Validate every point up front so configuration errors surface before any
  // simulation starts.
  std::vector<ValidatedScenario> points;
  points.reserve(spec.values.size());
  for (double v : spec.values) {
    points.push_back(validate_scenario(place_receivers(spec.base, spec.layout, with_value(spec.placement, spec.parameter, v))));
  }

  std::vector<std::vector<ComparisonRow>> per_point(points.size());
  unsigned workers = opt.threads != 0 ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, points.size()));
  ComparisonOptions inner = opt;
  if (workers > 1) inner.pbs.threads = 1;
  if (workers <= 1) {
    for (std::size_t k = 0; k < points.size(); ++k) per_point[k] = compare_scenario(points[k], spec.values[k], inner);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(points.size());
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t k = next++; k < points.size(); k = next++) {
            try {
              per_point[k] = compare_scenario(points[k], spec.values[k], inner);
            } catch (...) {
              errors[k] = std::current_exception();
            }
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<ComparisonRow> rows;
  for (auto& block : per_point) {
    for (auto& r : block) rows.push_back(std::move(r));
  }
  return rows;
}

[[nodiscard]] inline SweepSpec sweep_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  reject_unknown_keys(j, {"scenario", "scenario_file", "layout", "parameter", "values", "placement", "outputs"},
                      "sweep");
  SweepSpec spec;
  if (j.contains("scenario") == j.contains("scenario_file")) {
    throw ParseError("sweep: exactly one of 'scenario' or 'scenario_file' is required");
  }
  if (j.contains("scenario")) {
    spec.base = scenario_from_json(j["scenario"]);
  } else {
    const auto& f = j["scenario_file"];
    if (!f.is_string()) throw ParseError("sweep.scenario_file: expected a string");
    std::filesystem::path p = f.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    spec.base = scenario_from_json(parse_text(read_file(p), p.string()));
  }

  const json& layout = require(j, "layout", "sweep");
  if (layout == "two_receiver") spec.layout = SweepLayout::two_receiver;
  else if (layout == "five_receiver") spec.layout = SweepLayout::five_receiver;
  else throw ParseError("sweep.layout: expected 'two_receiver' or 'five_receiver'");

  const json& param = require(j, "parameter", "sweep");
  if (param == "omega_deg") spec.parameter = SweepParameter::omega_deg;
  else if (param == "alpha_deg") spec.parameter = SweepParameter::alpha_deg;
  else if (param == "distance_um") spec.parameter = SweepParameter::distance_um;
  else throw ParseError("sweep.parameter: expected 'omega_deg', 'alpha_deg' or 'distance_um'");

  const json& values = require(j, "values", "sweep");
  if (!values.is_array()) throw ParseError("sweep.values: expected an array");
  for (const auto& v : values) {
    if (!v.is_number()) throw ParseError("sweep.values: expected numbers");
    spec.values.push_back(v.get<double>());
  }

  if (const auto it = j.find("placement"); it != j.end()) {
    reject_unknown_keys(*it, {"d_c1t_um", "d_c1c2_um", "omega_deg", "alpha_deg", "d_c2t_um"}, "placement");
    auto opt_number = [&](const char* key, double& dst) {
      if (it->contains(key)) dst = number(*it, key, "placement");
    };
    opt_number("d_c1t_um", spec.placement.d_c1t);
    opt_number("d_c1c2_um", spec.placement.d_c1c2);
    opt_number("omega_deg", spec.placement.omega_deg);
    opt_number("alpha_deg", spec.placement.alpha_deg);
    opt_number("d_c2t_um", spec.placement.d_c2t);
  }

  if (const auto it = j.find("outputs"); it != j.end()) {
    if (!it->is_array()) throw ParseError("sweep.outputs: expected an array");
    spec.outputs.clear();
    for (const auto& o : *it) {
      if (!o.is_string()) throw ParseError("sweep.outputs: expected strings");
      const auto name = o.get<std::string>();
      if (name != "counts" && name != "barycenters" && name != "gamma" && name != "errors") {
        throw ParseError("sweep.outputs: unknown output '" + name + "'");
      }
      spec.outputs.insert(name);
    }
  }
  return spec;
}

[[nodiscard]] inline SweepSpec load_sweep(const std::filesystem::path& path) {
  return sweep_from_json(detail::parse_text(detail::read_file(path), path.string()), path.parent_path());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 12> kCsvHeader = {
    "sweep_value", "receiver_id", "N_analytic", "N_centered", "N_pbs_mean", "N_pbs_std",
    "bx_a",        "by_a",        "bz_a",       "bx_e",       "by_e",       "bz_e"};

/// Shortest round-trip decimal form, independent of the C locale.
[[nodiscard]] inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

[[nodiscard]] inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// CSV text of the rows; throws NonFiniteValue if any number is NaN or
/// infinite and NonPositiveParameter if there are no rows.
[[nodiscard]] inline std::string format_csv(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw NonPositiveParameter("emit_csv: no rows");
  for (const auto& r : rows) {
    const std::array<double, 10> vals = {r.sweep_value,           r.n_analytic,           r.n_centered,
                                         r.n_pbs_mean,            r.n_pbs_std,            r.barycenter_analytic.x,
                                         r.barycenter_analytic.y, r.barycenter_analytic.z, r.barycenter_empirical.x,
                                         r.barycenter_empirical.y};
    if (!std::all_of(vals.begin(), vals.end(), [](double v) { return std::isfinite(v); }) ||
        !std::isfinite(r.barycenter_empirical.z)) {
      throw NonFiniteValue("emit_csv: non-finite value in row for receiver '" + r.receiver_id + "'");
    }
    if (r.n_pbs_std < 0.0) throw NonFiniteValue("emit_csv: negative standard deviation");
  }
  std::string out;
  for (std::size_t c = 0; c < kCsvHeader.size(); ++c) {
    if (c) out += ',';
    out += kCsvHeader[c];
  }
  out += '\n';
  for (const auto& r : rows) {
    const std::array<std::string, 12> cells = {
        format_number(r.sweep_value),           csv_field(r.receiver_id),
        format_number(r.n_analytic),            format_number(r.n_centered),
        format_number(r.n_pbs_mean),            format_number(r.n_pbs_std),
        format_number(r.barycenter_analytic.x), format_number(r.barycenter_analytic.y),
        format_number(r.barycenter_analytic.z), format_number(r.barycenter_empirical.x),
        format_number(r.barycenter_empirical.y), format_number(r.barycenter_empirical.z)};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += cells[c];
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline void emit_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
  write_text(path, format_csv(rows));
}

/// Raw absorption events: trial,receiver_id,time_s,x_um,y_um,z_um.
[[nodiscard]] inline std::string format_events_csv(const ValidatedScenario& s, std::span<const AbsorptionLog> logs) {
  std::string out = "trial,receiver_id,time_s,x_um,y_um,z_um\n";
  for (const auto& log : logs) {
    for (const auto& e : log.events) {
      out += std::to_string(log.trial);
      out += ',' + csv_field(s.receiver(e.receiver).id);
      out += ',' + format_number(e.time);
      out += ',' + format_number(e.position.x);
      out += ',' + format_number(e.position.y);
      out += ',' + format_number(e.position.z);
      out += '\n';
    }
  }
  return out;
}

}  // namespace mcbary
