// Command-line front end: gamma tables, analytic channel responses, PBS
// ensembles, sweeps and analytic-vs-PBS comparisons.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcbary/analytic.hpp"
#include "mcbary/barycenter.hpp"
#include "mcbary/core.hpp"
#include "mcbary/harness.hpp"
#include "mcbary/pbs.hpp"
#include "mcbary/solver.hpp"

namespace {

using namespace mcbary;

constexpr double kReferencePbsStep = 1e-7;

struct Globals {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<double> dt_pbs;
  std::optional<double> dt_solver;
  bool reference_step = false;
  unsigned threads = 0;
};

void write_output(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_text(g.out, text);
    std::cerr << "wrote " << g.out << '\n';
  }
}

// Applies command-line overrides; PBS parameters are created with desk-scale
// defaults if an override needs them and the file has none.
Scenario apply_overrides(Scenario s, const Globals& g, bool need_pbs) {
  if (g.dt_solver) s.time_grid.dt_solver = *g.dt_solver;
  const bool touches_pbs = g.seed || g.trials || g.dt_pbs || g.reference_step;
  if ((touches_pbs || need_pbs) && !s.pbs) s.pbs = PbsParams{1e-5, 20, 1};
  if (s.pbs) {
    if (g.seed) s.pbs->seed = *g.seed;
    if (g.trials) s.pbs->trials = *g.trials;
    if (g.dt_pbs) s.pbs->dt = *g.dt_pbs;
    if (g.reference_step) s.pbs->dt = kReferencePbsStep;
    if (auto w = pbs_step_warning(*s.pbs)) std::cerr << "warning: " << *w << '\n';
  }
  return s;
}

ValidatedScenario load(const Globals& g, bool need_pbs) {
  if (g.scenario.empty()) throw ParseError("--scenario is required for this command");
  return validate_scenario(apply_overrides(load_scenario(g.scenario).scenario(), g, need_pbs));
}

std::string row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + '\n';
}

int cmd_gamma(const Globals& g, const std::vector<double>& ds, const std::vector<double>& ts, double radius,
              double diffusion) {
  std::string out = "d_um,t_s,gamma,in_range\n";
  for (double d : ds) {
    for (double t : ts) {
      const double raw = gamma_raw({d, radius, diffusion, t});
      const bool ok = raw >= -1e-9 && raw <= 1.0 + 1e-9;
      out += row({format_number(d), format_number(t), format_number(raw), ok ? "1" : "0"});
    }
  }
  write_output(g, out);
  return 0;
}

int cmd_siso(const Globals& g) {
  const auto s = load(g, false);
  std::string out = "receiver_id,t_s,N\n";
  for (std::size_t i = 0; i < s.receiver_count(); ++i) {
    const SisoChannel ch{s.center_to_tx(i), s.receiver(i).radius, s.diffusion()};
    for (double t : s.scenario().time_grid.output_times) {
      out += row({csv_field(s.receiver(i).id), format_number(t), format_number(cum_absorbed_siso(ch, t, s.released()))});
    }
  }
  write_output(g, out);
  return 0;
}

int cmd_sito(const Globals& g) {
  const auto s = load(g, false);
  std::string out = "receiver_id,t_s,N_series,N_solver\n";
  std::vector<std::string> lines[2];
  for (double t : s.scenario().time_grid.output_times) {
    const BarycenterSet b = compose_barycenters(s, t);
    const auto [n1, n2] = cum_absorbed_sito(sito_config(s, b), t);
    SolverOptions opt;
    opt.horizon = t;
    const ResponseSeries r = solve_simo(s, b, opt);
    lines[0].push_back(row({csv_field(s.receiver(0).id), format_number(t), format_number(n1),
                            format_number(r.final_cumulative(0))}));
    lines[1].push_back(row({csv_field(s.receiver(1).id), format_number(t), format_number(n2),
                            format_number(r.final_cumulative(1))}));
  }
  for (const auto& block : lines) {
    for (const auto& l : block) out += l;
  }
  write_output(g, out);
  return 0;
}

int cmd_simo(const Globals& g) {
  const auto s = load(g, false);
  const auto& times = s.scenario().time_grid.output_times;
  const auto bary = absorbed_at_times(s, times, SourcePlacement::barycenter);
  const auto centered = absorbed_at_times(s, times, SourcePlacement::centered);
  std::string out = "receiver_id,t_s,N_barycenter,N_centered\n";
  for (std::size_t i = 0; i < s.receiver_count(); ++i) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      out += row({csv_field(s.receiver(i).id), format_number(times[k]), format_number(bary[k][i]),
                  format_number(centered[k][i])});
    }
  }
  write_output(g, out);
  return 0;
}

int cmd_pbs(const Globals& g, const std::string& events_path) {
  const auto s = load(g, true);
  PbsOptions opt;
  opt.threads = g.threads;
  const Ensemble e = run_ensemble(s, opt);
  std::string out = "receiver_id,t_s,N_mean,N_std,bx_e,by_e,bz_e\n";
  for (std::size_t i = 0; i < s.receiver_count(); ++i) {
    for (std::size_t k = 0; k < e.stats.output_times.size(); ++k) {
      const auto& b = e.stats.barycenter[i][k];
      auto coord = [&](double Point3::*m) { return b ? format_number((*b).*m) : std::string{}; };
      out += row({csv_field(s.receiver(i).id), format_number(e.stats.output_times[k]),
                  format_number(e.stats.mean[i][k]), format_number(e.stats.std_dev[i][k]), coord(&Point3::x),
                  coord(&Point3::y), coord(&Point3::z)});
    }
  }
  write_output(g, out);
  if (!events_path.empty()) {
    write_text(events_path, format_events_csv(s, e.logs));
    std::cerr << "wrote " << events_path << '\n';
  }
  return 0;
}

void print_summary(const std::vector<ComparisonRow>& rows, const std::set<std::string>& outputs) {
  for (const auto& r : rows) {
    std::cerr << r.sweep_value << ' ' << r.receiver_id;
    if (outputs.contains("counts")) {
      std::cerr << "  N_a=" << r.n_analytic << " N_c=" << r.n_centered << " N_pbs=" << r.n_pbs_mean << "+-"
                << r.n_pbs_std;
    }
    if (outputs.contains("barycenters")) {
      std::cerr << "  B_a=(" << r.barycenter_analytic.x << ',' << r.barycenter_analytic.y << ','
                << r.barycenter_analytic.z << ") B_e=(" << r.barycenter_empirical.x << ','
                << r.barycenter_empirical.y << ',' << r.barycenter_empirical.z << ')';
    }
    if (outputs.contains("errors")) {
      std::cerr << "  err_a=" << (r.n_analytic - r.n_pbs_mean) / r.n_pbs_mean
                << " err_c=" << (r.n_centered - r.n_pbs_mean) / r.n_pbs_mean
                << " |dB|=" << norm(r.barycenter_analytic - r.barycenter_empirical);
    }
    std::cerr << '\n';
  }
}

int cmd_sweep(const Globals& g, const std::string& spec_path) {
  SweepSpec spec = load_sweep(spec_path);
  spec.base = apply_overrides(spec.base, g, true);
  ComparisonOptions opt;
  opt.threads = g.threads;
  const auto rows = run_sweep(spec, opt);
  if (spec.outputs.contains("gamma")) {
    for (std::size_t k = 0; k < spec.values.size(); ++k) {
      const auto s = validate_scenario(
          place_receivers(spec.base, spec.layout, with_value(spec.placement, spec.parameter, spec.values[k])));
      const BarycenterSet b = compose_barycenters(s, s.scenario().time_grid.t_end);
      for (const auto& rb : b.receivers) {
        std::cerr << spec.values[k] << ' ' << rb.id << "  gamma_tx=" << rb.tx_gamma;
        for (const auto& c : rb.from_rx) std::cerr << " gamma_" << s.receiver(c.source).id << '=' << c.gamma;
        std::cerr << '\n';
      }
    }
  }
  print_summary(rows, spec.outputs);
  write_output(g, format_csv(rows));
  return 0;
}

int cmd_compare(const Globals& g) {
  const auto s = load(g, true);
  ComparisonOptions opt;
  opt.pbs.threads = g.threads;
  const auto rows = compare_scenario(s, 0.0, opt);
  print_summary(rows, {"counts", "errors"});
  write_output(g, format_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Absorption statistics and barycenters of fully absorbing spherical receivers"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--scenario", g.scenario, "Scenario file (JSON)");
  app.add_option("--out", g.out, "Output CSV path (default: stdout)");
  app.add_option("--seed", g.seed, "PBS seed");
  app.add_option("--trials", g.trials, "PBS trials");
  app.add_option("--dt-pbs", g.dt_pbs, "PBS step, s");
  app.add_option("--dt-solver", g.dt_solver, "Solver step, s");
  app.add_flag("--reference-step", g.reference_step, "Use the 0.1 us PBS step (slow)");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  std::vector<double> ds{1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0};
  std::vector<double> ts{0.1, 0.5, 1.0, 2.0};
  double radius = 1.0;
  double diffusion = 79.4;
  auto* gamma_cmd = app.add_subcommand("gamma", "gamma(d, t) table");
  gamma_cmd->add_option("--d", ds, "Center-to-source distances, um");
  gamma_cmd->add_option("--t", ts, "Times, s");
  gamma_cmd->add_option("--radius", radius, "Receiver radius, um");
  gamma_cmd->add_option("--diffusion", diffusion, "Diffusion coefficient, um^2/s");

  auto* siso_cmd = app.add_subcommand("siso", "Isolated-receiver absorption at the output times");
  auto* sito_cmd = app.add_subcommand("sito", "Two-receiver series and solver at the output times");
  auto* simo_cmd = app.add_subcommand("simo", "Multi-receiver solver, barycentric and centered sources");

  std::string events_path;
  auto* pbs_cmd = app.add_subcommand("pbs", "Particle-based simulation ensemble");
  pbs_cmd->add_option("--events", events_path, "Raw absorption event CSV");

  std::string sweep_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "Receiver-placement sweep with analytic vs PBS rows");
  sweep_cmd->add_option("spec", sweep_path, "Sweep file (JSON)")->required();

  auto* compare_cmd = app.add_subcommand("compare", "Analytic vs PBS rows for one scenario");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gamma_cmd) return cmd_gamma(g, ds, ts, radius, diffusion);
    if (*siso_cmd) return cmd_siso(g);
    if (*sito_cmd) return cmd_sito(g);
    if (*simo_cmd) return cmd_simo(g);
    if (*pbs_cmd) return cmd_pbs(g, events_path);
    if (*sweep_cmd) return cmd_sweep(g, sweep_path);
    if (*compare_cmd) return cmd_compare(g);
  } catch (const mcbary::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
