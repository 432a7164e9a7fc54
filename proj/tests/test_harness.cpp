#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mcbary/harness.hpp"

using namespace mcbary;
using mcbary::test::base_scenario;

namespace {

const std::filesystem::path kScenarios = MCBARY_SCENARIOS;
const std::filesystem::path kData = MCBARY_TEST_DATA;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mcbary_" + std::to_string(::getpid()) + "_" + name);
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimal = R"({
  "medium": { "diffusion_um2_per_s": 79.4 },
  "transmitter": { "position_um": [0, 0, 0], "released_molecules": 10000 },
  "receivers": [ { "id": "R1", "center_um": [6, 0, 0], "radius_um": 1.0 } ],
  "time_grid": { "t_end_s": 2.0, "dt_solver_s": 0.001, "output_times_s": [2.0] }
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

// Small fixed-seed comparison used for golden and consistency checks.
Scenario golden_scenario() {
  Scenario s = base_scenario({{"R1", {3, 0, 0}, 1}, {"R2", {3, 2.5, 0}, 1}}, 0.5, PbsParams{1e-4, 2, 20240601});
  s.transmitter.released_molecules = 300;
  s.time_grid.output_times = {0.25, 0.5};
  return s;
}

}  // namespace

TEST(LoadScenario, ReferenceParameters) {
  const auto s = load_scenario(kScenarios / "reference.json");
  EXPECT_EQ(s.scenario().transmitter.released_molecules, 10000);
  EXPECT_EQ(s.receiver(0).radius, 1.0);
  EXPECT_EQ(s.diffusion(), 79.4);
  ASSERT_TRUE(s.scenario().pbs.has_value());
  EXPECT_EQ(s.scenario().pbs->dt, 1e-7);
}

TEST(LoadScenario, AllSampleScenariosValidate) {
  for (const char* name : {"siso.json", "two_receivers.json", "touching.json", "five_receivers.json"}) {
    EXPECT_NO_THROW((void)load_scenario(kScenarios / name)) << name;
  }
  for (const char* name : {"sweep_omega.json", "sweep_distance.json", "sweep_unequal_radii.json",
                           "sweep_five_receivers.json"}) {
    const SweepSpec spec = load_sweep(kScenarios / name);
    for (double v : spec.values) {
      EXPECT_NO_THROW((void)validate_scenario(place_receivers(spec.base, spec.layout, with_value(spec.placement, spec.parameter, v))))
          << name << " at " << v;
    }
  }
}

TEST(LoadScenario, NegativeDiffusionRejected) {
  const std::string text = replace(kMinimal, "79.4", "-1");
  EXPECT_THROW((void)parse_scenario(text), NonPositiveParameter);
}

TEST(LoadScenario, UnknownKeyNamesField) {
  const std::string text = replace(kMinimal, "\"radius_um\"", "\"radius_mm\": 1, \"radius_um\"");
  try {
    (void)parse_scenario(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("receivers[0]"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("radius_mm"), std::string::npos) << e.what();
  }
}

TEST(LoadScenario, SyntaxErrorReportsLine) {
  const std::string text = replace(kMinimal, "\"time_grid\"", "oops \"time_grid\"");
  try {
    (void)parse_scenario(text, "bad.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:5"), std::string::npos) << e.what();
  }
}

TEST(LoadScenario, TypeAndMissingFieldErrors) {
  EXPECT_THROW((void)parse_scenario(replace(kMinimal, "10000", "1.5")), ParseError);
  EXPECT_THROW((void)parse_scenario(replace(kMinimal, "[6, 0, 0]", "[6, 0]")), ParseError);
  EXPECT_THROW((void)parse_scenario(replace(kMinimal, "\"t_end_s\": 2.0,", "")), ParseError);
  EXPECT_THROW((void)load_scenario(temp_path("missing.json")), IoError);
}

TEST(LoadScenario, ReceiverIdsMustBeDistinct) {
  const std::string two = replace(kMinimal, R"({ "id": "R1", "center_um": [6, 0, 0], "radius_um": 1.0 })",
                                  R"({ "id": "R1", "center_um": [6, 0, 0], "radius_um": 1.0 },
                                     { "id": "R1", "center_um": [-6, 0, 0], "radius_um": 1.0 })");
  EXPECT_THROW((void)parse_scenario(two), ParseError);
  EXPECT_NO_THROW((void)parse_scenario(replace(two, "\"R1\", \"center_um\": [-6", "\"R2\", \"center_um\": [-6")));
  EXPECT_THROW((void)parse_scenario(replace(kMinimal, "\"R1\"", "\"\"")), ParseError);
}

TEST(SaveScenario, RoundTrip) {
  Scenario s = golden_scenario();
  s.receivers[1].center = {3 + 0.1 + 0.2, 2.5 + 1.0 / 3.0, -7e-17};
  s.pbs->seed = std::numeric_limits<std::uint64_t>::max();
  const auto path = temp_path("roundtrip.json");
  save_scenario(s, path);
  const auto loaded = load_scenario(path);
  EXPECT_EQ(loaded.scenario(), s);
  std::filesystem::remove(path);
}

TEST(PlaceReceivers, TwoReceiverGeometry) {
  Placement pl;
  pl.d_c1c2 = 4;
  pl.omega_deg = 0;
  const Scenario base = base_scenario({{"R1", {}, 1}, {"R2", {}, 1}});
  auto s = place_receivers(base, SweepLayout::two_receiver, pl);
  EXPECT_EQ(s.receivers[0].center, (Point3{6, 0, 0}));
  EXPECT_NEAR(s.receivers[1].center.x, 2.0, 1e-15);
  pl.omega_deg = 90;
  s = place_receivers(base, SweepLayout::two_receiver, pl);
  EXPECT_NEAR(s.receivers[1].center.x, 6.0, 1e-15);
  EXPECT_NEAR(s.receivers[1].center.y, 4.0, 1e-15);
  pl.omega_deg = 360;
  EXPECT_THROW((void)place_receivers(base, SweepLayout::two_receiver, pl), NonPositiveParameter);
  EXPECT_THROW((void)place_receivers(base_scenario({{"R1", {}, 1}}), SweepLayout::two_receiver, Placement{}),
               NonPositiveParameter);
}

TEST(PlaceReceivers, TouchingAtAngleValidates) {
  Placement pl;
  pl.d_c1c2 = 2;
  for (double omega : {10.0, 70.0, 135.0, 170.0}) {
    pl.omega_deg = omega;
    EXPECT_NO_THROW((void)validate_scenario(
        place_receivers(base_scenario({{"R1", {}, 1}, {"R2", {}, 1}}), SweepLayout::two_receiver, pl)))
        << omega;
  }
}

TEST(PlaceReceivers, FiveReceiverGeometry) {
  Placement pl;
  pl.alpha_deg = 90;
  const auto s = place_receivers(load_scenario(kScenarios / "five_receivers.json").scenario(),
                                 SweepLayout::five_receiver, pl);
  EXPECT_EQ(s.receivers[0].center, (Point3{-2, 0, 0}));
  EXPECT_NEAR(s.receivers[1].center.x, 0.0, 1e-15);
  EXPECT_NEAR(s.receivers[1].center.y, 6.0, 1e-15);
  EXPECT_EQ(s.receivers[2].center, (Point3{8, -2, 0}));
  EXPECT_EQ(s.receivers[3].center, (Point3{8, 2, 0}));
  EXPECT_EQ(s.receivers[4].center, (Point3{0, 3, 0}));
}

TEST(SweepSpec, ParsesAndRejects) {
  const auto spec = load_sweep(kScenarios / "sweep_omega.json");
  EXPECT_EQ(spec.layout, SweepLayout::two_receiver);
  EXPECT_EQ(spec.parameter, SweepParameter::omega_deg);
  EXPECT_EQ(spec.values.size(), 7u);
  EXPECT_EQ(spec.base.receivers.size(), 2u);
  EXPECT_TRUE(spec.outputs.contains("errors"));

  auto j = nlohmann::json::parse(read(kScenarios / "sweep_omega.json"));
  j["layout"] = "ring";
  EXPECT_THROW((void)sweep_from_json(j, kScenarios), ParseError);
  j = nlohmann::json::parse(read(kScenarios / "sweep_omega.json"));
  j["extra"] = 1;
  EXPECT_THROW((void)sweep_from_json(j, kScenarios), ParseError);
}

TEST(RunSweep, RejectsInvalidSpecs) {
  SweepSpec spec;
  spec.base = golden_scenario();
  EXPECT_THROW((void)run_sweep(spec), NonPositiveParameter);
  spec.values = {400};
  EXPECT_THROW((void)run_sweep(spec), NonPositiveParameter);
  spec.values = {30};
  spec.parameter = SweepParameter::alpha_deg;
  EXPECT_THROW((void)run_sweep(spec), NonPositiveParameter);
}

TEST(RunSweep, SingleValueEqualsDirectRun) {
  SweepSpec spec;
  spec.base = golden_scenario();
  spec.parameter = SweepParameter::omega_deg;
  spec.placement.d_c1t = 3;
  spec.placement.d_c1c2 = 2.5;
  spec.values = {90};
  const auto swept = run_sweep(spec);
  const auto direct = compare_scenario(
      validate_scenario(place_receivers(spec.base, spec.layout, with_value(spec.placement, spec.parameter, 90))), 90);
  EXPECT_EQ(format_csv(swept), format_csv(direct));
}

TEST(RunSweep, OrderedByValueThenReceiver) {
  SweepSpec spec;
  spec.base = golden_scenario();
  spec.placement.d_c1t = 3;
  spec.placement.omega_deg = 90;
  spec.parameter = SweepParameter::distance_um;
  spec.values = {4, 2.5, 3};
  ComparisonOptions opt;
  opt.threads = 3;
  const auto rows = run_sweep(spec, opt);
  ASSERT_EQ(rows.size(), 6u);
  const double expect[] = {4, 4, 2.5, 2.5, 3, 3};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].sweep_value, expect[k]);
    EXPECT_EQ(rows[k].receiver_id, k % 2 == 0 ? "R1" : "R2");
  }
  opt.threads = 1;
  EXPECT_EQ(format_csv(run_sweep(spec, opt)), format_csv(rows));
}

TEST(Csv, OneRowTwoLines) {
  ComparisonRow r;
  r.receiver_id = "R1";
  r.sweep_value = 90;
  r.n_analytic = 1234.5;
  const std::string csv = format_csv({r});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "sweep_value,receiver_id,N_analytic,N_centered,N_pbs_mean,N_pbs_std,bx_a,by_a,bz_a,bx_e,by_e,bz_e");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1), "90,R1,1234.5,0,0,0,0,0,0,0,0,0\n");
}

TEST(Csv, RejectsNonFiniteAndEmpty) {
  ComparisonRow r;
  r.receiver_id = "R1";
  r.barycenter_empirical.z = std::numeric_limits<double>::quiet_NaN();
  const auto path = temp_path("nan.csv");
  EXPECT_THROW(emit_csv({r}, path), NonFiniteValue);
  EXPECT_FALSE(std::filesystem::exists(path));
  r.barycenter_empirical.z = 0;
  r.n_pbs_std = -1;
  EXPECT_THROW((void)format_csv({r}), NonFiniteValue);
  EXPECT_THROW((void)format_csv({}), NonPositiveParameter);
}

TEST(Csv, QuotesAwkwardIds) {
  EXPECT_EQ(csv_field("R1"), "R1");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, ShortestRoundTripNumbers) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1e-7), "1e-07");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Csv, GoldenComparison) {
  const auto loaded = load_scenario(kData / "golden_scenario.json");
  EXPECT_EQ(loaded.scenario(), golden_scenario());
  const auto rows = compare_scenario(loaded, 0);
  const std::string csv = format_csv(rows);
  EXPECT_EQ(csv, format_csv(rows));
  const auto path = temp_path("golden.csv");
  emit_csv(rows, path);
  EXPECT_EQ(read(path), csv);
  std::filesystem::remove(path);
  EXPECT_EQ(csv, read(kData / "golden_compare.csv"));
}

TEST(EventsCsv, Layout) {
  const auto s = validate_scenario(golden_scenario());
  const auto log = run_trial(s, 0);
  const std::string csv = format_events_csv(s, std::span<const AbsorptionLog>(&log, 1));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "trial,receiver_id,time_s,x_um,y_um,z_um");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), log.events.size() + 1);
}
