// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "scramflow/harness/analysis.hpp"
#include "scramflow/harness/config.hpp"
#include "scramflow/harness/experiment.hpp"
#include "scramflow/harness/seeds.hpp"

using namespace scramflow;
using namespace scramflow::harness;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("scramflow_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.L = {6};
  c.d = {5.0};
  c.realizations = 2;
  c.n_times = 40;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(Config, ParsesKeyValueFile) {
  std::istringstream in(R"(# sweep
L = 8, 10,12
d = 2.5,8
family = quasi_periodic
delta0 = 0.25   # trailing comment
realizations = 16
order = 6
oracle = yes
flow.rtol = 1e-9
flow.scrambling = off
)");
  ExperimentConfig c;
  parse_config(in, c);
  EXPECT_EQ(c.L, (std::vector<int>{8, 10, 12}));
  EXPECT_EQ(c.d, (std::vector<double>{2.5, 8.0}));
  EXPECT_EQ(c.family, DisorderFamily::quasi_periodic);
  EXPECT_DOUBLE_EQ(c.delta0, 0.25);
  EXPECT_EQ(c.realizations, 16);
  EXPECT_EQ(c.order, 6);
  EXPECT_TRUE(c.oracle);
  EXPECT_DOUBLE_EQ(c.flow.rk.rtol, 1e-9);
  EXPECT_FALSE(c.flow.scrambling);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, LaterSettingsOverrideEarlierOnes) {
  std::istringstream in("d = 3\nseed = 5\n");
  ExperimentConfig c;
  parse_config(in, c);
  apply_setting(c, "d", "7");  // a command-line override applied after the file
  EXPECT_EQ(c.d, std::vector<double>{7.0});
  EXPECT_EQ(c.seed, 5u);
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(apply_setting(c, "colour", "red"), ConfigError);
  EXPECT_THROW(apply_setting(c, "L", "8,x"), ConfigError);
  EXPECT_THROW(apply_setting(c, "oracle", "maybe"), ConfigError);
  std::istringstream in("L 8\n");
  EXPECT_THROW(parse_config(in, c), ConfigError);

  ExperimentConfig odd;
  odd.L = {7};
  EXPECT_THROW(odd.validate(), ConfigError);
  ExperimentConfig order;
  order.order = 5;
  EXPECT_THROW(order.validate(), ConfigError);
  ExperimentConfig big;
  big.L = {40};
  big.order = 6;
  EXPECT_THROW(big.validate(), CapacityError);
}

TEST(Config, OutputRootFallsBackToEnvironment) {
  ExperimentConfig c;
  c.out = "explicit";
  EXPECT_EQ(resolve_output(c), std::filesystem::path("explicit"));
  c.out.clear();
  ::setenv(kOutputRootEnv, "/tmp/from-env", 1);
  EXPECT_EQ(resolve_output(c), std::filesystem::path("/tmp/from-env"));
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_output(c), std::filesystem::path("scramflow-out"));
}

TEST(Seeds, DependOnlyOnTheirInputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t cell : {1u, 2u, 3u})
    for (std::uint64_t k = 0; k < 100; ++k) seen.insert(realization_seed(42, cell, k));
  EXPECT_EQ(seen.size(), 300u);
  EXPECT_EQ(realization_seed(42, 2, 7), realization_seed(42, 2, 7));
  EXPECT_NE(realization_seed(42, 2, 7), realization_seed(43, 2, 7));
  const auto s = realization_seed(1, 1, 1);
  EXPECT_NE(stream_seed(s, Stream::disorder), stream_seed(s, Stream::sampling));
  EXPECT_NE(cell_id(8, 5.0), cell_id(8, 5.5));
  EXPECT_NE(cell_id(8, 5.0), cell_id(10, 5.0));
}

TEST(TimeAverage, ConstantTrace) {
  const auto t = log_time_grid();
  const std::vector<double> c(t.size(), 0.7);
  EXPECT_DOUBLE_EQ(time_average(t, c), 0.7);
}

TEST(TimeAverage, OscillationAveragesOut) {
  // Uniform grid so the arithmetic mean approximates the time integral.
  const double omega = 3.0, lo = 50.0, hi = 1e3;
  std::vector<double> t, c;
  for (int k = 0; k <= 20000; ++k) {
    t.push_back(lo + (hi - lo) * k / 20000.0);
    c.push_back(std::cos(omega * t.back()));
  }
  EXPECT_LT(std::abs(time_average(t, c, lo, hi)), 2.0 / (omega * (hi - lo)));
}

TEST(TimeAverage, WindowOutsideGridIsAnError) {
  const std::vector<double> t{0.1, 1.0, 10.0}, c{1, 1, 1};
  EXPECT_THROW(time_average(t, c, 50.0, 1e3), ConfigError);
  EXPECT_THROW(time_average(t, c, 5.0, 1.0), ConfigError);
}

TEST(FiniteSize, ExactLinearData) {
  std::vector<SizePoint> pts;
  for (int l : {8, 12, 16, 24}) pts.push_back({l, 0.5 + 2.0 / l, 0.0});
  const auto f = finite_size_fit(pts);
  EXPECT_NEAR(f.intercept, 0.5, 1e-10);
  EXPECT_NEAR(f.slope, 2.0, 1e-9);
  EXPECT_NEAR(f.intercept_error, 0.0, 1e-8);
}

TEST(FiniteSize, ConstantDataHasZeroSlope) {
  std::vector<SizePoint> pts;
  for (int l : {8, 10, 12}) pts.push_back({l, 0.63, 0.01});
  const auto f = finite_size_fit(pts);
  EXPECT_NEAR(f.slope, 0.0, 1e-10);
  EXPECT_NEAR(f.intercept, 0.63, 1e-12);
  EXPECT_TRUE(f.weighted);
}

TEST(FiniteSize, UncertaintyGrowsWithoutTheLargestSize) {
  std::vector<SizePoint> pts;
  for (int l : {8, 12, 16, 24, 36}) pts.push_back({l, 0.4 + 1.5 / l, 0.02});
  const auto all = finite_size_fit(pts);
  pts.pop_back();
  const auto fewer = finite_size_fit(pts);
  EXPECT_GT(fewer.intercept_error, all.intercept_error);
}

TEST(FiniteSize, RejectsDegenerateInput) {
  std::vector<SizePoint> same{{8, 0.5, 0}, {8, 0.6, 0}, {8, 0.7, 0}};
  EXPECT_THROW(finite_size_fit(same), FitError);
  std::vector<SizePoint> two{{8, 0.5, 0}, {10, 0.6, 0}};
  EXPECT_THROW(finite_size_fit(two), FitError);
}

TEST(LocalizationLength, ExactExponential) {
  const int n = 12;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) delta(i, j) = std::exp(-std::abs(i - j) / 2.0);
  EXPECT_NEAR(fit_localization_length(delta), 2.0, 1e-6);
}

TEST(LocalizationLength, FloorBinsAreExcluded) {
  const int n = 12;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int r = std::abs(i - j);
      if (r == 0) continue;
      delta(i, j) = r <= 6 ? std::exp(-r / 2.0) : 1e-16;  // noise floor beyond r = 6
    }
  EXPECT_NEAR(fit_localization_length(delta), 2.0, 1e-6);
}

TEST(LocalizationLength, FreeCaseIsUndefined) {
  EXPECT_TRUE(std::isnan(fit_localization_length(Eigen::MatrixXd::Zero(8, 8))));
}

TEST(LocalizationLength, StrongerDisorderLocalizesInteractions) {
  ExperimentConfig c;
  c.L = {16};
  c.d = {5.0, 10.0};
  c.realizations = 3;
  c.n_times = 8;
  c.sample_states = 16;
  c.seed = 4;
  const auto res = run_experiment(c, false);
  ASSERT_EQ(res.cells.size(), 2u);
  EXPECT_LT(res.cells[1].xi.median, res.cells[0].xi.median);
}

TEST(Experiment, SmokeRunWithOracle) {
  ExperimentConfig c;
  c.L = {8};
  c.realizations = 1;
  c.oracle = true;
  c.out = scratch("smoke");
  const auto res = run_experiment(c);
  ASSERT_EQ(res.records.size(), 1u);
  const auto& r = res.records[0];
  ASSERT_EQ(r.status, Status::ok) << r.message;
  EXPECT_TRUE(r.has_oracle);
  EXPECT_EQ(r.spectrum.levels, 70u);
  EXPECT_LT(r.spectrum.median_relative, 1e-2);
  EXPECT_EQ(r.c_oracle.size(), r.trace.t.size());

  const auto traces = slurp(c.out / "traces.csv");
  EXPECT_EQ(count_lines(traces), 1u + 200u);
  EXPECT_EQ(count_lines(slurp(c.out / "realizations.csv")), 2u);
  EXPECT_EQ(count_lines(slurp(c.out / "oracle.csv")), 1u + 200u);
  const auto js = nlohmann::json::parse(slurp(c.out / "summary.json"));
  EXPECT_EQ(js["schema_version"], kSummarySchemaVersion);
  ASSERT_EQ(js["cells"].size(), 1u);
  EXPECT_EQ(js["cells"][0]["eig_median_rel_error"]["n"], 1);
  std::filesystem::remove_all(c.out);
}

TEST(Experiment, RescaledTracesStartAtOne) {
  auto c = small_config();
  c.t_min = 1e-6;
  const auto res = run_experiment(c, false);
  for (const auto& r : res.records) {
    ASSERT_EQ(r.status, Status::ok) << r.message;
    EXPECT_NEAR(r.trace.c.front(), 1.0, 1e-6);
    EXPECT_LT(r.trace.imag_residue, 1e-8);
  }
}

TEST(Experiment, DeterministicAcrossReruns) {
  auto c = small_config();
  c.out = scratch("det_a");
  run_experiment(c);
  auto c2 = c;
  c2.out = scratch("det_b");
  c2.workers = 2;
  run_experiment(c2);
  EXPECT_EQ(slurp(c.out / "traces.csv"), slurp(c2.out / "traces.csv"));
  EXPECT_EQ(slurp(c.out / "realizations.csv"), slurp(c2.out / "realizations.csv"));
  EXPECT_EQ(slurp(c.out / "summary.json"), slurp(c2.out / "summary.json"));
  std::filesystem::remove_all(c.out);
  std::filesystem::remove_all(c2.out);
}

TEST(Experiment, OneCellPerSizeAndDisorder) {
  ExperimentConfig c;
  c.L = {4, 6, 8};
  c.d = {3.0, 6.0};
  c.realizations = 2;
  c.n_times = 10;
  const auto res = run_experiment(c, false);
  ASSERT_EQ(res.cells.size(), 6u);
  for (double d : c.d) {
    int n = 0;
    for (const auto& s : res.cells) n += s.d == d;
    EXPECT_EQ(n, 3);
  }
  for (const auto& s : res.cells) {
    EXPECT_EQ(s.attempted, s.succeeded + s.failed + s.dropped);
    for (double v : s.variance) EXPECT_GE(v, 0.0);
  }
}

TEST(Experiment, FailedRealizationsAreCountedAndSkipped) {
  auto c = small_config();
  c.flow.divergence_bound = 1e-3;  // every flow trips the divergence guard
  c.out = scratch("fail");
  const auto res = run_experiment(c);
  ASSERT_EQ(res.cells.size(), 1u);
  EXPECT_EQ(res.cells[0].failed, 2u);
  EXPECT_EQ(res.cells[0].succeeded, 0u);
  for (const auto& r : res.records) {
    EXPECT_EQ(r.status, Status::failed);
    EXPECT_FALSE(r.message.empty());
  }
  EXPECT_EQ(count_lines(slurp(c.out / "traces.csv")), 1u);
  std::filesystem::remove_all(c.out);
}

TEST(Experiment, DivergenceFilterDropsLargeTraces) {
  ExperimentConfig c;
  c.filter = FilterMode::always;
  std::vector<RealizationRecord> recs(3);
  for (int k = 0; k < 3; ++k) {
    recs[k].L = 6;
    recs[k].d = 5.0;
    recs[k].index = k;
    recs[k].trace.t = {0.0, 1.0};
    recs[k].trace.c_raw = recs[k].trace.c = {1.0, k == 1 ? 1.2 : 0.8};
  }
  const auto s = summarize_cell(c, recs);
  EXPECT_EQ(s.dropped, 1u);
  EXPECT_EQ(s.succeeded, 2u);
  EXPECT_EQ(recs[1].status, Status::dropped);
  EXPECT_TRUE(recs[1].trace.diverged);
  EXPECT_NEAR(s.mean[1], 0.8, 1e-15);
  EXPECT_NEAR(s.drop_fraction, 1.0 / 3.0, 1e-15);

  ExperimentConfig one_d;  // automatic mode leaves 1D ensembles alone
  std::vector<RealizationRecord> again(recs);
  for (auto& r : again) r.status = Status::ok;
  EXPECT_EQ(summarize_cell(one_d, again).dropped, 0u);
}

TEST(Moments, SampleStatistics) {
  const std::vector<double> x{1.0, 2.0, 4.0, std::nan("")};
  const auto m = moments(x);
  EXPECT_EQ(m.n, 3u);
  EXPECT_DOUBLE_EQ(m.mean, 7.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.median, 2.0);
  EXPECT_NEAR(m.variance, ((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) + (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2, 1e-14);
}

TEST(LogLogSlope, PowerLaw) {
  const std::vector<double> x{8, 12, 16, 24, 36};
  std::vector<double> y;
  for (double v : x) y.push_back(5.0 * std::pow(v, -3.0));
  EXPECT_NEAR(log_log_slope(x, y), -3.0, 1e-12);
}
