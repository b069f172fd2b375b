// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. One line per check:
//   [PASS] <id> <name>: <measurements> (<seconds> s)
// Exit status is the number of failed checks (capped at 125).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scramflow/harness/analysis.hpp"
#include "scramflow/harness/config.hpp"
#include "scramflow/harness/experiment.hpp"
#include "scramflow/opalg/commutator.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace scramflow;
using namespace scramflow::harness;

namespace {

// Tolerances and budgets, one constant per check.
constexpr double kCommutatorTol = 1e-10;
constexpr double kCommutatorBudget = 60.0;
constexpr double kFreeEnergyTol = 1e-6;
constexpr double kFreeCorrelationTol = 1e-4;
constexpr double kFreeTimeMax = 1e3;  // in units of 1/J
constexpr double kFreeBudget = 300.0;
constexpr double kSpectrumTol = 1e-2;
constexpr double kSpectrumBudget = 600.0;
constexpr double kSlackFactor = 10.0;
constexpr double kTraceDriftTol = 1e-8;
constexpr double kDynamicsTol = 0.1;
constexpr double kDynamicsTimeMax = 1e3;
constexpr double kDynamicsBudget = 3600.0;
constexpr double kIncrementTol = 1e-2;
constexpr double kLedgerFactor = 10.0;
constexpr double kComplexityRatio = 2.0;
constexpr double kSlopeLo = -3.5, kSlopeHi = -2.5;
constexpr double kComplexityBudget = 1800.0;
constexpr double kDegenerateTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Shared state: the interacting-spectrum run feeds the ledger and determinism checks.
struct Context {
  fs::path out;
  bool have_spectrum_run = false;
  ExperimentResult spectrum_run;
};

ExperimentConfig spectrum_config(const fs::path& out) {
  ExperimentConfig c;
  c.L = {8};
  c.d = {5.0};
  c.delta0 = 0.1;
  c.J = 1.0;
  c.family = DisorderFamily::random_box;
  c.realizations = 64;
  c.sample_states = 70;  // the whole half-filled sector of L = 8
  c.oracle = true;
  c.deterministic = true;
  c.seed = 20260;
  c.out = out;
  return c;
}

// 1 -------------------------------------------------------------------------

Outcome check_commutator(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const auto sector = oracle::make_sector(5);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto x = test_support::random_even(5, rng);
    const auto y = test_support::random_even(5, rng);
    const auto fx = oracle::fock_image(x, sector);
    const auto fy = oracle::fock_image(y, sector);
    const auto fc = oracle::fock_image(commutator(x, y, 6).value, sector);
    worst = std::max(worst, (fc - (fx * fy - fy * fx)).cwiseAbs().maxCoeff());
  }
  const double s = seconds_since(t0);
  return {worst <= kCommutatorTol && s < kCommutatorBudget,
          "max elementwise error " + fmt("%.2e", worst) + " over 200 pairs (<= 1e-10), " + fmt("%.1f", s) +
              " s (< 60 s)"};
}

// 2 -------------------------------------------------------------------------

Outcome check_free_limit(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_e = 0.0, worst_c = 0.0;
  int runs = 0, failed = 0;
  for (auto family : {DisorderFamily::random_box, DisorderFamily::quasi_periodic})
    for (int l : {8, 12})
      for (double d : {2.0, 8.0}) {
        ExperimentConfig c;
        c.L = {l};
        c.d = {d};
        c.delta0 = 0.0;
        c.family = family;
        c.sample_states = static_cast<int>(binomial(l, l / 2));
        c.flow.rk.rtol = 1e-9;
        c.flow.rk.atol = 1e-11;
        // Near the quasi-periodic critical point the slowest quadratic modes need flow times beyond the default.
        c.flow.l_max = 1e4;
        c.seed = 7;
        c.out = ctx.out / "free";
        const auto rec = run_realization(c, l, d, 0);
        ++runs;
        if (rec.status != Status::ok) {
          ++failed;
          std::cout << "  free run L=" << l << " d=" << d << " failed: " << rec.message << std::endl;
          continue;
        }
        const auto h = build_hamiltonian(rec.trace.spec, sample_potential(rec.trace.spec, rec.trace.spec.seed));
        Eigen::MatrixXd h2(l, l);
        for (int i = 0; i < l; ++i)
          for (int j = 0; j < l; ++j) h2(i, j) = h.rank2(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h2, Eigen::EigenvaluesOnly);
        auto flowed = rec.diag.h_tilde;
        std::sort(flowed.begin(), flowed.end());
        for (int i = 0; i < l; ++i) worst_e = std::max(worst_e, std::abs(flowed[i] - es.eigenvalues()(i)));
        const auto ref = oracle::free_fermion_correlation(h2, c.site_for(rec.trace.spec), rec.trace.t);
        for (std::size_t k = 0; k < ref.size(); ++k)
          if (rec.trace.t[k] <= kFreeTimeMax / c.J) worst_c = std::max(worst_c, std::abs(rec.trace.c[k] - ref[k]));
      }
  const double s = seconds_since(t0);
  return {failed == 0 && worst_e <= kFreeEnergyTol && worst_c <= kFreeCorrelationTol && s < kFreeBudget,
          std::to_string(runs) + " runs, " + std::to_string(failed) + " failed; max |h~ - e| " + fmt("%.2e", worst_e) +
              " (<= 1e-6), max |C - C_free| " + fmt("%.2e", worst_c) + " (<= 1e-4), " + fmt("%.1f", s) + " s (< 300 s)"};
}

// 3 -------------------------------------------------------------------------

const ExperimentResult& spectrum_run(Context& ctx) {
  if (!ctx.have_spectrum_run) {
    ctx.spectrum_run = run_experiment(spectrum_config(ctx.out / "spectrum-a"));
    ctx.have_spectrum_run = true;
  }
  return ctx.spectrum_run;
}

Outcome check_spectrum(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& res = spectrum_run(ctx);
  std::vector<double> med;
  int failed = 0;
  for (const auto& r : res.records) {
    if (r.status == Status::failed || !r.has_oracle) {
      ++failed;
      continue;
    }
    med.push_back(r.spectrum.median_relative);
  }
  const auto m = moments(med);
  const double s = seconds_since(t0);
  return {failed == 0 && m.n == 64 && m.median < kSpectrumTol && s < kSpectrumBudget,
          std::to_string(m.n) + " realizations, " + std::to_string(failed) + " failed; median relative error " +
              fmt("%.2e", m.median) + " (< 1e-2), mean " + fmt("%.2e", m.mean) + ", worst " + fmt("%.2e", m.max) +
              ", " + fmt("%.1f", s) + " s (< 600 s)"};
}

// 4 -------------------------------------------------------------------------

Outcome check_monotonicity(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  int violations = 0, wegner_steps = 0, failed = 0;
  double worst_excess = 0.0, worst_drift = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto h = test_support::chain_model(10, 5.0, 0.1, 9000 + static_cast<std::uint64_t>(k));
    FlowParams p;
    p.record_trace = true;
    FlowResult<double> res;
    try {
      res = integrate_flow(FlowState<double>::initial(h), p);
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "  flow " << k << " failed: " << e.what() << std::endl;
      continue;
    }
    const auto& tr = res.trace;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      worst_drift = std::max(worst_drift, std::abs(tr[i].fock_trace - tr.front().fock_trace));
      if (tr[i].phase != FlowPhase::wegner || tr[i - 1].phase != FlowPhase::wegner ||
          tr[i].phase_index != tr[i - 1].phase_index)
        continue;
      ++wegner_steps;
      const double v = tr[i - 1].v_norm2;
      const double slack = kSlackFactor * (p.rk.atol + p.rk.rtol * v);
      const double excess = tr[i].v_norm2 - v;
      if (excess > slack) ++violations;
      worst_excess = std::max(worst_excess, excess / slack);
    }
  }
  return {failed == 0 && violations == 0 && worst_drift <= kTraceDriftTol,
          "100 flows, " + std::to_string(failed) + " failed; " + std::to_string(wegner_steps) + " Wegner steps, " +
              std::to_string(violations) + " increases beyond slack (largest increase " + fmt("%.2f", worst_excess) +
              " x slack); max trace drift " + fmt("%.2e", worst_drift) + " (<= 1e-8), " +
              fmt("%.1f", seconds_since(t0)) + " s"};
}

// 5 -------------------------------------------------------------------------

Outcome check_dynamics(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.L = {12};
  c.d = {8.0};
  c.delta0 = 0.1;
  c.family = DisorderFamily::quasi_periodic;
  c.realizations = 32;
  c.oracle = true;
  c.seed = 31;
  c.out = ctx.out / "dynamics";
  const auto res = run_experiment(c);
  const auto& cell = res.cells.front();
  double worst = 0.0, worst_t = 0.0, worst_mean_gap = 0.0;
  for (std::size_t i = 0; i < cell.t.size(); ++i) {
    if (cell.t[i] > kDynamicsTimeMax / c.J) continue;
    if (cell.oracle_abs_deviation[i] > worst) {
      worst = cell.oracle_abs_deviation[i];
      worst_t = cell.t[i];
    }
    worst_mean_gap = std::max(worst_mean_gap, std::abs(cell.mean[i] - cell.oracle_mean[i]));
  }
  const double s = seconds_since(t0);
  const bool complete = cell.has_oracle && cell.succeeded == 32;
  return {complete && worst <= kDynamicsTol && s < kDynamicsBudget,
          std::to_string(cell.succeeded) + "/32 realizations; max_t ensemble-mean |C_FE - C_ED| " + fmt("%.3f", worst) +
              " at t = " + fmt("%.3g", worst_t) + " (<= 0.1); |mean C_FE - mean C_ED| peaks at " +
              fmt("%.3f", worst_mean_gap) + ", " + fmt("%.1f", s) + " s (< 3600 s)"};
}

// 6 -------------------------------------------------------------------------

Outcome check_ledger(Context& ctx) {
  const auto& res = spectrum_run(ctx);
  const auto& c = res.config;
  const double d = c.d.front();
  const double estimate = 1.5 * c.J * c.delta0 * c.delta0 / (d * d);
  double worst_inc = 0.0;
  std::vector<double> eps;
  int outside = 0;
  for (const auto& r : res.records) {
    if (r.status == Status::failed) continue;
    worst_inc = std::max(worst_inc, r.max_increment);
    eps.push_back(r.eps_T);
    if (!(r.eps_T <= kLedgerFactor * estimate && r.eps_T >= estimate / kLedgerFactor)) ++outside;
  }
  const auto m = moments(eps);
  return {m.n > 0 && worst_inc < kIncrementTol && outside == 0,
          "largest increment " + fmt("%.2e", worst_inc) + " (< 1e-2); eps_T median " + fmt("%.2e", m.median) +
              ", range [" + fmt("%.2e", m.min) + ", " + fmt("%.2e", m.max) + "] against estimate " +
              fmt("%.1e", estimate) + " (factor 10), " + std::to_string(outside) + "/" + std::to_string(m.n) +
              " outside"};
}

// 7 -------------------------------------------------------------------------

Outcome check_scrambling(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sector = oracle::half_filled_sector(10);
  std::vector<double> with, without;
  int failed = 0;
  for (int k = 0; k < 64; ++k) {
    const auto h = test_support::chain_model(10, 1.0, 1.0, 7000 + static_cast<std::uint64_t>(k));
    for (bool scramble : {true, false}) {
      FlowParams p;
      p.scrambling = scramble;
      try {
        const auto res = integrate_flow(FlowState<double>::initial(h), p);
        (scramble ? with : without).push_back(oracle::spectrum_error(res.diag, h, sector).median_relative);
      } catch (const std::exception& e) {
        // A divergent flow has no spectrum; count it against the variant that produced it.
        (scramble ? with : without).push_back(std::numeric_limits<double>::infinity());
        ++failed;
      }
    }
  }
  // Infinite entries sort last, so the median still ranks divergent flows as worst.
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  };
  const double a = med(with), b = med(without);
  return {a < b, "median error with scrambling " + fmt("%.3e", a) + ", without " + fmt("%.3e", b) + ", " +
                     std::to_string(failed) + " divergent flows, " + fmt("%.1f", seconds_since(t0)) + " s"};
}

// 8 -------------------------------------------------------------------------

Outcome check_complexity(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.L = {8, 12, 16, 24, 36};
  c.d = {10.0};
  c.realizations = 4;
  c.seed = 88;
  const auto pts = complexity_sweep(c);
  std::vector<double> ls, chi;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::string table;
  std::size_t failed = 0;
  for (const auto& p : pts) {
    failed += p.failed;
    table += " L" + std::to_string(p.L) + ":" + fmt("%.0f", p.chi_bar.median) + "/" + fmt("%.2e", p.chi.median);
    if (p.chi.n == 0) continue;
    lo = std::min(lo, p.chi_bar.median);
    hi = std::max(hi, p.chi_bar.median);
    ls.push_back(p.L);
    chi.push_back(p.chi.median);
  }
  const double ratio = hi / lo;
  const double slope = ls.size() >= 2 ? log_log_slope(ls, chi) : std::nan("");
  const double s = seconds_since(t0);
  return {failed == 0 && ratio < kComplexityRatio && slope >= kSlopeLo && slope <= kSlopeHi && s < kComplexityBudget,
          "chi_bar/chi per size" + table + "; chi_bar max/min " + fmt("%.2f", ratio) + " (< 2), slope " +
              fmt("%.2f", slope) + " (in [-3.5, -2.5]), " + std::to_string(failed) + " failed, " + fmt("%.1f", s) +
              " s (< 1800 s)"};
}

// 9 -------------------------------------------------------------------------

Outcome check_degenerate(Context&) {
  // h̃_1 = h̃_4 exactly; β_14 feeds :n_m c†_1 c_4: linearly in t.
  const int n = 5;
  auto op = FlowedCreationOperator::unit(n, 1);
  op.A(4) = 0.35;
  op.A(2) = -0.2;
  const auto n0 = reconstruct_number_operator(op, 4);
  DiagonalHamiltonian d;
  d.h_tilde = {0.4, -1.1, 2.3, 0.9, -1.1};
  d.delta = Eigen::MatrixXd::Zero(n, n);
  const double pairs[][3] = {{0, 1, 0.07}, {0, 4, -0.03}, {2, 4, 0.05}, {3, 1, 0.02}, {2, 3, 0.01}};
  for (const auto& p : pairs) {
    d.delta(int(p[0]), int(p[1])) = p[2];
    d.delta(int(p[1]), int(p[0])) = p[2];
  }
  double worst = 0.0;
  int checked = 0;
  for (double t : {0.3, 7.0, 250.0, 1e4}) {
    const auto e = evolve(n0, d, t);
    for (int m = 0; m < n; ++m) {
      if (m == 1 || m == 4) continue;
      for (auto [k, q] : {std::pair{1, 4}, std::pair{4, 1}}) {
        const double sigma = ((m < k) == (m < q)) ? 1.0 : -1.0;
        const int a = std::min(m, k), b = std::min(m, q), c = std::max(m, k), dd = std::max(m, q);
        const cplx expected = sigma * cplx(0.0, 1.0) * 2.0 * (d.delta(m, k) - d.delta(m, q)) * n0.beta(k, q) * t;
        const cplx linear = e.gamma(a, b, c, dd) - n0.gamma(a, b, c, dd);
        worst = std::max(worst, std::abs(linear - expected));
        ++checked;
      }
    }
  }
  return {worst <= kDegenerateTol,
          std::to_string(checked) + " slot/time pairs, max |Gamma_lin - i kappa beta(0) t| " + fmt("%.2e", worst) +
              " (<= 1e-12)"};
}

// 10 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome check_determinism(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& a = spectrum_run(ctx);
  const auto b = run_experiment(spectrum_config(ctx.out / "spectrum-b"));
  const std::string fa = slurp(a.out / "traces.csv"), fb = slurp(b.out / "traces.csv");
  return {!fa.empty() && fa == fb, "traces.csv " + std::to_string(fa.size()) + " and " + std::to_string(fb.size()) +
                                       " bytes, " + (fa == fb ? "identical" : "different") + ", rerun " +
                                       fmt("%.1f", seconds_since(t0)) + " s"};
}

struct Check {
  int id;
  const char* name;
  std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scramflow acceptance checks"};
  std::vector<int> only;
  std::string out = (fs::temp_directory_path() / "scramflow-acceptance").string();
  app.add_option("--only", only, "run only these check ids")->delimiter(',');
  app.add_option("--out", out, "scratch directory for run outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Check> checks = {
      {1, "contraction-oracle equivalence", check_commutator},
      {2, "free-limit exactness", check_free_limit},
      {3, "interacting spectra", check_spectrum},
      {4, "monotonicity and conservation", check_monotonicity},
      {5, "dynamics against typicality", check_dynamics},
      {6, "truncation ledger", check_ledger},
      {7, "scrambling benefit", check_scrambling},
      {8, "complexity scaling", check_complexity},
      {9, "degenerate branch", check_degenerate},
      {10, "determinism", check_determinism},
  };
  Context ctx;
  ctx.out = out;
  fs::create_directories(ctx.out);
  const std::set<int> wanted(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : checks) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ' ' << c.name << ": " << o.detail << " ("
              << fmt("%.1f", seconds_since(t0)) << " s)" << std::endl;
  }
  std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed") << std::endl;
  return std::min(failures, 125);
}
