// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "scramflow/core/warn.hpp"
#include "scramflow/dynamics/correlation.hpp"
#include "scramflow/dynamics/number_operator.hpp"
#include "scramflow/flow/flow.hpp"
#include "scramflow/harness/analysis.hpp"
#include "scramflow/harness/config.hpp"
#include "scramflow/harness/seeds.hpp"
#include "scramflow/lattice.hpp"
#include "scramflow/opflow/opflow.hpp"
#include "scramflow/oracle/fock.hpp"
#include "scramflow/oracle/spectrum.hpp"

namespace scramflow::harness {

inline constexpr int kSummarySchemaVersion = 1;

enum class Status { ok, failed, dropped };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::failed: return "failed";
    case Status::dropped: return "dropped";
  }
  return "?";
}

/// Everything one disorder realization produces.
struct RealizationRecord {
  int L = 0;
  double d = 0.0;
  int index = 0;
  std::uint64_t seed = 0;
  Status status = Status::ok;
  std::string message;

  CorrelationTrace trace;
  double cbar = 0.0;      // time_average of the rescaled trace
  double cbar_lta = 0.0;  // rescaled long-time-average operator
  double sampling_error = 0.0;

  DiagonalHamiltonian diag;
  bool flow_converged = false;
  int scramble_phases = 0;
  std::size_t accepted_steps = 0;
  double eps_T = 0.0;
  double max_increment = 0.0;
  double analytic_estimate = 0.0;
  double induced_bandwidth = 0.0;
  std::int64_t chi_bar = 0;
  double chi = 0.0;
  double xi = kUndefinedLength;

  bool has_oracle = false;
  oracle::SpectrumError spectrum;
  std::vector<double> c_oracle;  // typicality trace on the same grid
  double wall_seconds = 0.0;
};

/// Ensemble statistics of one (L, d) cell. Counts satisfy attempted = succeeded + failed + dropped.
struct CellSummary {
  int L = 0;
  double d = 0.0;
  std::size_t attempted = 0, succeeded = 0, failed = 0, dropped = 0;
  double drop_fraction = 0.0;
  std::vector<double> t, mean, variance;
  Moments cbar, cbar_lta, chi, chi_bar, xi, eps_T, max_increment, analytic_estimate, scramble_phases;
  bool has_oracle = false;
  Moments eig_error;
  std::vector<double> oracle_mean, oracle_abs_deviation;  // mean C_ED(t) and mean |C - C_ED|(t)
};

struct ExperimentResult {
  ExperimentConfig config;
  std::filesystem::path out;
  std::vector<RealizationRecord> records;  // cell-major, realization-minor
  std::vector<CellSummary> cells;
};

/// Cell identifier mixed into realization seeds.
inline std::uint64_t cell_id(int l, double d) {
  return mix64(static_cast<std::uint64_t>(l)) ^ std::bit_cast<std::uint64_t>(d);
}

/// build -> flow -> reconstruct -> evolve -> sample -> rescale; oracle comparisons when requested and N <= 14.
/// Exceptions are caught and reported through the record's status.
inline RealizationRecord run_realization(const ExperimentConfig& cfg, int l, double d, int k) {
  RealizationRecord rec;
  rec.L = l;
  rec.d = d;
  rec.index = k;
  rec.seed = realization_seed(cfg.seed, cell_id(l, d), static_cast<std::uint64_t>(k));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ModelSpec spec = cfg.model(l, d);
    spec.seed = stream_seed(rec.seed, Stream::disorder);
    const auto pot = sample_potential(spec, spec.seed);
    const auto h = build_hamiltonian(spec, pot);
    const int site = cfg.site_for(spec);
    const int n = spec.n_sites();

    FlowParams fp = cfg.flow;
    fp.deterministic = cfg.deterministic;
    auto fr = integrate_flow(FlowState<double>::initial(h, {site}), fp);
    rec.diag = fr.diag;
    rec.flow_converged = fr.converged;
    rec.scramble_phases = fr.scramble_phases;
    rec.accepted_steps = fr.accepted_steps;
    rec.eps_T = fr.ledger.eps_T;
    rec.max_increment = fr.ledger.max_increment();
    rec.analytic_estimate = fr.ledger.analytic_estimate;
    rec.induced_bandwidth = fr.ledger.induced_bandwidth;
    rec.xi = fit_localization_length(fr.diag.delta);

    const auto op = FlowedCreationOperator::from_flow(fr.state, 0);
    const auto cx = complexity(op, cfg.complexity_cutoff);
    rec.chi_bar = cx.chi_bar;
    rec.chi = cx.chi;

    const auto n0 = reconstruct_number_operator(op, cfg.order);
    const auto states = sample_half_filled(n, cfg.sample_states, stream_seed(rec.seed, Stream::sampling));
    const SpectralCorrelation sc(n0, fr.diag, states, cfg.J);

    CorrelationTrace tr;
    tr.seed = rec.seed;
    tr.spec = spec;
    tr.t = log_time_grid(cfg.t_min, cfg.t_max, cfg.n_times);
    tr.c_raw.reserve(tr.t.size());
    for (double t : tr.t) {
      const cplx c = sc.evaluate_complex(t);
      tr.c_raw.push_back(c.real());
      tr.imag_residue = std::max(tr.imag_residue, std::abs(c.imag()));
    }
    const auto window = short_time_window(cfg.J);
    const auto window_raw = sc.evaluate(window);
    Eigen::MatrixXd h2(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h2(i, j) = h.rank2(i, j);
    const auto window_ref = oracle::free_fermion_correlation(h2, site, window);
    rec.trace = rescale_trace(std::move(tr), window_raw, window_ref);

    rec.cbar = time_average(rec.trace.t, rec.trace.c, cfg.window_min / cfg.J, cfg.window_max / cfg.J);
    const auto lta = infinite_T_correlation(long_time_average(n0), n0, states);
    rec.cbar_lta = rec.trace.c1 * (lta.value - rec.trace.c2);
    rec.sampling_error = std::abs(rec.trace.c1) * lta.std_error;

    if (cfg.oracle && n <= oracle::kMaxFockModes) {
      rec.has_oracle = true;
      rec.spectrum = oracle::spectrum_error(fr.diag, h, oracle::half_filled_sector(n));
      rec.c_oracle = oracle::typicality_correlation(h, site, rec.trace.t, stream_seed(rec.seed, Stream::typicality));
    }
  } catch (const std::exception& e) {
    rec.status = Status::failed;
    rec.message = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

struct ComplexityPoint {
  int L = 0;
  double d = 0.0;
  Moments chi_bar, chi, weight_a;
  std::size_t failed = 0;
};

/// Flow-only sweep: complexity of the co-flowed creation operator at the central site per (L, d).
inline std::vector<ComplexityPoint> complexity_sweep(const ExperimentConfig& cfg);

/// Bounded pool: workers pull task indices from a shared counter and write into their own slot,
/// so the output order never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, int workers, F&& body) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < std::min(w, n); ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

inline CellSummary summarize_cell(const ExperimentConfig& cfg, std::span<RealizationRecord> recs) {
  CellSummary s;
  s.L = recs.front().L;
  s.d = recs.front().d;
  s.attempted = recs.size();

  std::vector<CorrelationTrace> ok;
  std::vector<std::size_t> ok_index;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (recs[k].status == Status::failed) continue;
    ok.push_back(recs[k].trace);
    ok_index.push_back(k);
  }
  s.failed = recs.size() - ok.size();
  if (cfg.filters() && !ok.empty()) {
    for (std::size_t j = 0; j < ok.size(); ++j)
      if (ok[j].max_abs() > cfg.divergence_threshold) {
        recs[ok_index[j]].status = Status::dropped;
        recs[ok_index[j]].trace.diverged = true;
      }
  }
  std::vector<const RealizationRecord*> kept;
  for (const auto& r : recs)
    if (r.status == Status::ok) kept.push_back(&r);
  s.succeeded = kept.size();
  s.dropped = s.attempted - s.succeeded - s.failed;
  s.drop_fraction = ok.empty() ? 0.0 : static_cast<double>(s.dropped) / static_cast<double>(ok.size());
  if (kept.empty()) return s;

  s.t = kept.front()->trace.t;
  const std::size_t nt = s.t.size();
  s.mean.assign(nt, 0.0);
  s.variance.assign(nt, 0.0);
  std::vector<double> col(kept.size());
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t r = 0; r < kept.size(); ++r) col[r] = kept[r]->trace.c[i];
    const auto m = moments(col);
    s.mean[i] = m.mean;
    s.variance[i] = m.variance;
  }
  auto collect = [&](auto get) {
    std::vector<double> v;
    for (const auto* r : kept) v.push_back(static_cast<double>(get(*r)));
    return moments(v);
  };
  s.cbar = collect([](const auto& r) { return r.cbar; });
  s.cbar_lta = collect([](const auto& r) { return r.cbar_lta; });
  s.chi = collect([](const auto& r) { return r.chi; });
  s.chi_bar = collect([](const auto& r) { return r.chi_bar; });
  s.xi = collect([](const auto& r) { return r.xi; });
  s.eps_T = collect([](const auto& r) { return r.eps_T; });
  s.max_increment = collect([](const auto& r) { return r.max_increment; });
  s.analytic_estimate = collect([](const auto& r) { return r.analytic_estimate; });
  s.scramble_phases = collect([](const auto& r) { return r.scramble_phases; });

  std::vector<const RealizationRecord*> with_oracle;
  for (const auto* r : kept)
    if (r->has_oracle) with_oracle.push_back(r);
  if (!with_oracle.empty()) {
    s.has_oracle = true;
    std::vector<double> e;
    for (const auto* r : with_oracle) e.push_back(r->spectrum.median_relative);
    s.eig_error = moments(e);
    s.oracle_mean.assign(nt, 0.0);
    s.oracle_abs_deviation.assign(nt, 0.0);
    for (const auto* r : with_oracle)
      for (std::size_t i = 0; i < nt; ++i) {
        s.oracle_mean[i] += r->c_oracle[i] / with_oracle.size();
        s.oracle_abs_deviation[i] += std::abs(r->trace.c[i] - r->c_oracle[i]) / with_oracle.size();
      }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

/// Shortest round-trip form; locale independent so reruns are byte-identical.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string flags(const RealizationRecord& r) {
  std::string f;
  auto add = [&](const char* s) {
    if (!f.empty()) f += '|';
    f += s;
  };
  if (r.status == Status::failed) add("failed");
  if (r.status == Status::dropped) add("dropped");
  if (r.trace.diverged) add("diverged");
  if (r.trace.fit_fallback) add("fit_fallback");
  if (r.status != Status::failed && !r.flow_converged) add("unconverged");
  return f.empty() ? "-" : f;
}

inline nlohmann::json to_json(const Moments& m) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  return {{"n", m.n}, {"mean", num(m.mean)}, {"variance", num(m.variance)}, {"median", num(m.median)},
          {"min", num(m.min)}, {"max", num(m.max)}};
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  return f;
}

}  // namespace detail

/// Rows (L, d, realization, seed, t, C_raw, C_rescaled, c1, c2, flags); failed realizations have no rows.
inline void write_traces_csv(const std::filesystem::path& p, std::span<const RealizationRecord> recs) {
  auto f = detail::open_out(p);
  f << "L,d,realization,seed,t,C_raw,C_rescaled,c1,c2,flags\n";
  for (const auto& r : recs) {
    if (r.status == Status::failed) continue;
    const std::string head = std::to_string(r.L) + ',' + detail::fmt(r.d) + ',' + std::to_string(r.index) + ',' +
                             std::to_string(r.seed) + ',';
    const std::string tail = ',' + detail::fmt(r.trace.c1) + ',' + detail::fmt(r.trace.c2) + ',' + detail::flags(r) + '\n';
    for (std::size_t i = 0; i < r.trace.t.size(); ++i)
      f << head << detail::fmt(r.trace.t[i]) << ',' << detail::fmt(r.trace.c_raw[i]) << ','
        << detail::fmt(r.trace.c[i]) << tail;
  }
}

inline void write_realizations_csv(const std::filesystem::path& p, std::span<const RealizationRecord> recs) {
  auto f = detail::open_out(p);
  f << "L,d,realization,seed,status,cbar,cbar_lta,chi_bar,chi,xi,eps_T,max_increment,analytic_estimate,"
       "induced_bandwidth,scramble_phases,accepted_steps,converged,eig_median_rel_error,eig_max_abs_error,message\n";
  for (const auto& r : recs) {
    std::string msg = r.message;
    for (auto& ch : msg)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    f << r.L << ',' << detail::fmt(r.d) << ',' << r.index << ',' << r.seed << ',' << to_string(r.status) << ','
      << detail::fmt(r.cbar) << ',' << detail::fmt(r.cbar_lta) << ',' << r.chi_bar << ',' << detail::fmt(r.chi) << ','
      << detail::fmt(r.xi) << ',' << detail::fmt(r.eps_T) << ',' << detail::fmt(r.max_increment) << ','
      << detail::fmt(r.analytic_estimate) << ',' << detail::fmt(r.induced_bandwidth) << ',' << r.scramble_phases
      << ',' << r.accepted_steps << ',' << (r.flow_converged ? 1 : 0) << ','
      << (r.has_oracle ? detail::fmt(r.spectrum.median_relative) : "") << ','
      << (r.has_oracle ? detail::fmt(r.spectrum.max_absolute) : "") << ',' << msg << '\n';
  }
}

/// Rows (L, d, realization, seed, t, C_ED) for realizations with an oracle trace.
inline void write_oracle_csv(const std::filesystem::path& p, std::span<const RealizationRecord> recs) {
  auto f = detail::open_out(p);
  f << "L,d,realization,seed,t,C_ED\n";
  for (const auto& r : recs) {
    if (!r.has_oracle) continue;
    for (std::size_t i = 0; i < r.trace.t.size(); ++i)
      f << r.L << ',' << detail::fmt(r.d) << ',' << r.index << ',' << r.seed << ',' << detail::fmt(r.trace.t[i]) << ','
        << detail::fmt(r.c_oracle[i]) << '\n';
  }
}

inline nlohmann::json summary_json(const ExperimentResult& res) {
  using nlohmann::json;
  const auto& c = res.config;
  json cfg = {{"L", c.L},
              {"d", c.d},
              {"dims", c.dims},
              {"Ly", c.ly},
              {"family", to_string(c.family)},
              {"J", c.J},
              {"delta0", c.delta0},
              {"realizations", c.realizations},
              {"sample_states", c.sample_states},
              {"order", c.order},
              {"site", c.site},
              {"time_grid", {c.t_min, c.t_max, c.n_times}},
              {"window", {c.window_min, c.window_max}},
              {"filter", c.filters()},
              {"divergence_threshold", c.divergence_threshold},
              {"oracle", c.oracle},
              {"seed", c.seed},
              {"deterministic", c.deterministic},
              {"flow",
               {{"scrambling", c.flow.scrambling},
                {"epsilon", c.flow.epsilon},
                {"rtol", c.flow.rk.rtol},
                {"atol", c.flow.rk.atol},
                {"v2_tolerance", c.flow.v2_tolerance},
                {"v4_tolerance", c.flow.v4_tolerance},
                {"l_max", c.flow.l_max}}}};
  json cells = json::array();
  for (const auto& s : res.cells) {
    json j = {{"L", s.L},
              {"d", s.d},
              {"attempted", s.attempted},
              {"succeeded", s.succeeded},
              {"failed", s.failed},
              {"dropped", s.dropped},
              {"drop_fraction", s.drop_fraction},
              {"t", s.t},
              {"mean", s.mean},
              {"variance", s.variance},
              {"cbar", detail::to_json(s.cbar)},
              {"cbar_long_time", detail::to_json(s.cbar_lta)},
              {"chi", detail::to_json(s.chi)},
              {"chi_bar", detail::to_json(s.chi_bar)},
              {"xi", detail::to_json(s.xi)},
              {"eps_T", detail::to_json(s.eps_T)},
              {"max_increment", detail::to_json(s.max_increment)},
              {"analytic_estimate", detail::to_json(s.analytic_estimate)},
              {"scramble_phases", detail::to_json(s.scramble_phases)}};
    if (s.has_oracle) {
      j["eig_median_rel_error"] = detail::to_json(s.eig_error);
      j["oracle_mean"] = s.oracle_mean;
      j["oracle_abs_deviation"] = s.oracle_abs_deviation;
    }
    cells.push_back(std::move(j));
  }
  return {{"schema_version", kSummarySchemaVersion}, {"config", cfg}, {"cells", cells}};
}

inline void write_outputs(const ExperimentResult& res) {
  std::filesystem::create_directories(res.out);
  write_traces_csv(res.out / "traces.csv", res.records);
  write_realizations_csv(res.out / "realizations.csv", res.records);
  bool any_oracle = false;
  for (const auto& r : res.records) any_oracle = any_oracle || r.has_oracle;
  if (any_oracle) write_oracle_csv(res.out / "oracle.csv", res.records);
  auto f = detail::open_out(res.out / "summary.json");
  f << summary_json(res).dump(2) << '\n';
}

/// Validates, runs every (L, d, realization) on the worker pool, summarizes and, with `write`, exports.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  res.out = resolve_output(cfg);
  if (write) std::filesystem::create_directories(res.out);

  struct Task {
    int l;
    double d;
    int k;
  };
  std::vector<Task> tasks;
  for (int l : cfg.L)
    for (double d : cfg.d)
      for (int k = 0; k < cfg.realizations; ++k) tasks.push_back({l, d, k});
  res.records.resize(tasks.size());
  parallel_for(tasks.size(), cfg.workers,
               [&](std::size_t i) { res.records[i] = run_realization(cfg, tasks[i].l, tasks[i].d, tasks[i].k); });

  const auto per_cell = static_cast<std::size_t>(cfg.realizations);
  for (std::size_t b = 0; b < res.records.size(); b += per_cell) {
    std::span<RealizationRecord> cell(res.records.data() + b, per_cell);
    for (const auto& r : cell)
      if (r.status == Status::failed)
        warn("realization L=" + std::to_string(r.L) + " d=" + detail::fmt(r.d) + " #" + std::to_string(r.index) +
             " failed: " + r.message);
    res.cells.push_back(summarize_cell(cfg, cell));
  }
  if (write) write_outputs(res);
  return res;
}

inline std::vector<ComplexityPoint> complexity_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Out {
    double chi_bar = std::nan(""), chi = std::nan(""), weight = std::nan("");
  };
  std::vector<ComplexityPoint> pts;
  for (int l : cfg.L)
    for (double d : cfg.d) {
      std::vector<Out> outs(static_cast<std::size_t>(cfg.realizations));
      parallel_for(outs.size(), cfg.workers, [&](std::size_t k) {
        try {
          ModelSpec spec = cfg.model(l, d);
          spec.seed = stream_seed(realization_seed(cfg.seed, cell_id(l, d), k), Stream::disorder);
          const auto h = build_hamiltonian(spec, sample_potential(spec, spec.seed));
          FlowParams fp = cfg.flow;
          fp.deterministic = cfg.deterministic;
          const auto fr = integrate_flow(FlowState<double>::initial(h, {cfg.site_for(spec)}), fp);
          const auto op = FlowedCreationOperator::from_flow(fr.state, 0);
          const auto cx = complexity(op, cfg.complexity_cutoff);
          outs[k] = {static_cast<double>(cx.chi_bar), cx.chi, op.weight_a()};
        } catch (const std::exception& e) {
          warn("complexity run L=" + std::to_string(l) + " #" + std::to_string(k) + " failed: " + e.what());
        }
      });
      ComplexityPoint p;
      p.L = l;
      p.d = d;
      std::vector<double> a, b, w;
      for (const auto& o : outs) {
        if (!std::isfinite(o.chi)) {
          ++p.failed;
          continue;
        }
        a.push_back(o.chi_bar);
        b.push_back(o.chi);
        w.push_back(o.weight);
      }
      p.chi_bar = moments(a);
      p.chi = moments(b);
      p.weight_a = moments(w);
      pts.push_back(p);
    }
  return pts;
}

}  // namespace scramflow::harness
