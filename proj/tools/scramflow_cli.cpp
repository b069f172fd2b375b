// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: run, oracle-check, summarize, fss, complexity.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "scramflow/harness/analysis.hpp"
#include "scramflow/harness/config.hpp"
#include "scramflow/harness/experiment.hpp"

namespace fs = std::filesystem;
using namespace scramflow;
using namespace scramflow::harness;

namespace {

/// Flags that mirror config keys. Values stay as strings so apply_setting does all parsing.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> given;  // applied in this order after the file
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key = value config file (flags override it)");
    struct Flag {
      const char* name;
      const char* key;
      const char* help;
    };
    static const Flag flags[] = {
        {"--L", "L", "system sizes, comma separated"},
        {"--d", "d", "disorder strengths, comma separated"},
        {"--delta0", "delta0", "interaction strength"},
        {"--J", "J", "hopping"},
        {"--family", "family", "random_box or quasi_periodic"},
        {"--dims", "dims", "1 or 2"},
        {"--Ly", "Ly", "second extent for 2D lattices"},
        {"--realizations", "realizations", "disorder realizations per (L, d)"},
        {"--samples", "sample_states", "sampled half-filled states per realization"},
        {"--order", "order", "number-operator truncation order, 4 or 6"},
        {"--site", "site", "probed site (default: centre)"},
        {"--seed", "seed", "master seed"},
        {"--out", "out", "output directory (default: $SCRAMFLOW_OUTPUT_ROOT or ./scramflow-out)"},
        {"--workers", "workers", "worker threads"},
        {"--filter", "filter", "divergence filter: auto, always or never"},
    };
    for (const auto& f : flags) {
      const std::string key = f.key;
      app->add_option_function<std::string>(
          f.name, [this, key](const std::string& v) { given.emplace_back(key, v); }, f.help);
    }
    app->add_flag_callback("--deterministic", [this] { given.emplace_back("deterministic", "true"); },
                           "bit-reproducible single-threaded numerics (default)");
    app->add_flag_callback("--no-deterministic", [this] { given.emplace_back("deterministic", "false"); },
                           "allow threaded linear algebra");
    app->add_flag_callback("--oracle", [this] { given.emplace_back("oracle", "true"); },
                           "compare with exact diagonalization when N <= 14");
    app->add_option("--set", sets, "any config key, as key=value (repeatable)");
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config_file.empty() ? ExperimentConfig{} : load_config(config_file);
    for (const auto& [k, v] : given) apply_setting(c, k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(c, harness::detail::trim(std::string_view(s).substr(0, eq)), s.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

std::string num(double x, const char* f = "%.4g") {
  if (!std::isfinite(x)) return "-";
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

void print_cells(const ExperimentResult& res) {
  std::printf("%4s %8s %5s %5s %5s %5s %10s %10s %10s %8s %10s %10s\n", "L", "d", "ok", "fail", "drop", "N", "Cbar",
              "Cbar_err", "Cbar_lta", "chi_bar", "eps_T", "eig_err");
  for (const auto& s : res.cells) {
    const double err = s.cbar.n > 1 ? std::sqrt(s.cbar.variance / s.cbar.n) : 0.0;
    std::printf("%4d %8s %5zu %5zu %5zu %5zu %10s %10s %10s %8s %10s %10s\n", s.L, num(s.d).c_str(), s.succeeded,
                s.failed, s.dropped, s.attempted, num(s.cbar.mean).c_str(), num(err).c_str(),
                num(s.cbar_lta.mean).c_str(), num(s.chi_bar.median, "%.0f").c_str(), num(s.eps_T.median).c_str(),
                s.has_oracle ? num(s.eig_error.mean).c_str() : "-");
  }
}

nlohmann::json read_summary(const fs::path& dir) {
  const fs::path p = fs::is_directory(dir) ? dir / "summary.json" : dir;
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot read '" + p.string() + "'");
  auto j = nlohmann::json::parse(f);
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSummarySchemaVersion)
    throw FormatError("'" + p.string() + "' has an unsupported schema version");
  return j;
}

double jnum(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

int cmd_run(const ConfigFlags& flags) {
  const auto cfg = flags.build();
  const auto res = run_experiment(cfg);
  print_cells(res);
  std::printf("wrote %s\n", res.out.string().c_str());
  return 0;
}

int cmd_oracle_check(const ConfigFlags& flags) {
  auto cfg = flags.build();
  cfg.oracle = true;
  for (int l : cfg.L)
    if (cfg.model(l, cfg.d.front()).n_sites() > oracle::kMaxFockModes)
      throw CapacityError("oracle-check needs N <= " + std::to_string(oracle::kMaxFockModes));
  const auto res = run_experiment(cfg);
  std::printf("%4s %8s %5s %14s %14s %16s\n", "L", "d", "N", "eig_err_median", "eig_err_max", "max_mean|C-C_ED|");
  for (const auto& s : res.cells) {
    double dev = 0.0;
    for (double x : s.oracle_abs_deviation) dev = std::max(dev, x);
    std::printf("%4d %8s %5zu %14s %14s %16s\n", s.L, num(s.d).c_str(), s.succeeded, num(s.eig_error.median).c_str(),
                num(s.eig_error.max).c_str(), num(dev).c_str());
  }
  std::printf("wrote %s\n", res.out.string().c_str());
  return 0;
}

int cmd_summarize(const std::string& dir) {
  const auto j = read_summary(dir);
  const auto& c = j["config"];
  std::printf("family %s, delta0 %s, order %d, seed %llu\n", c["family"].get<std::string>().c_str(),
              num(c["delta0"].get<double>()).c_str(), c["order"].get<int>(),
              static_cast<unsigned long long>(c["seed"].get<std::uint64_t>()));
  std::printf("%4s %8s %5s %5s %5s %5s %10s %10s %10s %8s %10s\n", "L", "d", "ok", "fail", "drop", "N", "Cbar",
              "Cbar_var", "Cbar_lta", "chi_bar", "eps_T");
  for (const auto& s : j["cells"])
    std::printf("%4d %8s %5zu %5zu %5zu %5zu %10s %10s %10s %8s %10s\n", s["L"].get<int>(),
                num(s["d"].get<double>()).c_str(), s["succeeded"].get<std::size_t>(), s["failed"].get<std::size_t>(),
                s["dropped"].get<std::size_t>(), s["attempted"].get<std::size_t>(), num(jnum(s["cbar"]["mean"])).c_str(),
                num(jnum(s["cbar"]["variance"])).c_str(), num(jnum(s["cbar_long_time"]["mean"])).c_str(),
                num(jnum(s["chi_bar"]["median"]), "%.0f").c_str(), num(jnum(s["eps_T"]["median"])).c_str());
  return 0;
}

int cmd_fss(const std::vector<std::string>& dirs) {
  std::map<double, std::vector<SizePoint>> by_d;
  for (const auto& dir : dirs) {
    const auto j = read_summary(dir);
    for (const auto& s : j["cells"]) {
      const auto n = s["cbar"]["n"].get<std::size_t>();
      if (n == 0) continue;
      const double var = jnum(s["cbar"]["variance"]);
      by_d[s["d"].get<double>()].push_back(
          {s["L"].get<int>(), jnum(s["cbar"]["mean"]), n > 1 && var > 0 ? std::sqrt(var / n) : 0.0});
    }
  }
  std::printf("%8s %6s %12s %12s %12s %12s\n", "d", "sizes", "Cbar(inf)", "error", "slope", "chi2");
  for (auto& [d, pts] : by_d) {
    try {
      const auto f = finite_size_fit(pts);
      std::printf("%8s %6zu %12s %12s %12s %12s\n", num(d).c_str(), pts.size(), num(f.intercept, "%.6f").c_str(),
                  num(f.intercept_error, "%.2e").c_str(), num(f.slope).c_str(), num(f.chi2).c_str());
    } catch (const FitError& e) {
      std::printf("%8s %6zu  %s\n", num(d).c_str(), pts.size(), e.what());
    }
  }
  return 0;
}

int cmd_complexity(const ConfigFlags& flags) {
  const auto cfg = flags.build();
  const auto pts = complexity_sweep(cfg);
  std::printf("%4s %8s %5s %10s %10s %12s %10s\n", "L", "d", "N", "chi_bar", "chi_bar_q", "chi", "weight_A");
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> fit;
  for (const auto& p : pts) {
    std::printf("%4d %8s %5zu %10s %10s %12s %10s\n", p.L, num(p.d).c_str(), p.chi_bar.n,
                num(p.chi_bar.median, "%.0f").c_str(), (num(p.chi_bar.min, "%.0f") + "-" + num(p.chi_bar.max, "%.0f")).c_str(),
                num(p.chi.median, "%.4e").c_str(), num(p.weight_a.median, "%.4f").c_str());
    if (p.chi.n > 0) {
      fit[p.d].first.push_back(p.L);
      fit[p.d].second.push_back(p.chi.median);
    }
  }
  for (const auto& [d, xy] : fit)
    if (xy.first.size() >= 2)
      std::printf("d = %s: log-log slope of chi vs L = %.3f\n", num(d).c_str(), log_log_slope(xy.first, xy.second));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-equation diagonalization and infinite-temperature dynamics of disordered fermion chains"};
  app.require_subcommand(1);

  ConfigFlags run_flags, oracle_flags, complexity_flags;
  auto* run = app.add_subcommand("run", "run a disorder sweep and export traces and an ensemble summary");
  run_flags.add(run);
  auto* oc = app.add_subcommand("oracle-check", "run a sweep with exact-diagonalization comparisons (N <= 14)");
  oracle_flags.add(oc);

  std::string summary_dir;
  auto* sum = app.add_subcommand("summarize", "print the ensemble summary of a finished run");
  sum->add_option("dir", summary_dir, "run directory or summary.json")->required();

  std::vector<std::string> fss_dirs;
  auto* fss = app.add_subcommand("fss", "extrapolate the window-averaged autocorrelation to L -> infinity");
  fss->add_option("dirs", fss_dirs, "run directories or summary files")->required();

  auto* cx = app.add_subcommand("complexity", "flowed-operator complexity against system size");
  complexity_flags.add(cx);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*oc) return cmd_oracle_check(oracle_flags);
    if (*sum) return cmd_summarize(summary_dir);
    if (*fss) return cmd_fss(fss_dirs);
    if (*cx) return cmd_complexity(complexity_flags);
  } catch (const ConfigError& e) {
    std::cerr << "scramflow: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "scramflow: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
