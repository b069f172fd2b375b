// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/flow/flow.hpp"
#include "scramflow/lattice.hpp"

namespace scramflow::harness {

/// Output root used when a config names no directory.
inline constexpr const char* kOutputRootEnv = "SCRAMFLOW_OUTPUT_ROOT";

enum class FilterMode { automatic, always, never };

/// One sweep over (L, d) cells with N realizations each.
struct ExperimentConfig {
  std::vector<int> L{8};
  std::vector<double> d{5.0};
  int dims = 1;
  int ly = 1;  // 2D only; L is then Lx
  DisorderFamily family = DisorderFamily::random_box;
  double J = 1.0;
  double delta0 = 0.1;
  int realizations = 1;
  int sample_states = 256;
  int order = 4;
  int site = -1;  // -1: the central site
  double t_min = 1e-1;
  double t_max = 1e5;
  int n_times = 200;
  double window_min = 50.0;
  double window_max = 1e3;
  FilterMode filter = FilterMode::automatic;  // automatic filters 2D runs only
  double divergence_threshold = 1.1;
  double complexity_cutoff = 1e-6;
  bool oracle = false;
  FlowParams flow;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool deterministic = true;

  ModelSpec model(int l, double disorder) const {
    ModelSpec s;
    s.dims = dims;
    s.lx = l;
    s.ly = dims == 2 ? ly : 1;
    s.J = J;
    s.delta0 = delta0;
    s.family = family;
    s.d = disorder;
    return s;
  }

  int site_for(const ModelSpec& s) const { return site >= 0 ? site : s.n_sites() / 2; }

  bool filters() const { return filter == FilterMode::always || (filter == FilterMode::automatic && dims == 2); }

  /// Every check happens here, before any compute starts.
  void validate() const {
    if (L.empty() || d.empty()) throw ConfigError("L and d lists must be non-empty");
    for (int l : L) {
      const auto s = model(l, d.front());
      s.validate();
      if (s.n_sites() % 2 != 0) throw ConfigError("half filling needs an even site count, got " + std::to_string(s.n_sites()));
      if (s.n_sites() > 64) throw CapacityError("at most 64 sites are supported");
      if (site >= s.n_sites()) throw ConfigError("site lies outside the L = " + std::to_string(l) + " lattice");
      if (order == 6 && s.n_sites() > 36) throw CapacityError("order 6 is limited to 36 sites");
    }
    for (double x : d) model(L.front(), x).validate();
    if (realizations < 1) throw ConfigError("realizations must be >= 1");
    if (sample_states < 1) throw ConfigError("sample_states must be >= 1");
    if (order != 4 && order != 6) throw ConfigError("order must be 4 or 6");
    if (!(t_min > 0.0) || !(t_max > t_min) || n_times < 2) throw ConfigError("invalid time grid");
    if (!(window_max > window_min)) throw ConfigError("invalid averaging window");
    if (!(divergence_threshold > 0.0)) throw ConfigError("divergence threshold must be positive");
    if (!(complexity_cutoff > 0.0)) throw ConfigError("complexity cutoff must be positive");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(J > 0.0)) throw ConfigError("dynamics needs J > 0");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T x{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    x = static_cast<T>(std::strtod(v.c_str(), &end));
    if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("'" + key + "': not a number: '" + v + "'");
  } else {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("'" + key + "': not an integer: '" + v + "'");
  }
  return x;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw ConfigError("'" + key + "': empty list");
  return out;
}

inline bool parse_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': not a boolean: '" + v + "'");
}

}  // namespace detail

/// Set one key. Keys match the CLI flag names; flow options carry a "flow." prefix.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string v = trim(value);
  if (key == "L") c.L = parse_list<int>(key, v);
  else if (key == "d") c.d = parse_list<double>(key, v);
  else if (key == "dims") c.dims = parse_number<int>(key, v);
  else if (key == "Ly") c.ly = parse_number<int>(key, v);
  else if (key == "family") c.family = parse_family(v);
  else if (key == "J") c.J = parse_number<double>(key, v);
  else if (key == "delta0") c.delta0 = parse_number<double>(key, v);
  else if (key == "realizations") c.realizations = parse_number<int>(key, v);
  else if (key == "sample_states") c.sample_states = parse_number<int>(key, v);
  else if (key == "order") c.order = parse_number<int>(key, v);
  else if (key == "site") c.site = parse_number<int>(key, v);
  else if (key == "t_min") c.t_min = parse_number<double>(key, v);
  else if (key == "t_max") c.t_max = parse_number<double>(key, v);
  else if (key == "n_times") c.n_times = parse_number<int>(key, v);
  else if (key == "window_min") c.window_min = parse_number<double>(key, v);
  else if (key == "window_max") c.window_max = parse_number<double>(key, v);
  else if (key == "filter") {
    if (v == "auto") c.filter = FilterMode::automatic;
    else if (v == "always") c.filter = FilterMode::always;
    else if (v == "never") c.filter = FilterMode::never;
    else throw ConfigError("'filter' must be auto, always or never");
  }
  else if (key == "divergence_threshold") c.divergence_threshold = parse_number<double>(key, v);
  else if (key == "complexity_cutoff") c.complexity_cutoff = parse_number<double>(key, v);
  else if (key == "oracle") c.oracle = parse_bool(key, v);
  else if (key == "out") c.out = v;
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "workers") c.workers = parse_number<int>(key, v);
  else if (key == "deterministic") c.deterministic = parse_bool(key, v);
  else if (key == "flow.scrambling") c.flow.scrambling = parse_bool(key, v);
  else if (key == "flow.epsilon") c.flow.epsilon = parse_number<double>(key, v);
  else if (key == "flow.l_max") c.flow.l_max = parse_number<double>(key, v);
  else if (key == "flow.v2_tolerance") c.flow.v2_tolerance = parse_number<double>(key, v);
  else if (key == "flow.v4_tolerance") c.flow.v4_tolerance = parse_number<double>(key, v);
  else if (key == "flow.rtol") c.flow.rk.rtol = parse_number<double>(key, v);
  else if (key == "flow.atol") c.flow.rk.atol = parse_number<double>(key, v);
  else if (key == "flow.max_scramble_phases") c.flow.max_scramble_phases = parse_number<int>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// `key = value` lines; '#' starts a comment. Later lines override earlier ones.
inline void parse_config(std::istream& in, ExperimentConfig& c) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(std::string_view(t).substr(0, eq)), t.substr(eq + 1));
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'");
  ExperimentConfig c;
  parse_config(f, c);
  return c;
}

/// Output directory: the configured one, else $SCRAMFLOW_OUTPUT_ROOT, else ./scramflow-out.
inline std::filesystem::path resolve_output(const ExperimentConfig& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "scramflow-out";
}

}  // namespace scramflow::harness
