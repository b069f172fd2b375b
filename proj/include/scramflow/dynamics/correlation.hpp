// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/warn.hpp"
#include "scramflow/dynamics/number_operator.hpp"
#include "scramflow/lattice.hpp"

namespace scramflow {

// ---------------------------------------------------------------------------
// Occupation states

/// Binomial coefficient, saturating at UINT64_MAX.
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > UINT64_MAX) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(r);
}

/// Every N/2-particle bitstring in increasing order.
inline std::vector<std::uint64_t> half_filled_states(int n) {
  if (n < 2 || n % 2 != 0) throw ConfigError("half filling needs an even mode count >= 2");
  if (n > 40) throw CapacityError("exhaustive enumeration of the half-filled sector is refused above 40 modes");
  std::vector<std::uint64_t> out;
  out.reserve(binomial(n, n / 2));
  std::uint64_t s = (std::uint64_t{1} << (n / 2)) - 1;
  const std::uint64_t end = std::uint64_t{1} << n;
  while (s < end) {
    out.push_back(s);
    // next permutation of the bit pattern
    const std::uint64_t c = s & (~s + 1);
    const std::uint64_t r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
  return out;
}

/// `n_samples` distinct half-filled states drawn uniformly without replacement, sorted.
/// The whole sector is returned when it has at most `n_samples` states.
inline std::vector<std::uint64_t> sample_half_filled(int n, int n_samples, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw ConfigError("half filling needs an even mode count >= 2");
  if (n > 64) throw CapacityError("occupation bitstrings are limited to 64 modes");
  if (n_samples < 1) throw ConfigError("at least one sample state is needed");
  const std::uint64_t dim = binomial(n, n / 2);
  if (dim <= static_cast<std::uint64_t>(n_samples)) {
    if (dim < static_cast<std::uint64_t>(n_samples))
      warn("requested " + std::to_string(n_samples) + " sample states but the half-filled sector has only " +
           std::to_string(dim) + "; using all of them");
    return half_filled_states(n);
  }
  std::mt19937_64 rng(seed);
  std::vector<int> modes(static_cast<std::size_t>(n));
  std::iota(modes.begin(), modes.end(), 0);
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::uint64_t> out;
  while (static_cast<int>(out.size()) < n_samples) {
    std::shuffle(modes.begin(), modes.end(), rng);
    std::uint64_t s = 0;
    for (int a = 0; a < n / 2; ++a) s |= std::uint64_t{1} << modes[static_cast<std::size_t>(a)];
    if (seen.insert(s).second) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Monomials acting on occupation states

namespace detail {

/// coef · c†_{cre[0]} … c†_{cre[r-1]} c_{ann[0]} … c_{ann[r-1]}, indices increasing.
struct Monomial {
  std::array<std::int8_t, 3> cre{};
  std::array<std::int8_t, 3> ann{};
  int r = 0;  // creators = annihilators = r
  cplx coef;
};

inline int jw_sign64(std::uint64_t s, int b) {
  return (std::popcount(s & ((std::uint64_t{1} << b) - 1)) & 1) ? -1 : 1;
}

/// M|s> = sign |s'>; returns false when it vanishes.
inline bool apply(const Monomial& m, std::uint64_t s, std::uint64_t& out, int& sign) {
  sign = 1;
  for (int a = m.r - 1; a >= 0; --a) {
    const std::uint64_t bit = std::uint64_t{1} << m.ann[a];
    if (!(s & bit)) return false;
    sign *= jw_sign64(s, m.ann[a]);
    s ^= bit;
  }
  for (int a = m.r - 1; a >= 0; --a) {
    const std::uint64_t bit = std::uint64_t{1} << m.cre[a];
    if (s & bit) return false;
    sign *= jw_sign64(s, m.cre[a]);
    s |= bit;
  }
  out = s;
  return true;
}

/// Sort `v` ascending; returns the permutation parity, or 0 on a repeated index.
inline int sort_with_sign(std::span<std::int8_t> v) {
  int sign = 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    for (std::size_t j = i; j > 0 && v[j - 1] > v[j]; --j) {
      std::swap(v[j - 1], v[j]);
      sign = -sign;
    }
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] == v[i - 1]) return 0;
  return sign;
}

/// Monomials of an alternating block (layout c†c c†c …), any slot representation.
inline void append_monomials(const Tensor<cplx>& t, std::vector<Monomial>& out) {
  if (t.empty()) return;
  const int rank = t.rank();
  const int r = rank / 2;
  // :c†_{i0} c_{j0} c†_{i1} c_{j1} …: = (−1)^{r(r−1)/2} c†_{i0} c†_{i1} … c_{j0} c_{j1} …
  const int layout_sign = ((r * (r - 1) / 2) % 2) ? -1 : 1;
  for_each_nonzero(t, [&](std::size_t off, std::span<const int> idx) {
    Monomial m;
    m.r = r;
    for (int a = 0; a < r; ++a) {
      m.cre[a] = static_cast<std::int8_t>(idx[2 * a]);
      m.ann[a] = static_cast<std::int8_t>(idx[2 * a + 1]);
    }
    const int sc = sort_with_sign(std::span<std::int8_t>(m.cre.data(), static_cast<std::size_t>(r)));
    const int sa = sort_with_sign(std::span<std::int8_t>(m.ann.data(), static_cast<std::size_t>(r)));
    if (sc == 0 || sa == 0) return;
    m.coef = static_cast<double>(layout_sign * sc * sa) * t.data()[off];
    out.push_back(m);
  });
}

/// Monomials by rank class: [0] quadratic, [1] quartic, [2] sextic.
inline std::array<std::vector<Monomial>, 3> monomials(const EvolvedNumberOperator& n) {
  std::array<std::vector<Monomial>, 3> out;
  const int modes = n.n_modes();
  for (int j = 0; j < modes; ++j)
    for (int k = 0; k < modes; ++k) {
      const cplx v = j == k ? cplx(n.alpha(j)) : n.beta(j, k);
      if (v == cplx{}) continue;
      Monomial m;
      m.r = 1;
      m.cre[0] = static_cast<std::int8_t>(j);
      m.ann[0] = static_cast<std::int8_t>(k);
      m.coef = v;
      out[0].push_back(m);
    }
  append_monomials(n.gamma, out[1]);
  if (n.order == 6) append_monomials(n.zeta, out[2]);
  return out;
}

/// Rank classes whose products enter expectation values: the sextic class only meets the quadratic one.
inline bool product_included(int rx, int ry) { return !((rx == 2 && ry >= 1) || (ry == 2 && rx >= 1)); }

using Amplitudes = std::array<cplx, 3>;

/// O|s> split by rank class, keyed by the target state.
inline void act(const std::array<std::vector<Monomial>, 3>& ms, std::uint64_t s,
                std::unordered_map<std::uint64_t, Amplitudes>& out, bool adjoint) {
  out.clear();
  for (int c = 0; c < 3; ++c)
    for (const Monomial& m : ms[c]) {
      Monomial a = m;
      if (adjoint) {
        std::swap(a.cre, a.ann);
        a.coef = std::conj(m.coef);
      }
      std::uint64_t s2;
      int sign;
      if (!apply(a, s, s2, sign)) continue;
      out[s2][c] += static_cast<double>(sign) * a.coef;
    }
}

inline void check_state(std::uint64_t s, int n) {
  if (n > 64 || (n < 64 && (s >> n) != 0)) throw IndexError("occupation state has bits beyond the mode count");
}

}  // namespace detail

/// <s| X Y |s> with the sextic class restricted to products with the quadratic class.
inline cplx product_expectation(const EvolvedNumberOperator& x, const EvolvedNumberOperator& y, std::uint64_t s) {
  if (x.n_modes() != y.n_modes()) throw DimensionError("operator mode counts differ");
  detail::check_state(s, x.n_modes());
  std::unordered_map<std::uint64_t, detail::Amplitudes> xd, yv;
  detail::act(detail::monomials(x), s, xd, true);  // X†|s>, so <s|X|s'> = conj(X†|s>)(s')
  detail::act(detail::monomials(y), s, yv, false);
  cplx acc{};
  for (const auto& [s2, ya] : yv) {
    const auto it = xd.find(s2);
    if (it == xd.end()) continue;
    for (int rx = 0; rx < 3; ++rx)
      for (int ry = 0; ry < 3; ++ry)
        if (detail::product_included(rx, ry)) acc += std::conj(it->second[rx]) * ya[ry];
  }
  return acc;
}

/// <s| X |s>.
inline cplx expectation(const EvolvedNumberOperator& x, std::uint64_t s) {
  detail::check_state(s, x.n_modes());
  std::unordered_map<std::uint64_t, detail::Amplitudes> v;
  detail::act(detail::monomials(x), s, v, false);
  const auto it = v.find(s);
  return it == v.end() ? cplx{} : it->second[0] + it->second[1] + it->second[2];
}

struct CorrelationValue {
  double value = 0.0;     // real part of the sample mean
  double imag = 0.0;      // imaginary residue of the sample mean
  double std_error = 0.0;  // standard error of the per-state real parts
  int n_states = 0;
};

/// 4 <(n(t) − 1/2)(n(0) − 1/2)> averaged over the given occupation states of the diagonal basis.
inline CorrelationValue infinite_T_correlation(const EvolvedNumberOperator& nt, const EvolvedNumberOperator& n0,
                                               std::span<const std::uint64_t> states) {
  if (states.empty()) throw ConfigError("no sample states");
  CorrelationValue r;
  cplx mean{};
  double m2 = 0.0;
  for (std::uint64_t s : states) {
    const cplx v = 4.0 * (product_expectation(nt, n0, s) - 0.5 * expectation(nt, s) - 0.5 * expectation(n0, s)) + 1.0;
    mean += v;
    m2 += v.real() * v.real();
  }
  const double k = static_cast<double>(states.size());
  mean /= k;
  r.value = mean.real();
  r.imag = mean.imag();
  r.n_states = static_cast<int>(states.size());
  r.std_error = k > 1 ? std::sqrt(std::max(0.0, (m2 / k - r.value * r.value) / (k - 1))) : 0.0;
  return r;
}

/// Sampling form: draws `n_samples` distinct half-filled states with `seed`. Odd N is a configuration error.
inline CorrelationValue infinite_T_correlation(const EvolvedNumberOperator& nt, const EvolvedNumberOperator& n0,
                                               int n_samples, std::uint64_t seed) {
  if (nt.n_modes() % 2 != 0) throw ConfigError("infinite-temperature sampling needs an even mode count");
  const auto states = sample_half_filled(nt.n_modes(), n_samples, seed);
  return infinite_T_correlation(nt, n0, states);
}

// ---------------------------------------------------------------------------
// Spectral form of the whole trace

/// C(t) of evolve(n0) against n0 resolved into frequencies, so any time costs one pass over the terms.
///
/// Per sample state s and reachable s', <s'|n(t)|s> = e^{iΩt} y(s') + g_Ω(t) b(s') with Ω the
/// quadratic energy difference and g_Ω the phase integral of the density-assisted terms. The result
/// equals the direct evaluation of evolve() and infinite_T_correlation() at every t.
class SpectralCorrelation {
 public:
  SpectralCorrelation(const EvolvedNumberOperator& n0, const DiagonalHamiltonian& diag,
                      std::span<const std::uint64_t> states, double J = 1.0, double degeneracy_tol = 1e-10)
      : tol_(degeneracy_tol * J), n_states_(static_cast<int>(states.size())) {
    if (n0.t != 0.0) throw ConfigError("spectral correlation expects a t = 0 number operator");
    if (states.empty()) throw ConfigError("no sample states");
    const int n = n0.n_modes();
    if (diag.n_modes() != n) throw DimensionError("diagonal Hamiltonian and operator mode counts differ");
    const auto ms = detail::monomials(n0);
    const auto& h = diag.h_tilde;
    std::unordered_map<std::uint64_t, detail::Amplitudes> yv;
    std::unordered_map<std::uint64_t, cplx> bv;
    const double w = 1.0 / static_cast<double>(states.size());
    Eigen::VectorXd occ(n);
    for (std::uint64_t s : states) {
      detail::check_state(s, n);
      detail::act(ms, s, yv, false);
      // b(s') for single moves q → k: 2 β_kq sign Σ_{m∈s, m≠q} (Δ_mk − Δ_mq)
      bv.clear();
      for (int m = 0; m < n; ++m) occ(m) = (s >> m) & 1u ? 1.0 : 0.0;
      const Eigen::VectorXd load = diag.delta * occ;  // Σ_{m∈s} Δ_mk
      for (const detail::Monomial& mo : ms[0]) {
        const int k = mo.cre[0], q = mo.ann[0];
        if (k == q) continue;
        std::uint64_t s2;
        int sign;
        if (!detail::apply(mo, s, s2, sign)) continue;
        const double kappa = 2.0 * (load(k) - diag.delta(q, k) - load(q));
        if (kappa != 0.0) bv[s2] += static_cast<double>(sign) * kappa * mo.coef;
      }
      cplx diag_value{};
      for (const auto& [s2, ya] : yv) {
        double omega = 0.0;
        const std::uint64_t added = s2 & ~s, removed = s & ~s2;
        for (int m = 0; m < n; ++m) {
          if ((added >> m) & 1u) omega += h[m];
          if ((removed >> m) & 1u) omega -= h[m];
        }
        cplx p{};
        for (int rx = 0; rx < 3; ++rx)
          for (int ry = 0; ry < 3; ++ry)
            if (detail::product_included(rx, ry)) p += std::conj(ya[rx]) * ya[ry];
        cplx qv{};
        const auto bit = bv.find(s2);
        if (bit != bv.end())
          for (int ry = 0; ry < 3; ++ry)
            if (detail::product_included(1, ry)) qv += std::conj(bit->second) * ya[ry];
        if (s2 == s) {
          diag_value = ya[0] + ya[1] + ya[2];
          constant_ += w * p;
        } else {
          terms_.push_back({omega, w * p, w * qv});
        }
      }
      constant_ += w * (1.0 / 4.0 - diag_value);
    }
  }

  /// C(t) = 4 Re Σ [e^{−iΩt} P + conj(g_Ω(t)) Q] + 4 (constant part); imaginary residue in `imag`.
  cplx evaluate_complex(double t) const {
    cplx acc = constant_;
    for (const Term& x : terms_) {
      acc += std::polar(1.0, -x.omega * t) * x.p;
      if (x.q != cplx{}) acc += std::conj(phase_integral(x.omega, t, tol_)) * x.q;
    }
    return 4.0 * acc;
  }
  double evaluate(double t) const { return evaluate_complex(t).real(); }

  std::vector<double> evaluate(std::span<const double> ts) const {
    std::vector<double> out;
    out.reserve(ts.size());
    for (double t : ts) out.push_back(evaluate(t));
    return out;
  }

  int n_states() const { return n_states_; }
  std::size_t n_terms() const { return terms_.size(); }

 private:
  struct Term {
    double omega;
    cplx p, q;
  };
  double tol_;
  int n_states_;
  cplx constant_{};
  std::vector<Term> terms_;
};

// ---------------------------------------------------------------------------
// Traces, rescaling and filtering

/// `n` log-spaced times from t_min to t_max inclusive.
inline std::vector<double> log_time_grid(double t_min = 1e-1, double t_max = 1e5, int n = 200) {
  if (!(t_min > 0.0) || !(t_max > t_min) || n < 2) throw ConfigError("invalid log time grid");
  std::vector<double> t(static_cast<std::size_t>(n));
  const double a = std::log10(t_min), b = std::log10(t_max);
  for (int k = 0; k < n; ++k) t[k] = std::pow(10.0, a + (b - a) * k / (n - 1));
  return t;
}

/// Rescaling fit window: t = 0 followed by 20 log-spaced points in [10^-2, 1] / J.
inline std::vector<double> short_time_window(double J = 1.0, int n_log = 20) {
  if (!(J > 0.0)) throw ConfigError("the fit window needs J > 0");
  std::vector<double> t{0.0};
  const auto g = log_time_grid(1e-2 / J, 1.0 / J, n_log);
  t.insert(t.end(), g.begin(), g.end());
  return t;
}

struct CorrelationTrace {
  std::vector<double> t;
  std::vector<double> c_raw;
  std::vector<double> c;  // c1 (c_raw − c2)
  double c1 = 1.0;
  double c2 = 0.0;
  bool fit_fallback = false;
  bool diverged = false;
  double imag_residue = 0.0;  // largest |Im C| before truncation to the real part
  std::uint64_t seed = 0;
  ModelSpec spec;

  double max_abs() const {
    double m = 0.0;
    for (double x : c) m = std::max(m, std::abs(x));
    return m;
  }
};

struct RescaleFit {
  double c1 = 1.0;
  double c2 = 0.0;
  bool fallback = false;
};

/// Least-squares c1, c2 with C ↦ c1 (C − c2) matching `reference` on the window, constrained so the
/// first window point (t = 0, where the reference is 1) maps to the reference exactly.
inline RescaleFit fit_rescaling(std::span<const double> raw, std::span<const double> reference) {
  if (raw.size() != reference.size() || raw.size() < 2) throw DimensionError("rescaling window sizes differ");
  const double r0 = raw[0], f0 = reference[0];
  double sxy = 0.0, sxx = 0.0, scale = 0.0;
  for (std::size_t k = 1; k < raw.size(); ++k) {
    const double x = raw[k] - r0, y = reference[k] - f0;
    sxy += x * y;
    sxx += x * x;
    scale = std::max(scale, std::abs(raw[k]));
  }
  RescaleFit f;
  if (!(sxx > 1e-24 * std::max(1.0, scale * scale)) || sxy == 0.0) {
    warn("flat short-time trace; rescaling skipped (c1 = 1, c2 = 0)");
    f.fallback = true;
    return f;
  }
  f.c1 = sxy / sxx;
  f.c2 = r0 - f0 / f.c1;
  return f;
}

/// Apply the fit from the short-time window to the whole trace.
inline CorrelationTrace rescale_trace(CorrelationTrace raw, std::span<const double> window_raw,
                                      std::span<const double> window_reference) {
  const RescaleFit f = fit_rescaling(window_raw, window_reference);
  raw.c1 = f.c1;
  raw.c2 = f.c2;
  raw.fit_fallback = f.fallback;
  raw.c.resize(raw.c_raw.size());
  for (std::size_t k = 0; k < raw.c_raw.size(); ++k) raw.c[k] = f.c1 * (raw.c_raw[k] - f.c2);
  return raw;
}

struct FilterResult {
  std::vector<CorrelationTrace> retained;
  std::size_t dropped = 0;
  double drop_fraction = 0.0;
};

/// Drop traces whose rescaled |C| exceeds `threshold` anywhere; the dropped ones are flagged diverged.
inline FilterResult divergence_filter(std::vector<CorrelationTrace> traces, double threshold = 1.1) {
  if (traces.empty()) throw EmptyEnsembleError("no traces to filter");
  FilterResult r;
  const std::size_t total = traces.size();
  for (auto& tr : traces) {
    if (tr.max_abs() > threshold)
      ++r.dropped;
    else
      r.retained.push_back(std::move(tr));
  }
  r.drop_fraction = static_cast<double>(r.dropped) / static_cast<double>(total);
  if (r.retained.empty()) throw EmptyEnsembleError("every trace exceeded the divergence threshold");
  return r;
}

}  // namespace scramflow
