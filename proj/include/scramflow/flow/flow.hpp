// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/fpenv.hpp"
#include "scramflow/flow/generators.hpp"
#include "scramflow/flow/rk45.hpp"
#include "scramflow/opalg/io.hpp"
#include "scramflow/opalg/kernels.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow {

enum class FlowPhase { scrambling, wegner };

struct FlowParams {
  bool scrambling = true;
  double epsilon = 0.5;             // scrambling trigger threshold
  double scramble_tolerance = 1e-8;  // a scrambling phase ends once max|λ| falls below this
  double scramble_cap = 10.0;        // flow-time cap per scrambling phase
  double trigger_floor = 1e-6;       // mid-flow re-entry ignores couplings at or below this
  int max_scramble_phases = 50;
  double l_max = 1000.0;
  double v2_tolerance = 1e-6;  // stop when max|V2| and max|V4| are both below these
  double v4_tolerance = 1e-3;
  Rk45Options rk;
  bool integrating_factor = true;  // Wegner steps factor out the linear decay of off-diagonal entries
  std::size_t max_steps = 5'000'000;
  double divergence_bound = 1e8;  // any entry above this is treated as divergence
  bool deterministic = true;
  bool record_trace = false;       // keep ||V||^2 and the Fock trace after every accepted step
  double checkpoint_interval = 0;  // flow-time spacing of checkpoint files; 0 disables
  std::string checkpoint_prefix;
};

/// Truncation-error bookkeeping of one flow.
struct ErrorLedger {
  std::vector<double> l;           // flow time of each logged Wegner step end
  std::vector<double> rate;        // ||H0^(4)|| ||V^(2)|| ||H^(4)|| at that time
  std::vector<double> increments;  // trapezoid piece of the rate over the step
  double eps_T = 0.0;              // accumulated error, sum of increments
  double eps_F = 0.0;              // eps_T per unit Wegner flow time
  double wegner_time = 0.0;
  double analytic_estimate = 0.0;  // 3/2 J0 Δ0^2 / d̃^2
  double induced_bandwidth = 0.0;  // d̃ after the first scrambling phase
  double j0 = 0.0;                 // max |off-diagonal quadratic| at l = 0
  double delta0 = 0.0;             // max |quartic| at l = 0

  double max_increment() const {
    double m = 0.0;
    for (double x : increments) m = std::max(m, x);
    return m;
  }
};

/// Fixed point H = s + Σ h̃_i n_i + Σ_{i<j} 2 Δ_ij n_i n_j.
struct DiagonalHamiltonian {
  double scalar = 0.0;
  std::vector<double> h_tilde;
  Eigen::MatrixXd delta;  // symmetric, zero diagonal
  double max_v2 = 0.0;
  double max_v4 = 0.0;
  bool converged = false;

  int n_modes() const { return static_cast<int>(h_tilde.size()); }

  /// Energy of the occupation bitstring `s` (bit i = n_i).
  double energy(std::uint64_t s) const {
    double e = scalar;
    const int n = n_modes();
    for (int i = 0; i < n; ++i) {
      if (!((s >> i) & 1u)) continue;
      e += h_tilde[i];
      for (int j = i + 1; j < n; ++j)
        if ((s >> j) & 1u) e += 2.0 * delta(i, j);
    }
    return e;
  }
};

struct FlowTracePoint {
  double l = 0.0;
  double v_norm2 = 0.0;    // ||V2||_F^2 + ||V4||_F^2
  double fock_trace = 0.0;  // Fock-space trace divided by 2^N
  int phase_index = 0;      // increments at every phase switch
  FlowPhase phase = FlowPhase::wegner;
  double step = 0.0;
};

template <class T>
struct FlowState {
  PairIndex pairs;
  EvenPairForm<T> H;
  std::vector<int> op_sites;
  std::vector<OddPairForm<T>> ops;  // co-flowed c†_site
  double l = 0.0;
  FlowPhase phase = FlowPhase::scrambling;
  ErrorLedger ledger;

  int n_modes() const { return pairs.modes(); }

  static FlowState initial(const OperatorPolynomial<T>& h, std::vector<int> sites = {}) {
    if (h.parity != Parity::even) throw DimensionError("flow needs an even Hamiltonian");
    FlowState s;
    s.pairs = PairIndex(h.n_modes);
    s.H = to_pair_form(s.pairs, h);
    s.op_sites = std::move(sites);
    for (int site : s.op_sites) {
      if (site < 0 || site >= h.n_modes) throw IndexError("flowed operator site outside the lattice");
      auto o = OddPairForm<T>::zero(s.pairs);
      o.a(site) = T{1};
      s.ops.push_back(std::move(o));
    }
    return s;
  }

  OperatorPolynomial<T> hamiltonian() const { return from_pair_form(pairs, H); }
  OperatorPolynomial<T> flowed_op(std::size_t k) const { return from_pair_form(pairs, ops.at(k)); }
};

/// Raised when the running Hamiltonian overflows; carries the last accepted state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double l, std::string checkpoint)
      : Error(what), l_(l), checkpoint_(std::move(checkpoint)) {}
  double l() const { return l_; }
  /// Serialized last-good FlowState (see save_checkpoint).
  const std::string& checkpoint() const { return checkpoint_; }

 private:
  double l_;
  std::string checkpoint_;
};

template <class T>
struct FlowResult {
  DiagonalHamiltonian diag;
  FlowState<T> state;
  ErrorLedger ledger;
  std::vector<FlowTracePoint> trace;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  int scramble_phases = 0;
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Diagnostics on pair forms

template <class T>
double max_offdiag_quadratic(const EvenPairForm<T>& H) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < H.h.rows(); ++i)
    for (Eigen::Index j = 0; j < H.h.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(static_cast<double>(H.h(i, j))));
  return m;
}

template <class T>
double max_offdiag_quartic(const EvenPairForm<T>& H) {
  double m = 0.0;
  for (Eigen::Index p = 0; p < H.g.rows(); ++p)
    for (Eigen::Index q = 0; q < H.g.cols(); ++q)
      if (p != q) m = std::max(m, std::abs(static_cast<double>(H.g(p, q))));
  return m;
}

/// ||V2||_F^2 + ||V4||_F^2 of the off-diagonal coefficients.
template <class T>
double offdiag_norm2(const EvenPairForm<T>& H) {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < H.h.rows(); ++i)
    for (Eigen::Index j = 0; j < H.h.cols(); ++j)
      if (i != j) s += static_cast<long double>(H.h(i, j)) * H.h(i, j);
  for (Eigen::Index p = 0; p < H.g.rows(); ++p)
    for (Eigen::Index q = 0; q < H.g.cols(); ++q)
      if (p != q) s += static_cast<long double>(H.g(p, q)) * H.g(p, q);
  return static_cast<double>(s);
}

/// Fock-space trace divided by 2^N: s + tr(h)/2 + Σ_P G_PP / 4.
template <class T>
double normalized_fock_trace(const EvenPairForm<T>& H) {
  long double t = static_cast<long double>(H.scalar);
  for (Eigen::Index i = 0; i < H.h.rows(); ++i) t += 0.5L * H.h(i, i);
  for (Eigen::Index p = 0; p < H.g.rows(); ++p) t += 0.25L * H.g(p, p);
  return static_cast<double>(t);
}

/// ||H0^(4)||_F ||V^(2)||_F ||H^(4)||_F: the rate at which the dropped [η4, H4] part grows.
template <class T>
double truncation_rate(const EvenPairForm<T>& H) {
  long double d4 = 0.0L, v2 = 0.0L, h4 = 0.0L;
  for (Eigen::Index i = 0; i < H.h.rows(); ++i)
    for (Eigen::Index j = 0; j < H.h.cols(); ++j)
      if (i != j) v2 += static_cast<long double>(H.h(i, j)) * H.h(i, j);
  for (Eigen::Index p = 0; p < H.g.rows(); ++p)
    for (Eigen::Index q = 0; q < H.g.cols(); ++q) {
      const long double x = static_cast<long double>(H.g(p, q)) * H.g(p, q);
      h4 += x;
      if (p == q) d4 += x;
    }
  return static_cast<double>(std::sqrt(d4) * std::sqrt(v2) * std::sqrt(h4));
}

/// Polynomial-level truncation rate (η is accepted for interface symmetry; the bound uses H only).
template <class T>
double truncation_increment(const GeneratorPolynomial<T>& /*eta*/, const OperatorPolynomial<T>& H) {
  const PairIndex pi(H.n_modes);
  return truncation_rate(to_pair_form(pi, H));
}

/// d̃ = |max(diag h) - min(diag h)| / 2.
template <class T>
double induced_bandwidth(const EvenPairForm<T>& H) {
  const auto d = H.h.diagonal();
  return std::abs(static_cast<double>(d.maxCoeff() - d.minCoeff())) / 2.0;
}

template <class T>
double induced_bandwidth(const OperatorPolynomial<T>& H) {
  const PairIndex pi(H.n_modes);
  return induced_bandwidth(to_pair_form(pi, H));
}

/// Fold the diagonal part into (h̃, Δ): Δ_ij = G[(ij),(ij)] / 2, symmetric.
template <class T>
DiagonalHamiltonian fold_diagonal(const PairIndex& pi, const EvenPairForm<T>& H) {
  DiagonalHamiltonian d;
  const int n = pi.modes();
  d.scalar = static_cast<double>(H.scalar);
  d.h_tilde.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d.h_tilde[i] = static_cast<double>(H.h(i, i));
  d.delta = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < pi.size(); ++p) {
    const double v = static_cast<double>(H.g(p, p)) / 2.0;
    d.delta(pi.first(p), pi.second(p)) = d.delta(pi.second(p), pi.first(p)) = v;
  }
  d.max_v2 = max_offdiag_quadratic(H);
  d.max_v4 = max_offdiag_quartic(H);
  return d;
}

/// True if the scrambling condition holds for some coupling above the floor.
template <class T>
bool degeneracy_trigger(const EvenPairForm<T>& H, double epsilon, double floor) {
  const auto n = H.h.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double jij = std::abs(static_cast<double>(H.h(i, j)));
      if (jij > floor && jij >= epsilon * std::abs(static_cast<double>(H.h(i, i) - H.h(j, j)))) return true;
    }
  return false;
}

// ---------------------------------------------------------------------------
// Checkpoints: "SCFCKPT1" | f64 l | u8 phase | ledger scalars and increments
// | Hamiltonian polynomial | u32 op count | per op: u32 site + polynomial

template <class T>
void save_checkpoint(std::ostream& os, const FlowState<T>& s) {
  os.write("SCFCKPT1", 8);
  io::put_f64(os, s.l);
  io::put_u8(os, s.phase == FlowPhase::wegner ? 1 : 0);
  io::put_f64(os, s.ledger.eps_T);
  io::put_f64(os, s.ledger.wegner_time);
  io::put_f64(os, s.ledger.induced_bandwidth);
  io::put_f64(os, s.ledger.analytic_estimate);
  io::put_f64(os, s.ledger.j0);
  io::put_f64(os, s.ledger.delta0);
  io::put_u32(os, static_cast<std::uint32_t>(s.ledger.increments.size()));
  for (std::size_t k = 0; k < s.ledger.increments.size(); ++k) {
    io::put_f64(os, s.ledger.l[k]);
    io::put_f64(os, s.ledger.rate[k]);
    io::put_f64(os, s.ledger.increments[k]);
  }
  io::dump(os, s.hamiltonian());
  io::put_u32(os, static_cast<std::uint32_t>(s.ops.size()));
  for (std::size_t k = 0; k < s.ops.size(); ++k) {
    io::put_u32(os, static_cast<std::uint32_t>(s.op_sites[k]));
    io::dump(os, s.flowed_op(k));
  }
}

template <class T>
FlowState<T> load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::string(magic, 8) != "SCFCKPT1") throw FormatError("not a flow checkpoint");
  const double l = io::get_f64(is);
  const auto phase = io::get_u8(is);
  ErrorLedger led;
  led.eps_T = io::get_f64(is);
  led.wegner_time = io::get_f64(is);
  led.induced_bandwidth = io::get_f64(is);
  led.analytic_estimate = io::get_f64(is);
  led.j0 = io::get_f64(is);
  led.delta0 = io::get_f64(is);
  const auto n_inc = io::get_u32(is);
  for (std::uint32_t k = 0; k < n_inc; ++k) {
    led.l.push_back(io::get_f64(is));
    led.rate.push_back(io::get_f64(is));
    led.increments.push_back(io::get_f64(is));
  }
  led.eps_F = led.wegner_time > 0 ? led.eps_T / led.wegner_time : 0.0;
  const auto h = io::load<T>(is);
  FlowState<T> s = FlowState<T>::initial(h);
  s.l = l;
  s.phase = phase ? FlowPhase::wegner : FlowPhase::scrambling;
  s.ledger = std::move(led);
  const auto n_ops = io::get_u32(is);
  for (std::uint32_t k = 0; k < n_ops; ++k) {
    s.op_sites.push_back(static_cast<int>(io::get_u32(is)));
    s.ops.push_back(to_pair_form_odd(s.pairs, io::load<T>(is)));
  }
  return s;
}

namespace detail {

template <class T>
struct FlowPacking {
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  int n = 0, np = 0;
  std::size_t n_ops = 0;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(n) * n + static_cast<Eigen::Index>(np) * np +
           static_cast<Eigen::Index>(n_ops) * (n + static_cast<Eigen::Index>(np) * n);
  }
  Eigen::Index op_offset(std::size_t k) const {
    return static_cast<Eigen::Index>(n) * n + static_cast<Eigen::Index>(np) * np +
           static_cast<Eigen::Index>(k) * (n + static_cast<Eigen::Index>(np) * n);
  }

  Vec pack(const FlowState<T>& s) const {
    Vec y(size());
    Eigen::Map<RowMatrix<T>>(y.data(), n, n) = s.H.h;
    Eigen::Map<RowMatrix<T>>(y.data() + n * n, np, np) = s.H.g;
    for (std::size_t k = 0; k < n_ops; ++k) {
      T* base = y.data() + op_offset(k);
      Eigen::Map<Vec>(base, n) = s.ops[k].a;
      Eigen::Map<RowMatrix<T>>(base + n, np, n) = s.ops[k].b;
    }
    return y;
  }

  void unpack(const Vec& y, FlowState<T>& s) const {
    s.H.h = Eigen::Map<const RowMatrix<T>>(y.data(), n, n);
    s.H.g = Eigen::Map<const RowMatrix<T>>(y.data() + n * n, np, np);
    for (std::size_t k = 0; k < n_ops; ++k) {
      const T* base = y.data() + op_offset(k);
      s.ops[k].a = Eigen::Map<const Vec>(base, n);
      s.ops[k].b = Eigen::Map<const RowMatrix<T>>(base + n, np, n);
    }
  }

  /// Linear decay rates of the Wegner flow at H: (h_i - h_j)^2 and (E_P - E_Q)^2; zero elsewhere.
  void decay_rates(const EvenPairForm<T>& H, const PairIndex& pi, Vec& w) const {
    w = Vec::Zero(size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const T d = H.h(i, i) - H.h(j, j);
        w(static_cast<Eigen::Index>(i) * n + j) = d * d;
      }
    Vec e(np);
    for (int q = 0; q < np; ++q) e(q) = H.h(pi.first(q), pi.first(q)) + H.h(pi.second(q), pi.second(q)) + H.g(q, q);
    T* g = w.data() + static_cast<Eigen::Index>(n) * n;
    for (int p = 0; p < np; ++p)
      for (int q = 0; q < np; ++q) {
        const T d = e(p) - e(q);
        g[static_cast<Eigen::Index>(p) * np + q] = d * d;
      }
  }

  EvenPairForm<T> hamiltonian_view(const Vec& y, T scalar) const {
    return {scalar, Eigen::Map<const RowMatrix<T>>(y.data(), n, n),
            Eigen::Map<const RowMatrix<T>>(y.data() + n * n, np, np)};
  }
};

}  // namespace detail

/// Evaluate dH/dl and dO/dl for the given phase at a pair-form state.
template <class T>
EvenPairForm<T> flow_generator(const PairIndex& pi, const EvenPairForm<T>& H, FlowPhase phase, double epsilon) {
  return phase == FlowPhase::wegner ? wegner_generator(pi, H) : scrambling_generator(pi, H, epsilon);
}

/// Integrate dH/dl = [η, H] (and dO/dl = [η, O] for co-flowed operators) from the state's l.
///
/// A scrambling phase runs first when enabled, then the Wegner flow until both
/// off-diagonal maxima fall below their tolerances or l reaches l_max. A Wegner
/// step that satisfies the degeneracy trigger re-enters scrambling for one phase.
template <class T>
FlowResult<T> integrate_flow(FlowState<T> state, const FlowParams& p) {
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  if (p.deterministic) Eigen::setNbThreads(1);
  const ScopedFlushDenormals ftz;
  const PairIndex& pi = state.pairs;
  detail::FlowPacking<T> pk{pi.modes(), pi.size(), state.ops.size()};
  const T scalar = state.H.scalar;

  FlowResult<T> res;
  ErrorLedger& led = state.ledger;
  if (state.l == 0.0) {
    led = ErrorLedger{};
    led.j0 = max_offdiag_quadratic(state.H);
    led.delta0 = static_cast<double>(state.H.g.cwiseAbs().maxCoeff());
  }

  FlowPhase phase = p.scrambling ? state.phase : FlowPhase::wegner;
  // The scrambling trigger is a step function of H. It is evaluated once per step and held across the
  // stages, so the right-hand side stays smooth inside every step and the error estimate stays valid.
  ScrambleMask mask;
  auto rhs = [&](double, const Vec& y, Vec& dy) {
    dy.resize(y.size());
    const EvenPairForm<T> H = pk.hamiltonian_view(y, scalar);
    const EvenPairForm<T> eta =
        phase == FlowPhase::wegner ? wegner_generator(pi, H) : scrambling_generator(pi, H, mask);
    const bool two_body = phase == FlowPhase::wegner;
    const EvenPairForm<T> dh = kernels::flow_commutator(pi, eta, H, two_body);
    Eigen::Map<RowMatrix<T>>(dy.data(), pk.n, pk.n) = dh.h;
    Eigen::Map<RowMatrix<T>>(dy.data() + pk.n * pk.n, pk.np, pk.np) = dh.g;
    for (std::size_t k = 0; k < pk.n_ops; ++k) {
      const T* base = y.data() + pk.op_offset(k);
      OddPairForm<T> o{Eigen::Map<const Vec>(base, pk.n), Eigen::Map<const RowMatrix<T>>(base + pk.n, pk.np, pk.n)};
      const OddPairForm<T> d = kernels::commutator(pi, eta, o, two_body);
      T* out = dy.data() + pk.op_offset(k);
      Eigen::Map<Vec>(out, pk.n) = d.a;
      Eigen::Map<RowMatrix<T>>(out + pk.n, pk.np, pk.n) = d.b;
    }
  };

  DormandPrince<T> rk(rhs, p.rk);
  rk.reset(state.l, pk.pack(state));
  int phase_index = 0;
  double phase_start = state.l;
  bool first_scramble_done = !p.scrambling || state.l > 0.0;
  if (!p.scrambling || phase == FlowPhase::wegner) {
    if (state.l == 0.0) led.induced_bandwidth = induced_bandwidth(state.H);
  }
  double prev_rate = phase == FlowPhase::wegner ? truncation_rate(state.H) : 0.0;
  double next_checkpoint = p.checkpoint_interval > 0 ? state.l + p.checkpoint_interval : std::numeric_limits<double>::infinity();
  int checkpoint_count = 0;
  Vec rates;
  bool rates_fresh = false;

  auto record = [&](double step) {
    if (!p.record_trace) return;
    res.trace.push_back({state.l, offdiag_norm2(state.H), normalized_fock_trace(state.H), phase_index, phase, step});
  };
  // `state` only advances after a step passes the divergence check, so it is always the last good state.
  auto serialize = [&]() {
    std::ostringstream os(std::ios::binary);
    save_checkpoint(os, state);
    return os.str();
  };
  auto finish_scrambling = [&]() {
    if (!first_scramble_done) {
      led.induced_bandwidth = induced_bandwidth(state.H);
      first_scramble_done = true;
    }
    phase = FlowPhase::wegner;
    state.phase = phase;
    ++phase_index;
    phase_start = state.l;
    prev_rate = truncation_rate(state.H);
    rk.reset(state.l, rk.y());
  };
  auto start_scrambling = [&]() {
    phase = FlowPhase::scrambling;
    state.phase = phase;
    ++phase_index;
    ++res.scramble_phases;
    phase_start = state.l;
    rk.reset(state.l, rk.y());
  };

  if (phase == FlowPhase::scrambling) ++res.scramble_phases;
  record(0.0);

  while (true) {
    if (phase == FlowPhase::scrambling) {
      const auto lam = scrambling_generator(pi, state.H, p.epsilon);
      if (lam.h.cwiseAbs().maxCoeff() < p.scramble_tolerance || state.l >= phase_start + p.scramble_cap) {
        finish_scrambling();
        continue;
      }
    } else {
      const double v2 = max_offdiag_quadratic(state.H), v4 = max_offdiag_quartic(state.H);
      if (v2 < p.v2_tolerance && v4 < p.v4_tolerance) {
        res.converged = true;
        break;
      }
    }
    if (state.l >= p.l_max) break;
    if (res.accepted_steps + res.rejected_steps >= p.max_steps) break;

    const double limit = phase == FlowPhase::scrambling ? std::min(p.l_max, phase_start + p.scramble_cap) : p.l_max;
    if (!(limit > state.l)) {
      if (phase == FlowPhase::scrambling && state.l < p.l_max) {
        finish_scrambling();
        continue;
      }
      break;
    }
    if (phase == FlowPhase::scrambling) {
      ScrambleMask next = scrambling_mask(pi, state.H, p.epsilon);
      if (next.size() != mask.size() || next != mask) {
        mask = std::move(next);
        rk.invalidate_derivative();
      }
    }
    typename DormandPrince<T>::Step st;
    const bool lawson = p.integrating_factor && phase == FlowPhase::wegner;
    if (lawson && !rates_fresh) {
      pk.decay_rates(state.H, pi, rates);
      rates_fresh = true;
    }
    try {
      st = rk.attempt(limit, lawson ? &rates : nullptr);
    } catch (const Error& e) {
      throw DivergenceError(std::string("flow diverged: ") + e.what(), state.l, serialize());
    }
    if (!st.accepted) {
      ++res.rejected_steps;
      continue;
    }
    ++res.accepted_steps;
    const double l_prev = state.l;
    const double max_entry = static_cast<double>(rk.y().cwiseAbs().maxCoeff());
    if (!std::isfinite(max_entry) || max_entry > p.divergence_bound) {
      throw DivergenceError("flow diverged: coefficient magnitude " + std::to_string(max_entry), state.l, serialize());
    }
    pk.unpack(rk.y(), state);
    state.l = rk.l();
    rates_fresh = false;

    if (phase == FlowPhase::wegner) {
      const double rate = truncation_rate(state.H);
      const double inc = 0.5 * (prev_rate + rate) * (state.l - l_prev);
      led.l.push_back(state.l);
      led.rate.push_back(rate);
      led.increments.push_back(inc);
      led.eps_T += inc;
      led.wegner_time += state.l - l_prev;
      prev_rate = rate;
    }
    record(st.h);
    if (state.l >= next_checkpoint) {
      std::ofstream f(p.checkpoint_prefix + "_" + std::to_string(checkpoint_count++) + ".ckpt", std::ios::binary);
      if (!f) throw Error("cannot write checkpoint with prefix '" + p.checkpoint_prefix + "'");
      save_checkpoint(f, state);
      while (next_checkpoint <= state.l) next_checkpoint += p.checkpoint_interval;
    }

    if (phase == FlowPhase::wegner && p.scrambling && res.scramble_phases < p.max_scramble_phases &&
        degeneracy_trigger(state.H, p.epsilon, p.trigger_floor)) {
      start_scrambling();
    }
  }

  led.eps_F = led.wegner_time > 0 ? led.eps_T / led.wegner_time : 0.0;
  const double dt = led.induced_bandwidth;
  led.analytic_estimate = dt > 0 ? 1.5 * led.j0 * led.delta0 * led.delta0 / (dt * dt)
                                 : std::numeric_limits<double>::infinity();
  res.diag = fold_diagonal(pi, state.H);
  res.diag.converged = res.converged;
  res.ledger = led;
  res.state = std::move(state);
  return res;
}

}  // namespace scramflow
