// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/tensor.hpp"
#include "scramflow/flow/flow.hpp"
#include "scramflow/opalg/polynomial.hpp"
#include "scramflow/opalg/wick.hpp"
#include "scramflow/opflow/opflow.hpp"

namespace scramflow {

using cplx = std::complex<double>;

/// n_i(t) = Σ α_j :n_j: + Σ_{j≠k} β_jk :c†_j c_k: + Σ Γ_ijkq :c†_i c_j c†_k c_q: + Σ ζ :c†c c†c c†c:
/// in the diagonal basis. Γ and ζ use canonical slots (see OperatorPolynomial).
struct EvolvedNumberOperator {
  int site = 0;
  int order = 4;
  double t = 0.0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXcd beta;  // zero diagonal
  Tensor<cplx> gamma;
  Tensor<cplx> zeta;      // empty unless order == 6

  int n_modes() const { return static_cast<int>(alpha.size()); }

  OperatorPolynomial<cplx> polynomial() const {
    auto p = OperatorPolynomial<cplx>::even(n_modes(), true, order == 6);
    for (int j = 0; j < n_modes(); ++j)
      for (int k = 0; k < n_modes(); ++k) p.rank2(j, k) = j == k ? cplx(alpha(j)) : beta(j, k);
    p.rank4 = gamma;
    if (order == 6) p.rank6 = zeta;
    return p;
  }
};

/// Largest mode count for which order-6 reconstruction is accepted.
inline constexpr int kMaxOrder6Modes = 36;

/// n_i = c†_i c_i with c†_i the flowed creation operator, normal ordered and truncated at `order`.
inline EvolvedNumberOperator reconstruct_number_operator(const FlowedCreationOperator& op, int order = 4) {
  if (order != 4 && order != 6) throw ConfigError("number-operator order must be 4 or 6");
  const int n = op.n_modes();
  if (order == 6 && n > kMaxOrder6Modes)
    throw CapacityError("order-6 number operators are refused above " + std::to_string(kMaxOrder6Modes) + " modes");
  const auto cdag = wick::to_blocks(op.polynomial().cast<cplx>());
  const auto c = wick::adjoint(cdag);
  wick::ProductOptions opt;
  opt.max_rank = order;
  const OperatorPolynomial<cplx> p = wick::to_polynomial(wick::product(cdag, c, opt).kept);

  EvolvedNumberOperator r;
  r.site = op.site;
  r.order = order;
  r.alpha = Eigen::VectorXd::Zero(n);
  r.beta = Eigen::MatrixXcd::Zero(n, n);
  if (p.has(2))
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (j == k)
          r.alpha(j) = p.rank2(j, j).real();
        else
          r.beta(j, k) = p.rank2(j, k);
      }
  r.gamma = p.has(4) ? p.rank4 : Tensor<cplx>(4, n);
  if (order == 6) r.zeta = p.has(6) ? p.rank6 : Tensor<cplx>(6, n);
  return r;
}

namespace detail {

/// Σ (+h for creator slots, −h for annihilator slots) over an alternating slot tuple.
inline double slot_energy(const std::vector<double>& h, std::span<const int> idx) {
  double w = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) w += (a % 2 == 0 ? 1.0 : -1.0) * h[static_cast<std::size_t>(idx[a])];
  return w;
}

template <class F>
void for_each_nonzero(const Tensor<cplx>& t, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(t.rank()));
  for (std::size_t off = 0; off < t.size(); ++off) {
    if (t.data()[off] == cplx{}) continue;
    t.unravel(off, idx);
    f(off, std::span<const int>(idx));
  }
}

}  // namespace detail

/// (e^{iωt} − 1)/ω, or its ω → 0 limit i t when |ω| < tol.
inline cplx phase_integral(double omega, double t, double tol) {
  if (std::abs(omega) < tol) return {0.0, t};
  return (std::polar(1.0, omega * t) - 1.0) / omega;
}

/// Density-assisted coupling generated by the interaction: d/dt of :n_m c†_k c_q: picks up
/// i κ β_kq with κ = 2 (Δ_mk − Δ_mq).
inline double assisted_coupling(const Eigen::MatrixXd& delta, int m, int k, int q) {
  return 2.0 * (delta(m, k) - delta(m, q));
}

/// Closed-form evolution of a t = 0 number operator under the diagonal Hamiltonian.
///
/// β and every Γ, ζ entry acquire their slot phase. Each β_kq also feeds the density-assisted Γ slots
/// :n_m c†_k c_q: through κ β_kq(0) (e^{iωt} − 1)/ω, ω = h̃_k − h̃_q, which becomes i κ β_kq(0) t
/// when |ω| < degeneracy_tol · J.
inline EvolvedNumberOperator evolve(const EvolvedNumberOperator& n0, const DiagonalHamiltonian& diag, double t,
                                    double J = 1.0, double degeneracy_tol = 1e-10) {
  if (n0.t != 0.0) throw ConfigError("evolve expects a t = 0 number operator");
  if (!(t >= 0.0)) throw ConfigError("evolution time must be non-negative");
  const int n = n0.n_modes();
  if (diag.n_modes() != n) throw DimensionError("diagonal Hamiltonian and operator mode counts differ");
  const auto& h = diag.h_tilde;
  const double tol = degeneracy_tol * J;

  EvolvedNumberOperator r = n0;
  r.t = t;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (j != k) r.beta(j, k) = std::polar(1.0, (h[j] - h[k]) * t) * n0.beta(j, k);

  auto phase_block = [&](const Tensor<cplx>& src, Tensor<cplx>& dst) {
    detail::for_each_nonzero(src, [&](std::size_t off, std::span<const int> idx) {
      dst.data()[off] = std::polar(1.0, detail::slot_energy(h, idx) * t) * src.data()[off];
    });
  };
  phase_block(n0.gamma, r.gamma);
  if (n0.order == 6 && !n0.zeta.empty()) phase_block(n0.zeta, r.zeta);

  // :n_m c†_k c_q: = σ :c†_a c_b c†_c c_d: at the canonical slot, σ from sorting {m,k} and {m,q}.
  for (int k = 0; k < n; ++k)
    for (int q = 0; q < n; ++q) {
      if (k == q || n0.beta(k, q) == cplx{}) continue;
      const cplx g = phase_integral(h[k] - h[q], t, tol) * n0.beta(k, q);
      for (int m = 0; m < n; ++m) {
        if (m == k || m == q) continue;
        const double kappa = assisted_coupling(diag.delta, m, k, q);
        if (kappa == 0.0) continue;
        const double sigma = ((m < k) == (m < q)) ? 1.0 : -1.0;
        r.gamma(std::min(m, k), std::min(m, q), std::max(m, k), std::max(m, q)) += sigma * kappa * g;
      }
    }
  return r;
}

/// Time-independent part: α, density-density Γ and ζ entries; everything else dropped.
inline EvolvedNumberOperator long_time_average(const EvolvedNumberOperator& n0) {
  EvolvedNumberOperator r = n0;
  r.beta.setZero();
  auto keep_density = [](Tensor<cplx>& t) {
    std::vector<int> idx(static_cast<std::size_t>(t.rank()));
    for (std::size_t off = 0; off < t.size(); ++off) {
      if (t.data()[off] == cplx{}) continue;
      t.unravel(off, idx);
      if (!is_density_slot(idx)) t.data()[off] = cplx{};
    }
  };
  keep_density(r.gamma);
  if (!r.zeta.empty()) keep_density(r.zeta);
  return r;
}

}  // namespace scramflow
