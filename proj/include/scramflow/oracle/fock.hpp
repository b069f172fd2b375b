// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force occupation-basis reference.
//
// Basis state s is a bitstring, bit b = occupation of mode b, ordered by
// integer value. c_b and c†_b carry the Jordan-Wigner sign
// (-1)^popcount(s & ((1<<b)-1)).

#include <Eigen/Dense>

#include <bit>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/tensor.hpp"
#include "scramflow/opalg/polynomial.hpp"
#include "scramflow/opalg/wick.hpp"

namespace scramflow::oracle {

inline constexpr int kMaxFockModes = 14;
inline constexpr std::size_t kFockByteCeiling = std::size_t{2} << 30;

template <class T>
using DenseMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// A set of occupation basis states with a reverse index.
struct Sector {
  int n_modes = 0;
  std::vector<std::uint32_t> states;
  std::vector<std::int32_t> index;  // size 2^N; -1 outside the sector

  std::size_t dim() const { return states.size(); }
};

inline void check_fock_modes(int n) {
  if (n < 1 || n > kMaxFockModes) {
    throw CapacityError("Fock-space oracle supports 1.." + std::to_string(kMaxFockModes) + " modes, got " +
                        std::to_string(n));
  }
}

/// Whole Fock space, or the fixed-particle-number sector when particles >= 0.
inline Sector make_sector(int n_modes, int particles = -1) {
  check_fock_modes(n_modes);
  Sector s;
  s.n_modes = n_modes;
  const std::uint32_t full = 1u << n_modes;
  s.index.assign(full, -1);
  for (std::uint32_t b = 0; b < full; ++b) {
    if (particles >= 0 && std::popcount(b) != particles) continue;
    s.index[b] = static_cast<std::int32_t>(s.states.size());
    s.states.push_back(b);
  }
  return s;
}

inline Sector half_filled_sector(int n_modes) {
  if (n_modes % 2 != 0) throw ConfigError("half filling needs an even mode count");
  return make_sector(n_modes, n_modes / 2);
}

/// Jordan-Wigner sign of acting on mode b in state s.
inline int jw_sign(std::uint32_t s, int b) { return (std::popcount(s & ((1u << b) - 1u)) % 2) ? -1 : 1; }

/// Apply c†_{cre[0]}…c†_{cre[m-1]} c_{ann[0]}…c_{ann[n-1]} to |s>. Returns false if the result vanishes.
inline bool apply_normal_ordered(std::uint32_t s, std::span<const int> cre, std::span<const int> ann,
                                 std::uint32_t& out, int& sign) {
  sign = 1;
  for (auto it = ann.rbegin(); it != ann.rend(); ++it) {
    const std::uint32_t bit = 1u << *it;
    if (!(s & bit)) return false;
    sign *= jw_sign(s, *it);
    s &= ~bit;
  }
  for (auto it = cre.rbegin(); it != cre.rend(); ++it) {
    const std::uint32_t bit = 1u << *it;
    if (s & bit) return false;
    sign *= jw_sign(s, *it);
    s |= bit;
  }
  out = s;
  return true;
}

template <class T>
struct FockTerm {
  T coeff;
  std::vector<int> cre;
  std::vector<int> ann;
};

/// Nonzero entries of every block as signed normal-ordered strings.
template <class T>
std::vector<FockTerm<T>> fock_terms(const wick::BlockSum<T>& op) {
  std::vector<FockTerm<T>> terms;
  for (const auto& b : op.blocks) {
    const wick::NormalOrder o = wick::normal_order(b.layout);
    std::vector<int> idx(b.layout.size());
    for (std::size_t off = 0; off < b.coeffs.size(); ++off) {
      const T v = b.coeffs.data()[off];
      if (v == T{}) continue;
      b.coeffs.unravel(off, idx);
      FockTerm<T> t;
      t.coeff = o.sign > 0 ? v : -v;
      for (int a : o.creators) t.cre.push_back(idx[a]);
      for (int a : o.annihilators) t.ann.push_back(idx[a]);
      terms.push_back(std::move(t));
    }
  }
  return terms;
}

/// Matrix of the operator restricted to `sector` (rows and columns both in the sector).
template <class T>
DenseMatrix<T> fock_image(const wick::BlockSum<T>& op, const Sector& sector) {
  check_fock_modes(op.n_modes);
  if (sector.n_modes != op.n_modes) throw DimensionError("sector and operator mode counts differ");
  const auto dim = static_cast<Eigen::Index>(sector.dim());
  if (static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim) * sizeof(T) > kFockByteCeiling) {
    throw CapacityError("dense Fock image exceeds the memory ceiling; restrict to a sector");
  }
  DenseMatrix<T> m = DenseMatrix<T>::Zero(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) m(c, c) = op.scalar;
  const auto terms = fock_terms(op);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const std::uint32_t s = sector.states[static_cast<std::size_t>(c)];
    for (const auto& t : terms) {
      std::uint32_t out = 0;
      int sign = 1;
      if (!apply_normal_ordered(s, t.cre, t.ann, out, sign)) continue;
      const std::int32_t r = sector.index[out];
      if (r < 0) continue;
      m(r, c) += sign > 0 ? t.coeff : -t.coeff;
    }
  }
  return m;
}

template <class T>
DenseMatrix<T> fock_image(const OperatorPolynomial<T>& op, const Sector& sector) {
  return fock_image(wick::to_blocks(op), sector);
}

template <class T>
DenseMatrix<T> fock_image(const OperatorPolynomial<T>& op) {
  return fock_image(op, make_sector(op.n_modes));
}

/// Sorted eigenvalues of a real symmetric operator restricted to `sector`.
template <class T>
std::vector<double> exact_spectrum(const OperatorPolynomial<T>& h, const Sector& sector) {
  static_assert(!is_complex_v<T>, "exact_spectrum expects a real operator");
  const DenseMatrix<double> m = fock_image(h, sector).template cast<double>();
  Eigen::SelfAdjointEigenSolver<DenseMatrix<double>> es(m, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// C(t) = 4<(n_i(t) - 1/2)(n_i(0) - 1/2)> in one Gaussian random state of the half-filled sector,
/// evolved exactly by dense diagonalization of the sector Hamiltonian.
template <class T>
std::vector<double> typicality_correlation(const OperatorPolynomial<T>& h, int site,
                                           std::span<const double> t_grid, std::uint64_t seed) {
  static_assert(!is_complex_v<T>, "typicality_correlation expects a real Hamiltonian");
  using cplx = std::complex<double>;
  const Sector sec = half_filled_sector(h.n_modes);
  if (site < 0 || site >= h.n_modes) throw IndexError("site outside the lattice");
  const DenseMatrix<double> hm = fock_image(h, sec).template cast<double>();
  Eigen::SelfAdjointEigenSolver<DenseMatrix<double>> es(hm);
  const auto& v = es.eigenvectors();
  const auto& e = es.eigenvalues();
  const auto dim = static_cast<Eigen::Index>(sec.dim());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  Eigen::VectorXcd psi(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double a = gauss(rng);
    const double b = gauss(rng);
    psi(k) = cplx(a, b);
  }
  psi /= psi.norm();

  Eigen::VectorXd b(dim);  // n_i - 1/2 on each basis state
  for (Eigen::Index k = 0; k < dim; ++k) b(k) = ((sec.states[static_cast<std::size_t>(k)] >> site) & 1u) ? 0.5 : -0.5;

  // In the eigenbasis: <psi(t)| B |phi(t)> = (u ∘ psi_e)† Bt (u ∘ phi_e), u = e^{-iEt}, Bt = Vᵀ B V,
  // phi_e = Bt psi_e. Real and imaginary parts are carried as two real columns.
  const Eigen::MatrixXd bt = v.transpose() * b.asDiagonal() * v;
  Eigen::MatrixXd psi_e(dim, 2);
  psi_e.col(0) = v.transpose() * psi.real();
  psi_e.col(1) = v.transpose() * psi.imag();
  const Eigen::MatrixXd phi_e = bt * psi_e;
  std::vector<double> out;
  out.reserve(t_grid.size());
  Eigen::MatrixXd x(dim, 2);
  for (double t : t_grid) {
    Eigen::VectorXd c(dim), s(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      c(k) = std::cos(e(k) * t);
      s(k) = -std::sin(e(k) * t);
    }
    x.col(0) = c.cwiseProduct(phi_e.col(0)) - s.cwiseProduct(phi_e.col(1));
    x.col(1) = c.cwiseProduct(phi_e.col(1)) + s.cwiseProduct(phi_e.col(0));
    const Eigen::MatrixXd y = bt * x;
    const Eigen::VectorXd ar = c.cwiseProduct(psi_e.col(0)) - s.cwiseProduct(psi_e.col(1));
    const Eigen::VectorXd ai = c.cwiseProduct(psi_e.col(1)) + s.cwiseProduct(psi_e.col(0));
    out.push_back(4.0 * (ar.dot(y.col(0)) + ai.dot(y.col(1))));  // Re(conj(a)·y)
  }
  return out;
}

/// C(t) = (4 / D) Tr[(n_i(t) - 1/2)(n_i - 1/2)] over the half-filled sector, evaluated exactly
/// from the sector eigenbasis: Tr = Σ_mn |B_mn|² e^{i(E_m - E_n)t}.
template <class T>
std::vector<double> exact_correlation(const OperatorPolynomial<T>& h, int site, std::span<const double> t_grid) {
  static_assert(!is_complex_v<T>, "exact_correlation expects a real Hamiltonian");
  const Sector sec = half_filled_sector(h.n_modes);
  if (site < 0 || site >= h.n_modes) throw IndexError("site outside the lattice");
  const DenseMatrix<double> hm = fock_image(h, sec).template cast<double>();
  Eigen::SelfAdjointEigenSolver<DenseMatrix<double>> es(hm);
  const auto& v = es.eigenvectors();
  const auto& e = es.eigenvalues();
  const auto dim = static_cast<Eigen::Index>(sec.dim());
  Eigen::VectorXd b(dim);
  for (Eigen::Index k = 0; k < dim; ++k) b(k) = ((sec.states[static_cast<std::size_t>(k)] >> site) & 1u) ? 0.5 : -0.5;
  const Eigen::MatrixXd bt = v.transpose() * b.asDiagonal() * v;
  const Eigen::MatrixXd w = bt.cwiseAbs2();
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    long double acc = 0.0L;
    for (Eigen::Index n = 0; n < dim; ++n)
      for (Eigen::Index m = 0; m < dim; ++m) acc += w(m, n) * std::cos((e(m) - e(n)) * t);
    out.push_back(4.0 * static_cast<double>(acc) / static_cast<double>(dim));
  }
  return out;
}

/// Exact infinite-temperature C(t) for a quadratic Hamiltonian, traced over the half-filled sector.
///
/// With single-particle modes phi_m, energies e_m and w_m = phi_{site,m}^2:
///   <n n(t)> = (1/2) Σ w² + p (1 − Σ w²) + (1/2 − p) Σ_{m≠n} w_m w_n cos((e_m − e_n) t),
///   p = (N − 2) / (4 (N − 1)),   C = 4 <n n(t)> − 1.
inline std::vector<double> free_fermion_correlation(const Eigen::MatrixXd& h2, int site,
                                                    std::span<const double> t_grid) {
  const auto n = h2.rows();
  if (h2.cols() != n) throw DimensionError("quadratic block must be square");
  if (n < 2 || n % 2 != 0) throw ConfigError("half filling needs an even mode count >= 2");
  if (site < 0 || site >= n) throw IndexError("site outside the lattice");
  if ((h2 - h2.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h2.cwiseAbs().maxCoeff())) {
    throw DimensionError("quadratic block must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h2);
  const Eigen::VectorXd w = es.eigenvectors().row(site).transpose().cwiseAbs2();
  const Eigen::VectorXd& e = es.eigenvalues();
  const double nn = static_cast<double>(n);
  const double p = (nn - 2.0) / (4.0 * (nn - 1.0));
  const double sw2 = w.squaredNorm();
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    // Σ_{m≠n} w_m w_n cos((e_m − e_n) t) = |Σ w_m e^{i e_m t}|² − Σ w²
    std::complex<double> z{};
    for (Eigen::Index m = 0; m < n; ++m) z += w(m) * std::polar(1.0, e(m) * t);
    const double cross = std::norm(z) - sw2;
    const double nnt = 0.5 * sw2 + p * (1.0 - sw2) + (0.5 - p) * cross;
    out.push_back(4.0 * nnt - 1.0);
  }
  return out;
}

}  // namespace scramflow::oracle
