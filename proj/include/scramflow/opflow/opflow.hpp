// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/tensor.hpp"
#include "scramflow/flow/flow.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow {

/// Flowed creation operator c†_i(l) = Σ_j A_j c†_j + Σ_{jkq} B_jkq :c†_j c†_k c_q:.
///
/// B is the raw rank-3 storage: canonical entries sit at j < k, every other slot is zero.
struct FlowedCreationOperator {
  int site = 0;
  Eigen::VectorXd A;
  Tensor<double> B;

  int n_modes() const { return static_cast<int>(A.size()); }

  /// Untransformed c†_site.
  static FlowedCreationOperator unit(int n, int site) {
    if (site < 0 || site >= n) throw IndexError("operator site outside the lattice");
    FlowedCreationOperator op;
    op.site = site;
    op.A = Eigen::VectorXd::Zero(n);
    op.A(site) = 1.0;
    op.B = Tensor<double>(3, n);
    return op;
  }

  static FlowedCreationOperator from_polynomial(const OperatorPolynomial<double>& p, int site) {
    if (p.parity != Parity::odd) throw DimensionError("a creation operator is odd");
    if (site < 0 || site >= p.n_modes) throw IndexError("operator site outside the lattice");
    FlowedCreationOperator op;
    op.site = site;
    op.A = Eigen::VectorXd::Zero(p.n_modes);
    if (p.has(1))
      for (int j = 0; j < p.n_modes; ++j) op.A(j) = p.rank1(j);
    op.B = p.has(3) ? p.rank3 : Tensor<double>(3, p.n_modes);
    return op;
  }

  /// The k-th co-flowed operator of a finished flow.
  static FlowedCreationOperator from_flow(const FlowState<double>& s, std::size_t k = 0) {
    return from_polynomial(s.flowed_op(k), s.op_sites.at(k));
  }

  OperatorPolynomial<double> polynomial() const {
    auto p = OperatorPolynomial<double>::odd(n_modes());
    for (int j = 0; j < n_modes(); ++j) p.rank1(j) = A(j);
    p.rank3 = B;
    return p;
  }

  double weight_a() const { return A.squaredNorm(); }
};

struct Complexity {
  std::int64_t chi_bar = 0;  // coefficients with x^2 > eps_cut^2
  double chi = 0.0;          // chi_bar / (N + N^3)
};

/// Count of stored coefficients above the cutoff, over all N + N^3 slots of A and B.
inline Complexity complexity(const FlowedCreationOperator& op, double eps_cut = 1e-6) {
  if (!(eps_cut > 0.0)) throw ConfigError("complexity cutoff must be positive");
  const double cut2 = eps_cut * eps_cut;
  Complexity c;
  for (Eigen::Index j = 0; j < op.A.size(); ++j)
    if (op.A(j) * op.A(j) > cut2) ++c.chi_bar;
  for (double x : op.B.values())
    if (x * x > cut2) ++c.chi_bar;
  const double n = op.n_modes();
  c.chi = static_cast<double>(c.chi_bar) / (n + n * n * n);
  return c;
}

/// |A_j| against |j - site| in chain order.
struct LocalizationProfile {
  std::vector<int> distance;     // one entry per mode
  std::vector<double> amplitude;  // |A_j|
  double weight = 0.0;           // Σ A_j^2

  /// Largest |A_j| at each distance 0..max.
  std::vector<double> envelope() const {
    int dmax = 0;
    for (int d : distance) dmax = std::max(dmax, d);
    std::vector<double> e(static_cast<std::size_t>(dmax) + 1, 0.0);
    for (std::size_t k = 0; k < distance.size(); ++k) e[distance[k]] = std::max(e[distance[k]], amplitude[k]);
    return e;
  }
};

inline LocalizationProfile localization_profile(const FlowedCreationOperator& op) {
  LocalizationProfile p;
  for (int j = 0; j < op.n_modes(); ++j) {
    p.distance.push_back(std::abs(j - op.site));
    p.amplitude.push_back(std::abs(op.A(j)));
  }
  p.weight = op.weight_a();
  return p;
}

/// Decay length from a least-squares fit of log envelope(r) = c - r / ξ.
/// Distances whose envelope is at or below `floor` are skipped; returns NaN with fewer than two points
/// or a non-decaying fit.
inline double fit_decay_length(const std::vector<double>& envelope, double floor = 1e-14) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t r = 0; r < envelope.size(); ++r) {
    if (!(envelope[r] > floor)) continue;
    const double x = static_cast<double>(r), y = std::log(envelope[r]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nan("");
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nan("");
  const double slope = (n * sxy - sx * sy) / den;
  return slope < 0.0 ? -1.0 / slope : std::nan("");
}

}  // namespace scramflow
