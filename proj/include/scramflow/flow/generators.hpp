// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "scramflow/opalg/kernels.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow {

enum class GeneratorKind { wegner, scrambling };

/// Even anti-Hermitian generator with its origin.
template <class T>
struct GeneratorPolynomial {
  GeneratorKind origin = GeneratorKind::wegner;
  OperatorPolynomial<T> op;
};

/// η = [H0, V] truncated at rank 4, in pair form:
///   η1_ij = (h_i - h_j) V_ij
///   η2_PQ = (E_P - E_Q) V2_PQ + (D_P - D_Q) K(V1)_PQ
/// with D_P = G_PP the density-density diagonal and E_P = h_a + h_b + D_P for P = (a,b).
template <class T>
EvenPairForm<T> wegner_generator(const PairIndex& pi, const EvenPairForm<T>& H) {
  const int n = pi.modes();
  const int np = pi.size();
  EvenPairForm<T> eta = EvenPairForm<T>::zero(pi);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) eta.h(i, j) = (H.h(i, i) - H.h(j, j)) * H.h(i, j);

  Eigen::Matrix<T, Eigen::Dynamic, 1> e(np), dd(np);
  for (int p = 0; p < np; ++p) {
    dd(p) = H.g(p, p);
    e(p) = H.h(pi.first(p), pi.first(p)) + H.h(pi.second(p), pi.second(p)) + dd(p);
  }
  for (int p = 0; p < np; ++p) {
    const T ep = e(p);
    auto row = eta.g.row(p);
    const auto src = H.g.row(p);
    for (int q = 0; q < np; ++q) row(q) = (ep - e(q)) * src(q);
    row(p) = T{};
  }
  // K(V1) couples pairs sharing one mode.
  for (int p = 0; p < np; ++p) {
    const int a = pi.first(p), b = pi.second(p);
    for (int x = 0; x < n; ++x) {
      if (x == a || x == b) continue;
      const T vax = H.h(a, x);
      if (vax != T{}) {
        const int q = pi.index(x, b);
        eta.g(p, q) += (dd(p) - dd(q)) * vax * static_cast<T>(pi.sign(x, b));
      }
      const T vbx = H.h(b, x);
      if (vbx != T{}) {
        const int q = pi.index(a, x);
        eta.g(p, q) += (dd(p) - dd(q)) * vbx * static_cast<T>(pi.sign(a, x));
      }
    }
  }
  return eta;
}

/// Pairs (i != j) whose coupling passes the scrambling trigger |J_ij| >= ε |h_i - h_j|, J_ij != 0.
using ScrambleMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
ScrambleMask scrambling_mask(const PairIndex& pi, const EvenPairForm<T>& H, double epsilon) {
  const int n = pi.modes();
  ScrambleMask m = ScrambleMask::Constant(n, n, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const T jij = H.h(i, j);
      if (jij == T{}) continue;
      const double gap = std::abs(static_cast<double>(H.h(i, i) - H.h(j, j)));
      m(i, j) = std::abs(static_cast<double>(jij)) >= epsilon * gap;
    }
  return m;
}

/// λ_ij = sgn(i - j) J_ij on the pairs selected by `mask`, else 0. The pair block is left at zero.
template <class T>
EvenPairForm<T> scrambling_generator(const PairIndex& pi, const EvenPairForm<T>& H, const ScrambleMask& mask) {
  const int n = pi.modes();
  EvenPairForm<T> lam = EvenPairForm<T>::zero(pi);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (mask(i, j)) lam.h(i, j) = i > j ? H.h(i, j) : -H.h(i, j);
  return lam;
}

/// Quadratic scrambling generator with the trigger evaluated on H itself.
template <class T>
EvenPairForm<T> scrambling_generator(const PairIndex& pi, const EvenPairForm<T>& H, double epsilon) {
  return scrambling_generator(pi, H, scrambling_mask(pi, H, epsilon));
}

/// Polynomial-level Wegner generator (canonical, rank <= 4).
template <class T>
GeneratorPolynomial<T> wegner_generator(const OperatorPolynomial<T>& H) {
  const PairIndex pi(H.n_modes);
  return {GeneratorKind::wegner, from_pair_form(pi, wegner_generator(pi, to_pair_form(pi, H)))};
}

template <class T>
GeneratorPolynomial<T> scrambling_generator(const OperatorPolynomial<T>& H, double epsilon = 0.5) {
  if (!(epsilon >= 0.0)) throw ConfigError("scrambling threshold must be non-negative");
  const PairIndex pi(H.n_modes);
  return {GeneratorKind::scrambling, from_pair_form(pi, scrambling_generator(pi, to_pair_form(pi, H), epsilon))};
}

}  // namespace scramflow
