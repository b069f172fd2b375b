// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Pair-space kernels for commutators truncated at rank 4 (even) and rank 3 (odd).
//
// An even operator is held as (scalar, one-body matrix h, pair matrix G) with
//   H = s + Σ h_ij c†_i c_j + Σ_{a<b, c<d} G[(ab),(cd)] c†_a c†_b c_d c_c,
// and an odd creation-type operator as (vector a, pair-by-mode matrix B) with
//   O = Σ a_j c†_j + Σ_{j<k} B[(jk), q] c†_j c†_k c_q.
// The pair matrix G equals the canonical rank-4 block: G[(ab),(cd)] = X(a, c, b, d).
//
// With vacuum normal ordering the truncated commutators close on pair space:
//   [A,B]_1 = A1 B1 - B1 A1
//   [A,B]_2 = K(A1) B2 - B2 K(A1) + A2 K(B1) - K(B1) A2 + A2 B2 - B2 A2
// where K(A) is the one-body action on antisymmetric pairs,
//   K(A)[(ab),(cd)] = A_ac δ_bd - A_ad δ_bc + A_bd δ_ac - A_bc δ_ad.
// Scalars never change: every vacuum contraction with a scalar image vanishes.

#include <Eigen/Dense>

#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/opalg/polynomial.hpp"
#include "scramflow/opalg/wick.hpp"

namespace scramflow {

/// Index of unordered pairs a<b in lexicographic order, with antisymmetric lookup.
class PairIndex {
 public:
  PairIndex() = default;
  explicit PairIndex(int n) : n_(n), idx_(static_cast<std::size_t>(n) * n, -1), sgn_(static_cast<std::size_t>(n) * n, 0) {
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const int p = static_cast<int>(first_.size());
        first_.push_back(a);
        second_.push_back(b);
        idx_[a * n + b] = idx_[b * n + a] = p;
        sgn_[a * n + b] = 1;
        sgn_[b * n + a] = -1;
      }
  }

  int modes() const { return n_; }
  int size() const { return static_cast<int>(first_.size()); }
  int first(int p) const { return first_[p]; }
  int second(int p) const { return second_[p]; }
  /// Pair index of (x,y); -1 when x == y.
  int index(int x, int y) const { return idx_[x * n_ + y]; }
  /// +1 when x<y, -1 when x>y, 0 when x == y.
  int sign(int x, int y) const { return sgn_[x * n_ + y]; }

 private:
  int n_ = 0;
  std::vector<int> first_, second_, idx_, sgn_;
};

template <class T>
struct EvenPairForm {
  T scalar{};
  RowMatrix<T> h;  // N x N
  RowMatrix<T> g;  // P x P

  static EvenPairForm zero(const PairIndex& pi) {
    return {T{}, RowMatrix<T>::Zero(pi.modes(), pi.modes()), RowMatrix<T>::Zero(pi.size(), pi.size())};
  }
};

template <class T>
struct OddPairForm {
  Eigen::Matrix<T, Eigen::Dynamic, 1> a;  // N
  RowMatrix<T> b;                         // P x N

  static OddPairForm zero(const PairIndex& pi) {
    return {Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(pi.modes()), RowMatrix<T>::Zero(pi.size(), pi.modes())};
  }
};

namespace kernels {

/// out += factor · K(A) · M, with M indexed by pairs along its rows.
template <class T>
void add_pair_action_left(const PairIndex& pi, const RowMatrix<T>& A, const RowMatrix<T>& M, RowMatrix<T>& out,
                          T factor = T{1}) {
  const int n = pi.modes();
  const Eigen::Index cols = M.cols();
  auto axpy = [cols](T* dst, const T* src, T w) {
    for (Eigen::Index c = 0; c < cols; ++c) dst[c] += w * src[c];
  };
  for (int p = 0; p < pi.size(); ++p) {
    const int a = pi.first(p);
    const int b = pi.second(p);
    T* dst = out.data() + static_cast<Eigen::Index>(p) * cols;
    for (int x = 0; x < n; ++x) {
      const T aax = A(a, x);
      if (aax != T{} && x != b)
        axpy(dst, M.data() + static_cast<Eigen::Index>(pi.index(x, b)) * cols,
             factor * aax * static_cast<T>(pi.sign(x, b)));
      const T abx = A(b, x);
      if (abx != T{} && x != a)
        axpy(dst, M.data() + static_cast<Eigen::Index>(pi.index(a, x)) * cols,
             factor * abx * static_cast<T>(pi.sign(a, x)));
    }
  }
}

/// Dense K(A), used by tests and small systems.
template <class T>
RowMatrix<T> pair_action(const PairIndex& pi, const RowMatrix<T>& A) {
  RowMatrix<T> id = RowMatrix<T>::Identity(pi.size(), pi.size());
  RowMatrix<T> out = RowMatrix<T>::Zero(pi.size(), pi.size());
  add_pair_action_left<T>(pi, A, id, out);
  return out;
}

/// [A, B] for general even A, B, truncated at rank 4.
template <class T>
EvenPairForm<T> commutator(const PairIndex& pi, const EvenPairForm<T>& A, const EvenPairForm<T>& B) {
  EvenPairForm<T> r = EvenPairForm<T>::zero(pi);
  r.h.noalias() = A.h * B.h;
  r.h.noalias() -= B.h * A.h;
  r.g.noalias() = A.g * B.g;
  r.g.noalias() -= B.g * A.g;
  add_pair_action_left<T>(pi, A.h, B.g, r.g);
  add_pair_action_left<T>(pi, B.h, A.g, r.g, T{-1});
  // Right actions via M K(X) = (K(X^T) M^T)^T.
  RowMatrix<T> tmp = RowMatrix<T>::Zero(pi.size(), pi.size());
  const RowMatrix<T> bgt = B.g.transpose();
  const RowMatrix<T> ahT = A.h.transpose();
  add_pair_action_left<T>(pi, ahT, bgt, tmp, T{-1});
  const RowMatrix<T> agt = A.g.transpose();
  const RowMatrix<T> bhT = B.h.transpose();
  add_pair_action_left<T>(pi, bhT, agt, tmp);
  r.g += tmp.transpose();
  return r;
}

/// [η, H] for anti-Hermitian real η and symmetric real H: the result is X + X^T with
/// X = K(η1) H2 + η2 K(h) + η2 H2. Costs one P^3 product.
template <class T>
EvenPairForm<T> flow_commutator(const PairIndex& pi, const EvenPairForm<T>& eta, const EvenPairForm<T>& H,
                                bool eta_has_two_body = true) {
  EvenPairForm<T> r = EvenPairForm<T>::zero(pi);
  RowMatrix<T> x1 = eta.h * H.h;
  r.h = x1 + x1.transpose();
  RowMatrix<T> x = RowMatrix<T>::Zero(pi.size(), pi.size());
  add_pair_action_left<T>(pi, eta.h, H.g, x);
  if (eta_has_two_body) {
    x.noalias() += eta.g * H.g;
    // η2 K(h) = -(K(h) η2)^T for symmetric h and antisymmetric η2.
    RowMatrix<T> kh = RowMatrix<T>::Zero(pi.size(), pi.size());
    add_pair_action_left<T>(pi, H.h, eta.g, kh);
    x -= kh.transpose();
  }
  r.g = x + x.transpose();
  return r;
}

/// [η, O] for even η and odd O, truncated at rank 3:
///   a' = η1 a
///   B' = K(η1) B - B η1 + η2 B + Σ_p η2[(jk),(pq)] a_p
template <class T>
OddPairForm<T> commutator(const PairIndex& pi, const EvenPairForm<T>& eta, const OddPairForm<T>& O,
                          bool eta_has_two_body = true) {
  const int n = pi.modes();
  OddPairForm<T> r = OddPairForm<T>::zero(pi);
  r.a.noalias() = eta.h * O.a;
  r.b.noalias() = -(O.b * eta.h);
  add_pair_action_left<T>(pi, eta.h, O.b, r.b);
  if (eta_has_two_body) {
    r.b.noalias() += eta.g * O.b;
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        if (p == q || O.a(p) == T{}) continue;
        const T w = O.a(p) * static_cast<T>(pi.sign(p, q));
        r.b.col(q) += w * eta.g.col(pi.index(p, q));
      }
  }
  return r;
}

}  // namespace kernels

/// Even canonical polynomial → pair form (rank 6 must be absent).
template <class T>
EvenPairForm<T> to_pair_form(const PairIndex& pi, const OperatorPolynomial<T>& op) {
  if (op.parity != Parity::even) throw DimensionError("even pair form needs an even operator");
  if (op.n_modes != pi.modes()) throw DimensionError("pair index and operator mode counts differ");
  if (op.has(6)) throw DimensionError("pair form holds at most rank-4 blocks");
  const OperatorPolynomial<T> c = wick::to_polynomial(wick::to_blocks(op));
  const int n = pi.modes();
  EvenPairForm<T> f = EvenPairForm<T>::zero(pi);
  f.scalar = c.scalar;
  if (c.has(2))
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.h(i, j) = c.rank2(i, j);
  if (c.has(4))
    for (int p = 0; p < pi.size(); ++p)
      for (int q = 0; q < pi.size(); ++q) f.g(p, q) = c.rank4(pi.first(p), pi.first(q), pi.second(p), pi.second(q));
  return f;
}

template <class T>
OperatorPolynomial<T> from_pair_form(const PairIndex& pi, const EvenPairForm<T>& f) {
  const int n = pi.modes();
  auto op = OperatorPolynomial<T>::even(n);
  op.scalar = f.scalar;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) op.rank2(i, j) = f.h(i, j);
  for (int p = 0; p < pi.size(); ++p)
    for (int q = 0; q < pi.size(); ++q) op.rank4(pi.first(p), pi.first(q), pi.second(p), pi.second(q)) = f.g(p, q);
  return op;
}

template <class T>
OddPairForm<T> to_pair_form_odd(const PairIndex& pi, const OperatorPolynomial<T>& op) {
  if (op.parity != Parity::odd) throw DimensionError("odd pair form needs an odd operator");
  if (op.n_modes != pi.modes()) throw DimensionError("pair index and operator mode counts differ");
  const OperatorPolynomial<T> c = wick::to_polynomial(wick::to_blocks(op));
  const int n = pi.modes();
  OddPairForm<T> f = OddPairForm<T>::zero(pi);
  if (c.has(1))
    for (int i = 0; i < n; ++i) f.a(i) = c.rank1(i);
  if (c.has(3))
    for (int p = 0; p < pi.size(); ++p)
      for (int q = 0; q < n; ++q) f.b(p, q) = c.rank3(pi.first(p), pi.second(p), q);
  return f;
}

template <class T>
OperatorPolynomial<T> from_pair_form(const PairIndex& pi, const OddPairForm<T>& f) {
  const int n = pi.modes();
  auto op = OperatorPolynomial<T>::odd(n);
  for (int i = 0; i < n; ++i) op.rank1(i) = f.a(i);
  for (int p = 0; p < pi.size(); ++p)
    for (int q = 0; q < n; ++q) op.rank3(pi.first(p), pi.second(p), q) = f.b(p, q);
  return op;
}

}  // namespace scramflow
