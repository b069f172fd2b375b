// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/tensor.hpp"

namespace scramflow {

enum class Parity { even, odd };

/// Operator-slot type of one tensor axis: creation (c†) or annihilation (c).
using Layout = std::vector<bool>;  // true = creator

/// Fixed slot layout of each block of an OperatorPolynomial.
///
///   rank1  c†_i
///   rank2  :c†_i c_j:
///   rank3  :c†_j c†_k c_q:
///   rank4  :c†_i c_j c†_k c_q:
///   rank6  :c†_i c_j c†_k c_q c†_l c_m:
inline Layout polynomial_layout(int rank) {
  switch (rank) {
    case 1: return {true};
    case 2: return {true, false};
    case 3: return {true, true, false};
    case 4: return {true, false, true, false};
    case 6: return {true, false, true, false, true, false};
    default: throw DimensionError("no polynomial block of rank " + std::to_string(rank));
  }
}

/// Largest mode count for which dense rank-6 blocks may be allocated.
inline constexpr int kMaxRank6Modes = 36;

/// Default memory ceiling for a single dense block, in bytes.
inline constexpr std::size_t kDefaultBlockByteCeiling = std::size_t{2} << 30;

/// Vacuum-normal-ordered fermionic operator polynomial over `n_modes` modes.
///
/// Even operators populate {scalar, rank2, rank4, rank6}; odd operators
/// populate {rank1, rank3}. Absent blocks are empty tensors. Library routines
/// return blocks in canonical form: every distinct normal-ordered monomial is
/// stored once, at the slot whose creator indices are strictly increasing and
/// whose annihilator indices are strictly increasing. Density-density terms
/// n_i n_j (i<j) therefore sit at rank4(i,i,j,j).
template <class T>
struct OperatorPolynomial {
  using value_type = T;

  int n_modes = 0;
  Parity parity = Parity::even;
  T scalar{};
  Tensor<T> rank1;
  Tensor<T> rank2;
  Tensor<T> rank3;
  Tensor<T> rank4;
  Tensor<T> rank6;

  static OperatorPolynomial even(int n, bool with_rank4 = true, bool with_rank6 = false) {
    OperatorPolynomial p;
    p.n_modes = n;
    p.parity = Parity::even;
    p.rank2 = Tensor<T>(2, n);
    if (with_rank4) p.rank4 = Tensor<T>(4, n);
    if (with_rank6) p.ensure(6);
    return p;
  }

  static OperatorPolynomial odd(int n, bool with_rank3 = true) {
    OperatorPolynomial p;
    p.n_modes = n;
    p.parity = Parity::odd;
    p.rank1 = Tensor<T>(1, n);
    if (with_rank3) p.rank3 = Tensor<T>(3, n);
    return p;
  }

  static constexpr std::array<int, 3> even_ranks{2, 4, 6};
  static constexpr std::array<int, 2> odd_ranks{1, 3};

  bool has(int rank) const {
    const Tensor<T>* b = block(rank);
    return b != nullptr && !b->empty();
  }

  Tensor<T>* block(int rank) {
    return const_cast<Tensor<T>*>(static_cast<const OperatorPolynomial*>(this)->block(rank));
  }
  const Tensor<T>* block(int rank) const {
    switch (rank) {
      case 1: return &rank1;
      case 2: return &rank2;
      case 3: return &rank3;
      case 4: return &rank4;
      case 6: return &rank6;
      default: return nullptr;
    }
  }

  /// Allocate (zeroed) block `rank` if absent.
  Tensor<T>& ensure(int rank, std::size_t byte_ceiling = kDefaultBlockByteCeiling) {
    Tensor<T>* b = block(rank);
    if (b == nullptr) throw DimensionError("no polynomial block of rank " + std::to_string(rank));
    const bool odd_rank = (rank % 2) == 1;
    if (odd_rank != (parity == Parity::odd)) {
      throw DimensionError("block rank " + std::to_string(rank) + " does not match operator parity");
    }
    if (b->empty()) {
      if (rank == 6 && n_modes > kMaxRank6Modes) {
        throw CapacityError("rank-6 blocks are refused above " + std::to_string(kMaxRank6Modes) +
                            " modes");
      }
      const std::size_t bytes = ipow(static_cast<std::size_t>(n_modes), rank) * sizeof(T);
      if (bytes > byte_ceiling) {
        throw CapacityError("rank-" + std::to_string(rank) + " block needs " + std::to_string(bytes) +
                            " bytes, above the configured ceiling");
      }
      *b = Tensor<T>(rank, n_modes);
    }
    return *b;
  }

  std::vector<int> present_ranks() const {
    std::vector<int> r;
    for (int k : {1, 2, 3, 4, 6})
      if (has(k)) r.push_back(k);
    return r;
  }

  OperatorPolynomial& operator+=(const OperatorPolynomial& o) {
    check_compatible(o);
    scalar += o.scalar;
    for (int k : o.present_ranks()) ensure(k) += *o.block(k);
    return *this;
  }
  OperatorPolynomial& operator-=(const OperatorPolynomial& o) {
    check_compatible(o);
    scalar -= o.scalar;
    for (int k : o.present_ranks()) ensure(k) -= *o.block(k);
    return *this;
  }
  OperatorPolynomial& operator*=(const T& s) {
    scalar *= s;
    for (int k : present_ranks()) *block(k) *= s;
    return *this;
  }
  friend OperatorPolynomial operator+(OperatorPolynomial a, const OperatorPolynomial& b) { return a += b; }
  friend OperatorPolynomial operator-(OperatorPolynomial a, const OperatorPolynomial& b) { return a -= b; }
  friend OperatorPolynomial operator*(const T& s, OperatorPolynomial a) { return a *= s; }

  void check_compatible(const OperatorPolynomial& o) const {
    if (o.n_modes != n_modes) throw DimensionError("operator mode counts differ");
    if (o.parity != parity) throw DimensionError("operator parities differ");
  }

  template <class U>
  OperatorPolynomial<U> cast() const {
    OperatorPolynomial<U> out;
    out.n_modes = n_modes;
    out.parity = parity;
    out.scalar = static_cast<U>(scalar);
    for (int k : present_ranks()) *out.block(k) = block(k)->template cast<U>();
    return out;
  }
};

/// True when the slot indices name a diagonal (density-type) monomial in canonical storage:
/// each creator index equals the annihilator index that follows it.
inline bool is_density_slot(std::span<const int> idx) {
  if (idx.size() % 2 != 0) return false;
  for (std::size_t s = 0; s + 1 < idx.size(); s += 2)
    if (idx[s] != idx[s + 1]) return false;
  return true;
}

namespace detail {

template <class T, class Pred>
OperatorPolynomial<T> split_even(const OperatorPolynomial<T>& h, Pred keep) {
  if (h.parity != Parity::even) throw DimensionError("diagonal split needs an even operator");
  OperatorPolynomial<T> out;
  out.n_modes = h.n_modes;
  out.parity = Parity::even;
  for (int k : h.present_ranks()) {
    const Tensor<T>& src = *h.block(k);
    Tensor<T>& dst = out.ensure(k);
    std::vector<int> idx(k);
    for (std::size_t off = 0; off < src.size(); ++off) {
      if (src.data()[off] == T{}) continue;
      src.unravel(off, idx);
      if (keep(is_density_slot(idx))) dst.data()[off] = src.data()[off];
    }
  }
  return out;
}

}  // namespace detail

/// Off-diagonal part V: every entry that is not of density form
/// (rank2 i≠j, rank4 not (i=j,k=q), rank6 not (i=j,k=q,l=m)).
/// The scalar belongs to the diagonal part.
template <class T>
OperatorPolynomial<T> off_diagonal_part(const OperatorPolynomial<T>& h) {
  return detail::split_even(h, [](bool density) { return !density; });
}

/// Diagonal part H0 = H - V (scalar included).
template <class T>
OperatorPolynomial<T> diagonal_part(const OperatorPolynomial<T>& h) {
  auto d = detail::split_even(h, [](bool density) { return density; });
  d.scalar = h.scalar;
  return d;
}

template <class T>
real_t<T> frobenius_norm(const OperatorPolynomial<T>& p, int rank) {
  return p.has(rank) ? frobenius_norm(*p.block(rank)) : real_t<T>{0};
}

}  // namespace scramflow
