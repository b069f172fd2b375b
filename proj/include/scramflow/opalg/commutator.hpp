// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "scramflow/opalg/polynomial.hpp"
#include "scramflow/opalg/wick.hpp"

namespace scramflow {

template <class T>
struct CommutatorResult {
  OperatorPolynomial<T> value;
  real_t<T> discarded_norm = 0;  // Frobenius norm of blocks above max_rank
};

/// [X, Y] for even X, every contraction included, blocks above `max_rank` discarded.
///
/// Even Y accepts max_rank 4 or 6; odd Y accepts 3 or 5, and rank-5 output is
/// always discarded because OperatorPolynomial has no rank-5 slot.
template <class T>
CommutatorResult<T> commutator(const OperatorPolynomial<T>& x, const OperatorPolynomial<T>& y, int max_rank) {
  if (x.parity != Parity::even) throw DimensionError("commutator expects an even left operand");
  if (x.n_modes != y.n_modes) throw DimensionError("operator mode counts differ");
  const bool odd = y.parity == Parity::odd;
  if (odd ? (max_rank != 3 && max_rank != 5) : (max_rank != 4 && max_rank != 6)) {
    throw DimensionError("max_rank " + std::to_string(max_rank) + " is not valid for this operand parity");
  }
  const int stored = odd ? 3 : max_rank;
  auto r = wick::commutator(wick::to_blocks(x), wick::to_blocks(y), {.max_rank = stored, .track_discarded = true});
  CommutatorResult<T> out{wick::to_polynomial(r.kept), r.discarded_norm};
  out.value.n_modes = x.n_modes;
  out.value.parity = y.parity;
  return out;
}

}  // namespace scramflow
