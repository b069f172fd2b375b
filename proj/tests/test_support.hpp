// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "scramflow/lattice.hpp"
#include "scramflow/opalg/polynomial.hpp"
#include "scramflow/oracle/fock.hpp"

namespace scramflow::test_support {

/// Fill every entry of the requested blocks uniformly in [-1, 1] (not canonical).
inline OperatorPolynomial<double> random_even(int n, std::mt19937_64& rng, bool rank4 = true, bool rank6 = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = OperatorPolynomial<double>::even(n, rank4, rank6);
  p.scalar = u(rng);
  for (int k : p.present_ranks())
    for (auto& v : p.block(k)->values()) v = u(rng);
  return p;
}

inline OperatorPolynomial<double> random_odd(int n, std::mt19937_64& rng, bool rank3 = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = OperatorPolynomial<double>::odd(n, rank3);
  for (int k : p.present_ranks())
    for (auto& v : p.block(k)->values()) v = u(rng);
  return p;
}

/// Open chain of length l with the given disorder family.
inline OperatorPolynomial<double> chain_model(int l, double d, double delta0, std::uint64_t seed,
                                              DisorderFamily family = DisorderFamily::random_box, double j = 1.0) {
  ModelSpec spec;
  spec.lx = l;
  spec.J = j;
  spec.d = d;
  spec.delta0 = delta0;
  spec.family = family;
  spec.seed = seed;
  return build_hamiltonian(spec, sample_potential(spec, seed));
}

template <class A, class B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace scramflow::test_support
