// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "scramflow/opalg/commutator.hpp"
#include "scramflow/opalg/kernels.hpp"
#include "test_support.hpp"

using namespace scramflow;
using test_support::random_even;
using test_support::random_odd;

namespace {

double max_diff(const OperatorPolynomial<double>& a, const OperatorPolynomial<double>& b) {
  const auto d = a - b;
  double m = std::abs(d.scalar);
  for (int k : d.present_ranks()) m = std::max(m, max_abs(*d.block(k)));
  return m;
}

OperatorPolynomial<double> canonical(const OperatorPolynomial<double>& p) {
  return wick::to_polynomial(wick::to_blocks(p));
}

OperatorPolynomial<double> hermitian_part(const OperatorPolynomial<double>& x, double s) {
  auto a = wick::to_polynomial(wick::adjoint(wick::to_blocks(x)));
  return canonical(x + s * a);
}

}  // namespace

TEST(PairIndex, LookupIsAntisymmetric) {
  PairIndex pi(5);
  EXPECT_EQ(pi.size(), 10);
  for (int a = 0; a < 5; ++a) {
    EXPECT_EQ(pi.index(a, a), -1);
    for (int b = a + 1; b < 5; ++b) {
      EXPECT_EQ(pi.index(a, b), pi.index(b, a));
      EXPECT_EQ(pi.sign(a, b), 1);
      EXPECT_EQ(pi.sign(b, a), -1);
      EXPECT_EQ(pi.first(pi.index(a, b)), a);
      EXPECT_EQ(pi.second(pi.index(a, b)), b);
    }
  }
}

TEST(PairForm, RoundTripIsCanonical) {
  std::mt19937_64 rng(1);
  const auto x = random_even(5, rng);
  PairIndex pi(5);
  EXPECT_LT(max_diff(from_pair_form(pi, to_pair_form(pi, x)), canonical(x)), 1e-14);
  const auto o = random_odd(5, rng);
  EXPECT_LT(max_diff(from_pair_form(pi, to_pair_form_odd(pi, o)), canonical(o)), 1e-14);
}

TEST(PairKernels, EvenCommutatorMatchesReference) {
  std::mt19937_64 rng(2);
  PairIndex pi(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto x = random_even(5, rng), y = random_even(5, rng);
    const auto ref = commutator(x, y, 4).value;
    const auto fast = from_pair_form(pi, kernels::commutator(pi, to_pair_form(pi, x), to_pair_form(pi, y)));
    EXPECT_LT(max_diff(fast, ref), 1e-12);
  }
}

TEST(PairKernels, FlowCommutatorMatchesReference) {
  std::mt19937_64 rng(3);
  PairIndex pi(6);
  for (int rep = 0; rep < 5; ++rep) {
    const auto eta = hermitian_part(random_even(6, rng), -1.0);
    const auto h = hermitian_part(random_even(6, rng), 1.0);
    const auto ref = commutator(eta, h, 4).value;
    auto fast = from_pair_form(pi, kernels::flow_commutator(pi, to_pair_form(pi, eta), to_pair_form(pi, h)));
    fast.scalar = ref.scalar;
    EXPECT_LT(max_diff(fast, ref), 1e-12);
    EXPECT_EQ(ref.scalar, 0.0);
  }
}

TEST(PairKernels, QuadraticGeneratorSkipsTwoBody) {
  std::mt19937_64 rng(4);
  PairIndex pi(5);
  auto eta = hermitian_part(random_even(5, rng, false), -1.0);
  const auto h = hermitian_part(random_even(5, rng), 1.0);
  const auto ref = commutator(eta, h, 4).value;
  auto fe = to_pair_form(pi, eta);
  auto fast = from_pair_form(pi, kernels::flow_commutator(pi, fe, to_pair_form(pi, h), false));
  fast.scalar = ref.scalar;
  EXPECT_LT(max_diff(fast, ref), 1e-12);
}

TEST(PairKernels, OddCommutatorMatchesReference) {
  std::mt19937_64 rng(5);
  PairIndex pi(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto x = random_even(5, rng);
    const auto o = random_odd(5, rng);
    const auto ref = commutator(x, o, 3).value;
    const auto fast = from_pair_form(pi, kernels::commutator(pi, to_pair_form(pi, x), to_pair_form_odd(pi, o)));
    EXPECT_LT(max_diff(fast, ref), 1e-12);
  }
}

TEST(PairKernels, DensePairActionIsTransposeCovariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  PairIndex pi(4);
  RowMatrix<double> a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = u(rng);
  const RowMatrix<double> at = a.transpose();
  const RowMatrix<double> lhs = kernels::pair_action(pi, a).transpose();
  EXPECT_LT((lhs - kernels::pair_action(pi, at)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CommutatorApi, RejectsBadRank) {
  std::mt19937_64 rng(7);
  const auto x = random_even(3, rng), o = random_odd(3, rng);
  EXPECT_THROW(commutator(x, x, 3), DimensionError);
  EXPECT_THROW(commutator(x, o, 4), DimensionError);
  EXPECT_THROW(commutator(o, x, 4), DimensionError);
  EXPECT_NO_THROW(commutator(x, o, 5));
}
