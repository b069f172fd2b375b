// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "scramflow/flow/flow.hpp"
#include "scramflow/lattice.hpp"
#include "scramflow/opflow/opflow.hpp"
#include "test_support.hpp"

using namespace scramflow;
using test_support::chain_model;

namespace {

FlowedCreationOperator flowed(const OperatorPolynomial<double>& h, int site, FlowParams p = {}) {
  auto r = integrate_flow(FlowState<double>::initial(h, {site}), p);
  return FlowedCreationOperator::from_flow(r.state);
}

}  // namespace

TEST(Complexity, UnitOperatorHasOneEntry) {
  for (int n : {2, 5, 9}) {
    const auto op = FlowedCreationOperator::unit(n, n / 2);
    const auto c = complexity(op);
    EXPECT_EQ(c.chi_bar, 1);
    EXPECT_DOUBLE_EQ(c.chi, 1.0 / (n + n * n * n));
  }
}

TEST(Complexity, FullOperatorHasUnitFraction) {
  auto op = FlowedCreationOperator::unit(4, 1);
  op.A.setConstant(0.5);
  for (auto& v : op.B.values()) v = -0.25;
  const auto c = complexity(op, 1e-6);
  EXPECT_EQ(c.chi_bar, 4 + 64);
  EXPECT_DOUBLE_EQ(c.chi, 1.0);
}

TEST(Complexity, RejectsNonPositiveCutoff) {
  const auto op = FlowedCreationOperator::unit(3, 0);
  EXPECT_THROW(complexity(op, 0.0), ConfigError);
  EXPECT_THROW(complexity(op, -1e-3), ConfigError);
}

TEST(Complexity, MonotoneInCutoffAndBounded) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-8.0, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto op = FlowedCreationOperator::unit(6, 2);
    for (Eigen::Index j = 0; j < op.A.size(); ++j) op.A(j) = std::pow(10.0, u(rng));
    for (auto& v : op.B.values()) v = (u(rng) < -4.0 ? -1.0 : 1.0) * std::pow(10.0, u(rng));
    std::int64_t prev = std::numeric_limits<std::int64_t>::max();
    for (double eps : {1e-9, 1e-7, 1e-5, 1e-3, 1e-1}) {
      const auto c = complexity(op, eps);
      EXPECT_LE(c.chi_bar, prev);
      EXPECT_GE(c.chi, 0.0);
      EXPECT_LE(c.chi, 1.0);
      prev = c.chi_bar;
    }
  }
}

TEST(FlowedOperator, StartsAsUnitVector) {
  const auto h = chain_model(6, 5.0, 0.1, 3);
  const auto s = FlowState<double>::initial(h, {2});
  const auto op = FlowedCreationOperator::from_flow(s);
  EXPECT_EQ(op.site, 2);
  EXPECT_EQ(op.A, FlowedCreationOperator::unit(6, 2).A);
  EXPECT_TRUE(op.B.is_zero());
  const auto prof = localization_profile(op);
  const auto env = prof.envelope();
  EXPECT_DOUBLE_EQ(env[0], 1.0);
  for (std::size_t r = 1; r < env.size(); ++r) EXPECT_EQ(env[r], 0.0);
}

TEST(FlowedOperator, PolynomialRoundTrip) {
  std::mt19937_64 rng(5);
  const auto p = test_support::random_odd(4, rng);
  const auto op = FlowedCreationOperator::from_polynomial(p, 1);
  const auto q = op.polynomial();
  for (int j = 0; j < 4; ++j) EXPECT_EQ(q.rank1(j), p.rank1(j));
  EXPECT_EQ(q.rank3.values().size(), p.rank3.values().size());
  EXPECT_TRUE(std::equal(q.rank3.values().begin(), q.rank3.values().end(), p.rank3.values().begin()));
  EXPECT_THROW(FlowedCreationOperator::from_polynomial(OperatorPolynomial<double>::even(4), 0), DimensionError);
  EXPECT_THROW(FlowedCreationOperator::unit(4, 4), IndexError);
}

TEST(FlowedOperator, WeightStaysBelowOneUnderTruncation) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto op = flowed(chain_model(8, 5.0, 0.1, seed), 4);
    EXPECT_LE(localization_profile(op).weight, 1.0 + 1e-3) << "seed " << seed;
    EXPECT_GT(op.weight_a(), 0.5);
  }
}

TEST(FlowedOperator, FreeOperatorIsTheSingleParticleEigenvectorRow) {
  // c†_i = Σ_m φ_m(i) c̃†_m: |A| sorted by mode energy equals |φ(i)| sorted by eigenvalue.
  const int l = 12, site = 6;
  const auto h = chain_model(l, 10.0, 0.0, 8);
  FlowParams p;
  p.v2_tolerance = 1e-10;
  p.rk.rtol = 1e-10;
  p.rk.atol = 1e-12;
  auto r = integrate_flow(FlowState<double>::initial(h, {site}), p);
  const auto op = FlowedCreationOperator::from_flow(r.state);
  Eigen::MatrixXd h2(l, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) h2(i, j) = h.rank2(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h2);
  std::vector<int> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return r.diag.h_tilde[a] < r.diag.h_tilde[b]; });
  for (int m = 0; m < l; ++m)
    EXPECT_NEAR(std::abs(op.A(order[m])), std::abs(es.eigenvectors()(site, m)), 1e-8);
  EXPECT_TRUE(op.B.is_zero() || max_abs(op.B) < 1e-12);
  EXPECT_NEAR(op.weight_a(), 1.0, 1e-10);
}

TEST(FlowedOperator, FreeStrongDisorderDecayLengthIsShort) {
  const int l = 16;
  const auto op = flowed(chain_model(l, 10.0, 0.0, 4), l / 2);
  const double xi = fit_decay_length(localization_profile(op).envelope());
  ASSERT_TRUE(std::isfinite(xi));
  EXPECT_GT(xi, 0.0);
  EXPECT_LT(xi, l / 4.0);
}

TEST(FlowedOperator, ReflectionSymmetricPotentialGivesMirroredComplexity) {
  // Sites i and L-1-i are mirror images when the potential is symmetric. The Wegner flow is
  // relabeling-covariant, so the two operators agree exactly; the scrambling generator's sign
  // convention picks an orientation and leaves only approximate agreement.
  const int l = 12;
  ModelSpec spec;
  spec.lx = l;
  spec.d = 6.0;
  spec.delta0 = 0.1;
  SitePotential pot;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> box(-spec.d, spec.d);
  pot.h.resize(l);
  for (int i = 0; i < l / 2; ++i) pot.h[i] = pot.h[l - 1 - i] = box(rng);
  const auto h = build_hamiltonian(spec, pot);
  for (bool scrambling : {false, true}) {
    FlowParams p;
    p.scrambling = scrambling;
    auto r = integrate_flow(FlowState<double>::initial(h, {l / 2 - 1, l / 2}), p);
    const auto a = FlowedCreationOperator::from_flow(r.state, 0);
    const auto b = FlowedCreationOperator::from_flow(r.state, 1);
    const auto ca = complexity(a).chi_bar, cb = complexity(b).chi_bar;
    if (!scrambling) {
      EXPECT_EQ(ca, cb);
      std::vector<double> ma(l), mb(l);
      for (int j = 0; j < l; ++j) {
        ma[j] = std::abs(a.A(j));
        mb[j] = std::abs(b.A(j));
      }
      std::sort(ma.begin(), ma.end());
      std::sort(mb.begin(), mb.end());
      for (int j = 0; j < l; ++j) EXPECT_NEAR(ma[j], mb[j], 1e-8);
    } else {
      EXPECT_LE(std::abs(ca - cb), 0.01 * std::max(ca, cb));
    }
  }
}

TEST(DecayFit, RecoversExactExponential) {
  std::vector<double> env;
  for (int r = 0; r < 8; ++r) env.push_back(3.0 * std::exp(-r / 1.7));
  EXPECT_NEAR(fit_decay_length(env), 1.7, 1e-10);
  EXPECT_TRUE(std::isnan(fit_decay_length({1.0})));
  EXPECT_TRUE(std::isnan(fit_decay_length({1.0, 0.0, 0.0})));
}
