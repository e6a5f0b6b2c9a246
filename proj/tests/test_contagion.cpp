#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "oracles.hpp"

using namespace fbsde;

using oracles::brute_force_clearing;

TEST(Contagion, CapitalAndMarkToMarket) {
  const AdjacencyMatrix D = build_network({{0, 1}, {1, 0}});
  const std::vector<double> X{2.0, 3.0}, Y{1.0, 1.0};
  const auto K = capital_from_fbsde(X, Y, D, 0.0);
  EXPECT_EQ(K, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(capital_from_fbsde(X, Y, zero_network(2), 0.0), X);
  EXPECT_THROW(capital_from_fbsde(X, std::vector<double>{1.0}, D, 0.0), Error);
  const AdjacencyMatrix two = build_network({{0, 2}, {0, 0}});
  const auto phi = mark_to_market(std::vector<double>{0.0, 0.5}, two, 0.4);
  EXPECT_DOUBLE_EQ(phi[0][1], 1.4);
  EXPECT_DOUBLE_EQ(mark_to_market(std::vector<double>{0.0, 0.0}, two, 0.0)[0][1], 2.0);
  EXPECT_DOUBLE_EQ(mark_to_market(std::vector<double>{0.0, 1.0}, two, 0.0)[0][1], 0.0);
}

TEST(Contagion, DecoupledClearing) {
  const BankNetwork net = make_bank_network(zero_network(3), {1.0, 0.2, 0.0}, {0.5, 0.2, 0.0}, 0.0);
  const ClearingResult r = static_clearing_proportional(net);
  EXPECT_EQ(r.capital, (std::vector<double>{0.5, 0.0, 0.0}));
  EXPECT_EQ(r.default_set, IndexSet::from_indices({1, 2}));
}

TEST(Contagion, NettingPairStaysSolvent) {
  const BankNetwork net = make_bank_network(build_network({{0, 1}, {1, 0}}), {0.5, 0.5}, {0, 0}, 0.0);
  const ClearingResult r = static_clearing_proportional(net);
  EXPECT_EQ(r.capital, (std::vector<double>{0.5, 0.5}));
  EXPECT_TRUE(r.default_set.empty());
  EXPECT_EQ(r.payments[0][1], 1.0);
}

TEST(Contagion, TwoBankCascadeMatchesEnumeration) {
  const BankNetwork net = make_bank_network(build_network({{0, 1}, {1, 0}}), {0.5, 0.0}, {0.0, 0.75}, 0.0);
  const ClearingResult r = static_clearing_proportional(net);
  const auto oracle = brute_force_clearing(net);
  ASSERT_EQ(oracle.size(), 2u);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(r.capital[i], oracle[i], 1e-10);
  EXPECT_NEAR(r.capital[0], -0.5, 1e-12);
  EXPECT_NEAR(r.capital[1], -1.25, 1e-12);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Contagion, RandomNetworksMatchEnumeration) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<std::vector<double>> raw(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && u(gen) < 0.8) raw[i][j] = u(gen);
    std::vector<double> A(n), De(n);
    for (int i = 0; i < n; ++i) {
      A[i] = 1.5 * u(gen);
      De[i] = u(gen);
    }
    const BankNetwork net = make_bank_network(build_network(raw), A, De, 0.0);
    const ClearingResult r = static_clearing_proportional(net);
    const auto oracle = brute_force_clearing(net);
    ASSERT_EQ(oracle.size(), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) EXPECT_NEAR(r.capital[i], oracle[i], 1e-9) << "trial " << trial;
    EXPECT_LE(r.residual, 1e-10);
    for (int j = 0; j < n; ++j) EXPECT_EQ(r.default_set.contains(j), r.capital[j] <= 0);
  }
}

TEST(Contagion, KillTimesAreFirstCapitalCrossings) {
  const DecouplingField& f = fixtures::n2_field();
  PathConfig c;
  c.dt = 1e-2;
  c.n_paths = 200;
  c.seed = 8;
  c.initial = {0.0, {2.3, 2.8}, IndexSet::full(2)};
  for (const auto& tr : simulate_paths(f, c)) {
    const auto K = capital_path(tr, f.network(), 0.0);
    for (int i = 0; i < 2; ++i) {
      double first = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < tr.records() && !std::isfinite(first); ++r)
        if (K[r * 2 + i] <= 0) first = tr.times[r];
      EXPECT_EQ(first, tr.killing.tau[i]);
    }
  }
}

TEST(Contagion, EmptyReport) {
  const BankNetwork net = make_bank_network(zero_network(2), {0, 0}, {0, 0}, 0.0);
  EXPECT_TRUE(default_report({}, net).banks.empty());
  EXPECT_THROW(make_bank_network(zero_network(2), {0, 0}, {0, 0}, 1.0), Error);
}
