#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"

using namespace fbsde;

namespace {

PathConfig paths(std::vector<double> xi, int n_paths, double dt = 1e-2, std::uint64_t seed = 5) {
  PathConfig c;
  c.dt = dt;
  c.n_paths = n_paths;
  c.seed = seed;
  const int n = static_cast<int>(xi.size());
  c.initial = {0.0, std::move(xi), IndexSet::full(n)};
  return c;
}

}  // namespace

TEST(Simulator, FreeParticleFollowsClosedForm) {
  const DecouplingField f = fixtures::single_free_particle();
  const auto trajs = simulate_paths(f, paths({1.0}, 50));
  for (const auto& tr : trajs) {
    int first_hit = -1;
    for (std::size_t r = 0; r < tr.records(); ++r)
      if (first_hit < 0 && tr.X(r, 0) <= 0) first_hit = tr.steps[r];
    if (first_hit < 0) {
      EXPECT_FALSE(std::isfinite(tr.killing.tau[0]));
    } else {
      EXPECT_NEAR(tr.killing.tau[0], first_hit * 1e-2, 1e-12);
    }
    for (std::size_t r = 0; r + 1 < tr.records(); ++r) {
      if (!IndexSet(tr.alive[r]).contains(0)) {
        EXPECT_EQ(tr.Y(r, 0), 1.0);
        continue;
      }
      EXPECT_NEAR(tr.Y(r, 0), first_passage_prob(tr.times[r], tr.X(r, 0), 0.0, 1.0, 1.0), 1e-14);
    }
    EXPECT_EQ(tr.Y(tr.records() - 1, 0), std::isfinite(tr.killing.tau[0]) ? 1.0 : 0.0);
  }
}

TEST(Simulator, NonPositiveStartIsKilledAtOnce) {
  const SystemParams p = make_params(2, 1.0, 1.0);
  const DecouplingField f = build_cascade(p, zero_network(2), Method::Fd, fixtures::coarse_policy(p, zero_network(2)));
  for (const auto& tr : simulate_paths(f, paths({0.0, -0.5}, 3))) {
    EXPECT_EQ(tr.killing.tau[0], 0.0);
    EXPECT_EQ(tr.killing.tau[1], 0.0);
    for (double y : tr.y) EXPECT_EQ(y, 1.0);
  }
}

TEST(Simulator, MeanFieldParametersKillEveryoneAtStart) {
  const int n = 3;
  const double alpha = 1.3489795;
  const SystemParams p = make_params(n, 1.0, 1.0);
  const AdjacencyMatrix D = symmetric_network(n, alpha, true);
  const DecouplingField f = build_cascade(p, D, Method::Mc, fixtures::coarse_policy(p, D));
  const auto trajs = simulate_paths(f, paths({alpha, alpha, alpha}, 4));
  for (const auto& tr : trajs) {
    for (int i = 0; i < n; ++i) EXPECT_EQ(tr.killing.tau[i], 0.0);
    EXPECT_EQ(tr.killing.removed, (std::vector<int>{0, 1, 2}));
  }
  const MartingaleReport rep = martingale_diagnostics(trajs);
  for (const auto& d : rep.particles) {
    EXPECT_EQ(d.increment.mean, 0.0);
    EXPECT_EQ(d.kill_fraction.mean, 1.0);
  }
  const DefaultSummary ds = default_report(trajs, make_bank_network(D, {0, 0, 0}, {0, 0, 0}, 0.0));
  for (const auto& b : ds.banks) {
    EXPECT_EQ(b.frequency, 1.0);
    EXPECT_EQ(b.mean_default_time, 0.0);
  }
}

TEST(Simulator, PreStartRemovalsTakeSmallestIndexFirst) {
  const SystemParams p = make_params(3, 1.0, 1.0);
  const AdjacencyMatrix D = zero_network(3);
  const DecouplingField f = build_cascade(p, D, Method::Hybrid, fixtures::coarse_policy(p, D));
  PathConfig c = paths({3.0, 3.0, 3.0}, 1);
  c.initial.alive_set = IndexSet::single(1);
  const Trajectory tr = simulate_paths(f, c)[0];
  ASSERT_GE(tr.killing.removed.size(), 2u);
  EXPECT_EQ(tr.killing.removed[0], 0);
  EXPECT_EQ(tr.killing.removed[1], 2);
  EXPECT_EQ(tr.alive[0], IndexSet::single(1).bits());
}

TEST(Simulator, DeterministicAcrossWorkerCounts) {
  const DecouplingField& f = fixtures::n2_field();
  const PathConfig c = paths({2.5, 3.0}, 16);
  set_worker_count(1);
  const auto a = simulate_paths(f, c);
  set_worker_count(3);
  const auto b = simulate_paths(f, c);
  set_worker_count(1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a[p].x, b[p].x);
    EXPECT_EQ(a[p].y, b[p].y);
    EXPECT_EQ(a[p].killing.rho, b[p].killing.rho);
  }
}

TEST(Simulator, FlowProperty) {
  const DecouplingField& f = fixtures::n2_field();
  const PathConfig c = paths({2.2, 2.6}, 8);
  const auto trajs = simulate_paths(f, c);
  bool sensitive = false;
  for (const auto& tr : trajs) {
    EXPECT_EQ(flow_property_check(f, c, tr, 0), 0.0);
    for (std::size_t r : {std::size_t{10}, std::size_t{50}, tr.records() - 2})
      EXPECT_LE(flow_property_check(f, c, tr, r), 1e-12);
    const std::size_t r = 20;
    if (IndexSet(tr.alive[r]) == IndexSet::full(2))
      sensitive = sensitive || flow_property_check(f, c, tr, r, IndexSet::single(1)) > 0;
  }
  EXPECT_TRUE(sensitive);
}

TEST(Simulator, ZProcess) {
  const DecouplingField f = fixtures::single_free_particle();
  PathConfig c = paths({1.5}, 4);
  const auto trajs = simulate_paths(f, c);
  for (const auto& tr : trajs) {
    const auto z = z_process(f, tr, 1e-4);
    for (std::size_t r = 0; r < tr.records(); ++r) {
      if (tr.steps[r] == tr.total_steps || !IndexSet(tr.alive[r]).contains(0)) {
        EXPECT_EQ(z[r], 0.0);
        continue;
      }
      const double tau = 1.0 - tr.times[r];
      if (tau < 0.05) continue;
      // dY = Z dW: Z = sigma dv/dx = -2 phi(x / sqrt(T - t)) / sqrt(T - t)
      const double expect = -2.0 * std_normal_pdf(tr.X(r, 0) / std::sqrt(tau)) / std::sqrt(tau);
      EXPECT_NEAR(z[r], expect, 5e-3);
    }
  }
  // far above the barrier the sensitivity vanishes
  PathConfig far = paths({8.0}, 1);
  const Trajectory tr = simulate_paths(f, far)[0];
  const auto z = z_process(f, tr, 1e-4);
  EXPECT_LE(std::abs(z[0]), 1e-3);
}

TEST(Simulator, ZOnDeadConfigurationIsZeroAndBumpChecked) {
  const DecouplingField& f = fixtures::n2_field();
  const Trajectory tr = simulate_paths(f, paths({0.0, 0.0}, 1))[0];
  const auto z = z_process(f, tr, default_bump(f));
  for (double v : z) EXPECT_EQ(v, 0.0);
  try {
    z_process(f, tr, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BumpTooLargeForGrid);
  }
}

TEST(Simulator, SinglePathDiagnosticsAreDegenerate) {
  const DecouplingField f = fixtures::single_free_particle();
  const MartingaleReport rep = martingale_diagnostics(simulate_paths(f, paths({1.0}, 1)));
  EXPECT_TRUE(rep.degenerate);
  EXPECT_TRUE(std::isinf(rep.particles[0].increment.se));
}

TEST(Simulator, RequiresBuiltField) {
  const SystemParams p = make_params(1, 1.0, 1.0);
  DecouplingField f(p, zero_network(1));
  try {
    simulate_paths(f, paths({1.0}, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FieldNotBuilt);
  }
}
