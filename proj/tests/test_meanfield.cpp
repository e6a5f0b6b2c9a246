#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "oracles.hpp"

using namespace fbsde;

using oracles::alpha_by_inversion;

TEST(MeanField, CalibrationMatchesInversion) {
  EXPECT_NEAR(calibrate_alpha(0.5, 1.0, 1.0), alpha_by_inversion(0.5), 1e-9);
  EXPECT_NEAR(calibrate_alpha(0.5, 1.0, 1.0), 1.3489795, 1e-6);
  for (double p : {0.05, 0.3, 0.9}) EXPECT_NEAR(calibrate_alpha(p, 1.0, 1.0), alpha_by_inversion(p), 1e-8);
}

TEST(MeanField, CalibrationTendsToAFiniteLimitAsTargetApproachesOne) {
  // 2 Phi(alpha (p-1)) = p has alpha -> sqrt(2 pi) / 2 as p -> 1
  EXPECT_NEAR(calibrate_alpha(1 - 1e-6, 1.0, 1.0), std::sqrt(2 * M_PI) / 2, 1e-4);
  try {
    calibrate_alpha(0.5, 1.0, 1.0, true, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoRoot);
  }
}

TEST(MeanField, FixedPointsOfTheCalibratedProblem) {
  const double alpha = calibrate_alpha(0.5, 1.0, 1.0);
  const MeanFieldProblem pb = make_meanfield_problem(alpha, 1.0, 1.0, point_mass(alpha));
  EXPECT_EQ(mf_map(pb, 1.0), 1.0);
  const FixedPointReport rep = find_fixed_points(pb);
  ASSERT_EQ(rep.fixed_points.size(), 2u);
  EXPECT_NEAR(rep.fixed_points[0], 0.5, 1e-6);
  EXPECT_NEAR(rep.fixed_points[1], 1.0, 1e-6);
}

TEST(MeanField, FreeSystemHasOneFixedPoint) {
  const MeanFieldProblem pb = make_meanfield_problem(0.0, 1.0, 1.0, point_mass(1.0));
  const FixedPointReport rep = find_fixed_points(pb);
  ASSERT_EQ(rep.fixed_points.size(), 1u);
  EXPECT_NEAR(rep.fixed_points[0], 2 * std_normal_cdf(-1.0), 1e-9);
}

TEST(MeanField, FiniteSystemsAreKilledImmediately) {
  const double alpha = calibrate_alpha(0.5, 1.0, 1.0);
  const MeanFieldProblem pb = make_meanfield_problem(alpha, 1.0, 1.0, point_mass(alpha));
  for (const FiniteNRow& row : finite_vs_mf_experiment({1, 2, 3}, pb, 1, 10, 1)) {
    EXPECT_EQ(row.ybar, 1.0);
    EXPECT_EQ(row.distance, 0.0);
  }
}

TEST(MeanField, QuantileDiscretizationIsALaw) {
  const auto atoms = quantile_discretization([](double u) { return 1.0 + std_normal_quantile(u) * 0.1; }, 200);
  double w = 0;
  for (const Atom& a : atoms) w += a.weight;
  EXPECT_NEAR(w, 1.0, 1e-12);
  EXPECT_NO_THROW(make_meanfield_problem(1.0, 1.0, 1.0, atoms));
  EXPECT_THROW(make_meanfield_problem(1.0, 1.0, 1.0, {{1.0, 0.5}}), Error);
}
