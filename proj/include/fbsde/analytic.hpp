#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/rng.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

// erfc keeps full relative accuracy in the lower tail.
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_quantile(double p) {
  require(p > 0 && p < 1, ErrorCode::InvalidArgument, "quantile needs p in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

struct FirstPassageQuery {
  double now = 0;
  double state = 0;
  double barrier = 0;
  double sigma = 1;
  double horizon = 1;
};

// P(min_{s in [t,T]} X_s <= b | X_t = x) for X = x + sigma W.
inline double first_passage_prob(const FirstPassageQuery& q) {
  if (q.state <= q.barrier) return 1.0;
  const double tau = q.horizon - q.now;
  if (tau <= 0) return 0.0;
  return 2.0 * std_normal_cdf((q.barrier - q.state) / (q.sigma * std::sqrt(tau)));
}

inline double first_passage_prob(double t, double x, double b, double sigma, double horizon) {
  return first_passage_prob(FirstPassageQuery{t, x, b, sigma, horizon});
}

// v^{I,i} for |I| = 1; the threshold is the row sum of D for that particle.
inline double level1_field(double t, double x, double threshold, const SystemParams& params) {
  require(t <= params.horizon, ErrorCode::TimeOutOfRange, "t > T");
  return first_passage_prob(t, x, threshold, params.sigma, params.horizon);
}

// d/dx of the closed form, for x > b and t < T.
inline double first_passage_prob_dx(double t, double x, double b, double sigma, double horizon) {
  const double tau = horizon - t;
  if (x <= b || tau <= 0) return 0.0;
  const double s = sigma * std::sqrt(tau);
  return -2.0 * std_normal_pdf((b - x) / s) / s;
}

struct McEstimate {
  double estimate = 0;
  double standard_error = 0;
};

// Euler walk with the barrier checked at every grid time (including t itself).
inline McEstimate mc_first_passage_oracle(const FirstPassageQuery& q, int steps, int paths,
                                          std::uint64_t seed) {
  require(steps >= 1 && paths >= 1, ErrorCode::InvalidArgument, "steps and paths must be >= 1");
  require(q.now <= q.horizon, ErrorCode::TimeOutOfRange, "now > horizon");
  if (q.state <= q.barrier) return {1.0, 0.0};
  const double dt = (q.horizon - q.now) / steps;
  const double scale = q.sigma * std::sqrt(dt);
  std::vector<unsigned char> hit(static_cast<std::size_t>(paths), 0);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t p) {
    NormalStream z(seed, Stream::Oracle, static_cast<std::uint32_t>(p), 0, 0);
    double x = q.state;
    for (int k = 0; k < steps; ++k) {
      x += scale * z();
      if (x <= q.barrier) {
        hit[p] = 1;
        return;
      }
    }
  });
  std::int64_t hits = 0;
  for (unsigned char h : hit) hits += h;
  const double n = paths;
  const double mean = hits / n;
  const double se = paths > 1 ? std::sqrt(mean * (1 - mean) / (n - 1)) : std::numeric_limits<double>::infinity();
  return {mean, se};
}

}  // namespace fbsde
