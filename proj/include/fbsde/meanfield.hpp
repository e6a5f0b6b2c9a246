#pragma once

// Scalar mean-field fixed-point problem p = G(p), G(p) = P(min X <= alpha p).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "fbsde/analytic.hpp"
#include "fbsde/lattice.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

struct Atom {
  double x = 0;
  double weight = 1;
};

struct MeanFieldProblem {
  double alpha = 1;
  double sigma = 1;
  double horizon = 1;
  std::vector<Atom> atoms;
};

inline MeanFieldProblem make_meanfield_problem(double alpha, double sigma, double horizon, std::vector<Atom> atoms) {
  require(std::isfinite(alpha) && alpha >= 0, ErrorCode::InvalidArgument, "alpha must be >= 0");
  require(std::isfinite(sigma) && sigma > 0, ErrorCode::InvalidArgument, "sigma must be > 0");
  require(std::isfinite(horizon) && horizon > 0, ErrorCode::InvalidArgument, "horizon must be > 0");
  require(!atoms.empty(), ErrorCode::InvalidArgument, "initial law needs at least one atom");
  double total = 0;
  for (const Atom& a : atoms) {
    require(std::isfinite(a.x) && a.x >= 0, ErrorCode::InvalidArgument, "atoms must be >= 0");
    require(std::isfinite(a.weight) && a.weight >= 0, ErrorCode::InvalidArgument, "weights must be >= 0");
    total += a.weight;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "weights must sum to 1");
  return {alpha, sigma, horizon, std::move(atoms)};
}

inline std::vector<Atom> point_mass(double xi) { return {{xi, 1.0}}; }

// Atoms at the mid-quantiles (k + 1/2)/n of a continuous law.
inline std::vector<Atom> quantile_discretization(const std::function<double(double)>& quantile, int n = 1000) {
  require(n >= 1, ErrorCode::InvalidArgument, "need at least one atom");
  std::vector<Atom> out(n);
  for (int k = 0; k < n; ++k) out[k] = {quantile((k + 0.5) / n), 1.0 / n};
  return out;
}

inline double mf_map(const MeanFieldProblem& pb, double p) {
  require(p >= 0 && p <= 1, ErrorCode::InvalidArgument, "p must lie in [0,1]");
  const double barrier = pb.alpha * p;
  double g = 0;
  for (const Atom& a : pb.atoms) g += a.weight * first_passage_prob(0.0, a.x, barrier, pb.sigma, pb.horizon);
  return std::min(g, 1.0);
}

struct FixedPointReport {
  std::vector<double> fixed_points;  // ascending
  std::vector<double> residuals;     // |G(p) - p|
  int brackets = 0;                  // sign changes found on the scan grid
  std::vector<std::pair<double, double>> samples;  // (p, G(p))
};

inline FixedPointReport find_fixed_points(const MeanFieldProblem& pb, int grid = 1000, double tol = 1e-12) {
  require(grid >= 1, ErrorCode::InvalidArgument, "grid must be >= 1");
  require(tol > 0, ErrorCode::InvalidArgument, "tol must be > 0");
  FixedPointReport rep;
  auto h = [&](double p) { return mf_map(pb, p) - p; };
  std::vector<double> ps(grid + 1), hs(grid + 1);
  for (int k = 0; k <= grid; ++k) {
    ps[k] = static_cast<double>(k) / grid;
    const double g = mf_map(pb, ps[k]);
    rep.samples.emplace_back(ps[k], g);
    hs[k] = g - ps[k];
  }
  std::vector<std::pair<double, double>> roots;  // (p, residual)
  for (int k : {0, grid})
    if (std::abs(hs[k]) <= tol) roots.emplace_back(ps[k], std::abs(hs[k]));
  for (int k = 0; k < grid; ++k) {
    if (hs[k] == 0 && k > 0) roots.emplace_back(ps[k], 0.0);
    if (!((hs[k] < 0 && hs[k + 1] > 0) || (hs[k] > 0 && hs[k + 1] < 0))) continue;
    ++rep.brackets;
    double lo = ps[k], hi = ps[k + 1];
    const bool rising = hs[k] < 0;
    double mid = 0.5 * (lo + hi), hm = h(mid);
    for (int it = 0; it < 200 && std::abs(hm) > tol; ++it) {
      ((hm < 0) == rising ? lo : hi) = mid;
      const double next = 0.5 * (lo + hi);
      if (next == mid) break;
      mid = next;
      hm = h(mid);
    }
    roots.emplace_back(mid, std::abs(hm));
  }
  std::sort(roots.begin(), roots.end());
  const double gap = 2.0 / grid;
  for (const auto& r : roots) {
    if (!rep.fixed_points.empty() && r.first - rep.fixed_points.back() < gap) {
      if (r.second < rep.residuals.back()) {
        rep.fixed_points.back() = r.first;
        rep.residuals.back() = r.second;
      }
      continue;
    }
    rep.fixed_points.push_back(r.first);
    rep.residuals.push_back(r.second);
  }
  return rep;
}

// alpha with 2 Phi(alpha (p - 1) / (sigma sqrt T)) = p, for the family xi = alpha.
inline double calibrate_alpha(double target_p, double sigma, double horizon, bool xi_equals_alpha = true,
                              double alpha_max = 1e6) {
  require(xi_equals_alpha, ErrorCode::InvalidArgument, "only the xi = alpha family is supported");
  require(target_p > 0 && target_p < 1, ErrorCode::InvalidArgument, "target must lie in (0,1)");
  const double s = sigma * std::sqrt(horizon);
  auto f = [&](double a) { return 2.0 * std_normal_cdf(a * (target_p - 1) / s) - target_p; };
  // f decreases from 1 - p > 0 at alpha = 0.
  double lo = 0, hi = alpha_max;
  if (f(hi) > 0) fail(ErrorCode::NoRoot, "no alpha <= alpha_max reaches the target");
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct FiniteNRow {
  int n = 0;
  double ybar = 0;       // mean over particles (and initial draws) of Y_0
  double ybar_se = 0;    // across initial draws; 0 for a point mass
  double distance = 0;   // to the nearest mean-field fixed point
  int iterations = 0;    // largest Tarski iteration count seen
};

// Symmetric alpha/N lattice system for each N, xi drawn from the initial law
// (`draws` outer samples; a point mass uses one).
inline std::vector<FiniteNRow> finite_vs_mf_experiment(const std::vector<int>& n_list, const MeanFieldProblem& pb,
                                                       int draws, int lattice_m, std::uint64_t seed,
                                                       std::size_t budget = kDefaultLatticeBudget) {
  require(draws >= 1, ErrorCode::InvalidArgument, "draws must be >= 1");
  const FixedPointReport fps = find_fixed_points(pb, 1000, 1e-12);
  const bool point = pb.atoms.size() == 1;
  std::vector<double> cdf;
  for (const Atom& a : pb.atoms) cdf.push_back((cdf.empty() ? 0.0 : cdf.back()) + a.weight);
  std::vector<FiniteNRow> rows;
  for (int n : n_list) {
    const SystemParams params = make_params(n, pb.sigma, pb.horizon);
    const AdjacencyMatrix D = symmetric_network(n, pb.alpha, true);
    const int samples = point ? 1 : draws;
    std::vector<double> ybars;
    FiniteNRow row;
    row.n = n;
    for (int s = 0; s < samples; ++s) {
      InitialData init{0.0, std::vector<double>(n), IndexSet::full(n)};
      for (int i = 0; i < n; ++i) {
        if (point) {
          init.initial_states[i] = pb.atoms[0].x;
        } else {
          const double u = uniform01(seed, Stream::Sampling, static_cast<std::uint32_t>(s),
                                     static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(n));
          const auto it = std::lower_bound(cdf.begin(), cdf.end(), u * cdf.back());
          init.initial_states[i] = pb.atoms[std::min<std::size_t>(it - cdf.begin(), pb.atoms.size() - 1)].x;
        }
      }
      const LatticeSpec spec = make_lattice_spec(params, init, lattice_m);
      const IterationReport rep = tarski_from_above(spec, D, 10 * (lattice_m + 2), false, budget);
      row.iterations = std::max(row.iterations, rep.iterations_used);
      const auto y0 = lattice_initial_values(spec, rep.fixed_point);
      ybars.push_back(pairwise_sum(y0) / n);
    }
    const MeanSe ms = mean_and_se(ybars);
    row.ybar = ms.mean;
    row.ybar_se = samples > 1 ? ms.se : 0.0;
    row.distance = std::numeric_limits<double>::infinity();
    for (double p : fps.fixed_points) row.distance = std::min(row.distance, std::abs(row.ybar - p));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fbsde
