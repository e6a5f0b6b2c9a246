#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <Eigen/Dense>
#include <vector>

#include "fbsde/contagion.hpp"

namespace fbsde::oracles {

// P(min_k xi + S_k step <= 0, k = 0..m) for a symmetric +-step walk, by plain DP.
inline double walk_hit_probability(double xi, double step, int m) {
  std::vector<double> alive(1, xi <= 0 ? 0.0 : 1.0);  // alive mass by up-count j
  for (int k = 1; k <= m; ++k) {
    std::vector<double> next(k + 1, 0.0);
    for (int j = 0; j < k; ++j) {
      next[j] += 0.5 * alive[j];
      next[j + 1] += 0.5 * alive[j];
    }
    for (int j = 0; j <= k; ++j)
      if (xi + (2 * j - k) * step <= 0) next[j] = 0;
    alive = std::move(next);
  }
  double s = 0;
  for (double a : alive) s += a;
  return 1 - s;
}

// Greatest clearing fixed point by enumerating the 3^N payment regimes
// (solvent / partial recovery / wiped out) and solving each linear system.
// Empty if no regime is self-consistent.
inline std::vector<double> brute_force_clearing(const BankNetwork& net) {
  const int n = net.liabilities.size();
  std::vector<double> L(n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) L[j] += net.liabilities(l, j);
  std::vector<double> best;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    std::vector<int> reg(n);
    for (int j = 0, c = code; j < n; ++j, c /= 3) reg[j] = c % 3;  // 0 solvent, 1 partial, 2 wiped
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      b[i] = net.external_assets[i] - net.external_liabilities[i] - L[i];
      for (int j = 0; j < n; ++j) {
        const double d = net.liabilities(i, j);
        if (L[j] == 0 || d == 0) continue;
        if (reg[j] == 0) b[i] += d;
        if (reg[j] == 1) {
          A(i, j) -= d / L[j];
          b[i] += d;
        }
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd K = lu.solve(b);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      if (reg[j] == 0) ok = ok && K[j] > 0;
      if (reg[j] == 1) ok = ok && K[j] <= 0 && K[j] + L[j] > 0;
      if (reg[j] == 2) ok = ok && K[j] <= 0 && K[j] + L[j] <= 0;
    }
    if (!ok) continue;
    if (best.empty()) best.assign(n, -1e300);
    for (int j = 0; j < n; ++j) best[j] = std::max(best[j], K[j]);
  }
  return best;
}

// alpha with 2 Phi(alpha (p - 1) / (sigma sqrt T)) = p, by direct inversion.
inline double alpha_by_inversion(double p, double sigma = 1.0, double horizon = 1.0) {
  return sigma * std::sqrt(horizon) * std_normal_quantile(p / 2) / (p - 1);
}

}  // namespace fbsde::oracles
