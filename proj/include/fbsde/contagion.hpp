#pragma once

// Interbank reading of the particle system: capital processes, mark-to-market
// claim values, and static clearing under the proportional repayment rule.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbsde/error.hpp"
#include "fbsde/simulator.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

struct BankNetwork {
  AdjacencyMatrix liabilities;               // D_ij: owed by j to i
  std::vector<double> external_assets;       // A
  std::vector<double> external_liabilities;  // D^e
  double recovery = 0;                       // R
};

inline BankNetwork make_bank_network(AdjacencyMatrix D, std::vector<double> assets, std::vector<double> ext_liab,
                                     double recovery) {
  const std::size_t n = static_cast<std::size_t>(D.size());
  require(assets.size() == n && ext_liab.size() == n, ErrorCode::ShapeMismatch, "vectors must have length N");
  for (double a : assets) require(std::isfinite(a) && a >= 0, ErrorCode::InvalidArgument, "external assets must be >= 0");
  for (double l : ext_liab)
    require(std::isfinite(l) && l >= 0, ErrorCode::InvalidArgument, "external liabilities must be >= 0");
  require(recovery >= 0 && recovery < 1, ErrorCode::InvalidArgument, "recovery must lie in [0,1)");
  return {std::move(D), std::move(assets), std::move(ext_liab), recovery};
}

// K = X - (1 - R) D Y, row by row; X and Y are [row][particle] with n columns.
inline std::vector<double> capital_from_fbsde(std::span<const double> X, std::span<const double> Y,
                                              const AdjacencyMatrix& D, double R) {
  const std::size_t n = static_cast<std::size_t>(D.size());
  require(X.size() == Y.size() && X.size() % n == 0, ErrorCode::ShapeMismatch,
          "X and Y must both be [rows][N]");
  std::vector<double> K(X.size());
  for (std::size_t r = 0; r < X.size() / n; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += D(static_cast<int>(i), static_cast<int>(j)) * Y[r * n + j];
      K[r * n + i] = X[r * n + i] - (1.0 - R) * s;
    }
  return K;
}

inline std::vector<double> capital_path(const Trajectory& tr, const AdjacencyMatrix& D, double R) {
  require(tr.n == D.size(), ErrorCode::ShapeMismatch, "trajectory and network sizes differ");
  return capital_from_fbsde(tr.x, tr.y, D, R);
}

// Phi_ij = D_ij (1 - Y_j) + R D_ij Y_j.
inline std::vector<std::vector<double>> mark_to_market(std::span<const double> y, const AdjacencyMatrix& D, double R) {
  const int n = D.size();
  require(static_cast<int>(y.size()) == n, ErrorCode::ShapeMismatch, "Y must have N entries");
  std::vector<std::vector<double>> phi(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) phi[i][j] = D(i, j) * (1.0 - (1.0 - R) * y[j]);
  return phi;
}

struct ClearingResult {
  std::vector<double> capital;
  std::vector<std::vector<double>> payments;  // realised phi_ij
  IndexSet default_set;
  int iterations = 0;
  double residual = 0;
  std::vector<IndexSet> default_trace;        // default set after each change
};

namespace detail {

inline double proportional_payment(const BankNetwork& net, int i, int j, double kj, double lj) {
  const double d = net.liabilities(i, j);
  if (kj > 0) return d;
  if (lj <= 0) return 0.0;
  return std::max(kj + lj, 0.0) / lj * d;
}

inline std::vector<double> clearing_map(const BankNetwork& net, const std::vector<double>& K,
                                        const std::vector<double>& L) {
  const int n = net.liabilities.size();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double s = net.external_assets[i] - net.external_liabilities[i] - L[i];
    for (int j = 0; j < n; ++j) s += proportional_payment(net, i, j, K[j], L[j]);
    out[i] = s;
  }
  return out;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

enum Regime { Solvent = 0, Partial = 1, Wiped = 2 };

inline Regime regime_of(double k, double l) {
  if (k > 0) return Solvent;
  if (k + l > 0) return Partial;
  return Wiped;
}

// Solves the affine system K = T(K) with every bank's regime frozen.
inline bool solve_in_regime(const BankNetwork& net, const std::vector<double>& L, const std::vector<Regime>& reg,
                            std::vector<double>& K) {
  const int n = net.liabilities.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double s = net.external_assets[i] - net.external_liabilities[i] - L[i];
    for (int j = 0; j < n; ++j) {
      const double d = net.liabilities(i, j);
      if (reg[j] == Solvent) s += d;
      else if (reg[j] == Partial && L[j] > 0) {
        s += d;  // (K_j + L_j)/L_j * d = d + d K_j / L_j
        A(i, j) -= d / L[j];
      }
    }
    b(i) = s;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(b);
  K.assign(sol.data(), sol.data() + n);
  return true;
}

}  // namespace detail

// Greatest clearing fixed point: Picard iteration from the all-solvent state,
// with an exact solve once the default regimes settle.
inline ClearingResult static_clearing_proportional(const BankNetwork& net, double tol = 1e-10, int max_iter = 100000) {
  const int n = net.liabilities.size();
  std::vector<double> L(n);
  for (int j = 0; j < n; ++j) L[j] = net.liabilities.col_sum(j);
  ClearingResult res;
  std::vector<double> K(n);
  for (int i = 0; i < n; ++i) {
    K[i] = net.external_assets[i] - net.external_liabilities[i] - L[i];
    for (int j = 0; j < n; ++j) K[i] += net.liabilities(i, j);
  }
  auto defaults_of = [&](const std::vector<double>& k) {
    IndexSet s;
    for (int j = 0; j < n; ++j)
      if (k[j] <= 0) s = s.with(j);
    return s;
  };
  IndexSet current = defaults_of(K);
  res.default_trace.push_back(current);
  int changes = 0;
  bool done = false;
  for (int it = 1; it <= max_iter && !done; ++it) {
    std::vector<double> next = detail::clearing_map(net, K, L);
    res.iterations = it;
    const double change = detail::sup_diff(next, K);
    K = std::move(next);
    const IndexSet d = defaults_of(K);
    if (!(d == current)) {
      current = d;
      res.default_trace.push_back(d);
      if (++changes > n + 1) break;
    }
    if (change <= tol) {
      done = true;
      break;
    }
    // Polish: the greatest fixed point solves the affine system of its regime.
    std::vector<detail::Regime> reg(n);
    for (int j = 0; j < n; ++j) reg[j] = detail::regime_of(K[j], L[j]);
    std::vector<double> cand;
    if (detail::solve_in_regime(net, L, reg, cand)) {
      bool consistent = true;
      for (int j = 0; j < n; ++j) consistent = consistent && detail::regime_of(cand[j], L[j]) == reg[j];
      if (consistent && detail::sup_diff(detail::clearing_map(net, cand, L), cand) <= tol) {
        K = cand;
        done = true;
      }
    }
  }
  res.residual = detail::sup_diff(detail::clearing_map(net, K, L), K);
  res.capital = K;
  res.default_set = defaults_of(K);
  res.payments.assign(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) res.payments[i][j] = detail::proportional_payment(net, i, j, K[j], L[j]);
  if (res.residual > tol)
    fail(ErrorCode::NoConvergence, "clearing residual " + std::to_string(res.residual) + " after " +
                                       std::to_string(res.iterations) + " iterations and " +
                                       std::to_string(changes) + " default-set changes");
  return res;
}

struct BankDefaultStats {
  double frequency = 0;          // fraction of paths with tau <= T
  double mean_default_time = 0;  // among defaulters; NaN if none
  std::size_t defaults = 0;
};

struct DefaultSummary {
  std::vector<BankDefaultStats> banks;
  std::vector<std::vector<double>> capital_paths;  // per trajectory, [record][bank]
};

inline DefaultSummary default_report(const std::vector<Trajectory>& trajs, const BankNetwork& net) {
  DefaultSummary out;
  if (trajs.empty()) return out;
  const int n = net.liabilities.size();
  out.banks.resize(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> times;
    for (const auto& tr : trajs)
      if (std::isfinite(tr.killing.tau[i])) times.push_back(tr.killing.tau[i]);
    out.banks[i].defaults = times.size();
    out.banks[i].frequency = static_cast<double>(times.size()) / trajs.size();
    out.banks[i].mean_default_time =
        times.empty() ? std::numeric_limits<double>::quiet_NaN() : pairwise_sum(times) / times.size();
  }
  for (const auto& tr : trajs) out.capital_paths.push_back(capital_path(tr, net.liabilities, net.recovery));
  return out;
}

}  // namespace fbsde
