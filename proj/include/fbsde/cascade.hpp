#pragma once

// The decoupling-field family v^{I,i}: storage, evaluation and the
// domain / dead-set / boundary-function operations that tie the levels together.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fbsde/analytic.hpp"
#include "fbsde/error.hpp"
#include "fbsde/grid.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

enum class Method { Fd, Mc, Hybrid };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Fd: return "fd";
    case Method::Mc: return "mc";
    case Method::Hybrid: return "hybrid";
  }
  return "?";
}

struct WalkSpec {
  int steps = 1000;  // steps over the full horizon; a walk from t uses a proportional share
  int paths = 2000;
  std::uint64_t seed = 1;
};

struct BuildInfo {
  Method method = Method::Fd;
  WalkSpec walk;
  double max_level_projection = 0;
  double max_monotone_correction = 0;
  double max_standard_error = 0;
};

class DecouplingField {
 public:
  enum class Kind { Missing, Constant, ClosedForm, Grid };

  DecouplingField(SystemParams params, AdjacencyMatrix net) : params_(params), net_(std::move(net)) {
    require(net_.size() == params_.n_particles, ErrorCode::ShapeMismatch,
            "network size differs from n_particles");
    const std::size_t n_configs = std::size_t{1} << params_.n_particles;
    kinds_.assign(n_configs, Kind::Missing);
    grids_.resize(n_configs);
  }

  const SystemParams& params() const { return params_; }
  const AdjacencyMatrix& network() const { return net_; }
  int n() const { return params_.n_particles; }
  BuildInfo& info() { return info_; }
  const BuildInfo& info() const { return info_; }

  Kind kind(IndexSet I) const { return kinds_[I.bits()]; }
  bool is_built(IndexSet I) const { return kinds_[I.bits()] != Kind::Missing; }
  bool fully_built() const {
    return std::none_of(kinds_.begin(), kinds_.end(), [](Kind k) { return k == Kind::Missing; });
  }
  const FieldGrid* grid(IndexSet I) const { return grids_[I.bits()].get(); }

  // Level 0 (constant 1) and level 1 (closed form) need no solver.
  void install_analytic_levels() {
    kinds_[0] = Kind::Constant;
    for (int i = 0; i < n(); ++i) kinds_[IndexSet::single(i).bits()] = Kind::ClosedForm;
  }

  void install_grid(IndexSet I, FieldGrid g) {
    require(lower_levels_built(I), ErrorCode::LevelNotBuilt,
            "cannot install " + I.str() + " before all of its sub-configurations");
    require(g.config == I, ErrorCode::ShapeMismatch, "grid config mismatch");
    grids_[I.bits()] = std::make_shared<const FieldGrid>(std::move(g));
    kinds_[I.bits()] = Kind::Grid;
  }

  bool lower_levels_built(IndexSet I) const {
    for (int i : I.members())
      if (!is_built(I.without(i))) return false;
    return true;
  }

  // --- core operations; `x` is always a full-length state vector -------------

  double eval(IndexSet I, int i, double t, std::span<const double> x) const {
    if (!I.contains(i)) return 1.0;
    check_time(t);
    switch (kinds_[I.bits()]) {
      case Kind::Missing:
        fail(ErrorCode::LevelNotBuilt, "configuration " + I.str() + " not built");
      case Kind::Constant:
        return 1.0;
      case Kind::ClosedForm:
        return first_passage_prob(t, x[i], net_.row_sum(i), params_.sigma, params_.horizon);
      case Kind::Grid:
        break;
    }
    const IndexSet dead = dead_index_set(I, t, x);
    if (!dead.empty()) return eval(I.without(dead.min_index()), i, t, x);
    const FieldGrid& g = *grids_[I.bits()];
    double v = g.interpolate(g.slot_of(i), t, x);
    // v^I <= v^{I\k} for every k in I; projecting onto it can only reduce the error.
    for (std::uint32_t b = I.bits(); b; b &= b - 1) {
      const int k = std::countr_zero(b);
      if (k != i) v = std::min(v, eval(I.without(k), i, t, x));
    }
    return std::clamp(v, 0.0, 1.0);
  }

  double boundary_threshold(IndexSet I, int i, double t, std::span<const double> x) const {
    if (!I.contains(i)) fail(ErrorCode::InvalidArgument, "particle not in configuration");
    const IndexSet J = I.without(i);
    if (!is_built(J)) fail(ErrorCode::LevelNotBuilt, "configuration " + J.str() + " not built");
    if (net_.row_sum(i) == 0.0) return 0.0;
    double s = 0;
    for (int j = 0; j < n(); ++j) {
      const double d = net_(i, j);
      if (d == 0.0) continue;
      s += d * eval(J, j, t, x);
    }
    return s;
  }

  IndexSet dead_index_set(IndexSet I, double t, std::span<const double> x) const {
    IndexSet dead;
    for (std::uint32_t b = I.bits(); b; b &= b - 1) {
      const int i = std::countr_zero(b);
      if (x[i] <= boundary_threshold(I, i, t, x)) dead = dead.with(i);
    }
    return dead;
  }

  bool domain_contains(IndexSet I, double t, std::span<const double> x) const {
    return dead_index_set(I, t, x).empty();
  }

  double boundary_value(IndexSet I, int i, double t, std::span<const double> x) const {
    const IndexSet dead = dead_index_set(I, t, x);
    require(!dead.empty(), ErrorCode::NotOnOrOutsideBoundary, "point inside the domain of " + I.str());
    return eval(I.without(dead.min_index()), i, t, x);
  }

  // Every candidate boundary value v^{I\l,i}, l dead; they agree for the exact field.
  std::vector<double> boundary_candidates(IndexSet I, int i, double t, std::span<const double> x) const {
    std::vector<double> out;
    for (int l : dead_index_set(I, t, x).members()) out.push_back(eval(I.without(l), i, t, x));
    return out;
  }

  int terminal_value(IndexSet I, int i, std::span<const double> x) const {
    if (!I.contains(i)) return 1;
    return dead_index_set(I, params_.horizon, x).contains(i) ? 1 : 0;
  }

 private:
  void check_time(double t) const {
    require(t >= -1e-12 && t <= params_.horizon + 1e-12, ErrorCode::TimeOutOfRange,
            "t = " + std::to_string(t) + " outside [0, T]");
  }

  SystemParams params_;
  AdjacencyMatrix net_;
  std::vector<Kind> kinds_;
  std::vector<std::shared_ptr<const FieldGrid>> grids_;
  BuildInfo info_;
};

// Free-function spellings used throughout the tools and tests.
inline double eval_field(const DecouplingField& f, IndexSet I, int i, double t, std::span<const double> x) {
  return f.eval(I, i, t, x);
}
inline double boundary_threshold(const DecouplingField& f, IndexSet I, int i, double t,
                                 std::span<const double> x) {
  return f.boundary_threshold(I, i, t, x);
}
inline bool domain_contains(const DecouplingField& f, IndexSet I, double t, std::span<const double> x) {
  return f.domain_contains(I, t, x);
}
inline IndexSet dead_index_set(const DecouplingField& f, IndexSet I, double t, std::span<const double> x) {
  return f.dead_index_set(I, t, x);
}
inline double boundary_value(const DecouplingField& f, IndexSet I, int i, double t,
                             std::span<const double> x) {
  return f.boundary_value(I, i, t, x);
}
inline int terminal_value(const DecouplingField& f, IndexSet I, int i, std::span<const double> x) {
  return f.terminal_value(I, i, x);
}

}  // namespace fbsde
