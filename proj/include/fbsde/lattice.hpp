#pragma once

// Discrete analogue of the particle system: independent +-sigma sqrt(dt) walks,
// hit flags carried in the state, and the monotone map Psi iterated to its
// greatest fixed point.
//
// State (k, j, h): step k, per-particle up-move counts j in [0,k]^N, and the set h
// of particles already hit *before* the kill check at step k. Values are
// pre-check, so Y(k, x, h) plays the role of v^{not h}(t_k, x) including the
// boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fbsde/cascade.hpp"
#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

struct LatticeSpec {
  InitialData initial;
  int time_steps = 1;
  double dt = 1.0;
  double step = 1.0;          // sigma sqrt(dt)
  std::vector<int> offsets;   // integer lattice offset of each particle at step 0
};

inline LatticeSpec make_lattice_spec(const SystemParams& params, const InitialData& initial, int m) {
  validate_initial_data(params, initial);
  require(m >= 1, ErrorCode::InvalidArgument, "lattice needs M >= 1");
  require(initial.start_time < params.horizon, ErrorCode::TimeOutOfRange, "start_time must be < T");
  LatticeSpec s;
  s.initial = initial;
  s.time_steps = m;
  s.dt = (params.horizon - initial.start_time) / m;
  s.step = params.sigma * std::sqrt(s.dt);
  s.offsets.assign(params.n_particles, 0);
  return s;
}

inline int lattice_n(const LatticeSpec& s) { return static_cast<int>(s.initial.initial_states.size()); }

inline std::size_t lattice_state_count(int n, int m) {
  long double total = 0;
  for (int k = 0; k <= m; ++k) total += std::pow(static_cast<long double>(k + 1), n) * std::pow(2.0L, n);
  return total > 1e18L ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(total);
}

class LatticeField {
 public:
  LatticeField() = default;
  LatticeField(int n, int m, double fill) : n_(n), m_(m) {
    layers_.resize(m + 1);
    for (int k = 0; k <= m; ++k) layers_[k].assign(nodes(k) * flags() * n, fill);
  }

  int n() const { return n_; }
  int steps() const { return m_; }
  std::size_t nodes(int k) const {
    std::size_t c = 1;
    for (int a = 0; a < n_; ++a) c *= static_cast<std::size_t>(k + 1);
    return c;
  }
  std::size_t flags() const { return std::size_t{1} << n_; }
  std::size_t states(int k) const { return nodes(k) * flags(); }

  double& at(int k, std::size_t node, std::uint32_t h, int i) {
    return layers_[k][(node * flags() + h) * n_ + i];
  }
  double at(int k, std::size_t node, std::uint32_t h, int i) const {
    return layers_[k][(node * flags() + h) * n_ + i];
  }
  const std::vector<double>& layer(int k) const { return layers_[k]; }

  // Node index of the up-count vector j at step k (particle 0 slowest).
  std::size_t node_index(int k, std::span<const int> j) const {
    std::size_t idx = 0;
    for (int a = 0; a < n_; ++a) idx = idx * (k + 1) + j[a];
    return idx;
  }
  void node_counts(int k, std::size_t node, std::span<int> j) const {
    for (int a = n_ - 1; a >= 0; --a) {
      j[a] = static_cast<int>(node % (k + 1));
      node /= (k + 1);
    }
  }

  // Relevance mask (states that the root value depends on); empty = all relevant.
  std::vector<std::vector<std::uint8_t>> relevant;
  bool is_relevant(int k, std::size_t node, std::uint32_t h) const {
    return relevant.empty() || relevant[k][node * flags() + h];
  }

 private:
  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<double>> layers_;
};

inline double lattice_position(const LatticeSpec& s, int i, int k, int j) {
  return s.initial.initial_states[i] + (s.offsets[i] + 2 * j - k) * s.step;
}

inline double lattice_time(const LatticeSpec& s, int k) { return s.initial.start_time + k * s.dt; }

inline std::uint32_t initial_flags(const LatticeSpec& s) {
  return IndexSet::full(lattice_n(s)).minus(s.initial.alive_set).bits();
}

namespace detail {

// Least fixed point of h -> h_pre u { i : x_i <= sum_l D_il Y(k, x, h u {i}) },
// which is also the repeated removal of dead particles within one step.
// `visit` sees every hypothetical state read from Y.
template <class Visit>
std::uint32_t kill_cascade(const AdjacencyMatrix& D, const LatticeField& Y, int k, std::size_t node,
                           std::span<const double> x, std::uint32_t h, Visit&& visit) {
  const int n = Y.n();
  const std::uint32_t all = static_cast<std::uint32_t>(Y.flags() - 1);
  for (;;) {
    std::uint32_t add = 0;
    for (int i = 0; i < n; ++i) {
      if ((h >> i) & 1u) continue;
      const std::uint32_t hi = h | (1u << i);
      visit(hi);
      double thr = 0;
      for (int l = 0; l < n; ++l) {
        const double d = D(i, l);
        if (d != 0.0) thr += d * Y.at(k, node, hi, l);
      }
      if (x[i] <= thr) add |= 1u << i;
    }
    if (!add) return h;
    h |= add;
    if (h == all) return h;
  }
}

inline void check_budget(const LatticeSpec& s, std::size_t budget) {
  const std::size_t count = lattice_state_count(lattice_n(s), s.time_steps);
  if (count > budget)
    fail(ErrorCode::StateSpaceExceeded,
         std::to_string(count) + " lattice states exceed the budget of " + std::to_string(budget));
}

}  // namespace detail

inline constexpr std::size_t kDefaultLatticeBudget = 20'000'000;

// One application of Psi: kill times computed against Y_prev, then exact
// backward induction for the conditional kill probabilities.
inline LatticeField psi_map(const LatticeSpec& s, const AdjacencyMatrix& D, const LatticeField& y_prev,
                            std::size_t budget = kDefaultLatticeBudget) {
  detail::check_budget(s, budget);
  const int n = lattice_n(s), m = s.time_steps;
  require(D.size() == n && y_prev.n() == n && y_prev.steps() == m, ErrorCode::ShapeMismatch,
          "lattice field shape does not match the spec");
  LatticeField out(n, m, 0.0);
  const std::uint32_t n_flags = static_cast<std::uint32_t>(out.flags());
  const double inv_moves = 1.0 / n_flags;
  for (int k = m; k >= 0; --k) {
    parallel_for(out.nodes(k), [&](std::size_t node) {
      int j[kMaxParticles], jn[kMaxParticles];
      double x[kMaxParticles];
      out.node_counts(k, node, std::span<int>(j, n));
      for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
      for (std::uint32_t h = 0; h < n_flags; ++h) {
        const std::uint32_t hp = detail::kill_cascade(D, y_prev, k, node, std::span<const double>(x, n), h,
                                                      [](std::uint32_t) {});
        for (int i = 0; i < n; ++i) {
          double v;
          if ((hp >> i) & 1u) {
            v = 1.0;
          } else if (k == m) {
            v = 0.0;
          } else {
            double acc = 0;
            for (std::uint32_t mv = 0; mv < n_flags; ++mv) {
              for (int a = 0; a < n; ++a) jn[a] = j[a] + static_cast<int>((mv >> a) & 1u);
              acc += out.at(k + 1, out.node_index(k + 1, std::span<const int>(jn, n)), hp, i);
            }
            v = acc * inv_moves;
          }
          out.at(k, node, h, i) = v;
        }
      }
    });
  }
  return out;
}

// States the root value of Psi(Y) depends on: everything reachable from the
// root under Y's kill dynamics, closed under the hypothetical states read for
// thresholds.
inline std::vector<std::vector<std::uint8_t>> relevant_states(const LatticeSpec& s, const AdjacencyMatrix& D,
                                                               const LatticeField& Y) {
  const int n = lattice_n(s), m = s.time_steps;
  std::vector<std::vector<std::uint8_t>> mark(m + 1);
  for (int k = 0; k <= m; ++k) mark[k].assign(Y.states(k), 0);
  const std::uint32_t n_flags = static_cast<std::uint32_t>(Y.flags());
  mark[0][initial_flags(s)] = 1;  // root node index is 0
  int j[kMaxParticles], jn[kMaxParticles];
  double x[kMaxParticles];
  for (int k = 0; k <= m; ++k) {
    // Hypothetical states live on the same layer and only ever add flags, so
    // one sweep in increasing h order closes the layer.
    for (std::size_t node = 0; node < Y.nodes(k); ++node) {
      Y.node_counts(k, node, std::span<int>(j, n));
      for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
      for (std::uint32_t h = 0; h < n_flags; ++h) {
        if (!mark[k][node * n_flags + h]) continue;
        const std::uint32_t hp = detail::kill_cascade(
            D, Y, k, node, std::span<const double>(x, n), h,
            [&](std::uint32_t hyp) { mark[k][node * n_flags + hyp] = 1; });
        if (k == m) continue;
        for (std::uint32_t mv = 0; mv < n_flags; ++mv) {
          for (int a = 0; a < n; ++a) jn[a] = j[a] + static_cast<int>((mv >> a) & 1u);
          mark[k + 1][Y.node_index(k + 1, std::span<const int>(jn, n)) * n_flags + hp] = 1;
        }
      }
    }
  }
  return mark;
}

struct IterationReport {
  int iterations_used = 0;
  std::vector<double> sup_decrements;  // per iteration: max of (previous - new) over relevant states
  bool converged = false;
  bool monotone = true;                // every iterate ordered against its predecessor, everywhere
  LatticeField fixed_point;
  std::vector<LatticeField> history;   // Y^0, Y^1, ... when requested
};

class IterationError : public Error {
 public:
  IterationError(const std::string& msg, std::shared_ptr<IterationReport> partial)
      : Error(ErrorCode::MaxIterExceeded, msg), partial_(std::move(partial)) {}
  const IterationReport& partial() const { return *partial_; }

 private:
  std::shared_ptr<IterationReport> partial_;
};

namespace detail {

// direction = +1: from above (iterates must not increase); -1: from below.
inline IterationReport iterate_psi(const LatticeSpec& s, const AdjacencyMatrix& D, int max_iter, double start,
                                   int direction, bool keep_history, std::size_t budget) {
  require(max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be >= 1");
  check_budget(s, budget);
  const int n = lattice_n(s), m = s.time_steps;
  IterationReport rep;
  LatticeField y(n, m, start);
  if (keep_history) rep.history.push_back(y);
  for (int it = 1; it <= max_iter; ++it) {
    LatticeField next = psi_map(s, D, y, budget);
    const auto rel = relevant_states(s, D, y);
    double dec = 0;
    bool same = true;
    for (int k = 0; k <= m; ++k) {
      const auto& a = y.layer(k);
      const auto& b = next.layer(k);
      for (std::size_t idx = 0; idx < a.size(); ++idx) {
        const double diff = direction * (a[idx] - b[idx]);
        if (diff < 0) rep.monotone = false;
        if (rel[k][idx / n]) {
          dec = std::max(dec, std::abs(a[idx] - b[idx]));
          if (a[idx] != b[idx]) same = false;
        }
      }
    }
    rep.sup_decrements.push_back(dec);
    rep.iterations_used = it;
    if (keep_history) rep.history.push_back(next);
    if (same) {
      next.relevant = rel;
      rep.fixed_point = std::move(next);
      rep.converged = true;
      return rep;
    }
    y = std::move(next);
  }
  y.relevant = relevant_states(s, D, y);
  rep.fixed_point = std::move(y);
  throw IterationError("no fixed point after " + std::to_string(max_iter) + " iterations",
                       std::make_shared<IterationReport>(std::move(rep)));
}

}  // namespace detail

// Psi iterated from Y = 1; the iterates decrease to the greatest fixed point.
inline IterationReport tarski_from_above(const LatticeSpec& s, const AdjacencyMatrix& D, int max_iter,
                                         bool keep_history = false,
                                         std::size_t budget = kDefaultLatticeBudget) {
  IterationReport rep = detail::iterate_psi(s, D, max_iter, 1.0, +1, keep_history, budget);
  require(rep.monotone, ErrorCode::NoConvergence, "Psi iterates from above increased somewhere");
  return rep;
}

// Experimental: Psi iterated from Y = 0. Monotonicity is reported, not asserted,
// and the limit is not claimed to solve anything.
inline IterationReport iterate_from_below(const LatticeSpec& s, const AdjacencyMatrix& D, int max_iter,
                                          bool keep_history = false,
                                          std::size_t budget = kDefaultLatticeBudget) {
  return detail::iterate_psi(s, D, max_iter, 0.0, -1, keep_history, budget);
}

// Root value after the kill check at the initial data.
inline std::vector<double> lattice_initial_values(const LatticeSpec& s, const LatticeField& y) {
  std::vector<double> out(lattice_n(s));
  for (int i = 0; i < lattice_n(s); ++i) out[i] = y.at(0, 0, initial_flags(s), i);
  return out;
}

// Sub-lattice started at (k, j, h) of `s`; positions coincide bit-for-bit.
inline LatticeSpec restart_spec(const LatticeSpec& s, int k, std::span<const int> j, std::uint32_t h) {
  require(k >= 0 && k < s.time_steps, ErrorCode::InvalidArgument, "restart step outside [0, M)");
  LatticeSpec r = s;
  r.time_steps = s.time_steps - k;
  r.initial.start_time = lattice_time(s, k);
  for (int i = 0; i < lattice_n(s); ++i) r.offsets[i] = s.offsets[i] + 2 * j[i] - k;
  r.initial.alive_set = IndexSet::full(lattice_n(s)).minus(IndexSet(h));
  return r;
}

// Decoupling field sampled at every lattice state: Y(k, x, h) = v^{not h}(t_k, x).
inline LatticeField sample_field_on_lattice(const LatticeSpec& s, const DecouplingField& field) {
  const int n = lattice_n(s), m = s.time_steps;
  LatticeField out(n, m, 0.0);
  std::vector<int> j(n);
  std::vector<double> x(n);
  const IndexSet all = IndexSet::full(n);
  for (int k = 0; k <= m; ++k)
    for (std::size_t node = 0; node < out.nodes(k); ++node) {
      out.node_counts(k, node, j);
      for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
      for (std::uint32_t h = 0; h < out.flags(); ++h)
        for (int i = 0; i < n; ++i)
          out.at(k, node, h, i) = field.eval(all.minus(IndexSet(h)), i, std::min(lattice_time(s, k), field.params().horizon), x);
    }
  return out;
}

struct LatticeComparison {
  double max_abs_diff = 0;
  int k = -1;
  std::vector<double> x;
  int particle = -1;
  std::size_t nodes_compared = 0;
};

// Max |Y(k, x, no flags) - v^{[N]}(t_k, x)| over relevant all-alive states with k <= max_step
// (max_step < 0: every step).
inline LatticeComparison compare_to_cascade(const LatticeField& fp, const LatticeSpec& s,
                                            const DecouplingField& field, int max_step = -1) {
  const int n = lattice_n(s);
  require(fp.n() == n && fp.steps() == s.time_steps && field.n() == n, ErrorCode::ShapeMismatch,
          "lattice and field dimensions differ");
  require(s.initial.alive_set == IndexSet::full(n), ErrorCode::ShapeMismatch,
          "comparison needs every particle alive initially");
  const IndexSet all = IndexSet::full(n);
  const int last = max_step < 0 ? s.time_steps : std::min(max_step, s.time_steps);
  LatticeComparison c;
  std::vector<int> j(n);
  std::vector<double> x(n);
  for (int k = 0; k <= last; ++k)
    for (std::size_t node = 0; node < fp.nodes(k); ++node) {
      if (!fp.is_relevant(k, node, 0)) continue;
      fp.node_counts(k, node, j);
      for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
      const double t = std::min(lattice_time(s, k), field.params().horizon);
      ++c.nodes_compared;
      for (int i = 0; i < n; ++i) {
        const double diff = std::abs(fp.at(k, node, 0, i) - field.eval(all, i, t, x));
        if (diff > c.max_abs_diff || c.k < 0) {
          c.max_abs_diff = std::max(c.max_abs_diff, diff);
          c.k = k;
          c.x = x;
          c.particle = i;
        }
      }
    }
  return c;
}

// Largest violation of Y(k,x,h) = 1{h'_i} or mean over moves of Y(k+1, x', h'),
// with h' the kill cascade computed against Y itself, over relevant states.
inline double tower_residual(const LatticeSpec& s, const AdjacencyMatrix& D, const LatticeField& y) {
  const int n = lattice_n(s), m = s.time_steps;
  const std::uint32_t n_flags = static_cast<std::uint32_t>(y.flags());
  double worst = 0;
  std::vector<int> j(n), jn(n);
  std::vector<double> x(n);
  for (int k = 0; k <= m; ++k)
    for (std::size_t node = 0; node < y.nodes(k); ++node) {
      y.node_counts(k, node, j);
      for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
      for (std::uint32_t h = 0; h < n_flags; ++h) {
        if (!y.is_relevant(k, node, h)) continue;
        const std::uint32_t hp = detail::kill_cascade(D, y, k, node, x, h, [](std::uint32_t) {});
        for (int i = 0; i < n; ++i) {
          double expect;
          if ((hp >> i) & 1u) expect = 1.0;
          else if (k == m) expect = 0.0;
          else {
            std::vector<double> terms;
            for (std::uint32_t mv = 0; mv < n_flags; ++mv) {
              for (int a = 0; a < n; ++a) jn[a] = j[a] + static_cast<int>((mv >> a) & 1u);
              terms.push_back(y.at(k + 1, y.node_index(k + 1, jn), hp, i));
            }
            expect = pairwise_sum(terms) / n_flags;
          }
          worst = std::max(worst, std::abs(expect - y.at(k, node, h, i)));
        }
      }
    }
  return worst;
}

// Kill step of every particle along one lattice path (moves[k] = up-bit mask
// for step k -> k+1), with thresholds read from Y. M+1 marks "never".
inline std::vector<int> lattice_hit_steps(const LatticeSpec& s, const AdjacencyMatrix& D, const LatticeField& y,
                                          std::span<const std::uint32_t> moves) {
  const int n = lattice_n(s), m = s.time_steps;
  std::vector<int> hit(n, m + 1), j(n, 0);
  std::vector<double> x(n);
  std::uint32_t h = initial_flags(s);
  for (int i = 0; i < n; ++i)
    if ((h >> i) & 1u) hit[i] = 0;
  for (int k = 0; k <= m; ++k) {
    for (int i = 0; i < n; ++i) x[i] = lattice_position(s, i, k, j[i]);
    const std::uint32_t hp = detail::kill_cascade(D, y, k, y.node_index(k, j), x, h, [](std::uint32_t) {});
    for (int i = 0; i < n; ++i)
      if (((hp & ~h) >> i) & 1u) hit[i] = k;
    h = hp;
    if (k < m)
      for (int i = 0; i < n; ++i) j[i] += static_cast<int>((moves[k] >> i) & 1u);
  }
  return hit;
}

}  // namespace fbsde
