#pragma once

// Sequential-killing simulation of the particle system driven by a built
// decoupling field, plus the Y/Z extraction and path diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fbsde/cascade.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

struct PathConfig {
  double dt = 1e-3;
  int n_paths = 1;
  std::uint64_t seed = 1;
  InitialData initial;
  int record_stride = 1;  // record every k-th step (the first and last steps always)
};

inline int path_step_count(const SystemParams& params, const PathConfig& cfg) {
  require(cfg.dt > 0, ErrorCode::InvalidArgument, "dt must be > 0");
  const double span = params.horizon - cfg.initial.start_time;
  const double steps = std::round(span / cfg.dt);
  require(steps >= 1 && std::abs(steps * cfg.dt - span) <= 1e-12 * std::max(1.0, span),
          ErrorCode::InvalidArgument, "dt must divide T - start_time");
  return static_cast<int>(steps);
}

struct KillingRecord {
  double rho0 = 0;
  std::vector<double> rho;    // rho_1 <= rho_2 <= ...
  std::vector<int> removed;   // index removed at event n (0-based)
  std::vector<int> step;      // grid step of event n
  std::vector<double> tau;    // per particle, +inf if never killed

  // I_n for n = 0..events
  IndexSet alive_after(int n_events, int n_particles) const {
    IndexSet s = IndexSet::full(n_particles);
    for (int e = 0; e < n_events; ++e) s = s.without(removed[e]);
    return s;
  }
};

struct Trajectory {
  std::uint32_t path_id = 0;
  int n = 0;
  int total_steps = 0;
  std::vector<int> steps;          // recorded grid step indices
  std::vector<double> times;
  std::vector<double> x;           // [record][particle]
  std::vector<std::uint32_t> alive;
  std::vector<double> y;
  std::vector<double> boundary;    // sum_j D_ij Y^j
  KillingRecord killing;

  std::size_t records() const { return steps.size(); }
  double X(std::size_t r, int i) const { return x[r * n + i]; }
  double Y(std::size_t r, int i) const { return y[r * n + i]; }
  double B(std::size_t r, int i) const { return boundary[r * n + i]; }
  // Record index of grid step k, or -1.
  int record_of_step(int k) const {
    auto it = std::lower_bound(steps.begin(), steps.end(), k);
    return it != steps.end() && *it == k ? static_cast<int>(it - steps.begin()) : -1;
  }
};

namespace detail {

// Scan forward from grid step `from` with states `x0` and alive set `alive0`.
inline Trajectory run_path(const DecouplingField& field, const PathConfig& cfg, std::uint32_t path_id,
                           int from, std::vector<double> x, IndexSet alive, bool initial_removals) {
  const SystemParams& P = field.params();
  const AdjacencyMatrix& D = field.network();
  const int n = field.n();
  const int total = path_step_count(P, cfg);
  const double scale = P.sigma * std::sqrt(cfg.dt);
  const int stride = std::max(1, cfg.record_stride);
  Trajectory tr;
  tr.path_id = path_id;
  tr.n = n;
  tr.total_steps = total;
  const double t_from = from == total ? P.horizon : cfg.initial.start_time + from * cfg.dt;
  tr.killing.rho0 = t_from;
  tr.killing.tau.assign(n, std::numeric_limits<double>::infinity());

  IndexSet current = IndexSet::full(n);
  if (initial_removals) {
    // Remove particles outside the initial alive set, smallest index first.
    for (int i = 0; i < n; ++i)
      if (!alive.contains(i)) {
        current = current.without(i);
        tr.killing.rho.push_back(t_from);
        tr.killing.removed.push_back(i);
        tr.killing.step.push_back(from);
        tr.killing.tau[i] = t_from;
      }
  } else {
    current = alive;
  }

  std::vector<NormalStream> z;
  z.reserve(n);
  for (int i = 0; i < n; ++i) {
    z.emplace_back(cfg.seed, Stream::Paths, path_id, 0u, static_cast<std::uint32_t>(i));
    z.back().skip(static_cast<std::uint64_t>(from));
  }

  std::vector<double> yv(n);
  for (int k = from; k <= total; ++k) {
    if (k > from)
      for (int i = 0; i < n; ++i) x[i] += scale * z[i]();
    const double t = k == total ? P.horizon : cfg.initial.start_time + k * cfg.dt;
    for (;;) {
      const IndexSet dead = field.dead_index_set(current, t, x);
      if (dead.empty()) break;
      const int i0 = dead.min_index();
      current = current.without(i0);
      tr.killing.rho.push_back(t);
      tr.killing.removed.push_back(i0);
      tr.killing.step.push_back(k);
      tr.killing.tau[i0] = t;
    }
    if (k == from || k == total || (k - from) % stride == 0) {
      for (int i = 0; i < n; ++i) {
        if (!current.contains(i)) yv[i] = 1.0;
        else if (k == total) yv[i] = 0.0;  // Y_T = 1{tau <= T}
        else yv[i] = field.eval(current, i, t, x);
      }
      tr.steps.push_back(k);
      tr.times.push_back(t);
      tr.alive.push_back(current.bits());
      for (int i = 0; i < n; ++i) {
        tr.x.push_back(x[i]);
        tr.y.push_back(yv[i]);
      }
      for (int i = 0; i < n; ++i) {
        double b = 0;
        for (int j = 0; j < n; ++j) b += D(i, j) * yv[j];
        tr.boundary.push_back(b);
      }
    }
  }
  return tr;
}

}  // namespace detail

inline std::vector<Trajectory> simulate_paths(const DecouplingField& field, const PathConfig& cfg) {
  require(field.fully_built(), ErrorCode::FieldNotBuilt, "decoupling field is not fully built");
  validate_initial_data(field.params(), cfg.initial);
  require(cfg.n_paths >= 1, ErrorCode::InvalidArgument, "n_paths must be >= 1");
  path_step_count(field.params(), cfg);
  std::vector<Trajectory> out(static_cast<std::size_t>(cfg.n_paths));
  parallel_for(out.size(), [&](std::size_t p) {
    out[p] = detail::run_path(field, cfg, static_cast<std::uint32_t>(p), 0, cfg.initial.initial_states,
                              cfg.initial.alive_set, true);
  });
  return out;
}

// Smallest distance x_i - threshold_i over alive particles, per record (+inf when none alive).
inline std::vector<double> boundary_distance(const DecouplingField& field, const Trajectory& tr) {
  std::vector<double> out(tr.records(), std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < tr.records(); ++r) {
    const IndexSet I(tr.alive[r]);
    std::span<const double> x(tr.x.data() + r * tr.n, tr.n);
    for (int i : I.members())
      out[r] = std::min(out[r], x[i] - field.boundary_threshold(I, i, tr.times[r], x));
  }
  return out;
}

inline double default_bump(const DecouplingField& field) {
  double h = 0;
  for (IndexSet I : enumerate_configs(field.n()))
    if (const FieldGrid* g = field.grid(I)) h = std::max(h, g->dx());
  return h > 0 ? 2.0 * h : 1e-4;
}

// Z^{ij} = sigma d/dx_j v^{I_t, i} by central differences, so that dY = Z dW.
// Result: [record][i][j]; zero at T and for j outside the alive set.
inline std::vector<double> z_process(const DecouplingField& field, const Trajectory& tr, double bump) {
  require(bump > 0, ErrorCode::InvalidArgument, "bump must be > 0");
  double spacing = 0;
  for (IndexSet I : enumerate_configs(field.n()))
    if (const FieldGrid* g = field.grid(I)) spacing = std::max(spacing, g->dx());
  if (bump < spacing)
    fail(ErrorCode::BumpTooLargeForGrid, "bump " + std::to_string(bump) + " is below the grid spacing " +
                                             std::to_string(spacing));
  const int n = tr.n;
  const double sigma = field.params().sigma;
  std::vector<double> z(tr.records() * n * n, 0.0);
  std::vector<double> xp(n), xm(n);
  for (std::size_t r = 0; r < tr.records(); ++r) {
    if (tr.steps[r] == tr.total_steps) continue;
    const IndexSet I(tr.alive[r]);
    for (int j : I.members()) {
      for (int a = 0; a < n; ++a) xp[a] = xm[a] = tr.X(r, a);
      xp[j] += bump;
      xm[j] -= bump;
      for (int i : I.members())
        z[(r * n + i) * n + j] =
            sigma * (field.eval(I, i, tr.times[r], xp) - field.eval(I, i, tr.times[r], xm)) / (2 * bump);
    }
  }
  return z;
}

struct ParticleDiagnostics {
  MeanSe increment;       // Y_T - Y_0
  MeanSe half_increment;  // Y at the recorded step nearest the midpoint, minus Y_0
  MeanSe y0;
  MeanSe kill_fraction;   // tau <= T
};

struct MartingaleReport {
  std::size_t paths = 0;
  bool degenerate = false;  // fewer than two paths: standard errors are infinite
  std::vector<ParticleDiagnostics> particles;
};

inline MartingaleReport martingale_diagnostics(const std::vector<Trajectory>& trajs) {
  MartingaleReport rep;
  rep.paths = trajs.size();
  rep.degenerate = trajs.size() < 2;
  if (trajs.empty()) return rep;
  const int n = trajs.front().n;
  rep.particles.resize(n);
  const int total = trajs.front().total_steps;
  for (int i = 0; i < n; ++i) {
    std::vector<double> inc, half, y0, kill;
    for (const auto& tr : trajs) {
      const std::size_t last = tr.records() - 1;
      // nearest recorded step to the midpoint
      std::size_t mid = 0;
      for (std::size_t r = 0; r < tr.records(); ++r)
        if (std::abs(2 * tr.steps[r] - total) < std::abs(2 * tr.steps[mid] - total)) mid = r;
      inc.push_back(tr.Y(last, i) - tr.Y(0, i));
      half.push_back(tr.Y(mid, i) - tr.Y(0, i));
      y0.push_back(tr.Y(0, i));
      kill.push_back(std::isfinite(tr.killing.tau[i]) ? 1.0 : 0.0);
    }
    rep.particles[i] = {mean_and_se(inc), mean_and_se(half), mean_and_se(y0), mean_and_se(kill)};
  }
  return rep;
}

// Re-run the scan from record `restart_record` with that record's states and
// alive set (or `alive_override`), same increments; max |Y difference| afterwards.
inline double flow_property_check(const DecouplingField& field, const PathConfig& cfg, const Trajectory& tr,
                                  std::size_t restart_record, std::optional<IndexSet> alive_override = {}) {
  require(restart_record < tr.records(), ErrorCode::InvalidArgument, "restart record out of range");
  const int k = tr.steps[restart_record];
  std::vector<double> x(tr.x.begin() + restart_record * tr.n, tr.x.begin() + (restart_record + 1) * tr.n);
  const IndexSet alive = alive_override.value_or(IndexSet(tr.alive[restart_record]));
  PathConfig c = cfg;
  c.record_stride = 1;
  const Trajectory re = detail::run_path(field, c, tr.path_id, k, x, alive, false);
  double dev = 0;
  for (std::size_t r = restart_record; r < tr.records(); ++r) {
    const int rr = re.record_of_step(tr.steps[r]);
    if (rr < 0) continue;
    for (int i = 0; i < tr.n; ++i) dev = std::max(dev, std::abs(tr.Y(r, i) - re.Y(rr, i)));
  }
  return dev;
}

}  // namespace fbsde
