#pragma once

// Level solvers (finite differences, Feynman-Kac Monte Carlo), the level-by-level
// build, and boundary geometry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fbsde/cascade.hpp"
#include "fbsde/parallel.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

inline std::vector<double> make_axis(const GridSpec& spec, int nodes) {
  std::vector<double> ax(static_cast<std::size_t>(nodes));
  for (int j = 0; j < nodes; ++j)
    ax[j] = spec.space_min + (spec.space_max - spec.space_min) * j / (nodes - 1);
  ax.back() = spec.space_max;
  return ax;
}

inline FieldGrid empty_grid(const DecouplingField& field, IndexSet I, const GridSpec& spec,
                            const char* method) {
  FieldGrid g;
  g.spec = spec;
  g.spec.config = I;
  g.config = I;
  g.members = I.members();
  g.times = make_time_grid(field.params().horizon, spec.time_steps, spec.terminal_refinement);
  g.axis = make_axis(spec, spec.space_steps);
  g.values.assign(g.times.size() * g.nodes_per_layer() * g.dim(), 0.0);
  g.method = method;
  return g;
}

// Projection onto v^I <= min_k v^{I\k} at in-domain nodes, then the monotone
// (nonincreasing in every coordinate and in t) upper envelope.
inline void finalize_grid(const DecouplingField& field, FieldGrid& g) {
  const int d = g.dim();
  const std::size_t per = g.nodes_per_layer();
  const IndexSet I = g.config;
  std::vector<double> x(field.n(), 0.0);
  std::vector<int> idx(d);
  double cut = 0;
  for (std::size_t k = 0; k < g.times.size(); ++k) {
    const double t = g.times[k];
    for (std::size_t node = 0; node < per; ++node) {
      g.node_coords(node, idx);
      for (int a = 0; a < d; ++a) x[g.members[a]] = g.axis[idx[a]];
      for (int s = 0; s < d; ++s) g.at(k, node, s) = std::clamp(g.at(k, node, s), 0.0, 1.0);
      if (!field.domain_contains(I, t, x)) continue;
      for (int s = 0; s < d; ++s) {
        double bound = 1.0;
        for (int m : g.members)
          if (m != g.members[s]) bound = std::min(bound, field.eval(I.without(m), g.members[s], t, x));
        double& v = g.at(k, node, s);
        if (v > bound) {
          cut = std::max(cut, v - bound);
          v = bound;
        }
      }
    }
  }
  g.level_projection = cut;

  double lift = 0;
  const std::size_t n = g.axis.size();
  std::size_t stride = 1;
  for (int a = d - 1; a >= 0; --a) {
    // Sweep from the top of axis a downward so each node sees the already
    // corrected node above it.
    for (std::size_t k = 0; k < g.times.size(); ++k)
      for (std::size_t node = per; node-- > 0;) {
        if ((node / stride) % n == n - 1) continue;
        for (int s = 0; s < d; ++s) {
          double& v = g.at(k, node, s);
          const double above = g.at(k, node + stride, s);
          if (above > v) {
            lift = std::max(lift, above - v);
            v = above;
          }
        }
      }
    stride *= n;
  }
  for (std::size_t k = g.times.size() - 1; k-- > 0;)
    for (std::size_t node = 0; node < per; ++node)
      for (int s = 0; s < d; ++s) {
        double& v = g.at(k, node, s);
        const double later = g.at(k + 1, node, s);
        if (later > v) {
          lift = std::max(lift, later - v);
          v = later;
        }
      }
  g.monotone_correction = lift;
}

// Explicit backward scheme for the heat equation on the domain of I, with the
// boundary functions imposed at every sub-step. The scheme runs on a lattice
// `spec.refinement` times finer than the stored one.
inline FieldGrid solve_level_fd(const DecouplingField& field, IndexSet I, const GridSpec& spec_in,
                                long long substep_budget = 20'000'000) {
  const int d = I.size();
  require(d >= 1, ErrorCode::InvalidArgument, "empty configuration has no PDE");
  if (d > 2) fail(ErrorCode::DimensionUnsupported, "finite differences support |I| <= 2, got " + I.str());
  require(field.lower_levels_built(I), ErrorCode::LevelNotBuilt, "lower levels of " + I.str());
  GridSpec spec = spec_in;
  spec.config = I;
  validate_grid_spec(spec, field.params(), field.network());

  FieldGrid g = empty_grid(field, I, spec, "fd");
  const double sigma = field.params().sigma;
  const int f = spec.refinement;
  const int nf = (spec.space_steps - 1) * f + 1;
  const std::vector<double> xf = make_axis(spec, nf);
  const double dxf = (spec.space_max - spec.space_min) / (nf - 1);
  const double dt_max = dxf * dxf / (2.0 * d * sigma * sigma);

  long long total = 0;
  for (std::size_t k = 0; k + 1 < g.times.size(); ++k)
    total += static_cast<long long>(std::ceil((g.times[k + 1] - g.times[k]) / dt_max - 1e-9));
  if (total > substep_budget)
    fail(ErrorCode::StabilityViolation,
         "stable time step needs " + std::to_string(total) + " sub-steps (budget " +
             std::to_string(substep_budget) + ")");

  const std::size_t nodes = d == 1 ? nf : static_cast<std::size_t>(nf) * nf;
  const int m_other = d == 1 ? 1 : nf;
  std::vector<double> v(nodes * d), w(nodes * d);
  // thr[s][m]: threshold of slot s given the other coordinate at fine node m.
  // bv[s0][s][m]: boundary value of slot s when slot s0 is the minimal dead one.
  std::vector<double> thr(static_cast<std::size_t>(d) * m_other);
  std::vector<double> bv(static_cast<std::size_t>(d) * d * m_other);

  auto fill_tables = [&](double t) {
    parallel_for(static_cast<std::size_t>(m_other), [&](std::size_t m) {
      std::vector<double> x(field.n(), 0.0);
      for (int s = 0; s < d; ++s) {
        if (d == 2) x[g.members[1 - s]] = xf[m];
        thr[s * m_other + m] = field.boundary_threshold(I, g.members[s], t, x);
        for (int s2 = 0; s2 < d; ++s2)
          bv[(s * d + s2) * m_other + m] =
              s2 == s ? 1.0 : field.eval(I.without(g.members[s]), g.members[s2], t, x);
      }
    });
  };
  // Returns the minimal dead slot at fine node (p, q), or -1.
  auto dead_slot = [&](int p, int q) {
    if (d == 1) return xf[p] <= thr[0] ? 0 : -1;
    if (xf[p] <= thr[q]) return 0;
    if (xf[q] <= thr[m_other + p]) return 1;
    return -1;
  };
  // The dead set is a down-set, so only the lower neighbour along an axis can be
  // dead. Instead of its (staircase) value, use the ghost obtained by linear
  // extrapolation through the boundary crossing (value u_b at distance theta*h)
  // and the opposite neighbour: g = (2 u_b - (1 - theta) u_opp) / (1 + theta).
  // All stencil weights stay non-negative, so the stability bound is unchanged.
  auto ghost = [&](int axis, int p, int q, int s, double u_opp) {
    double theta = 2.0, ub = 0.0;
    if (d == 1) {
      theta = (xf[p] - thr[0]) / dxf;
      ub = bv[s];
    } else {
      const int own = axis;        // slot moving along this axis
      const int other = 1 - axis;  // slot whose threshold varies along it
      const int i_here = axis == 0 ? p : q;      // position along the axis
      const int i_across = axis == 0 ? q : p;    // fixed coordinate
      const double x_here = xf[i_here], x_across = xf[i_across];
      // own threshold: depends on the fixed coordinate only
      if (x_here - dxf <= thr[own * m_other + i_across]) {
        theta = (x_here - thr[own * m_other + i_across]) / dxf;
        ub = bv[(own * d + s) * m_other + i_across];
      }
      // other slot: x_across <= thr_other(x), crossed between i_here - 1 and i_here
      const double t_lo = thr[other * m_other + i_here - 1], t_hi = thr[other * m_other + i_here];
      if (x_across <= t_lo && t_lo > t_hi) {
        const double frac = (t_lo - x_across) / (t_lo - t_hi);  // crossing at x_here - (1 - frac) h
        const double th = 1.0 - frac;
        if (th < theta) {
          theta = th;
          const double b_lo = bv[(other * d + s) * m_other + i_here - 1], b_hi = bv[(other * d + s) * m_other + i_here];
          ub = b_lo + frac * (b_hi - b_lo);
        }
      }
      if (theta > 1.0) return u_opp;  // not reached: the neighbour is dead
    }
    theta = std::clamp(theta, 1e-12, 1.0);
    return (2.0 * ub - (1.0 - theta) * u_opp) / (1.0 + theta);
  };
  auto impose_boundary = [&](std::vector<double>& u) {
    const int rows = nf;
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t pp) {
      const int p = static_cast<int>(pp);
      const int qn = d == 1 ? 1 : nf;
      for (int q = 0; q < qn; ++q) {
        const int s0 = dead_slot(p, q);
        if (s0 < 0) continue;
        const std::size_t node = d == 1 ? p : static_cast<std::size_t>(p) * nf + q;
        const int m = d == 1 ? 0 : (s0 == 0 ? q : p);
        for (int s = 0; s < d; ++s) u[node * d + s] = bv[(s0 * d + s) * m_other + m];
      }
    });
  };
  auto store = [&](std::size_t layer) {
    const std::size_t n = spec.space_steps;
    if (d == 1) {
      for (std::size_t j = 0; j < n; ++j) g.at(layer, j, 0) = v[j * f];
    } else {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          for (int s = 0; s < 2; ++s)
            g.at(layer, a * n + b, s) = v[((a * f) * nf + b * f) * 2 + s];
    }
  };

  // Terminal layer: indicator of membership in the dead set.
  const double T = field.params().horizon;
  fill_tables(T);
  for (int p = 0; p < nf; ++p)
    for (int q = 0; q < (d == 1 ? 1 : nf); ++q) {
      const std::size_t node = d == 1 ? p : static_cast<std::size_t>(p) * nf + q;
      const bool dead0 = d == 1 ? xf[p] <= thr[0] : xf[p] <= thr[q];
      const bool dead1 = d == 2 && xf[q] <= thr[m_other + p];
      v[node * d] = dead0 ? 1.0 : 0.0;
      if (d == 2) v[node * d + 1] = dead1 ? 1.0 : 0.0;
    }
  store(g.times.size() - 1);

  for (std::size_t k = g.times.size() - 1; k-- > 0;) {
    const double gap = g.times[k + 1] - g.times[k];
    const long long nsub = std::max<long long>(1, static_cast<long long>(std::ceil(gap / dt_max - 1e-9)));
    const double dt = gap / nsub;
    const double r = sigma * sigma * dt / (2.0 * dxf * dxf);
    for (long long sub = 1; sub <= nsub; ++sub) {
      const double t_new = sub == nsub ? g.times[k] : g.times[k + 1] - sub * dt;
      if (d == 1) {
        for (int p = 0; p < nf; ++p) {
          const int pm = p > 0 ? p - 1 : 1, pp = p < nf - 1 ? p + 1 : nf - 2;
          const double lo = p > 0 && dead_slot(pm, 0) >= 0 ? ghost(0, p, 0, 0, v[pp]) : v[pm];
          w[p] = v[p] + r * (lo + v[pp] - 2.0 * v[p]);
        }
      } else {
        parallel_for(static_cast<std::size_t>(nf), [&](std::size_t prow) {
          const int p = static_cast<int>(prow);
          const int pm = p > 0 ? p - 1 : 1, pp = p < nf - 1 ? p + 1 : nf - 2;
          for (int q = 0; q < nf; ++q) {
            const int qm = q > 0 ? q - 1 : 1, qp = q < nf - 1 ? q + 1 : nf - 2;
            const std::size_t c = (static_cast<std::size_t>(p) * nf + q) * 2;
            const std::size_t up = (static_cast<std::size_t>(pp) * nf + q) * 2;
            const std::size_t dn = (static_cast<std::size_t>(pm) * nf + q) * 2;
            const std::size_t rt = (static_cast<std::size_t>(p) * nf + qp) * 2;
            const std::size_t lf = (static_cast<std::size_t>(p) * nf + qm) * 2;
            if (dead_slot(p, q) >= 0) continue;  // overwritten below
            const bool dn_dead = p > 0 && dead_slot(pm, q) >= 0;
            const bool lf_dead = q > 0 && dead_slot(p, qm) >= 0;
            for (int s = 0; s < 2; ++s) {
              const double vd = dn_dead ? ghost(0, p, q, s, v[up + s]) : v[dn + s];
              const double vl = lf_dead ? ghost(1, p, q, s, v[rt + s]) : v[lf + s];
              w[c + s] = v[c + s] + r * (v[up + s] + vd + v[rt + s] + vl - 4.0 * v[c + s]);
            }
          }
        });
      }
      fill_tables(t_new);
      impose_boundary(w);
      v.swap(w);
    }
    store(k);
  }
  finalize_grid(field, g);
  return g;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct McPoint {
  double t = 0;
  std::vector<double> x;  // full-length state vector
};

// Per point: (estimate, standard error) for each member of I, in ascending particle order.
using McResult = std::vector<McEstimate>;

// Feynman-Kac: run |I|-dimensional walks from (t, x) until the first grid time at
// which some particle of I is dead, and average the boundary value found there.
inline std::vector<McResult> solve_level_mc(const DecouplingField& field, IndexSet I,
                                            const std::vector<McPoint>& points, const WalkSpec& walk) {
  require(walk.steps >= 1 && walk.paths >= 1, ErrorCode::InvalidArgument, "walk needs steps, paths >= 1");
  require(field.lower_levels_built(I), ErrorCode::LevelNotBuilt, "lower levels of " + I.str());
  const auto members = I.members();
  const int d = static_cast<int>(members.size());
  const double T = field.params().horizon;
  const double sigma = field.params().sigma;
  const std::uint64_t seed = mix_seed(walk.seed, I.bits());
  std::vector<McResult> out(points.size(), McResult(d));

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const McPoint& pt = points[pi];
    require(static_cast<int>(pt.x.size()) == field.n(), ErrorCode::StateCountMismatch, "probe dimension");
    const IndexSet dead0 = field.dead_index_set(I, pt.t, pt.x);
    if (!dead0.empty()) {
      for (int s = 0; s < d; ++s)
        out[pi][s] = {field.eval(I.without(dead0.min_index()), members[s], pt.t, pt.x), 0.0};
      continue;
    }
    if (pt.t >= T) continue;  // inside the domain at T: value 0
    const int steps = std::max(1, static_cast<int>(std::ceil(walk.steps * (T - pt.t) / T - 1e-9)));
    const double dt = (T - pt.t) / steps;
    const double scale = sigma * std::sqrt(dt);
    std::vector<double> samples(static_cast<std::size_t>(walk.paths) * d, 0.0);
    parallel_for(static_cast<std::size_t>(walk.paths), [&](std::size_t path) {
      std::vector<double> x = pt.x;
      std::vector<NormalStream> z;
      z.reserve(d);
      for (int s = 0; s < d; ++s)
        z.emplace_back(seed, Stream::LevelMc, static_cast<std::uint32_t>(path),
                       static_cast<std::uint32_t>(pi), static_cast<std::uint32_t>(members[s]));
      for (int k = 1; k <= steps; ++k) {
        for (int s = 0; s < d; ++s) x[members[s]] += scale * z[s]();
        const double t = k == steps ? T : pt.t + k * dt;
        const IndexSet dead = field.dead_index_set(I, t, x);
        if (!dead.empty()) {
          const IndexSet J = I.without(dead.min_index());
          for (int s = 0; s < d; ++s) samples[path * d + s] = field.eval(J, members[s], t, x);
          return;
        }
      }
    });
    for (int s = 0; s < d; ++s) {
      std::vector<double> col(walk.paths);
      for (int p = 0; p < walk.paths; ++p) col[p] = samples[static_cast<std::size_t>(p) * d + s];
      const MeanSe ms = mean_and_se(col);
      out[pi][s] = {ms.mean, walk.paths > 1 ? ms.se : 0.0};
    }
  }
  return out;
}

// Fills a level grid node by node with the Monte Carlo solver.
inline FieldGrid solve_level_mc_grid(const DecouplingField& field, IndexSet I, const GridSpec& spec_in,
                                     const WalkSpec& walk) {
  GridSpec spec = spec_in;
  spec.config = I;
  validate_grid_spec(spec, field.params(), field.network());
  FieldGrid g = empty_grid(field, I, spec, "mc");
  const int d = g.dim();
  const std::size_t per = g.nodes_per_layer();
  std::vector<McPoint> pts;
  pts.reserve(per * g.times.size());
  std::vector<int> idx(d);
  for (std::size_t k = 0; k < g.times.size(); ++k)
    for (std::size_t node = 0; node < per; ++node) {
      McPoint p{g.times[k], std::vector<double>(field.n(), 0.0)};
      g.node_coords(node, idx);
      for (int a = 0; a < d; ++a) p.x[g.members[a]] = g.axis[idx[a]];
      pts.push_back(std::move(p));
    }
  const auto res = solve_level_mc(field, I, pts, walk);
  double max_se = 0;
  for (std::size_t k = 0; k < g.times.size(); ++k)
    for (std::size_t node = 0; node < per; ++node) {
      const McPoint& p = pts[k * per + node];
      for (int s = 0; s < d; ++s) {
        if (k + 1 == g.times.size()) {
          g.at(k, node, s) = field.terminal_value(I, g.members[s], p.x);
        } else {
          g.at(k, node, s) = res[k * per + node][s].estimate;
          max_se = std::max(max_se, res[k * per + node][s].standard_error);
        }
      }
    }
  g.max_standard_error = max_se;
  finalize_grid(field, g);
  return g;
}

struct GridPolicy {
  GridSpec fd;       // levels solved by finite differences
  GridSpec mc;       // levels filled by Monte Carlo
  WalkSpec walk;
};

// Box [-sigma sqrt T, row_sum_max + 4 sigma sqrt T]; for sigma = T = alpha = 1, N = 2 that is [-1, 6].
inline GridPolicy default_grid_policy(const SystemParams& params, const AdjacencyMatrix& net) {
  GridPolicy p;
  const double s = params.sigma * std::sqrt(params.horizon);
  p.fd.space_min = -s;
  p.fd.space_max = net.row_sum_max() + 4.0 * s;
  p.fd.space_steps = 141;
  p.fd.time_steps = 100;
  p.fd.refinement = 2;
  p.mc = p.fd;
  p.mc.space_steps = 15;
  p.mc.time_steps = 10;
  p.mc.refinement = 1;
  p.walk = {400, 400, 1};
  return p;
}

inline DecouplingField build_cascade(const SystemParams& params, const AdjacencyMatrix& net, Method method,
                                     const GridPolicy& policy) {
  DecouplingField field(params, net);
  field.info().method = method;
  field.info().walk = policy.walk;
  field.install_analytic_levels();
  for (IndexSet I : enumerate_configs(params.n_particles)) {
    if (I.size() < 2) continue;
    FieldGrid g;
    const bool use_fd = method == Method::Fd || (method == Method::Hybrid && I.size() <= 2);
    if (use_fd) {
      g = solve_level_fd(field, I, policy.fd);
    } else {
      g = solve_level_mc_grid(field, I, policy.mc, policy.walk);
    }
    auto& info = field.info();
    info.max_level_projection = std::max(info.max_level_projection, g.level_projection);
    info.max_monotone_correction = std::max(info.max_monotone_correction, g.monotone_correction);
    info.max_standard_error = std::max(info.max_standard_error, g.max_standard_error);
    field.install_grid(I, std::move(g));
  }
  return field;
}

// r(y) = inf{ s : (t, y + s 1) in the domain of I }, by bisection along the diagonal.
// `base` and each offset are vectors over the coordinates of I; y is projected onto 1^T y = 0.
inline std::vector<double> boundary_profile(const DecouplingField& field, IndexSet I, double t,
                                            const std::vector<double>& base,
                                            const std::vector<std::vector<double>>& offsets,
                                            double tol = 1e-9) {
  const auto members = I.members();
  const std::size_t d = members.size();
  require(d >= 1, ErrorCode::InvalidArgument, "empty configuration");
  require(base.size() == d, ErrorCode::ShapeMismatch, "base must have |I| coordinates");
  require(field.lower_levels_built(I), ErrorCode::LevelNotBuilt, "lower levels of " + I.str());
  std::vector<double> out;
  out.reserve(offsets.size());
  std::vector<double> x(field.n(), 0.0);
  for (const auto& off : offsets) {
    require(off.size() == d, ErrorCode::ShapeMismatch, "offset must have |I| coordinates");
    std::vector<double> y(d);
    double mean = 0;
    for (std::size_t a = 0; a < d; ++a) mean += (y[a] = base[a] + off[a]);
    mean /= d;
    for (auto& c : y) c -= mean;
    auto inside = [&](double s) {
      for (std::size_t a = 0; a < d; ++a) x[members[a]] = y[a] + s;
      return field.domain_contains(I, t, x);
    };
    const double ymin = *std::min_element(y.begin(), y.end());
    double lo = -ymin;  // lowest coordinate at 0: dead, thresholds are >= 0
    double hi = field.network().row_sum_max() - ymin + 1.0;
    if (inside(lo) || !inside(hi))
      fail(ErrorCode::BracketNotFound, "diagonal ray does not cross the boundary");
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      (inside(mid) ? hi : lo) = mid;
    }
    out.push_back(hi);
  }
  return out;
}

}  // namespace fbsde
