#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fbsde/error.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

struct GridSpec {
  int time_steps = 100;  // stored time intervals M
  double space_min = -1.0;
  double space_max = 6.0;
  int space_steps = 141;  // nodes per axis
  int refinement = 1;     // FD solves on a lattice this many times finer, then samples
  bool terminal_refinement = false;
  IndexSet config;
};

inline void validate_grid_spec(const GridSpec& g, const SystemParams& params,
                               const AdjacencyMatrix& net) {
  require(g.time_steps >= 2, ErrorCode::InvalidArgument, "time_steps must be >= 2");
  require(g.space_steps >= 2, ErrorCode::InvalidArgument, "space_steps must be >= 2");
  require(g.refinement >= 1, ErrorCode::InvalidArgument, "refinement must be >= 1");
  require(g.space_min < g.space_max, ErrorCode::InvalidArgument, "space_min must be < space_max");
  // Below 0 every configuration is dead, so clamping the lower edge is exact.
  require(g.space_min <= 0.0, ErrorCode::InvalidArgument, "space_min must be <= 0");
  const double need = net.row_sum_max() + 3.0 * params.sigma * std::sqrt(params.horizon);
  require(g.space_max >= need - 1e-12, ErrorCode::InvalidArgument,
          "space_max must be >= row_sum_max + 3 sigma sqrt(T) = " + std::to_string(need));
}

// Uniform layers on [0,T]; optionally the last 5% of the steps are packed
// geometrically toward T.
inline std::vector<double> make_time_grid(double horizon, int m, bool terminal_refinement) {
  std::vector<double> t(static_cast<std::size_t>(m) + 1);
  if (!terminal_refinement) {
    for (int k = 0; k <= m; ++k) t[k] = horizon * k / m;
    t[m] = horizon;
    return t;
  }
  const int tail = std::max(2, static_cast<int>(std::ceil(0.05 * m)));
  const int head = m - tail;
  const double t_tail = horizon * head / m;
  for (int k = 0; k <= head; ++k) t[k] = horizon * k / m;
  const double q = 0.5;
  const double span = horizon - t_tail;
  const double g0 = span * (1 - q) / (1 - std::pow(q, tail));
  double g = g0, s = t_tail;
  for (int j = 1; j <= tail; ++j) {
    s += g;
    t[head + j] = s;
    g *= q;
  }
  t[m] = horizon;
  return t;
}

// Values of v^{I,i} for i in I on a tensor grid over the coordinates of I.
struct FieldGrid {
  GridSpec spec;
  IndexSet config;
  std::vector<int> members;     // particle index per slot/axis, ascending
  std::vector<double> times;    // ascending, last == T
  std::vector<double> axis;     // node coordinates (shared by every axis)
  std::vector<double> values;   // [layer][node][slot], node row-major with axis 0 slowest

  // Build bookkeeping.
  std::string method;
  double level_projection = 0;      // largest cut from the lower-level bound
  double monotone_correction = 0;   // largest lift from the monotone envelope
  double max_standard_error = 0;    // MC only

  int dim() const { return static_cast<int>(members.size()); }
  std::size_t nodes_per_layer() const {
    std::size_t n = 1;
    for (int a = 0; a < dim(); ++a) n *= axis.size();
    return n;
  }
  double dx() const { return (axis.back() - axis.front()) / (axis.size() - 1); }
  int slot_of(int particle) const {
    for (int s = 0; s < dim(); ++s)
      if (members[s] == particle) return s;
    return -1;
  }
  double& at(std::size_t layer, std::size_t node, int slot) {
    return values[(layer * nodes_per_layer() + node) * dim() + slot];
  }
  double at(std::size_t layer, std::size_t node, int slot) const {
    return values[(layer * nodes_per_layer() + node) * dim() + slot];
  }
  // Multi-index -> node, axis 0 slowest.
  std::size_t node_index(std::span<const int> idx) const {
    std::size_t n = 0;
    for (int a = 0; a < dim(); ++a) n = n * axis.size() + idx[a];
    return n;
  }
  void node_coords(std::size_t node, std::span<int> idx) const {
    for (int a = dim() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(node % axis.size());
      node /= axis.size();
    }
  }

  // Multilinear in space, linear in time, coordinates clamped to the box.
  // `x` is a full-length state vector; only coordinates in `members` are read.
  double interpolate(int slot, double t, std::span<const double> x) const {
    std::size_t k0;
    double wt;
    if (t >= times.back()) {
      k0 = times.size() - 1;
      wt = 0;
    } else if (t <= times.front()) {
      k0 = 0;
      wt = 0;
    } else {
      k0 = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
      wt = (t - times[k0]) / (times[k0 + 1] - times[k0]);
    }
    const int d = dim();
    const std::size_t n = axis.size();
    const double h = dx();
    int lo[8];
    double w[8];
    for (int a = 0; a < d; ++a) {
      double xc = std::clamp(x[members[a]], axis.front(), axis.back());
      double u = (xc - axis.front()) / h;
      int j = static_cast<int>(std::floor(u));
      if (j >= static_cast<int>(n) - 1) j = static_cast<int>(n) - 2;
      if (j < 0) j = 0;
      lo[a] = j;
      w[a] = std::clamp(u - j, 0.0, 1.0);
      // Snap exact node hits so node queries return stored values bit-for-bit.
      if (xc == axis[j]) w[a] = 0.0;
      else if (xc == axis[j + 1]) w[a] = 1.0;
    }
    auto layer_value = [&](std::size_t layer) {
      double acc = 0;
      for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1;
        std::size_t node = 0;
        for (int a = 0; a < d; ++a) {
          const int bit = (corner >> a) & 1;
          weight *= bit ? w[a] : 1 - w[a];
          node = node * n + lo[a] + bit;
        }
        if (weight != 0) acc += weight * at(layer, node, slot);
      }
      return acc;
    };
    const double v0 = layer_value(k0);
    if (wt == 0) return v0;
    return (1 - wt) * v0 + wt * layer_value(k0 + 1);
  }
};

}  // namespace fbsde
