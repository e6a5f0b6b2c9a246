#pragma once

// CSV exporters for fields, trajectories and lattice fixed points.

#include <string>
#include <vector>

#include "fbsde/cascade_build.hpp"
#include "fbsde/csv.hpp"
#include "fbsde/lattice.hpp"
#include "fbsde/simulator.hpp"

namespace fbsde {

enum class Which { Total, PerParticle };

// Rows `t,x1[,x2],i,value` over `axis` (per axis) at each time; i = 0 marks the
// total sum_i v^{I,i} over all N particles, otherwise i is the 1-based particle.
// A second file `<stem>_boundary.csv` holds the boundary: the threshold for
// |I| = 1, the polyline y + r(y) 1 for |I| = 2.
inline std::vector<std::string> export_heatmap(const DecouplingField& field, IndexSet I,
                                               const std::vector<double>& times, Which which,
                                               const std::string& path, const std::vector<double>& axis) {
  const int d = I.size();
  if (d < 1 || d > 2) fail(ErrorCode::DimensionUnsupported, "heatmaps need |I| = 2, curves |I| = 1");
  const auto members = I.members();
  const int n = field.n();
  std::vector<double> x(n, 0.0);
  {
    CsvWriter w(path, d == 1 ? "t,x1,i,value" : "t,x1,x2,i,value");
    for (double t : times) {
      const std::size_t na = axis.size(), nb = d == 2 ? axis.size() : 1;
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b) {
          x[members[0]] = axis[a];
          if (d == 2) x[members[1]] = axis[b];
          if (which == Which::Total) {
            double total = 0;
            for (int i = 0; i < n; ++i) total += field.eval(I, i, t, x);
            w.num(t).num(axis[a]);
            if (d == 2) w.num(axis[b]);
            w.integer(0).num(total);
            w.end_row();
          } else {
            for (int i = 0; i < n; ++i) {
              w.num(t).num(axis[a]);
              if (d == 2) w.num(axis[b]);
              w.integer(i + 1).num(field.eval(I, i, t, x));
              w.end_row();
            }
          }
        }
    }
  }
  const std::string stem = path.size() > 4 && path.substr(path.size() - 4) == ".csv" ? path.substr(0, path.size() - 4) : path;
  const std::string bpath = stem + "_boundary.csv";
  {
    CsvWriter w(bpath, d == 1 ? "t,x1" : "t,x1,x2");
    const double lo = axis.front(), hi = axis.back();
    for (double t : times) {
      if (d == 1) {
        w.num(t).num(boundary_profile(field, I, t, {0.0}, {{0.0}})[0]);
        w.end_row();
        continue;
      }
      // Offsets (-u, u) along the anti-diagonal; keep crossings inside the box.
      std::vector<std::vector<double>> offs;
      const int samples = 2 * static_cast<int>(axis.size()) + 1;
      const double half = hi - lo;
      for (int s = 0; s < samples; ++s) {
        const double u = -half + 2.0 * half * s / (samples - 1);
        offs.push_back({-u, u});
      }
      const auto r = boundary_profile(field, I, t, {0.0, 0.0}, offs);
      for (std::size_t s = 0; s < offs.size(); ++s) {
        const double x1 = offs[s][0] + r[s], x2 = offs[s][1] + r[s];
        if (x1 < lo || x1 > hi || x2 < lo || x2 > hi) continue;
        w.num(t).num(x1).num(x2);
        w.end_row();
      }
    }
  }
  return {path, bpath};
}

inline void export_trajectories(const std::vector<Trajectory>& trajs, const std::string& path) {
  if (trajs.empty()) {
    CsvWriter w(path, "path_id,k,t,alive_bits");
    return;
  }
  const int n = trajs.front().n;
  std::string header = "path_id,k,t";
  for (int i = 1; i <= n; ++i) header += ",x_" + std::to_string(i);
  header += ",alive_bits";
  for (int i = 1; i <= n; ++i) header += ",y_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) header += ",b_" + std::to_string(i);
  CsvWriter w(path, header);
  for (const auto& tr : trajs)
    for (std::size_t r = 0; r < tr.records(); ++r) {
      w.integer(tr.path_id).integer(tr.steps[r]).num(tr.times[r]);
      for (int i = 0; i < n; ++i) w.num(tr.X(r, i));
      w.integer(tr.alive[r]);
      for (int i = 0; i < n; ++i) w.num(tr.Y(r, i));
      for (int i = 0; i < n; ++i) w.num(tr.B(r, i));
      w.end_row();
    }
}

// Event n = 1, 2, ...; removed_index is 1-based.
inline void export_killing(const std::vector<Trajectory>& trajs, const std::string& path) {
  CsvWriter w(path, "path_id,n,rho_n,removed_index");
  for (const auto& tr : trajs)
    for (std::size_t e = 0; e < tr.killing.rho.size(); ++e) {
      w.integer(tr.path_id).integer(static_cast<long long>(e) + 1).num(tr.killing.rho[e]).integer(tr.killing.removed[e] + 1);
      w.end_row();
    }
}

// Relevant states only (those the root value depends on).
inline void export_lattice(const LatticeField& y, const LatticeSpec& s, const std::string& path) {
  const int n = y.n();
  std::string header = "k";
  for (int i = 1; i <= n; ++i) header += ",x" + std::to_string(i);
  header += ",h_bits,i,value";
  CsvWriter w(path, header);
  std::vector<int> j(n);
  for (int k = 0; k <= y.steps(); ++k)
    for (std::size_t node = 0; node < y.nodes(k); ++node) {
      y.node_counts(k, node, j);
      for (std::uint32_t h = 0; h < y.flags(); ++h) {
        if (!y.is_relevant(k, node, h)) continue;
        for (int i = 0; i < n; ++i) {
          w.integer(k);
          for (int a = 0; a < n; ++a) w.num(lattice_position(s, a, k, j[a]));
          w.integer(h).integer(i + 1).num(y.at(k, node, h, i));
          w.end_row();
        }
      }
    }
}

}  // namespace fbsde
