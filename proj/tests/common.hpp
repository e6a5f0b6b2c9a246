#pragma once

#include "fbsde/fbsde.hpp"

namespace fbsde::fixtures {

// N = 2, D_ij = 1, sigma = T = 1, FD levels on the default policy. Built once.
inline const DecouplingField& n2_field() {
  static const DecouplingField f = [] {
    const SystemParams p = make_params(2, 1.0, 1.0);
    const AdjacencyMatrix D = symmetric_network(2, 1.0, false);
    return build_cascade(p, D, Method::Fd, default_grid_policy(p, D));
  }();
  return f;
}

// A small coarse policy for tests that only need exact dead-region values.
inline GridPolicy coarse_policy(const SystemParams& p, const AdjacencyMatrix& D) {
  GridPolicy g = default_grid_policy(p, D);
  g.fd.space_steps = 41;
  g.fd.time_steps = 20;
  g.fd.refinement = 1;
  g.mc.space_steps = 5;
  g.mc.time_steps = 4;
  g.walk = {20, 20, 3};
  return g;
}

inline DecouplingField single_free_particle() {
  const SystemParams p = make_params(1, 1.0, 1.0);
  const AdjacencyMatrix D = zero_network(1);
  return build_cascade(p, D, Method::Fd, default_grid_policy(p, D));
}

}  // namespace fbsde::fixtures
