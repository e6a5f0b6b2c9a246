#pragma once

// Task dispatch, output files and the run manifest.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fbsde/config.hpp"
#include "fbsde/export.hpp"

#ifndef FBSDE_VERSION
#define FBSDE_VERSION "0.0.0"
#endif

namespace fbsde {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hash of the canonical (key-sorted, compact) serialization.
inline std::string config_hash(const Json& raw) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(raw.dump())));
  return buf;
}

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitBudget = 4 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::NegativeEntry:
    case ErrorCode::NonSquare:
    case ErrorCode::DimensionUnsupported:
    case ErrorCode::StateCountMismatch:
    case ErrorCode::AliveSetOutOfRange:
    case ErrorCode::TimeOutOfRange:
    case ErrorCode::ShapeMismatch:
      return kExitConfig;
    case ErrorCode::CapacityExceeded:
    case ErrorCode::StateSpaceExceeded:
      return kExitBudget;
    default:
      return kExitNumeric;
  }
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Json error_record(const Error& e) {
  Json j;
  j["status"] = "error";
  j["code"] = std::string(to_string(e.code()));
  j["message"] = e.what();
  j["exit_code"] = exit_code_for(e.code());
  if (auto* ce = dynamic_cast<const ConfigError*>(&e)) j["field"] = ce->field();
  return j;
}

namespace detail {

inline std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

inline DecouplingField build_field(const RunConfig& c, const CascadeTask& t, Json& info) {
  GridPolicy policy = t.policy;
  if (c.seed) policy.walk.seed = *c.seed;
  DecouplingField field = build_cascade(*c.params, *c.network, t.method, policy);
  info["method"] = to_string(t.method);
  info["max_level_projection"] = field.info().max_level_projection;
  info["max_monotone_correction"] = field.info().max_monotone_correction;
  info["max_standard_error"] = field.info().max_standard_error;
  return field;
}

inline std::vector<std::string> run_cascade(const RunConfig& c, Json& info) {
  const DecouplingField field = build_field(c, c.cascade, info);
  const GridPolicy& pol = c.cascade.policy;
  const int n = c.params->n_particles;
  std::vector<std::string> files;
  // Level-1 curves use the FD axis; level-2 heatmaps the axis of the built grid.
  const std::vector<double> axis1 = make_axis(pol.fd, pol.fd.space_steps);
  auto f1 = export_heatmap(field, IndexSet::single(0), c.cascade.export_times, c.cascade.which,
                           out_path(c, "level1_curve.csv"), axis1);
  files.insert(files.end(), f1.begin(), f1.end());
  if (n >= 2) {
    const IndexSet I = IndexSet::from_indices({0, 1});
    const std::vector<double> axis2 = field.grid(I)->axis;
    auto f2 = export_heatmap(field, I, c.cascade.export_times, c.cascade.which, out_path(c, "level2_heatmap.csv"),
                             axis2);
    files.insert(files.end(), f2.begin(), f2.end());
  }
  return files;
}

inline std::vector<std::string> run_simulate(const RunConfig& c, Json& info) {
  const DecouplingField field = build_field(c, c.simulate.cascade, info);
  PathConfig pc = c.simulate.paths;
  pc.seed = *c.seed;
  const auto trajs = simulate_paths(field, pc);
  std::vector<std::string> files{out_path(c, "trajectories.csv"), out_path(c, "killing.csv"),
                                 out_path(c, "diagnostics.csv")};
  export_trajectories(trajs, files[0]);
  export_killing(trajs, files[1]);
  const MartingaleReport rep = martingale_diagnostics(trajs);
  {
    CsvWriter w(files[2], "particle,mean_increment,se_increment,mean_half_increment,se_half_increment,mean_y0,se_y0,"
                          "kill_fraction,se_kill_fraction");
    for (std::size_t i = 0; i < rep.particles.size(); ++i) {
      const auto& p = rep.particles[i];
      w.integer(static_cast<long long>(i) + 1)
          .num(p.increment.mean).num(p.increment.se)
          .num(p.half_increment.mean).num(p.half_increment.se)
          .num(p.y0.mean).num(p.y0.se)
          .num(p.kill_fraction.mean).num(p.kill_fraction.se);
      w.end_row();
    }
  }
  info["paths"] = trajs.size();
  if (c.simulate.z) {
    files.push_back(out_path(c, "z.csv"));
    const int n = field.n();
    CsvWriter w(files.back(), "path_id,k,t,i,j,z");
    const double bump = default_bump(field);
    for (const auto& tr : trajs) {
      const auto z = z_process(field, tr, bump);
      for (std::size_t r = 0; r < tr.records(); ++r)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            w.integer(tr.path_id).integer(tr.steps[r]).num(tr.times[r]).integer(i + 1).integer(j + 1);
            w.num(z[(r * n + i) * n + j]);
            w.end_row();
          }
    }
  }
  return files;
}

inline std::vector<std::string> run_lattice(const RunConfig& c, Json& info) {
  const LatticeTask& t = c.lattice;
  const LatticeSpec spec = make_lattice_spec(*c.params, t.initial, t.time_steps);
  const IterationReport rep = t.from_below ? iterate_from_below(spec, *c.network, t.max_iter, false, t.budget)
                                           : tarski_from_above(spec, *c.network, t.max_iter, false, t.budget);
  std::vector<std::string> files{out_path(c, "lattice_fixed_point.csv"), out_path(c, "lattice_iterations.csv"),
                                 out_path(c, "lattice_initial_values.csv")};
  export_lattice(rep.fixed_point, spec, files[0]);
  {
    CsvWriter w(files[1], "iteration,sup_decrement");
    for (std::size_t k = 0; k < rep.sup_decrements.size(); ++k) {
      w.integer(static_cast<long long>(k) + 1).num(rep.sup_decrements[k]);
      w.end_row();
    }
  }
  {
    CsvWriter w(files[2], "i,y0");
    const auto y0 = lattice_initial_values(spec, rep.fixed_point);
    for (std::size_t i = 0; i < y0.size(); ++i) {
      w.integer(static_cast<long long>(i) + 1).num(y0[i]);
      w.end_row();
    }
  }
  info["iterations_used"] = rep.iterations_used;
  info["converged"] = rep.converged;
  info["monotone"] = rep.monotone;
  return files;
}

inline std::vector<std::string> run_meanfield(const RunConfig& c, Json& info) {
  const MeanfieldTask& t = c.meanfield;
  const FixedPointReport rep = find_fixed_points(t.problem, t.grid, t.tol);
  std::vector<std::string> files{out_path(c, "fixed_points.csv"), out_path(c, "scan.csv")};
  {
    CsvWriter w(files[0], "p,residual");
    for (std::size_t k = 0; k < rep.fixed_points.size(); ++k) {
      w.num(rep.fixed_points[k]).num(rep.residuals[k]);
      w.end_row();
    }
  }
  {
    CsvWriter w(files[1], "p,G_p");
    for (const auto& [p, g] : rep.samples) {
      w.num(p).num(g);
      w.end_row();
    }
  }
  info["alpha"] = t.problem.alpha;
  if (t.calibrated_to) info["calibrated_to"] = *t.calibrated_to;
  if (!t.finite_n.empty()) {
    files.push_back(out_path(c, "finite_n.csv"));
    const auto rows = finite_vs_mf_experiment(t.finite_n, t.problem, t.finite_draws, t.finite_lattice_steps,
                                              c.seed.value_or(0));
    CsvWriter w(files.back(), "n,ybar,ybar_se,distance,iterations");
    for (const auto& r : rows) {
      w.integer(r.n).num(r.ybar).num(r.ybar_se).num(r.distance).integer(r.iterations);
      w.end_row();
    }
  }
  return files;
}

inline std::vector<std::string> run_clearing(const RunConfig& c, Json& info) {
  const ClearingResult res = static_clearing_proportional(c.clearing.network, c.clearing.tol);
  std::vector<std::string> files{out_path(c, "clearing.csv"), out_path(c, "payments.csv")};
  {
    CsvWriter w(files[0], "bank,capital,defaulted");
    for (std::size_t i = 0; i < res.capital.size(); ++i) {
      w.integer(static_cast<long long>(i) + 1).num(res.capital[i]).integer(res.default_set.contains(static_cast<int>(i)));
      w.end_row();
    }
  }
  {
    CsvWriter w(files[1], "i,j,payment");
    for (std::size_t i = 0; i < res.payments.size(); ++i)
      for (std::size_t j = 0; j < res.payments[i].size(); ++j) {
        w.integer(static_cast<long long>(i) + 1).integer(static_cast<long long>(j) + 1).num(res.payments[i][j]);
        w.end_row();
      }
  }
  info["iterations"] = res.iterations;
  info["residual"] = res.residual;
  info["default_set"] = res.default_set.str();
  return files;
}

}  // namespace detail

// Runs the configured task; writes outputs plus manifest.json, or error.json on failure.
inline int run(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  Json manifest;
  manifest["tool"] = "fbsde_run";
  manifest["version"] = FBSDE_VERSION;
  manifest["task"] = to_string(c.task);
  manifest["config_hash"] = config_hash(c.raw);
  manifest["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  manifest["threads"] = worker_count();
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec) {
    std::fprintf(stderr, "IoError: cannot create %s: %s\n", c.output_dir.c_str(), ec.message().c_str());
    return kExitConfig;
  }
  try {
    Json info = Json::object();
    std::vector<std::string> files;
    switch (c.task) {
      case Task::Cascade: files = detail::run_cascade(c, info); break;
      case Task::Simulate: files = detail::run_simulate(c, info); break;
      case Task::Lattice: files = detail::run_lattice(c, info); break;
      case Task::Meanfield: files = detail::run_meanfield(c, info); break;
      case Task::Clearing: files = detail::run_clearing(c, info); break;
    }
    Json names = Json::array();
    for (const auto& f : files) names.push_back(std::filesystem::path(f).filename().string());
    manifest["status"] = "ok";
    manifest["outputs"] = names;
    manifest["result"] = info;
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(detail::out_path(c, "manifest.json"), manifest);
    return kExitOk;
  } catch (const Error& e) {
    Json rec = error_record(e);
    rec["task"] = to_string(c.task);
    rec["config_hash"] = manifest["config_hash"];
    try {
      write_json(detail::out_path(c, "error.json"), rec);
    } catch (const Error&) {
    }
    std::fprintf(stderr, "%s\n", e.what());
    return exit_code_for(e.code());
  }
}

}  // namespace fbsde
