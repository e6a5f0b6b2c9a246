#pragma once

// JSON run configuration: parsing, unknown-key rejection and validation.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbsde/cascade_build.hpp"
#include "fbsde/contagion.hpp"
#include "fbsde/export.hpp"
#include "fbsde/meanfield.hpp"
#include "fbsde/system.hpp"

namespace fbsde {

using Json = nlohmann::json;

// ValidationError whose `field()` is the offending key (dotted path in the message).
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& path, const std::string& message)
      : Error(ErrorCode::ValidationError, path + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Task { Cascade, Simulate, Lattice, Meanfield, Clearing };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::Cascade: return "cascade";
    case Task::Simulate: return "simulate";
    case Task::Lattice: return "lattice";
    case Task::Meanfield: return "meanfield";
    case Task::Clearing: return "clearing";
  }
  return "?";
}

struct CascadeTask {
  Method method = Method::Fd;
  GridPolicy policy;
  std::vector<double> export_times{0.0, 0.5, 0.9};
  Which which = Which::Total;
};

struct SimulateTask {
  CascadeTask cascade;  // how the field is built
  PathConfig paths;
  bool z = false;
};

struct LatticeTask {
  InitialData initial;
  int time_steps = 20;
  int max_iter = 1000;
  bool from_below = false;
  std::size_t budget = kDefaultLatticeBudget;
};

struct MeanfieldTask {
  MeanFieldProblem problem;
  std::optional<double> calibrated_to;  // target p when alpha was calibrated
  int grid = 1000;
  double tol = 1e-12;
  std::vector<int> finite_n;  // empty: no finite-N experiment
  int finite_lattice_steps = 10;
  int finite_draws = 1;
};

struct ClearingTask {
  BankNetwork network;
  double tol = 1e-10;
};

struct RunConfig {
  Json raw;  // effective configuration (after command-line overrides), hashed into the manifest
  Task task = Task::Cascade;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  std::optional<SystemParams> params;
  std::optional<AdjacencyMatrix> network;
  CascadeTask cascade;
  SimulateTask simulate;
  LatticeTask lattice;
  MeanfieldTask meanfield;
  ClearingTask clearing;
};

inline bool task_is_stochastic(const RunConfig& c) {
  switch (c.task) {
    case Task::Simulate: return true;
    case Task::Cascade: return c.cascade.method != Method::Fd;
    case Task::Meanfield: return !c.meanfield.finite_n.empty() && c.meanfield.problem.atoms.size() > 1;
    default: return false;
  }
}

namespace detail {

// A JSON object whose keys must all be read; leftovers are rejected.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail_field(leaf(path_), "must be an object");
  }
  ~Section() = default;

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& get(const std::string& key) {
    if (!j_.contains(key)) fail_field(key, "is required");
    seen_.insert(key);
    return j_.at(key);
  }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double real(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number()) fail_field(key, "must be a number");
    return v.get<double>();
  }
  double real(const std::string& key, double fallback) { return has(key) ? real(key) : fallback; }
  long long integer(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number_integer()) fail_field(key, "must be an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = get(key);
    if (!v.is_boolean()) fail_field(key, "must be true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_string()) fail_field(key, "must be a string");
    return v.get<std::string>();
  }
  std::vector<double> reals(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_array()) fail_field(key, "must be an array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) fail_field(key, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<int> integers(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_array()) fail_field(key, "must be an array of integers");
    std::vector<int> out;
    for (const Json& e : v) {
      if (!e.is_number_integer()) fail_field(key, "must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  Section sub(const std::string& key) { return Section(get(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail_field(it.key(), "unknown key");
  }
  [[noreturn]] void fail_field(const std::string& key, const std::string& msg) const {
    throw ConfigError(key, at(key), msg);
  }

 private:
  static std::string leaf(const std::string& p) {
    const auto dot = p.rfind('.');
    return dot == std::string::npos ? p : p.substr(dot + 1);
  }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Re-raise a library validation failure as a ConfigError naming `key`.
template <class F>
auto validated(Section& s, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CapacityExceeded) throw;
    s.fail_field(key, e.what());
  }
}

inline void positive(Section& s, const std::string& key, double v) {
  if (!(std::isfinite(v) && v > 0)) s.fail_field(key, "must be > 0");
}

inline IndexSet alive_from(Section& s, const std::string& key, int n) {
  std::vector<int> zero_based;
  for (int i : s.integers(key)) {
    if (i < 1 || i > n) s.fail_field(key, "indices are 1-based and must lie in 1..N");
    zero_based.push_back(i - 1);
  }
  return IndexSet::from_indices(zero_based);
}

inline InitialData initial_from(Section& s, const SystemParams& p) {
  InitialData d;
  d.start_time = s.real("start_time", 0.0);
  d.initial_states = s.reals("initial_states");
  if (static_cast<int>(d.initial_states.size()) != p.n_particles)
    s.fail_field("initial_states", "needs one state per particle");
  d.alive_set = s.has("alive") ? alive_from(s, "alive", p.n_particles) : IndexSet::full(p.n_particles);
  return validated(s, "start_time", [&] { return validate_initial_data(p, d); });
}

inline GridSpec grid_from(Section g, GridSpec base) {
  base.time_steps = static_cast<int>(g.integer("time_steps", base.time_steps));
  base.space_min = g.real("space_min", base.space_min);
  base.space_max = g.real("space_max", base.space_max);
  base.space_steps = static_cast<int>(g.integer("space_steps", base.space_steps));
  base.refinement = static_cast<int>(g.integer("refinement", base.refinement));
  base.terminal_refinement = g.boolean("terminal_refinement", base.terminal_refinement);
  g.finish();
  return base;
}

inline CascadeTask cascade_from(Section c, const SystemParams& p, const AdjacencyMatrix& D) {
  CascadeTask t;
  t.policy = default_grid_policy(p, D);
  if (c.has("method")) {
    const std::string m = c.string("method");
    if (m == "fd") t.method = Method::Fd;
    else if (m == "mc") t.method = Method::Mc;
    else if (m == "hybrid") t.method = Method::Hybrid;
    else c.fail_field("method", "must be fd, mc or hybrid");
  }
  if (t.method == Method::Fd && p.n_particles > 3) c.fail_field("method", "fd supports N <= 3 (levels |I| <= 2)");
  if (c.has("grid")) t.policy.fd = grid_from(c.sub("grid"), t.policy.fd);
  if (c.has("mc_grid")) t.policy.mc = grid_from(c.sub("mc_grid"), t.policy.mc);
  for (const char* key : {"grid", "mc_grid"}) {
    const GridSpec& g = std::string(key) == "grid" ? t.policy.fd : t.policy.mc;
    validated(c, key, [&] {
      validate_grid_spec(g, p, D);
      return 0;
    });
  }
  if (c.has("walk")) {
    Section w = c.sub("walk");
    t.policy.walk.steps = static_cast<int>(w.integer("steps", t.policy.walk.steps));
    t.policy.walk.paths = static_cast<int>(w.integer("paths", t.policy.walk.paths));
    if (t.policy.walk.steps < 1) w.fail_field("steps", "must be >= 1");
    if (t.policy.walk.paths < 2) w.fail_field("paths", "must be >= 2");
    w.finish();
  }
  if (c.has("export_times")) {
    t.export_times = c.reals("export_times");
    for (double s : t.export_times)
      if (!(s >= 0 && s <= p.horizon)) c.fail_field("export_times", "times must lie in [0, T]");
  }
  if (c.has("which")) {
    const std::string w = c.string("which");
    if (w == "total") t.which = Which::Total;
    else if (w == "per-particle") t.which = Which::PerParticle;
    else c.fail_field("which", "must be total or per-particle");
  }
  c.finish();
  return t;
}

inline std::vector<Atom> law_from(Section& m) {
  const Json& law = m.get("initial_law");
  if (law.is_number()) return point_mass(law.get<double>());
  if (law.is_string() && law.get<std::string>() == "xi_equals_alpha") return {};
  if (law.is_array()) {
    std::vector<Atom> atoms;
    for (const Json& a : law) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        m.fail_field("initial_law", "atoms are [x, weight] pairs");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return atoms;
  }
  m.fail_field("initial_law", "must be a number (point mass), \"xi_equals_alpha\" or a list of [x, weight]");
}

}  // namespace detail

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Json parse_config_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // nlohmann reports the byte just past the offending token
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                                    std::string(e.what()));
  }
}

// Validate an already-parsed configuration.
inline RunConfig config_from_json(const Json& j) {
  using detail::Section;
  RunConfig c;
  c.raw = j;
  Section root(j, "");
  const Json& task = root.get("task");
  if (!task.is_string()) root.fail_field("task", "must name exactly one task");
  const std::string name = task.get<std::string>();
  const std::vector<std::string> names{"cascade", "simulate", "lattice", "meanfield", "clearing"};
  const auto pos = std::find(names.begin(), names.end(), name);
  if (pos == names.end()) root.fail_field("task", "unknown task '" + name + "'");
  c.task = static_cast<Task>(pos - names.begin());
  for (const auto& other : names) {
    if (other == name || !j.contains(other)) continue;
    // a section for a second task: "simulate" may carry a "cascade" section for the field build
    if (c.task == Task::Simulate && other == "cascade") continue;
    root.fail_field("task", "section '" + other + "' belongs to another task; exactly one task per run");
  }

  if (root.has("seed")) {
    const Json& s = root.get("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      root.fail_field("seed", "must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (root.has("output_dir")) c.output_dir = root.string("output_dir");

  const bool needs_system = c.task == Task::Cascade || c.task == Task::Simulate || c.task == Task::Lattice;
  if (needs_system || root.has("system")) {
    Section s = root.sub("system");
    const long long n = s.integer("n_particles");
    if (n < 1) s.fail_field("n_particles", "must be >= 1");
    if (n > kMaxParticles) fail(ErrorCode::CapacityExceeded, "n_particles exceeds " + std::to_string(kMaxParticles));
    const double sigma = s.real("sigma");
    detail::positive(s, "sigma", sigma);
    const double horizon = s.real("horizon");
    detail::positive(s, "horizon", horizon);
    c.params = make_params(static_cast<int>(n), sigma, horizon);
    Section net = s.sub("network");
    const bool sym = net.has("symmetric"), mat = net.has("matrix");
    if (sym == mat) net.fail_field("network", "give exactly one of 'symmetric' or 'matrix'");
    if (sym) {
      Section a = net.sub("symmetric");
      const double alpha = a.real("alpha");
      if (!(std::isfinite(alpha) && alpha >= 0)) a.fail_field("alpha", "must be >= 0");
      const bool scaled = a.boolean("scaled", false);
      a.finish();
      c.network = symmetric_network(static_cast<int>(n), alpha, scaled);
    } else {
      const Json& m = net.get("matrix");
      std::vector<std::vector<double>> raw;
      if (!m.is_array()) net.fail_field("matrix", "must be an array of rows");
      for (const Json& row : m) {
        if (!row.is_array()) net.fail_field("matrix", "must be an array of rows");
        std::vector<double> r;
        for (const Json& e : row) {
          if (!e.is_number()) net.fail_field("matrix", "entries must be numbers");
          r.push_back(e.get<double>());
        }
        raw.push_back(std::move(r));
      }
      if (static_cast<long long>(raw.size()) != n) net.fail_field("matrix", "must be N x N");
      c.network = detail::validated(net, "matrix", [&] { return build_network(raw); });
    }
    net.finish();
    s.finish();
  }

  switch (c.task) {
    case Task::Cascade: {
      c.cascade = root.has("cascade") ? detail::cascade_from(root.sub("cascade"), *c.params, *c.network)
                                      : detail::cascade_from(Section(Json::object(), "cascade"), *c.params, *c.network);
      break;
    }
    case Task::Simulate: {
      c.simulate.cascade = root.has("cascade")
                               ? detail::cascade_from(root.sub("cascade"), *c.params, *c.network)
                               : detail::cascade_from(Section(Json::object(), "cascade"), *c.params, *c.network);
      Section s = root.sub("simulate");
      PathConfig& pc = c.simulate.paths;
      pc.dt = s.real("dt");
      detail::positive(s, "dt", pc.dt);
      const long long paths = s.integer("paths");
      if (paths < 1) s.fail_field("paths", "must be >= 1");
      pc.n_paths = static_cast<int>(paths);
      pc.record_stride = static_cast<int>(s.integer("record_stride", 1));
      if (pc.record_stride < 1) s.fail_field("record_stride", "must be >= 1");
      pc.initial = detail::initial_from(s, *c.params);
      detail::validated(s, "dt", [&] { return path_step_count(*c.params, pc); });
      c.simulate.z = s.boolean("z_process", false);
      s.finish();
      break;
    }
    case Task::Lattice: {
      Section s = root.sub("lattice");
      LatticeTask& l = c.lattice;
      l.time_steps = static_cast<int>(s.integer("time_steps"));
      if (l.time_steps < 1) s.fail_field("time_steps", "must be >= 1");
      l.max_iter = static_cast<int>(s.integer("max_iter", l.max_iter));
      if (l.max_iter < 1) s.fail_field("max_iter", "must be >= 1");
      if (s.has("direction")) {
        const std::string d = s.string("direction");
        if (d != "above" && d != "below") s.fail_field("direction", "must be above or below");
        l.from_below = d == "below";
      }
      const long long budget = s.integer("state_budget", static_cast<long long>(l.budget));
      if (budget < 1) s.fail_field("state_budget", "must be >= 1");
      l.budget = static_cast<std::size_t>(budget);
      l.initial = detail::initial_from(s, *c.params);
      s.finish();
      break;
    }
    case Task::Meanfield: {
      Section m = root.sub("meanfield");
      MeanfieldTask& t = c.meanfield;
      const double sigma = m.real("sigma", 1.0), horizon = m.real("horizon", 1.0);
      detail::positive(m, "sigma", sigma);
      detail::positive(m, "horizon", horizon);
      double alpha = 0;
      if (m.has("alpha") == m.has("calibrate_to")) m.fail_field("alpha", "give exactly one of 'alpha' or 'calibrate_to'");
      if (m.has("alpha")) {
        alpha = m.real("alpha");
        if (!(std::isfinite(alpha) && alpha >= 0)) m.fail_field("alpha", "must be >= 0");
      }
      std::vector<Atom> atoms = detail::law_from(m);
      if (m.has("calibrate_to")) {
        const double p = m.real("calibrate_to");
        if (!(p > 0 && p < 1)) m.fail_field("calibrate_to", "must lie in (0,1)");
        if (!atoms.empty()) m.fail_field("initial_law", "calibration is defined for the xi_equals_alpha family");
        t.calibrated_to = p;
        alpha = calibrate_alpha(p, sigma, horizon);
      }
      if (atoms.empty()) atoms = point_mass(alpha);
      t.problem = detail::validated(m, "initial_law", [&] { return make_meanfield_problem(alpha, sigma, horizon, atoms); });
      t.grid = static_cast<int>(m.integer("grid", t.grid));
      if (t.grid < 1) m.fail_field("grid", "must be >= 1");
      t.tol = m.real("tol", t.tol);
      detail::positive(m, "tol", t.tol);
      if (m.has("finite_n")) {
        Section f = m.sub("finite_n");
        t.finite_n = f.integers("n");
        for (int n : t.finite_n)
          if (n < 1 || n > kMaxParticles) f.fail_field("n", "each N must lie in 1..20");
        t.finite_lattice_steps = static_cast<int>(f.integer("lattice_steps", t.finite_lattice_steps));
        if (t.finite_lattice_steps < 1) f.fail_field("lattice_steps", "must be >= 1");
        t.finite_draws = static_cast<int>(f.integer("draws", t.finite_draws));
        if (t.finite_draws < 1) f.fail_field("draws", "must be >= 1");
        f.finish();
      }
      m.finish();
      break;
    }
    case Task::Clearing: {
      Section s = root.sub("clearing");
      const Json& m = s.get("liabilities");
      std::vector<std::vector<double>> raw;
      if (!m.is_array()) s.fail_field("liabilities", "must be an array of rows");
      for (const Json& row : m) {
        if (!row.is_array()) s.fail_field("liabilities", "must be an array of rows");
        std::vector<double> r;
        for (const Json& e : row) {
          if (!e.is_number()) s.fail_field("liabilities", "entries must be numbers");
          r.push_back(e.get<double>());
        }
        raw.push_back(std::move(r));
      }
      AdjacencyMatrix D = detail::validated(s, "liabilities", [&] { return build_network(raw); });
      auto assets = s.reals("external_assets");
      auto ext = s.reals("external_liabilities");
      const double R = s.real("recovery", 0.0);
      if (assets.size() != raw.size()) s.fail_field("external_assets", "needs one entry per bank");
      if (ext.size() != raw.size()) s.fail_field("external_liabilities", "needs one entry per bank");
      for (double a : assets)
        if (!(std::isfinite(a) && a >= 0)) s.fail_field("external_assets", "entries must be >= 0");
      for (double a : ext)
        if (!(std::isfinite(a) && a >= 0)) s.fail_field("external_liabilities", "entries must be >= 0");
      if (!(R >= 0 && R < 1)) s.fail_field("recovery", "must lie in [0,1)");
      c.clearing.network = make_bank_network(std::move(D), std::move(assets), std::move(ext), R);
      c.clearing.tol = s.real("tol", c.clearing.tol);
      detail::positive(s, "tol", c.clearing.tol);
      s.finish();
      break;
    }
  }
  root.finish();
  if (task_is_stochastic(c) && !c.seed) root.fail_field("seed", "is required for stochastic tasks");
  return c;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::string& path) { return config_from_json(parse_config_text(read_text_file(path))); }

// Command-line overrides are folded into the JSON so the manifest hash sees them.
inline RunConfig apply_overrides(const RunConfig& c, std::optional<std::uint64_t> seed,
                                 std::optional<std::string> out_dir) {
  Json j = c.raw;
  if (seed) j["seed"] = *seed;
  if (out_dir) j["output_dir"] = *out_dir;
  return config_from_json(j);
}

}  // namespace fbsde
