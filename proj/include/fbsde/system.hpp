#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/error.hpp"

namespace fbsde {

inline constexpr int kMaxParticles = 20;

// Subset of {0..N-1} as a bitmask; bit i <-> particle i+1 in user-facing output.
class IndexSet {
 public:
  constexpr IndexSet() = default;
  constexpr explicit IndexSet(std::uint32_t bits) : bits_(bits) {}

  static IndexSet full(int n) { return IndexSet(n >= 32 ? ~0u : ((1u << n) - 1u)); }
  static IndexSet single(int i) { return IndexSet(1u << i); }
  static IndexSet from_indices(const std::vector<int>& zero_based) {
    std::uint32_t b = 0;
    for (int i : zero_based) b |= 1u << i;
    return IndexSet(b);
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool contains(int i) const { return (bits_ >> i) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const { return std::popcount(bits_); }
  int min_index() const { return empty() ? -1 : std::countr_zero(bits_); }

  IndexSet with(int i) const { return IndexSet(bits_ | (1u << i)); }
  IndexSet without(int i) const { return IndexSet(bits_ & ~(1u << i)); }
  IndexSet operator|(IndexSet o) const { return IndexSet(bits_ | o.bits_); }
  IndexSet operator&(IndexSet o) const { return IndexSet(bits_ & o.bits_); }
  IndexSet minus(IndexSet o) const { return IndexSet(bits_ & ~o.bits_); }
  bool subset_of(IndexSet o) const { return (bits_ & ~o.bits_) == 0; }

  std::vector<int> members() const {
    std::vector<int> out;
    for (std::uint32_t b = bits_; b; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  friend constexpr bool operator==(IndexSet a, IndexSet b) { return a.bits_ == b.bits_; }
  friend constexpr bool operator<(IndexSet a, IndexSet b) { return a.bits_ < b.bits_; }

  // "{1,3}" with 1-based members.
  std::string str() const {
    std::string s = "{";
    bool first = true;
    for (int i : members()) {
      if (!first) s += ",";
      s += std::to_string(i + 1);
      first = false;
    }
    return s + "}";
  }

 private:
  std::uint32_t bits_ = 0;
};

struct SystemParams {
  int n_particles = 1;
  double sigma = 1.0;
  double horizon = 1.0;
};

inline SystemParams make_params(int n, double sigma, double horizon) {
  require(n >= 1, ErrorCode::InvalidArgument, "n_particles must be >= 1");
  require(n <= kMaxParticles, ErrorCode::CapacityExceeded, "n_particles must be <= 20");
  require(std::isfinite(sigma) && sigma > 0, ErrorCode::InvalidArgument, "sigma must be > 0");
  require(std::isfinite(horizon) && horizon > 0, ErrorCode::InvalidArgument, "horizon must be > 0");
  return {n, sigma, horizon};
}

class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;

  int size() const { return n_; }
  double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + j]; }
  double row_sum(int i) const { return row_sums_[i]; }
  double row_sum_max() const { return row_sum_max_; }
  bool is_zero() const { return row_sum_max_ == 0.0; }

  std::vector<std::vector<double>> entries() const {
    std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
    return out;
  }

  // Column sum: total owed by j to everyone.
  double col_sum(int j) const {
    double s = 0;
    for (int i = 0; i < n_; ++i) s += (*this)(i, j);
    return s;
  }

 private:
  friend AdjacencyMatrix build_network(const std::vector<std::vector<double>>& raw);
  int n_ = 0;
  std::vector<double> d_;
  std::vector<double> row_sums_;
  double row_sum_max_ = 0.0;
};

inline AdjacencyMatrix build_network(const std::vector<std::vector<double>>& raw) {
  const int n = static_cast<int>(raw.size());
  require(n >= 1, ErrorCode::NonSquare, "empty matrix");
  require(n <= kMaxParticles, ErrorCode::CapacityExceeded, "matrix larger than 20x20");
  AdjacencyMatrix m;
  m.n_ = n;
  m.d_.resize(static_cast<std::size_t>(n) * n);
  m.row_sums_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    require(static_cast<int>(raw[i].size()) == n, ErrorCode::NonSquare,
            "row " + std::to_string(i + 1) + " has " + std::to_string(raw[i].size()) +
                " entries, expected " + std::to_string(n));
    for (int j = 0; j < n; ++j) {
      const double v = raw[i][j];
      require(std::isfinite(v), ErrorCode::InvalidArgument,
              "non-finite entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      require(v >= 0, ErrorCode::NegativeEntry,
              "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      m.d_[static_cast<std::size_t>(i) * n + j] = v;
      m.row_sums_[i] += v;
    }
  }
  m.row_sum_max_ = *std::max_element(m.row_sums_.begin(), m.row_sums_.end());
  return m;
}

// scaled=false: D_ij = alpha; scaled=true: D_ij = alpha / N.
inline AdjacencyMatrix symmetric_network(int n, double alpha, bool scaled) {
  require(n >= 1, ErrorCode::InvalidArgument, "N must be >= 1");
  require(std::isfinite(alpha) && alpha >= 0, ErrorCode::InvalidArgument, "alpha must be >= 0");
  const double v = scaled ? alpha / n : alpha;
  return build_network(std::vector<std::vector<double>>(n, std::vector<double>(n, v)));
}

inline AdjacencyMatrix zero_network(int n) {
  return build_network(std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
}

// All 2^N subsets: by cardinality, then by bitmask.
inline std::vector<IndexSet> enumerate_configs(int n) {
  require(n >= 1, ErrorCode::InvalidArgument, "N must be >= 1");
  require(n <= kMaxParticles, ErrorCode::CapacityExceeded, "N > 20");
  std::vector<IndexSet> out;
  out.reserve(std::size_t{1} << n);
  for (std::uint32_t b = 0; b < (1u << n); ++b) out.emplace_back(b);
  std::stable_sort(out.begin(), out.end(),
                   [](IndexSet a, IndexSet b) { return a.size() < b.size(); });
  return out;
}

struct InitialData {
  double start_time = 0.0;
  std::vector<double> initial_states;
  IndexSet alive_set;
};

inline InitialData validate_initial_data(const SystemParams& params, const InitialData& data) {
  require(data.start_time >= 0 && data.start_time <= params.horizon, ErrorCode::TimeOutOfRange,
          "start_time " + std::to_string(data.start_time) + " outside [0, T]");
  require(static_cast<int>(data.initial_states.size()) == params.n_particles,
          ErrorCode::StateCountMismatch,
          "expected " + std::to_string(params.n_particles) + " initial states, got " +
              std::to_string(data.initial_states.size()));
  for (double x : data.initial_states)
    require(std::isfinite(x), ErrorCode::InvalidArgument, "non-finite initial state");
  require(data.alive_set.subset_of(IndexSet::full(params.n_particles)),
          ErrorCode::AliveSetOutOfRange, "alive set " + data.alive_set.str());
  return data;
}

}  // namespace fbsde
