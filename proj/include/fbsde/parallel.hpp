#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fbsde {

// Process-wide worker count; 0 means hardware concurrency.
inline int& worker_count_ref() {
  static int workers = 1;
  return workers;
}
inline void set_worker_count(int k) { worker_count_ref() = k; }
inline int worker_count() {
  const int k = worker_count_ref();
  if (k > 0) return k;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

// Static contiguous chunks. Callers write results into per-index slots, so the
// output never depends on the number of workers.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Pairwise summation over a fixed index order.
template <class It>
double pairwise_sum(It first, It last) {
  const auto n = std::distance(first, last);
  if (n <= 8) {
    double s = 0;
    for (; first != last; ++first) s += *first;
    return s;
  }
  It mid = first + n / 2;
  return pairwise_sum(first, mid) + pairwise_sum(mid, last);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.begin(), v.end()); }

struct MeanSe {
  double mean = 0;
  double se = 0;
};

// Sample mean and standard error; se is +inf for fewer than two samples.
inline MeanSe mean_and_se(const std::vector<double>& v) {
  MeanSe r;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return r;
  r.mean = pairwise_sum(v) / n;
  if (v.size() < 2) {
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
  r.se = std::sqrt(pairwise_sum(sq) / (n - 1) / n);
  return r;
}

}  // namespace fbsde
