#pragma once

// Counter-based Philox4x32-10 (Salmon et al., SC'11). Every random draw in the
// library is a pure function of (seed, counter), so results never depend on
// thread scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/random/normal_distribution.hpp>

namespace fbsde {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

namespace detail {
inline void philox_round(Counter& c, const Key& k) {
  constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  const std::uint64_t p0 = m0 * c[0];
  const std::uint64_t p1 = m1 * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}
}  // namespace detail

inline Counter philox4x32(Counter c, Key k) {
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += w0;
      k[1] += w1;
    }
    detail::philox_round(c, k);
  }
  return c;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Stream tags keep the different consumers of one seed disjoint.
enum class Stream : std::uint32_t {
  Oracle = 1,
  LevelMc = 2,
  Paths = 3,
  Sampling = 4,
  Test = 15,
};

// Uniform in the open interval (0,1) with 53 random bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Two independent standard normals (Box-Muller) from one Philox block.
inline std::array<double, 2> normal_pair(std::uint64_t seed, Stream stream, std::uint32_t a,
                                         std::uint32_t b, std::uint32_t c, std::uint32_t d = 0) {
  const Counter out = philox4x32(
      {a, b, c, (static_cast<std::uint32_t>(stream) << 24) ^ (d & 0x00FFFFFFu)},
      key_from_seed(seed));
  const double u1 = to_unit(out[0], out[1]);
  const double u2 = to_unit(out[2], out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(th), r * std::sin(th)};
}

inline double uniform01(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b,
                        std::uint32_t c, std::uint32_t d = 0) {
  const Counter out = philox4x32(
      {a, b, c, (static_cast<std::uint32_t>(stream) << 24) ^ (d & 0x00FFFFFFu)},
      key_from_seed(seed));
  return to_unit(out[0], out[1]);
}

// Sequential 32-bit engine over Philox blocks: stream (seed, tag, a, b, c) yields
// the outputs of counters (a, b, 0, tag|c), (a, b, 1, tag|c), ... Satisfies
// UniformRandomBitGenerator.
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;
  PhiloxEngine(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b, std::uint32_t c)
      : key_(key_from_seed(seed)),
        ctr_{a, b, 0, (static_cast<std::uint32_t>(stream) << 24) ^ (c & 0x00FFFFFFu)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = philox4x32(ctr_, key_);
      ++ctr_[2];
      pos_ = 0;
    }
    return buf_[pos_++];
  }

 private:
  Key key_;
  Counter ctr_;
  Counter buf_{};
  int pos_ = 4;
};

// Standard normals for one (path, coordinate), drawn in step order by the
// ziggurat method. The k-th draw is a pure function of (seed, stream, a, b, c, k).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b, std::uint32_t c)
      : eng_(seed, stream, a, b, c) {}
  double operator()() { return dist_(eng_); }
  void skip(std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i) dist_(eng_);
  }

 private:
  PhiloxEngine eng_;
  boost::random::normal_distribution<double> dist_;
};

}  // namespace fbsde
