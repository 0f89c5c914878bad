#pragma once

// Counter-based random streams.
//
// Every stream is a Philox4x32-10 generator whose key is derived from a
// master seed and a short tuple of integer tags (individual index, process,
// chain, posterior draw, rollout, ...). Two streams with different tags are
// statistically independent, and the values a stream produces never depend
// on how many other streams exist or in which order they are consumed, so
// serial and parallel runs give identical numbers.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace dtrjm {

/// Stream tags for the different consumers of randomness.
enum class Tag : std::uint64_t {
  individual = 1,
  test_history = 2,
  chain = 3,
  chain_block = 4,
  re_chain = 5,
  rollout = 6,
  posterior_draw = 7,
  replication = 8,
  fixture = 9,
  init = 10,
  truth = 11,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of words into a 64-bit key.
inline constexpr std::uint64_t mix_key(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC908ULL);
  for (auto w : words) h = splitmix64(h ^ splitmix64(w + 0x3C6EF372FE94F82BULL));
  return h;
}

class Stream {
 public:
  Stream() : Stream(0, {}) {}

  explicit Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
    const std::uint64_t k = mix_key(seed, tags);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    const std::uint64_t hi = splitmix64(k ^ 0xA54FF53A5F1D36F1ULL);
    ctr_hi_ = hi;
  }

  /// Child stream keyed by this stream's key plus extra tags. Does not
  /// consume values from the parent.
  [[nodiscard]] Stream child(std::initializer_list<std::uint64_t> tags) const {
    const std::uint64_t parent = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
    return Stream(parent ^ ctr_hi_, tags);
  }

  std::uint64_t next_u64() {
    if (pos_ >= 2) refill();
    return out_[pos_++];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  /// Gamma(shape, 1) by Marsaglia and Tsang.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  void refill() {
    std::array<std::uint32_t, 4> c = {static_cast<std::uint32_t>(ctr_lo_), static_cast<std::uint32_t>(ctr_lo_ >> 32),
                                      static_cast<std::uint32_t>(ctr_hi_), static_cast<std::uint32_t>(ctr_hi_ >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    out_[0] = (static_cast<std::uint64_t>(c[1]) << 32) | c[0];
    out_[1] = (static_cast<std::uint64_t>(c[3]) << 32) | c[2];
    ++ctr_lo_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t ctr_lo_ = 0;
  std::uint64_t ctr_hi_ = 0;
  std::array<std::uint64_t, 2> out_{};
  int pos_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dtrjm
