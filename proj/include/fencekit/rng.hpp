#pragma once
// Counter-based random stream.  Every draw is a pure function of
// (seed, label path, position), so forked child streams are independent of
// the parent's draw position and results do not depend on evaluation order.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace fencekit {

namespace detail {

// SplitMix64 finalizer.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(uint64_t seed, std::string_view label = "root")
      : seed_(seed), label_(label) {
    base_ = detail::mix64(detail::mix64(seed) ^ detail::fnv1a(label));
  }

  // Child stream derived from (this stream's identity, label).  Drawing from
  // the child never advances the parent and vice versa.
  RngStream fork(std::string_view label) const {
    RngStream child = *this;
    child.label_ = label_ + "/" + std::string(label);
    child.base_ = detail::mix64(base_ ^ detail::fnv1a(label));
    child.pos_ = 0;
    return child;
  }

  uint64_t next_u64() { return detail::mix64(base_ + ++pos_ * 0x9e3779b97f4a7c15ULL); }

  // Uniform in [0,1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], both inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = uint64_t(hi - lo) + 1;
    return lo + int64_t((unsigned __int128)(next_u64()) * span >> 64);
  }

  // Standard normal via Box-Muller; consumes two positions per draw.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  uint64_t position() const { return pos_; }

 private:
  uint64_t base_ = 0;
  uint64_t seed_ = 0;
  std::string label_;
  uint64_t pos_ = 0;
};

}  // namespace fencekit
