#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace subens {

// Deterministic seeded stream (splitmix64). Streams are keyed by a seed plus
// up to two tags so independent consumers never share a sequence. All draws
// are defined in terms of exact integer arithmetic, so a (seed, tags) triple
// produces the same sequence on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t tag_a = 0, std::uint64_t tag_b = 0) {
    state_ = mix(0x9e3779b97f4a7c15ULL ^ seed);
    state_ = mix(state_ ^ (0xbf58476d1ce4e5b9ULL * (tag_a + 1)));
    state_ = mix(state_ ^ (0x94d049bb133111ebULL * (tag_b + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // uniform integer in [0, n), rejection-sampled so the draw is unbiased
  std::size_t next_below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be positive");
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= lim);
    return static_cast<std::size_t>(x % static_cast<std::uint64_t>(n));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace subens
