#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace icpns {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream. All distributions are hand-rolled on top of
// mt19937_64 so draws are byte-identical across platforms and standard
// library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    // spread the seed before handing it to the engine
    gen_.seed(splitmix64(s));
  }

  // Independent stream for (seed, stream); used to decouple shuffling,
  // sampling, initialization etc. from one another.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = stream ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t b = splitmix64(s);
    return Rng(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n); n > 0.
  std::uint32_t below(std::uint32_t n) {
    // rejection sampling on the top bits
    std::uint64_t threshold = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    for (;;) {
      std::uint64_t r = gen_();
      if (r < threshold) return static_cast<std::uint32_t>(r % n);
    }
  }

  // Uniform real in [0, 1) with 53-bit resolution.
  double real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = real();
    } while (u1 <= 0.0);
    u2 = real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace icpns
