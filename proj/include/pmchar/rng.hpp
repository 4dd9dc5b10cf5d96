// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pmchar {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (base seed, stream name, salt).
// Every consumer of randomness derives its own stream so adding or reordering
// probes cannot shift anyone else's sequence; identical config + seed therefore
// reproduces identical output bytes.
inline uint64_t derive_seed(uint64_t base, std::string_view stream, uint64_t salt = 0) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  uint64_t s = h ^ (base * 0x9e3779b97f4a7c15ull) ^ (salt + 0x517cc1b727220a95ull);
  splitmix64(s);
  return splitmix64(s);
}

// mt19937_64 plus hand-rolled variate transforms.  The engine sequence is
// fixed by the standard; std::uniform_real_distribution / normal_distribution
// are not, so we do the transforms ourselves to keep outputs byte-identical.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection-free would bias; n is tiny in our uses, do rejection sampling.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller (cached pair member).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // |N(0, sigma)| — used for strictly-positive jitter.
  double half_normal(double sigma) { return std::abs(normal()) * sigma; }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace pmchar
