#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "taskcal/errors.hpp"

namespace taskcal {

// Deterministic sampling helpers on top of mt19937_64. The std distribution
// adaptors are avoided because their output sequences are implementation
// defined; every transform here pins the stream for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) using the top 53 bits.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n).
  uint64_t index(uint64_t n) {
    if (n == 0) throw ValidationError("Rng::index requires n >= 1");
    const uint64_t span = UINT64_MAX / n;
    const uint64_t limit = span * n;
    uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return r / span;
  }

  double exponential() { return -std::log1p(-unit()); }

  // Dirichlet(1, ..., 1): uniform on the simplex.
  std::vector<double> dirichlet_uniform(int c) {
    std::vector<double> g(static_cast<size_t>(c));
    double sum = 0.0;
    for (auto& v : g) {
      v = exponential();
      sum += v;
    }
    if (sum <= 0.0) {  // all draws zero is possible only in theory
      for (auto& v : g) v = 1.0 / c;
      return g;
    }
    for (auto& v : g) v /= sum;
    return g;
  }

  // Inverse-cdf draw from a probability vector.
  int categorical(const std::vector<double>& p) {
    const double u = unit();
    double acc = 0.0;
    for (size_t i = 0; i + 1 < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace taskcal
