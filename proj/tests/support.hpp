#pragma once

// Shared pieces for the unit tests: a 50-digit float for oracles and a small
// seeded case generator for property tests.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <cstdint>
#include <random>

#include <doctest.h>

namespace nbtest {

using High = boost::multiprecision::cpp_bin_float_50;

inline double to_double(const High& h) { return h.convert_to<double>(); }

inline double rel_err(double got, const High& want) {
  const High diff = abs(High(got) - want);
  if (want == 0) return to_double(diff);
  return to_double(diff / abs(want));
}

// One property case. Each case gets its own engine so a failure can be
// replayed from the case index alone.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  // Negative binomial counts via the gamma-Poisson mixture.
  std::int64_t nb(double mean, double k) {
    if (mean <= 0.0) return 0;
    const double lambda = std::gamma_distribution<double>(k, mean / k)(rng_);
    return std::poisson_distribution<std::int64_t>(lambda)(rng_);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

template <typename F>
void for_cases(int count, std::uint64_t property_seed, F&& body) {
  for (int i = 0; i < count; ++i) {
    CAPTURE(i);
    Gen g(property_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i));
    body(g);
  }
}

}  // namespace nbtest
