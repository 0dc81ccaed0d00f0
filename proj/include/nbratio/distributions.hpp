#pragma once

#include <cstdint>

#include "nbratio/special.hpp"

namespace nbratio {

// Negative binomial as the number of successes before `k` failures, indexed by
// its mean. Success probability p = mean / (mean + k).
struct NegBinParams {
  double k = 1.0;
  double mean = 0.0;

  void validate() const;
  double success_probability() const { return mean / (mean + k); }
  double variance() const { return mean + mean * mean / k; }
};

// Beta-negative-binomial: NegBin(n_failures, p) with p ~ Beta(alpha, beta).
// `n_failures` may be any positive real.
struct BnbParams {
  double alpha = 1.0;
  double beta = 1.0;
  double n_failures = 1.0;

  void validate() const;
  bool operator==(const BnbParams&) const = default;
};

// Upper limit on the number of terms accumulated by bnb_cdf / bnb_sf.
inline constexpr std::int64_t kMaxBnbTerms = 1'000'000;

double nb_logpmf(std::int64_t y, const NegBinParams& params);

double bnb_logpmf(std::int64_t s, const BnbParams& params);

// pmf(s + 1) / pmf(s).
double bnb_pmf_ratio(std::int64_t s, const BnbParams& params);

// P(S <= s), accumulated term by term with the ratio recurrence.
double bnb_cdf(std::int64_t s, const BnbParams& params);

// P(S >= s) = 1 - bnb_cdf(s - 1).
double bnb_sf(std::int64_t s, const BnbParams& params);

}  // namespace nbratio
