#pragma once

// Beta-negative-binomial null distribution for the post-treatment total.
//
// The pre-treatment success probability p1 has a conjugate beta posterior.
// The post-treatment success probability implied by an efficacy r is
//
//   p2 = g(p1) = p1 k1 (1 - r) / (p1 k1 (1 - r) - p1 k2 + k2),
//
// whose mean and variance are approximated by Taylor expansion around E(p1)
// and moment-matched to a beta distribution. The post-treatment total is then
// beta-negative-binomial with n_failures = N2 k2.

#include <array>
#include <cstdint>

#include "nbratio/distributions.hpp"
#include "nbratio/special.hpp"

namespace nbratio {

struct TransformShape {
  double k1 = 1.0;
  double k2 = 1.0;
  double r = 0.0;
};

double bnb_transform(double p1, const TransformShape& shape);

// {g, g', g'', g''', g''''} at p1.
std::array<double, 5> bnb_transform_derivatives(double p1, const TransformShape& shape);

// Raw moments E(X^v), v = 1..5, of a beta distribution.
std::array<double, 5> beta_raw_moments(const BetaParams& params);

// Central moments E((X - mu)^v), v = 2..5.
std::array<double, 4> beta_central_moments(const BetaParams& params);

struct TransformMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Two-term Taylor mean and fifth-moment Taylor variance of g(p1) for
// p1 ~ posterior.
TransformMoments delta_method_moments(const BetaParams& posterior, const TransformShape& shape);

// Beta distribution with the given mean and variance. Throws
// MomentMatchInfeasible unless 0 < variance < mean (1 - mean).
BetaParams beta_from_moments(double mean, double variance);

// Null distribution of the post-treatment total: beta-negative-binomial, or a
// point mass at zero when the null efficacy is 1.
struct BnbNull {
  bool zero_point_mass = false;
  BnbParams params;
  BetaParams posterior;  // of p1

  double cdf(std::int64_t s) const;
  double sf(std::int64_t s) const;
};

BnbNull bnb_posterior_params(std::int64_t sum_x, std::int64_t n1, std::int64_t n2, double k1,
                             double k2, double r0, const BetaParams& prior);

}  // namespace nbratio
