#include "nbratio/bnb.hpp"

#include <cmath>
#include <string>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

void validate_shape(const TransformShape& shape) {
  if (!(shape.k1 > 0.0) || !(shape.k2 > 0.0)) throw DomainError("k1 and k2 must be positive");
  if (!(shape.r >= 0.0 && shape.r <= 1.0)) throw DomainError("null efficacy must lie in [0, 1]");
}

}  // namespace

double bnb_transform(double p1, const TransformShape& shape) {
  const double a = shape.k1 * (1.0 - shape.r);
  return p1 * a / (p1 * a - p1 * shape.k2 + shape.k2);
}

std::array<double, 5> bnb_transform_derivatives(double p1, const TransformShape& shape) {
  const double a = shape.k1 * (1.0 - shape.r);
  const double k2 = shape.k2;
  const double d = p1 * a - p1 * k2 + k2;
  const double c = a * k2;
  const double w = a - k2;
  const double d2 = d * d;
  const double d3 = d2 * d;
  return {
      p1 * a / d,
      c / d2,
      -2.0 * c * w / d3,
      6.0 * c * w * w / (d3 * d),
      -24.0 * c * w * w * w / (d3 * d2),
  };
}

std::array<double, 5> beta_raw_moments(const BetaParams& params) {
  params.validate();
  std::array<double, 5> out{};
  double m = 1.0;
  for (int j = 0; j < 5; ++j) {
    m *= (params.alpha + j) / (params.alpha + params.beta + j);
    out[j] = m;
  }
  return out;
}

std::array<double, 4> beta_central_moments(const BetaParams& params) {
  params.validate();
  // Closed forms. Expanding the raw moments instead loses about
  // log10((a + b)^(v/2)) digits to cancellation when both shapes are large.
  const double a = params.alpha;
  const double b = params.beta;
  const double s = a + b;
  const double ab = a * b;
  const double m2 = ab / (s * s * (s + 1.0));
  const double m3 = 2.0 * ab * (b - a) / (s * s * s * (s + 1.0) * (s + 2.0));
  const double m4 = 3.0 * ab * (ab * s + 2.0 * (a * a - ab + b * b)) /
                    (s * s * s * s * (s + 1.0) * (s + 2.0) * (s + 3.0));
  const double m5 = 4.0 * ab * (b - a) * (5.0 * ab * s + 6.0 * (a * a + b * b)) /
                    (s * s * s * s * s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0));
  return {m2, m3, m4, m5};
}

TransformMoments delta_method_moments(const BetaParams& posterior, const TransformShape& shape) {
  validate_shape(shape);
  const double mean_p1 = posterior.alpha / (posterior.alpha + posterior.beta);
  const auto central = beta_central_moments(posterior);
  const double m2 = central[0];
  const double m3 = central[1];
  const double m4 = central[2];
  const double m5 = central[3];
  const auto g = bnb_transform_derivatives(mean_p1, shape);

  TransformMoments out;
  out.mean = g[0] + 0.5 * g[2] * m2;
  out.variance = g[1] * g[1] * m2 + 2.0 * g[1] * (g[2] / 2.0) * m3 +
                 (g[2] * g[2] / 4.0 + 2.0 * g[1] * g[3] / 6.0) * m4 +
                 (2.0 * g[1] * g[4] / 24.0 + g[2] * g[3] / 6.0) * m5;
  return out;
}

BetaParams beta_from_moments(double mean, double variance) {
  if (!(mean > 0.0 && mean < 1.0)) {
    throw MomentMatchInfeasible("transformed mean " + std::to_string(mean) +
                                " lies outside (0, 1)");
  }
  const double bound = mean * (1.0 - mean);
  if (!(variance > 0.0 && variance < bound)) {
    throw MomentMatchInfeasible("transformed variance " + std::to_string(variance) +
                                " cannot be matched by a beta distribution with mean " +
                                std::to_string(mean));
  }
  const double nu = bound / variance - 1.0;
  return {mean * nu, (1.0 - mean) * nu};
}

double BnbNull::cdf(std::int64_t s) const {
  if (zero_point_mass) return s >= 0 ? 1.0 : 0.0;
  return bnb_cdf(s, params);
}

double BnbNull::sf(std::int64_t s) const {
  if (zero_point_mass) return s <= 0 ? 1.0 : 0.0;
  return bnb_sf(s, params);
}

BnbNull bnb_posterior_params(std::int64_t sum_x, std::int64_t n1, std::int64_t n2, double k1,
                             double k2, double r0, const BetaParams& prior) {
  if (sum_x < 0) throw DomainError("pre-treatment total must be non-negative");
  if (n1 < 1 || n2 < 1) throw DomainError("group sizes must be positive");
  prior.validate();
  const TransformShape shape{k1, k2, r0};
  validate_shape(shape);

  BnbNull out;
  out.posterior = {prior.alpha + static_cast<double>(sum_x),
                   prior.beta + k1 * static_cast<double>(n1)};
  if (r0 == 1.0) {
    out.zero_point_mass = true;
    return out;
  }
  const auto moments = delta_method_moments(out.posterior, shape);
  const auto p2 = beta_from_moments(moments.mean, moments.variance);
  out.params = {p2.alpha, p2.beta, static_cast<double>(n2) * k2};
  return out;
}

}  // namespace nbratio
