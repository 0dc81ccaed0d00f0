#include "nbratio/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

void require_count(std::int64_t v) {
  if (v < 0) throw DomainError("count argument must be non-negative");
}

}  // namespace

void NegBinParams::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("negative binomial k must be positive");
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw DomainError("negative binomial mean must be non-negative");
  }
}

void BnbParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(n_failures > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(beta) || !std::isfinite(n_failures)) {
    throw DomainError("beta-negative-binomial parameters must be positive and finite");
  }
}

double nb_logpmf(std::int64_t y, const NegBinParams& params) {
  require_count(y);
  params.validate();
  const double k = params.k;
  const double mu = params.mean;
  if (mu == 0.0) return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double yd = static_cast<double>(y);
  double out = k * -std::log1p(mu / k);  // k ln(1 - p)
  if (y > 0) {
    out += log_gamma(yd + k) - log_gamma(k) - log_gamma(yd + 1.0) +
           yd * (std::log(mu) - std::log(mu + k));
  }
  return out;
}

double bnb_logpmf(std::int64_t s, const BnbParams& params) {
  require_count(s);
  params.validate();
  const double n = params.n_failures;
  const double sd = static_cast<double>(s);
  return log_gamma(n + sd) - log_gamma(n) - log_gamma(sd + 1.0) +
         log_beta(params.beta + n, params.alpha + sd) - log_beta(params.beta, params.alpha);
}

double bnb_pmf_ratio(std::int64_t s, const BnbParams& params) {
  const double sd = static_cast<double>(s);
  const double n = params.n_failures;
  return (n + sd) * (params.alpha + sd) /
         ((sd + 1.0) * (params.alpha + params.beta + n + sd));
}

double bnb_cdf(std::int64_t s, const BnbParams& params) {
  if (s < 0) return 0.0;
  params.validate();
  if (s >= kMaxBnbTerms) {
    throw DomainError("beta-negative-binomial tail requested beyond " +
                      std::to_string(kMaxBnbTerms) + " terms");
  }
  // Terms are held relative to exp(log_scale) so that a pmf(0) far below
  // the double range does not flush the whole sum to zero. Kahan-compensated.
  double log_scale = bnb_logpmf(0, params);
  double term = 1.0;
  double sum = 1.0;
  double compensation = 0.0;
  for (std::int64_t j = 0; j < s; ++j) {
    term *= bnb_pmf_ratio(j, params);
    if (term > 1e200) {
      log_scale += std::log(term);
      sum /= term;
      compensation /= term;
      term = 1.0;
    }
    const double y = term - compensation;
    const double t = sum + y;
    compensation = (t - sum) - y;
    sum = t;
  }
  const double cdf = std::exp(log_scale + std::log(sum));
  return cdf > 1.0 ? 1.0 : cdf;
}

double bnb_sf(std::int64_t s, const BnbParams& params) {
  if (s <= 0) {
    params.validate();
    return 1.0;
  }
  return 1.0 - bnb_cdf(s - 1, params);
}

}  // namespace nbratio
