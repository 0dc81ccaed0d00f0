#pragma once

// Special functions and continuous distributions used by the efficacy
// methods. All functions are pure and throw DomainError on invalid input.

namespace nbratio {

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;
  bool operator==(const BetaParams&) const = default;
};

double log_gamma(double x);
double log_beta(double a, double b);
double digamma(double x);

// Regularized incomplete gamma P(a, x) and its complement Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double gamma_cdf(double x, double shape, double scale);
double gamma_pdf(double x, double shape, double scale);
double gamma_quantile(double p, double shape, double scale);

double beta_cdf(double x, const BetaParams& params);
double beta_pdf(double x, const BetaParams& params);
double beta_quantile(double p, const BetaParams& params);

double student_t_cdf(double t, double df);
double student_t_pdf(double t, double df);
double student_t_quantile(double p, double df);

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace nbratio
