#include "nbratio/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be a positive finite number");
  }
}

void require_open_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("probability must lie in (0, 1)");
}

// ln Gamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2], asymptotic series, z >= 10.
double stirling_error(double z) {
  const double r = 1.0 / z;
  const double r2 = r * r;
  return r * (1.0 / 12.0 +
              r2 * (-1.0 / 360.0 +
                    r2 * (1.0 / 1260.0 +
                          r2 * (-1.0 / 1680.0 +
                                r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360360.0 + r2 / 156.0))))));
}

// ln Gamma(x) - ln Gamma(x + y) for x >= 10, y > 0, without cancelling two
// large log-gamma values.
double log_gamma_ratio_large(double x, double y) {
  const double c = x + y;
  return -(x - 0.5) * std::log1p(y / x) - y * std::log(c) + y + stirling_error(x) -
         stirling_error(c);
}

// a ln x - x - ln Gamma(a): log of the prefactor shared by the incomplete
// gamma series and continued fraction.
double log_gamma_prefix(double a, double x) {
  if (a < 10.0) return a * std::log(x) - x - log_gamma(a);
  const double t = (x - a) / a;
  // a ln(x/a) + a - x = a (log1p(t) - t)
  return a * (std::log1p(t) - t) + 0.5 * std::log(a) - kHalfLog2Pi - stirling_error(a);
}

double gamma_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_gamma_prefix(a, x));
}

// Upper tail Q(a, x) by modified Lentz continued fraction.
double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(log_gamma_prefix(a, x)) * h;
}

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 100000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

// Safeguarded Newton iteration on a bracket [lo, hi] with cdf(lo) <= p <=
// cdf(hi). Every iterate stays inside the bracket; a Newton step that leaves
// it, or fails to halve the residual, is replaced by bisection.
template <class Cdf, class Pdf>
double invert_cdf(double p, double lo, double hi, double guess, Cdf cdf, Pdf pdf) {
  const double tol = 1e-12 * std::min(p, 1.0 - p);
  double x = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
  double prev_residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 400; ++iter) {
    const double f = cdf(x) - p;
    if (std::abs(f) <= tol) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * kEps * std::abs(x) || hi - lo < kTiny) return x;

    double next = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(f) <= 0.5 * prev_residual) {
      const double density = pdf(x);
      if (density > 0.0 && std::isfinite(density)) next = x - f / density;
    }
    prev_residual = std::abs(f);
    if (!(next > lo && next < hi)) {
      // geometric bisection when the bracket spans orders of magnitude
      next = (lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    x = next;
  }
  return x;
}

}  // namespace

void BetaParams::validate() const {
  require_positive(alpha, "beta alpha");
  require_positive(beta, "beta beta");
}

double log_gamma(double x) {
  require_positive(x, "log_gamma argument");
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double digamma(double x) {
  require_positive(x, "digamma argument");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // asymptotic series in 1/x^2 with Bernoulli coefficients B_2n / (2n)
  const double f = 1.0 / (x * x);
  const double series =
      f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132 - f * (691.0 / 32760))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double log_beta(double a, double b) {
  require_positive(a, "log_beta a");
  require_positive(b, "log_beta b");
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  if (lo >= 10.0) {
    const double c = a + b;
    return kHalfLog2Pi + (a - 0.5) * std::log(a / c) + (b - 0.5) * std::log(b / c) -
           0.5 * std::log(c) + stirling_error(a) + stirling_error(b) - stirling_error(c);
  }
  if (hi >= 10.0) return log_gamma(lo) + log_gamma_ratio_large(hi, lo);
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double gamma_p(double a, double x) {
  require_positive(a, "gamma shape");
  if (std::isnan(x) || x < 0.0) throw DomainError("incomplete gamma argument must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
  require_positive(a, "gamma shape");
  if (std::isnan(x) || x < 0.0) throw DomainError("incomplete gamma argument must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_series(a, x);
  return gamma_continued_fraction(a, x);
}

double beta_inc(double a, double b, double x) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  if (std::isnan(x)) throw DomainError("incomplete beta argument is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double gamma_cdf(double x, double shape, double scale) {
  require_positive(scale, "gamma scale");
  if (x <= 0.0) return 0.0;
  return gamma_p(shape, x / scale);
}

double gamma_pdf(double x, double shape, double scale) {
  require_positive(shape, "gamma shape");
  require_positive(scale, "gamma scale");
  if (x < 0.0) return 0.0;
  if (x == 0.0) {
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return shape == 1.0 ? 1.0 / scale : 0.0;
  }
  return std::exp(log_gamma_prefix(shape, x / scale)) / x;
}

double gamma_quantile(double p, double shape, double scale) {
  require_open_probability(p);
  require_positive(shape, "gamma shape");
  require_positive(scale, "gamma scale");
  auto cdf = [shape](double z) { return gamma_p(shape, z); };
  auto pdf = [shape](double z) { return gamma_pdf(z, shape, 1.0); };
  double hi = std::max(1.0, shape);
  while (cdf(hi) < p) hi *= 2.0;
  // Wilson-Hilferty starting point
  const double w = 1.0 / (9.0 * shape);
  const double cube = 1.0 - w + normal_quantile(p) * std::sqrt(w);
  const double guess = shape * cube * cube * cube;
  return scale * invert_cdf(p, 0.0, hi, guess, cdf, pdf);
}

double beta_cdf(double x, const BetaParams& params) {
  return beta_inc(params.alpha, params.beta, x);
}

double beta_pdf(double x, const BetaParams& params) {
  params.validate();
  if (x < 0.0 || x > 1.0) return 0.0;
  const double a = params.alpha;
  const double b = params.beta;
  if (x == 0.0) {
    if (a < 1.0) return std::numeric_limits<double>::infinity();
    return a == 1.0 ? std::exp(-log_beta(a, b)) : 0.0;
  }
  if (x == 1.0) {
    if (b < 1.0) return std::numeric_limits<double>::infinity();
    return b == 1.0 ? std::exp(-log_beta(a, b)) : 0.0;
  }
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

double beta_quantile(double p, const BetaParams& params) {
  require_open_probability(p);
  params.validate();
  auto cdf = [&params](double x) { return beta_cdf(x, params); };
  auto pdf = [&params](double x) { return beta_pdf(x, params); };
  return invert_cdf(p, 0.0, 1.0, params.alpha / (params.alpha + params.beta), cdf, pdf);
}

double student_t_cdf(double t, double df) {
  require_positive(df, "degrees of freedom");
  if (std::isnan(t)) throw DomainError("t statistic is NaN");
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // tail = P(T > |t|)
  double tail;
  if (t2 < df) {
    tail = 0.5 * (1.0 - beta_inc(0.5, 0.5 * df, t2 / (df + t2)));
  } else {
    tail = 0.5 * beta_inc(0.5 * df, 0.5, df / (df + t2));
  }
  return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_pdf(double t, double df) {
  require_positive(df, "degrees of freedom");
  return std::exp(-0.5 * (df + 1.0) * std::log1p(t * t / df) - 0.5 * std::log(df) -
                  log_beta(0.5 * df, 0.5));
}

double student_t_quantile(double p, double df) {
  require_open_probability(p);
  require_positive(df, "degrees of freedom");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  // p > 1/2: P(T > t) = (1 - p) = I_w(df/2, 1/2) / 2 with w = df / (df + t^2)
  const double two_tail = 2.0 * (1.0 - p);
  if (two_tail > 0.5) {
    // v = t^2 / (df + t^2) solves I_v(1/2, df/2) = 1 - two_tail
    const double v = beta_quantile(1.0 - two_tail, BetaParams{0.5, 0.5 * df});
    return std::sqrt(df * v / (1.0 - v));
  }
  const double w = beta_quantile(two_tail, BetaParams{0.5 * df, 0.5});
  return std::sqrt(df * (1.0 - w) / w);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Wichura (1988), algorithm AS 241, PPND16.
double normal_quantile(double p) {
  require_open_probability(p);
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

}  // namespace nbratio
