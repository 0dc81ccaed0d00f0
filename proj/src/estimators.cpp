#include "nbratio/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nbratio/errors.hpp"
#include "nbratio/special.hpp"

namespace nbratio {

namespace {

void check_counts(const Counts& counts, const char* group) {
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) {
      throw std::invalid_argument(std::string(group) + " count " + std::to_string(i + 1) +
                                  " is negative");
    }
  }
}

double mean_of(std::span<const std::int64_t> v) {
  long double total = 0.0L;
  for (auto c : v) total += static_cast<long double>(c);
  return static_cast<double>(total / static_cast<long double>(v.size()));
}

double sample_variance(std::span<const std::int64_t> v, double mean) {
  double ss = 0.0;
  for (auto c : v) {
    const double d = static_cast<double>(c) - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(v.size() - 1);
}

std::int64_t sum_of(std::span<const std::int64_t> v) {
  return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}

// Distinct positive counts with multiplicities; zeros contribute only through
// the k ln(k / (k + mu)) term of the profile likelihood.
struct CountHistogram {
  std::vector<std::pair<double, double>> positive;  // (value, multiplicity)
  double n = 0.0;
  double total = 0.0;
  double mean = 0.0;
};

CountHistogram histogram(std::span<const std::int64_t> counts) {
  std::vector<std::int64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  CountHistogram h;
  h.n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (sorted[i] > 0) {
      h.positive.emplace_back(static_cast<double>(sorted[i]), static_cast<double>(j - i));
    }
    h.total += static_cast<double>(sorted[i]) * static_cast<double>(j - i);
    i = j;
  }
  h.mean = h.total / h.n;
  return h;
}

// Profile log-likelihood without the k-free term sum(ln x_i!).
double profile_loglik_core(const CountHistogram& h, double k) {
  const double lg_k = log_gamma(k);
  double out = 0.0;
  for (const auto& [value, mult] : h.positive) out += mult * (log_gamma(value + k) - lg_k);
  const double log_k_mu = std::log(k + h.mean);
  out += h.n * k * (std::log(k) - log_k_mu);
  out += h.total * (std::log(h.mean) - log_k_mu);
  return out;
}

// d/dk of the profile log-likelihood. psi(x + k) - psi(k) is summed exactly
// for small x to avoid cancellation when k is large.
double profile_score(const CountHistogram& h, double k) {
  double out = -h.n * std::log1p(h.mean / k);
  const double psi_k = digamma(k);
  for (const auto& [value, mult] : h.positive) {
    double diff = 0.0;
    if (value <= 64.0) {
      for (double j = 0.0; j < value; j += 1.0) diff += 1.0 / (k + j);
    } else {
      diff = digamma(value + k) - psi_k;
    }
    out += mult * diff;
  }
  return out;
}

std::vector<double> average_ranks(std::span<const std::int64_t> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based average
    for (std::size_t m = i; m < j; ++m) ranks[order[m]] = rank;
    i = j;
  }
  return ranks;
}

double pearson_of(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> to_double(std::span<const std::int64_t> v) {
  return {v.begin(), v.end()};
}

}  // namespace

void PairedDataset::validate() const {
  if (m_pre < 1 || m_post < 1) throw std::invalid_argument("replicate counts must be positive");
  if (paired && pre.size() != post.size()) {
    throw std::invalid_argument("paired data needs equal pre (" + std::to_string(pre.size()) +
                                ") and post (" + std::to_string(post.size()) + ") lengths");
  }
  check_counts(pre, "pre-treatment");
  check_counts(post, "post-treatment");
}

void PairedDataset::validate_for_inference() const {
  validate();
  if (pre.size() < 2 || post.size() < 2) {
    throw std::invalid_argument("at least two subjects are needed in each group");
  }
}

double pearson_correlation(std::span<const std::int64_t> x, std::span<const std::int64_t> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("correlation needs two equal-length samples of size >= 2");
  }
  const auto xd = to_double(x);
  const auto yd = to_double(y);
  return pearson_of(xd, yd);
}

double spearman_correlation(std::span<const std::int64_t> x, std::span<const std::int64_t> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("correlation needs two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_of(rx, ry);
}

double nb_profile_loglik(std::span<const std::int64_t> counts, double k) {
  if (counts.empty()) throw std::invalid_argument("no counts");
  if (!(k > 0.0)) throw DomainError("shape must be positive");
  const auto h = histogram(counts);
  if (h.total == 0.0) return 0.0;
  double constant = 0.0;
  for (const auto& [value, mult] : h.positive) constant += mult * log_gamma(value + 1.0);
  return profile_loglik_core(h, k) - constant;
}

ShapeEstimate nb_mle_k(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) throw std::invalid_argument("shape estimation needs >= 2 counts");
  for (auto c : counts) {
    if (c < 0) throw std::invalid_argument("counts must be non-negative");
  }
  const auto h = histogram(counts);
  if (h.total == 0.0) throw ShapeInestimable("all counts are zero; shape cannot be estimated");

  // The profile likelihood is increasing in k unless the (divisor N)
  // variance exceeds the mean.
  double ss = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - h.mean;
    ss += d * d;
  }
  if (ss / h.n <= h.mean) return {kShapeMax, true};

  // The score in k has a single root when the variance exceeds the mean;
  // regula falsi (Illinois) on log k within the clamp range.
  double lo = std::log(kShapeMin);
  double hi = std::log(kShapeMax);
  double f_lo = profile_score(h, kShapeMin);
  double f_hi = profile_score(h, kShapeMax);
  if (f_lo <= 0.0) return {kShapeMin, false};
  if (f_hi >= 0.0) return {kShapeMax, false};
  int side = 0;
  double t = lo;
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    // fall back to bisection if the secant step lands on a bracket end
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const double ft = profile_score(h, std::exp(t));
    if (ft == 0.0) break;
    if (ft > 0.0) {
      lo = t;
      f_lo = ft;
      if (side == 1) f_hi *= 0.5;
      side = 1;
    } else {
      hi = t;
      f_hi = ft;
      if (side == -1) f_lo *= 0.5;
      side = -1;
    }
  }
  return {std::clamp(std::exp(t), kShapeMin, kShapeMax), false};
}

SampleSummary summarize(const PairedDataset& data, const SummaryOptions& options) {
  data.validate_for_inference();
  SampleSummary s;
  s.paired = data.paired;
  s.n_pre = data.pre.size();
  s.n_post = data.post.size();
  s.sum_pre = sum_of(data.pre);
  s.sum_post = sum_of(data.post);
  if (s.sum_pre == 0) {
    throw EstimateUndefined("pre-treatment mean is zero; efficacy is undefined");
  }
  s.mean_pre = mean_of(data.pre);
  s.mean_post = mean_of(data.post);
  s.var_pre = sample_variance(data.pre, s.mean_pre);
  s.var_post = sample_variance(data.post, s.mean_post);
  s.r_hat = 1.0 - (static_cast<double>(s.n_pre) * static_cast<double>(s.sum_post)) /
                      (static_cast<double>(s.n_post) * static_cast<double>(s.sum_pre));

  if (data.paired) {
    double cov = 0.0;
    for (std::size_t i = 0; i < data.pre.size(); ++i) {
      cov += (static_cast<double>(data.pre[i]) - s.mean_pre) *
             (static_cast<double>(data.post[i]) - s.mean_post);
    }
    s.cov = cov / static_cast<double>(data.pre.size() - 1);
    const double rho = options.correlation == CorrelationKind::spearman
                           ? spearman_correlation(data.pre, data.post)
                           : pearson_correlation(data.pre, data.post);
    if (!std::isnan(rho)) s.rho = rho;
  }

  if (options.estimate_shapes) {
    s.k1_hat = nb_mle_k(data.pre);
    if (s.sum_post > 0) s.k2_hat = nb_mle_k(data.post);
  }
  return s;
}

PooledCounts pool_replicates(const std::vector<Counts>& raw) {
  if (raw.empty()) throw InconsistentReplicates("replicate matrix has no subjects");
  const std::size_t width = raw.front().size();
  if (width == 0) throw InconsistentReplicates("subject 1 has no replicate observations");
  PooledCounts out;
  out.replicates = static_cast<int>(width);
  out.sums.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != width) {
      throw InconsistentReplicates("subject " + std::to_string(i + 1) + " has " +
                                   std::to_string(raw[i].size()) + " replicates, expected " +
                                   std::to_string(width));
    }
    std::int64_t total = 0;
    for (auto c : raw[i]) {
      if (c < 0) throw std::invalid_argument("replicate counts must be non-negative");
      total += c;
    }
    out.sums.push_back(total);
  }
  return out;
}

}  // namespace nbratio
