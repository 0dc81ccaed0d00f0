#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nbratio {

using Counts = std::vector<std::int64_t>;

// Pre/post treatment counts. Each entry is already the sum over `m_pre`
// (`m_post`) replicate observations of one subject.
struct PairedDataset {
  Counts pre;
  Counts post;
  bool paired = true;
  int m_pre = 1;
  int m_post = 1;

  // Throws std::invalid_argument on negative counts, unequal paired lengths,
  // or non-positive replicate counts.
  void validate() const;
  // validate() plus N >= 2 in each group.
  void validate_for_inference() const;

  bool operator==(const PairedDataset&) const = default;
};

// Lower and upper clamp on the shape estimate.
inline constexpr double kShapeMin = 1e-4;
inline constexpr double kShapeMax = 1e6;

struct ShapeEstimate {
  double k = kShapeMax;
  // Sample variance did not exceed the mean; k is the upper clamp.
  bool underdispersed = false;
};

struct SampleSummary {
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  std::int64_t sum_pre = 0;
  std::int64_t sum_post = 0;
  double mean_pre = 0.0;
  double mean_post = 0.0;
  double var_pre = 0.0;   // divisor N - 1
  double var_post = 0.0;
  bool paired = true;
  std::optional<double> cov;  // paired only
  std::optional<double> rho;  // paired only; absent when a variance is zero
  std::optional<ShapeEstimate> k1_hat;
  std::optional<ShapeEstimate> k2_hat;  // absent when sum_post == 0
  double r_hat = 0.0;
};

enum class CorrelationKind { pearson, spearman };

struct SummaryOptions {
  CorrelationKind correlation = CorrelationKind::pearson;
  bool estimate_shapes = true;
};

// Throws EstimateUndefined when the pre-treatment mean is zero.
SampleSummary summarize(const PairedDataset& data, const SummaryOptions& options = {});

// Profile maximum likelihood for the negative binomial shape with the mean
// fixed at the sample mean. Throws ShapeInestimable for all-zero input and
// std::invalid_argument for fewer than two observations.
ShapeEstimate nb_mle_k(std::span<const std::int64_t> counts);

// Profile log-likelihood used by nb_mle_k (constant terms in the counts
// included), with the mean fixed at the sample mean.
double nb_profile_loglik(std::span<const std::int64_t> counts, double k);

double pearson_correlation(std::span<const std::int64_t> x, std::span<const std::int64_t> y);
double spearman_correlation(std::span<const std::int64_t> x, std::span<const std::int64_t> y);

struct PooledCounts {
  Counts sums;
  int replicates = 1;
};

// Row sums of a subjects x replicates matrix. Throws InconsistentReplicates
// on ragged rows or rows without any replicate.
PooledCounts pool_replicates(const std::vector<Counts>& raw);

}  // namespace nbratio
