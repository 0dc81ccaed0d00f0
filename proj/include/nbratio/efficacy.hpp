#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nbratio/estimators.hpp"
#include "nbratio/special.hpp"

namespace nbratio {

enum class Method { waavp, gamma, binomial, asymptotic, bnb };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::waavp, Method::gamma, Method::binomial, Method::asymptotic, Method::bnb};

std::string_view method_name(Method m);
// Case-insensitive; nullopt for unknown names.
std::optional<Method> parse_method(std::string_view name);
// Comma-separated list or "all". Throws std::invalid_argument on unknown names.
std::vector<Method> parse_method_list(std::string_view list);

// Target efficacy E, non-inferiority margin delta and the significance level
// of each one-sided test.
struct EfficacyDesign {
  double target_e = 0.95;
  double margin_delta = 0.05;
  double alpha = 0.025;

  double t_i() const { return target_e; }
  double t_a() const { return target_e - margin_delta; }
  double confidence_level() const { return 1.0 - 2.0 * alpha; }
  void validate() const;

  bool operator==(const EfficacyDesign&) const = default;
};

enum class TypologyGroup { reduced = 1, inconclusive = 2, borderline = 3, adequate = 4 };

enum class FineTypology { t1a, t1b, t1c, t2a, t2b, t2c, t3, t4a, t4b, t4c };

struct Typology {
  TypologyGroup group = TypologyGroup::inconclusive;
  std::optional<FineTypology> fine;

  bool operator==(const Typology&) const = default;
};

std::string_view typology_group_name(TypologyGroup g);
std::optional<TypologyGroup> parse_typology_group(std::string_view name);
std::string_view fine_typology_name(FineTypology f);
std::optional<FineTypology> parse_fine_typology(std::string_view name);

//                         reject non-inferiority null
//                              no            yes
// reject inferiority  no   Inconclusive   Adequate
//                     yes  Reduced        Borderline
TypologyGroup classify(bool reject_inferiority, bool reject_noninferiority);

// Group from "ucl < T_I" and "lcl >= T_A"; the fine label additionally places
// the point estimate and the interval ends against both thresholds.
Typology classify_fine(double lcl, double ucl, double r_hat, const EfficacyDesign& design);

// How the paired correlation adjusts the BNB shape parameters.
enum class KScaling {
  divide,   // k / (1 - rho)
  multiply  // k * (1 - rho)
};

struct MethodOptions {
  BetaParams bnb_prior{1.0, 1.0};
  BetaParams binomial_prior{1.0, 1.0};
  bool binomial_level_99 = false;
  bool waavp_literal_v = false;
  KScaling k_scaling = KScaling::divide;
  CorrelationKind correlation = CorrelationKind::pearson;

  bool operator==(const MethodOptions&) const = default;
};

struct MethodOutcome {
  Method method = Method::waavp;
  double r_hat = 0.0;  // NaN when the estimate itself is undefined
  std::optional<double> lcl;
  std::optional<double> ucl;
  std::optional<double> p_i;
  std::optional<double> p_a;
  Typology classification;
  // Set when the method cannot produce limits for this data (e.g. zero
  // post-treatment total); neither null hypothesis is rejected.
  std::optional<std::string> degenerate;
  // Set when the method failed on this input (error message).
  std::optional<std::string> failure;

  bool reject_inferiority() const;
  bool reject_noninferiority() const;
  bool usable() const { return !degenerate && !failure; }

  bool operator==(const MethodOutcome&) const;
};

inline constexpr std::string_view kZeroPostReason = "NA: sum of post-treatment counts is 0";

MethodOutcome waavp_ci(const SampleSummary& summary, const EfficacyDesign& design,
                       const MethodOptions& options = {});
MethodOutcome gamma_ci(const SampleSummary& summary, const EfficacyDesign& design,
                       const MethodOptions& options = {});
MethodOutcome binomial_ci(std::int64_t sum_pre, std::int64_t sum_post, double r_hat,
                          const EfficacyDesign& design, const MethodOptions& options = {});
MethodOutcome binomial_ci(const SampleSummary& summary, const EfficacyDesign& design,
                          const MethodOptions& options = {});
MethodOutcome asymptotic_ci(const SampleSummary& summary, const EfficacyDesign& design,
                            const MethodOptions& options = {});
// Requires k1_hat in the summary.
MethodOutcome bnb_test(const SampleSummary& summary, const EfficacyDesign& design,
                       const MethodOptions& options = {});
MethodOutcome bnb_test(const PairedDataset& data, const EfficacyDesign& design,
                       const MethodOptions& options = {});

MethodOutcome run_method(Method method, const SampleSummary& summary,
                         const EfficacyDesign& design, const MethodOptions& options);

// One outcome per requested method, in request order. Per-method errors are
// captured in the outcome; a zero pre-treatment mean fails every method.
std::vector<MethodOutcome> analyze_all(const PairedDataset& data, const EfficacyDesign& design,
                                       const std::vector<Method>& methods,
                                       const MethodOptions& options = {});
std::vector<MethodOutcome> analyze_summary(const SampleSummary& summary,
                                           const EfficacyDesign& design,
                                           const std::vector<Method>& methods,
                                           const MethodOptions& options = {});

}  // namespace nbratio
