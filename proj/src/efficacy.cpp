#include "nbratio/efficacy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nbratio/bnb.hpp"
#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

MethodOutcome make_outcome(Method method, double r_hat) {
  MethodOutcome out;
  out.method = method;
  out.r_hat = r_hat;
  return out;
}

MethodOutcome degenerate_outcome(Method method, double r_hat, std::string reason) {
  auto out = make_outcome(method, r_hat);
  out.degenerate = std::move(reason);
  out.classification = {classify(false, false), std::nullopt};
  return out;
}

MethodOutcome with_limits(MethodOutcome out, double lcl, double ucl,
                          const EfficacyDesign& design) {
  out.lcl = lcl;
  out.ucl = ucl;
  out.classification = classify_fine(lcl, ucl, out.r_hat, design);
  return out;
}

// Variance of the log ratio of means (squared-mean form), or the literal
// single-power form when requested.
double waavp_variance(const SampleSummary& s, bool literal) {
  const double m1 = s.mean_pre;
  const double m2 = s.mean_post;
  if (s.paired) {
    const double n = static_cast<double>(s.n_pre);
    const double cov = s.cov.value_or(0.0);
    if (literal) return s.var_pre / (n * m1) + s.var_post / (n * m2) - 2.0 * cov / (n * m1 * m2);
    return s.var_pre / (n * m1 * m1) + s.var_post / (n * m2 * m2) - 2.0 * cov / (n * m1 * m2);
  }
  const double n1 = static_cast<double>(s.n_pre);
  const double n2 = static_cast<double>(s.n_post);
  if (literal) return s.var_pre / (n1 * m1) + s.var_post / (n2 * m2);
  return s.var_pre / (n1 * m1 * m1) + s.var_post / (n2 * m2 * m2);
}

double t_degrees_of_freedom(const SampleSummary& s) {
  if (s.paired) return static_cast<double>(s.n_pre) - 1.0;
  return static_cast<double>(s.n_pre + s.n_post) - 2.0;
}

double adjusted_shape(double k, double rho, KScaling scaling) {
  const double factor = 1.0 - rho;
  if (factor <= 0.0) return scaling == KScaling::divide ? kShapeMax : kShapeMin;
  return std::clamp(scaling == KScaling::divide ? k / factor : k * factor, kShapeMin, kShapeMax);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::waavp:
      return "WAAVP";
    case Method::gamma:
      return "Gamma";
    case Method::binomial:
      return "Binomial";
    case Method::asymptotic:
      return "Asymptotic";
    case Method::bnb:
      return "BNB";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  const auto key = lower(trim(name));
  for (auto m : kAllMethods) {
    if (lower(method_name(m)) == key) return m;
  }
  return std::nullopt;
}

std::vector<Method> parse_method_list(std::string_view list) {
  if (lower(trim(list)) == "all") return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<Method> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = trim(list.substr(0, comma));
    if (!item.empty()) {
      auto m = parse_method(item);
      if (!m) throw std::invalid_argument("unknown method '" + std::string(item) + "'");
      if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return out;
}

void EfficacyDesign::validate() const {
  if (!(target_e >= 0.0 && target_e <= 1.0)) {
    throw std::invalid_argument("target efficacy must lie in [0, 1]");
  }
  if (!(margin_delta >= 0.0 && margin_delta <= target_e)) {
    throw std::invalid_argument("non-inferiority margin must lie in [0, target]");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
}

std::string_view typology_group_name(TypologyGroup g) {
  switch (g) {
    case TypologyGroup::reduced:
      return "Reduced";
    case TypologyGroup::inconclusive:
      return "Inconclusive";
    case TypologyGroup::borderline:
      return "Borderline";
    case TypologyGroup::adequate:
      return "Adequate";
  }
  return "?";
}

std::optional<TypologyGroup> parse_typology_group(std::string_view name) {
  const auto key = lower(trim(name));
  for (auto g : {TypologyGroup::reduced, TypologyGroup::inconclusive, TypologyGroup::borderline,
                 TypologyGroup::adequate}) {
    if (lower(typology_group_name(g)) == key) return g;
  }
  return std::nullopt;
}

std::string_view fine_typology_name(FineTypology f) {
  static constexpr std::array<std::string_view, 10> names = {"1a", "1b", "1c", "2a", "2b",
                                                             "2c", "3",  "4a", "4b", "4c"};
  return names[static_cast<std::size_t>(f)];
}

std::optional<FineTypology> parse_fine_typology(std::string_view name) {
  for (int i = 0; i < 10; ++i) {
    const auto f = static_cast<FineTypology>(i);
    if (fine_typology_name(f) == trim(name)) return f;
  }
  return std::nullopt;
}

TypologyGroup classify(bool reject_inferiority, bool reject_noninferiority) {
  if (reject_inferiority) {
    return reject_noninferiority ? TypologyGroup::borderline : TypologyGroup::reduced;
  }
  return reject_noninferiority ? TypologyGroup::adequate : TypologyGroup::inconclusive;
}

Typology classify_fine(double lcl, double ucl, double r_hat, const EfficacyDesign& design) {
  const double ti = design.t_i();
  const double ta = design.t_a();
  const bool reject_inf = ucl < ti;
  const bool reject_noninf = lcl >= ta;
  Typology out{classify(reject_inf, reject_noninf), std::nullopt};
  switch (out.group) {
    case TypologyGroup::reduced:
      if (ucl < ta) {
        out.fine = FineTypology::t1a;
      } else {
        out.fine = r_hat < ta ? FineTypology::t1b : FineTypology::t1c;
      }
      break;
    case TypologyGroup::inconclusive:
      if (r_hat < ta) {
        out.fine = FineTypology::t2a;
      } else {
        out.fine = r_hat < ti ? FineTypology::t2b : FineTypology::t2c;
      }
      break;
    case TypologyGroup::borderline:
      out.fine = FineTypology::t3;
      break;
    case TypologyGroup::adequate:
      if (lcl >= ti) {
        out.fine = FineTypology::t4c;
      } else {
        out.fine = r_hat < ti ? FineTypology::t4a : FineTypology::t4b;
      }
      break;
  }
  return out;
}

bool MethodOutcome::reject_inferiority() const {
  if (!usable()) return false;
  return classification.group == TypologyGroup::reduced ||
         classification.group == TypologyGroup::borderline;
}

bool MethodOutcome::reject_noninferiority() const {
  if (!usable()) return false;
  return classification.group == TypologyGroup::adequate ||
         classification.group == TypologyGroup::borderline;
}

bool MethodOutcome::operator==(const MethodOutcome& o) const {
  const bool same_estimate =
      (std::isnan(r_hat) && std::isnan(o.r_hat)) || r_hat == o.r_hat;
  return method == o.method && same_estimate && lcl == o.lcl && ucl == o.ucl && p_i == o.p_i &&
         p_a == o.p_a && classification == o.classification && degenerate == o.degenerate &&
         failure == o.failure;
}

MethodOutcome waavp_ci(const SampleSummary& s, const EfficacyDesign& design,
                       const MethodOptions& options) {
  if (s.sum_post == 0) return degenerate_outcome(Method::waavp, s.r_hat, std::string(kZeroPostReason));
  const double v = waavp_variance(s, options.waavp_literal_v);
  if (!(v >= 0.0)) {
    auto out = make_outcome(Method::waavp, s.r_hat);
    out.failure = "variance estimate is negative";
    out.classification = {classify(false, false), std::nullopt};
    return out;
  }
  const double t = student_t_quantile(1.0 - design.alpha, t_degrees_of_freedom(s));
  const double ratio = s.mean_post / s.mean_pre;
  const double spread = t * std::sqrt(v);
  return with_limits(make_outcome(Method::waavp, s.r_hat), 1.0 - ratio * std::exp(spread),
                     1.0 - ratio * std::exp(-spread), design);
}

MethodOutcome gamma_ci(const SampleSummary& s, const EfficacyDesign& design,
                       const MethodOptions&) {
  if (s.sum_post == 0) return degenerate_outcome(Method::gamma, s.r_hat, std::string(kZeroPostReason));
  const double ratio = s.mean_post / s.mean_pre;
  double v;
  if (s.paired) {
    const double rho = s.rho.value_or(0.0);
    v = ratio * ratio / static_cast<double>(s.n_pre) *
        (s.var_pre / (s.mean_pre * s.mean_pre) + s.var_post / (s.mean_post * s.mean_post) -
         2.0 * rho * std::sqrt(s.var_pre * s.var_post) / (s.mean_pre * s.mean_post));
  } else {
    v = ratio * ratio *
        (s.var_pre / (static_cast<double>(s.n_pre) * s.mean_pre * s.mean_pre) +
         s.var_post / (static_cast<double>(s.n_post) * s.mean_post * s.mean_post));
  }
  auto out = make_outcome(Method::gamma, s.r_hat);
  if (!(v > 0.0)) return with_limits(out, s.r_hat, s.r_hat, design);
  const double shape = ratio * ratio / v;
  const double scale = v / ratio;
  return with_limits(out, 1.0 - gamma_quantile(1.0 - design.alpha, shape, scale),
                     1.0 - gamma_quantile(design.alpha, shape, scale), design);
}

MethodOutcome binomial_ci(std::int64_t sum_pre, std::int64_t sum_post, double r_hat,
                          const EfficacyDesign& design, const MethodOptions& options) {
  auto out = make_outcome(Method::binomial, r_hat);
  if (sum_post > sum_pre) {
    throw NegativeEfficacyUnsupported(
        "Binomial method needs post-treatment total <= pre-treatment total");
  }
  const BetaParams posterior{options.binomial_prior.alpha + static_cast<double>(sum_post),
                             options.binomial_prior.beta + static_cast<double>(sum_pre - sum_post)};
  const double tail = options.binomial_level_99 ? 0.005 : design.alpha;
  return with_limits(out, 1.0 - beta_quantile(1.0 - tail, posterior),
                     1.0 - beta_quantile(tail, posterior), design);
}

MethodOutcome binomial_ci(const SampleSummary& s, const EfficacyDesign& design,
                          const MethodOptions& options) {
  return binomial_ci(s.sum_pre, s.sum_post, s.r_hat, design, options);
}

MethodOutcome asymptotic_ci(const SampleSummary& s, const EfficacyDesign& design,
                            const MethodOptions&) {
  if (s.sum_post == 0) {
    return degenerate_outcome(Method::asymptotic, s.r_hat, std::string(kZeroPostReason));
  }
  const double xbar = s.mean_pre;
  const double ybar = s.mean_post;
  const double wx = ybar / (xbar * xbar);
  const double wy = 1.0 / xbar;
  double se2;
  if (s.paired) {
    const double scale = 1.0 - s.rho.value_or(0.0);
    const double delta2 = wx * wx * s.var_pre * scale + wy * wy * s.var_post * scale;
    se2 = delta2 / static_cast<double>(s.n_pre);
  } else {
    se2 = wx * wx * s.var_pre / static_cast<double>(s.n_pre) +
          wy * wy * s.var_post / static_cast<double>(s.n_post);
  }
  const double half = normal_quantile(1.0 - design.alpha) * std::sqrt(std::max(se2, 0.0));
  return with_limits(make_outcome(Method::asymptotic, s.r_hat), s.r_hat - half, s.r_hat + half,
                     design);
}

MethodOutcome bnb_test(const SampleSummary& s, const EfficacyDesign& design,
                       const MethodOptions& options) {
  if (!s.k1_hat) throw std::invalid_argument("BNB test needs the pre-treatment shape estimate");
  double k1 = s.k1_hat->k;
  double k2 = s.k2_hat ? s.k2_hat->k : k1;
  if (s.paired && s.rho) {
    k1 = adjusted_shape(k1, *s.rho, options.k_scaling);
    k2 = adjusted_shape(k2, *s.rho, options.k_scaling);
  }
  const auto n1 = static_cast<std::int64_t>(s.n_pre);
  const auto n2 = static_cast<std::int64_t>(s.n_post);
  const auto inferiority_null =
      bnb_posterior_params(s.sum_pre, n1, n2, k1, k2, design.t_i(), options.bnb_prior);
  const auto noninferiority_null =
      bnb_posterior_params(s.sum_pre, n1, n2, k1, k2, design.t_a(), options.bnb_prior);

  auto out = make_outcome(Method::bnb, s.r_hat);
  out.p_i = inferiority_null.sf(s.sum_post);
  out.p_a = noninferiority_null.cdf(s.sum_post);
  out.classification = {classify(*out.p_i < design.alpha, *out.p_a < design.alpha),
                        std::nullopt};
  return out;
}

MethodOutcome bnb_test(const PairedDataset& data, const EfficacyDesign& design,
                       const MethodOptions& options) {
  return bnb_test(summarize(data, {options.correlation, true}), design, options);
}

MethodOutcome run_method(Method method, const SampleSummary& summary,
                         const EfficacyDesign& design, const MethodOptions& options) {
  try {
    switch (method) {
      case Method::waavp:
        return waavp_ci(summary, design, options);
      case Method::gamma:
        return gamma_ci(summary, design, options);
      case Method::binomial:
        return binomial_ci(summary, design, options);
      case Method::asymptotic:
        return asymptotic_ci(summary, design, options);
      case Method::bnb:
        return bnb_test(summary, design, options);
    }
  } catch (const std::exception& e) {
    auto out = make_outcome(method, summary.r_hat);
    out.failure = e.what();
    out.classification = {classify(false, false), std::nullopt};
    return out;
  }
  throw std::logic_error("unhandled method");
}

std::vector<MethodOutcome> analyze_summary(const SampleSummary& summary,
                                           const EfficacyDesign& design,
                                           const std::vector<Method>& methods,
                                           const MethodOptions& options) {
  std::vector<MethodOutcome> out;
  out.reserve(methods.size());
  for (auto m : methods) out.push_back(run_method(m, summary, design, options));
  return out;
}

std::vector<MethodOutcome> analyze_all(const PairedDataset& data, const EfficacyDesign& design,
                                       const std::vector<Method>& methods,
                                       const MethodOptions& options) {
  design.validate();
  if (methods.empty()) return {};
  const bool needs_shapes = std::find(methods.begin(), methods.end(), Method::bnb) != methods.end();
  SampleSummary summary;
  try {
    summary = summarize(data, {options.correlation, needs_shapes});
  } catch (const EstimateUndefined& e) {
    std::vector<MethodOutcome> out;
    for (auto m : methods) {
      auto o = make_outcome(m, std::numeric_limits<double>::quiet_NaN());
      o.failure = e.what();
      o.classification = {classify(false, false), std::nullopt};
      out.push_back(std::move(o));
    }
    return out;
  }
  return analyze_summary(summary, design, methods, options);
}

}  // namespace nbratio
