#include "nbratio/serialize.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace nbratio {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

Json nan_as_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

double null_as_nan(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it != j.end() && !it->is_null()) out = it->template get<T>();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) {
      throw std::invalid_argument("unknown " + std::string(what) + " field '" + k + "'");
    }
  }
}

constexpr std::array<const char*, 4> kGroupKeys = {"reduced", "inconclusive", "borderline",
                                                   "adequate"};

}  // namespace

void to_json(Json& j, Method m) { j = std::string(method_name(m)); }

void from_json(const Json& j, Method& m) {
  auto parsed = parse_method(j.get<std::string>());
  if (!parsed) throw std::invalid_argument("unknown method '" + j.get<std::string>() + "'");
  m = *parsed;
}

void to_json(Json& j, KScaling k) { j = k == KScaling::divide ? "divide" : "multiply"; }

void from_json(const Json& j, KScaling& k) {
  const auto s = j.get<std::string>();
  if (s == "divide") {
    k = KScaling::divide;
  } else if (s == "multiply") {
    k = KScaling::multiply;
  } else {
    throw std::invalid_argument("k_scaling must be 'divide' or 'multiply'");
  }
}

void to_json(Json& j, CorrelationKind c) {
  j = c == CorrelationKind::pearson ? "pearson" : "spearman";
}

void from_json(const Json& j, CorrelationKind& c) {
  const auto s = j.get<std::string>();
  if (s == "pearson") {
    c = CorrelationKind::pearson;
  } else if (s == "spearman") {
    c = CorrelationKind::spearman;
  } else {
    throw std::invalid_argument("correlation must be 'pearson' or 'spearman'");
  }
}

void to_json(Json& j, const BetaParams& p) { j = {{"alpha", p.alpha}, {"beta", p.beta}}; }

void from_json(const Json& j, BetaParams& p) {
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
}

void to_json(Json& j, const EfficacyDesign& d) {
  j = {{"target_e", d.target_e}, {"margin_delta", d.margin_delta}, {"alpha", d.alpha},
       {"t_i", d.t_i()},         {"t_a", grid_round(d.t_a())}};
}

void from_json(const Json& j, EfficacyDesign& d) {
  reject_unknown(j, {"target_e", "margin_delta", "alpha", "t_i", "t_a"}, "design");
  read_if(j, "target_e", d.target_e);
  read_if(j, "margin_delta", d.margin_delta);
  read_if(j, "alpha", d.alpha);
}

void to_json(Json& j, const MethodOptions& o) {
  j = {{"bnb_prior", o.bnb_prior},
       {"binomial_prior", o.binomial_prior},
       {"binomial_level_99", o.binomial_level_99},
       {"waavp_literal_v", o.waavp_literal_v},
       {"k_scaling", o.k_scaling},
       {"correlation", o.correlation}};
}

void from_json(const Json& j, MethodOptions& o) {
  reject_unknown(j,
                 {"bnb_prior", "binomial_prior", "binomial_level_99", "waavp_literal_v",
                  "k_scaling", "correlation"},
                 "options");
  read_if(j, "bnb_prior", o.bnb_prior);
  read_if(j, "binomial_prior", o.binomial_prior);
  read_if(j, "binomial_level_99", o.binomial_level_99);
  read_if(j, "waavp_literal_v", o.waavp_literal_v);
  read_if(j, "k_scaling", o.k_scaling);
  read_if(j, "correlation", o.correlation);
}

void to_json(Json& j, const Typology& t) {
  j = {{"group", std::string(typology_group_name(t.group))},
       {"typology", static_cast<int>(t.group)},
       {"fine", t.fine ? Json(std::string(fine_typology_name(*t.fine))) : Json(nullptr)}};
}

void from_json(const Json& j, Typology& t) {
  const auto name = j.at("group").get<std::string>();
  auto g = parse_typology_group(name);
  if (!g) throw std::invalid_argument("unknown typology group '" + name + "'");
  t.group = *g;
  t.fine.reset();
  if (auto f = get_opt<std::string>(j, "fine")) {
    t.fine = parse_fine_typology(*f);
    if (!t.fine) throw std::invalid_argument("unknown fine typology '" + *f + "'");
  }
}

void to_json(Json& j, const MethodOutcome& o) {
  j = {{"method", o.method},
       {"r_hat", nan_as_null(o.r_hat)},
       {"lcl", opt(o.lcl)},
       {"ucl", opt(o.ucl)},
       {"p_i", opt(o.p_i)},
       {"p_a", opt(o.p_a)},
       {"classification", o.classification},
       {"degenerate", opt(o.degenerate)},
       {"failure", opt(o.failure)}};
}

void from_json(const Json& j, MethodOutcome& o) {
  o.method = j.at("method").get<Method>();
  o.r_hat = null_as_nan(j.at("r_hat"));
  o.lcl = get_opt<double>(j, "lcl");
  o.ucl = get_opt<double>(j, "ucl");
  o.p_i = get_opt<double>(j, "p_i");
  o.p_a = get_opt<double>(j, "p_a");
  o.classification = j.at("classification").get<Typology>();
  o.degenerate = get_opt<std::string>(j, "degenerate");
  o.failure = get_opt<std::string>(j, "failure");
}

void to_json(Json& j, const PairedDataset& d) {
  j = {{"pre", d.pre}, {"post", d.post}, {"paired", d.paired}, {"m_pre", d.m_pre},
       {"m_post", d.m_post}};
}

void from_json(const Json& j, PairedDataset& d) {
  d.pre = j.at("pre").get<Counts>();
  d.post = j.at("post").get<Counts>();
  d.paired = j.value("paired", true);
  d.m_pre = j.value("m_pre", 1);
  d.m_post = j.value("m_post", 1);
}

void to_json(Json& j, const ShapeEstimate& k) {
  j = {{"k", k.k}, {"underdispersed", k.underdispersed}};
}

void from_json(const Json& j, ShapeEstimate& k) {
  k.k = j.at("k").get<double>();
  k.underdispersed = j.value("underdispersed", false);
}

void to_json(Json& j, const SampleSummary& s) {
  j = {{"n_pre", s.n_pre},       {"n_post", s.n_post},       {"sum_pre", s.sum_pre},
       {"sum_post", s.sum_post}, {"mean_pre", s.mean_pre},   {"mean_post", s.mean_post},
       {"var_pre", s.var_pre},   {"var_post", s.var_post},   {"paired", s.paired},
       {"cov", opt(s.cov)},      {"rho", opt(s.rho)},        {"k1", opt(s.k1_hat)},
       {"k2", opt(s.k2_hat)},    {"r_hat", s.r_hat}};
}

void from_json(const Json& j, SampleSummary& s) {
  s.n_pre = j.at("n_pre").get<std::size_t>();
  s.n_post = j.at("n_post").get<std::size_t>();
  s.sum_pre = j.at("sum_pre").get<std::int64_t>();
  s.sum_post = j.at("sum_post").get<std::int64_t>();
  s.mean_pre = j.at("mean_pre").get<double>();
  s.mean_post = j.at("mean_post").get<double>();
  s.var_pre = j.at("var_pre").get<double>();
  s.var_post = j.at("var_post").get<double>();
  s.paired = j.at("paired").get<bool>();
  s.cov = get_opt<double>(j, "cov");
  s.rho = get_opt<double>(j, "rho");
  s.k1_hat = get_opt<ShapeEstimate>(j, "k1");
  s.k2_hat = get_opt<ShapeEstimate>(j, "k2");
  s.r_hat = j.at("r_hat").get<double>();
}

void to_json(Json& j, const SimScenario& s) {
  j = {{"n", s.n},
       {"mu1", s.mu1},
       {"k1", s.k1},
       {"k2", s.k2},
       {"rho", s.rho},
       {"r_grid", s.r_grid},
       {"replicates", s.replicates},
       {"seed", s.seed},
       {"design", s.design},
       {"methods", s.methods},
       {"options", s.options}};
}

SimScenario scenario_from_json(const Json& j, SimScenario s) {
  reject_unknown(j,
                 {"n", "mu1", "k1", "k2", "rho", "r_grid", "replicates", "seed", "design",
                  "methods", "options"},
                 "scenario");
  read_if(j, "n", s.n);
  read_if(j, "mu1", s.mu1);
  read_if(j, "k1", s.k1);
  read_if(j, "k2", s.k2);
  read_if(j, "rho", s.rho);
  read_if(j, "r_grid", s.r_grid);
  read_if(j, "replicates", s.replicates);
  read_if(j, "seed", s.seed);
  if (auto it = j.find("design"); it != j.end()) {
    EfficacyDesign d = s.design;
    from_json(*it, d);
    s.design = d;
  }
  read_if(j, "methods", s.methods);
  if (auto it = j.find("options"); it != j.end()) {
    MethodOptions o = s.options;
    from_json(*it, o);
    s.options = o;
  }
  return s;
}

void from_json(const Json& j, SimScenario& s) { s = scenario_from_json(j, s); }

std::string dump_pretty(const Json& j) { return j.dump(2) + "\n"; }

void to_json(Json& j, const ScanCell& c) {
  Json groups = Json::object();
  Json rates = Json::object();
  for (std::size_t g = 0; g < 4; ++g) {
    groups[kGroupKeys[g]] = c.groups[g];
    rates[kGroupKeys[g]] = c.rate(c.groups[g]);
  }
  rates["degenerate"] = c.rate(c.degenerate);
  rates["reject_inferiority"] = c.reject_inferiority_rate();
  rates["reject_noninferiority"] = c.reject_noninferiority_rate();
  j = {{"method", c.method},
       {"r", c.r},
       {"replicates", c.replicates},
       {"reject_inferiority", c.reject_inferiority},
       {"reject_noninferiority", c.reject_noninferiority},
       {"degenerate", c.degenerate},
       {"groups", groups},
       {"rates", rates}};
}

void from_json(const Json& j, ScanCell& c) {
  c.method = j.at("method").get<Method>();
  c.r = j.at("r").get<double>();
  c.replicates = j.at("replicates").get<std::uint64_t>();
  c.reject_inferiority = j.at("reject_inferiority").get<std::uint64_t>();
  c.reject_noninferiority = j.at("reject_noninferiority").get<std::uint64_t>();
  c.degenerate = j.at("degenerate").get<std::uint64_t>();
  const auto& g = j.at("groups");
  for (std::size_t i = 0; i < 4; ++i) c.groups[i] = g.at(kGroupKeys[i]).get<std::uint64_t>();
}

void to_json(Json& j, const ScanResult& r) {
  j = {{"scenario", r.scenario}, {"cells", r.cells}};
}

void from_json(const Json& j, ScanResult& r) {
  r.scenario = scenario_from_json(j.at("scenario"));
  r.cells = j.at("cells").get<std::vector<ScanCell>>();
}

void to_json(Json& j, const TypologySeries& s) {
  j = {{"method", s.method},           {"r", s.r},
       {"reduced", s.reduced},         {"inconclusive", s.inconclusive},
       {"borderline", s.borderline},   {"adequate", s.adequate},
       {"degenerate", s.degenerate}};
}

void to_json(Json& j, const TypologyCurves& c) {
  j = {{"t_a", c.t_a}, {"t_i", c.t_i}, {"series", c.series}};
}

void to_json(Json& j, const PlanCriteria& c) {
  Json ranges = Json::array();
  for (const auto& [lo, hi] : c.inconclusive_ranges) ranges.push_back({lo, hi});
  j = {{"max_inconclusive", c.max_inconclusive},
       {"inconclusive_ranges", ranges},
       {"max_misleading", c.max_misleading},
       {"method", c.method}};
}

void from_json(const Json& j, PlanCriteria& c) {
  reject_unknown(j, {"max_inconclusive", "inconclusive_ranges", "max_misleading", "method"},
                 "criteria");
  read_if(j, "max_inconclusive", c.max_inconclusive);
  read_if(j, "max_misleading", c.max_misleading);
  read_if(j, "method", c.method);
  if (auto it = j.find("inconclusive_ranges"); it != j.end() && !it->is_null()) {
    c.inconclusive_ranges.clear();
    for (const auto& iv : *it) {
      if (!iv.is_array() || iv.size() != 2) {
        throw std::invalid_argument("inconclusive range must be a [low, high] pair");
      }
      c.inconclusive_ranges.emplace_back(iv[0].get<double>(), iv[1].get<double>());
    }
  }
}

void to_json(Json& j, const PlanEvaluation& e) {
  j = {{"n", e.n},
       {"worst_inconclusive", e.worst_inconclusive},
       {"worst_misleading", e.worst_misleading},
       {"satisfied", e.satisfied}};
}

void to_json(Json& j, const PlanReport& r) {
  Json curves = Json::array();
  for (const auto& scan : r.scans) {
    curves.push_back({{"n", scan.scenario.n}, {"curves", typology_curves(scan)}});
  }
  j = {{"criteria", r.criteria},
       {"evaluations", r.evaluations},
       {"recommended_n", opt(r.recommended_n)},
       {"scans", r.scans},
       {"curves", curves}};
}

}  // namespace nbratio
