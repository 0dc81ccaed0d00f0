#include "nbratio/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_sig6(*v) : "-"; }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string verdict(const MethodOutcome& o) {
  if (o.failure) return "failed: " + *o.failure;
  if (o.degenerate) return *o.degenerate;
  std::string out(typology_group_name(o.classification.group));
  out += " (";
  out += o.classification.fine ? std::string(fine_typology_name(*o.classification.fine))
                               : std::to_string(static_cast<int>(o.classification.group));
  return out + ")";
}

SpeciesPreset make_preset(Species s, std::string label, double pre_mean, double post_mean) {
  SpeciesPreset p;
  p.name = std::string(species_name(s));
  p.label = std::move(label);
  p.scenario = survey_scenario(s);
  p.target_e = p.scenario.design.target_e;
  p.delta = p.scenario.design.margin_delta;
  p.pre_mean = pre_mean;
  p.post_mean = post_mean;
  return p;
}

}  // namespace

std::string format_sig6(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool AnalysisReport::all_failed() const {
  return !outcomes.empty() && std::all_of(outcomes.begin(), outcomes.end(),
                                          [](const MethodOutcome& o) { return o.failure.has_value(); });
}

AnalysisReport analyze_report(const PairedDataset& data, const EfficacyDesign& design,
                              const std::vector<Method>& methods, const MethodOptions& options) {
  design.validate();
  data.validate_for_inference();
  AnalysisReport rep;
  rep.design = design;
  rep.options = options;
  rep.n_pre = data.pre.size();
  rep.n_post = data.post.size();
  rep.paired = data.paired;
  rep.m_pre = data.m_pre;
  rep.m_post = data.m_post;
  try {
    rep.summary = summarize(data, {options.correlation, true});
  } catch (const EstimateUndefined&) {
    rep.summary.reset();
  }
  rep.outcomes = rep.summary ? analyze_summary(*rep.summary, design, methods, options)
                             : analyze_all(data, design, methods, options);
  return rep;
}

Json report_json(const AnalysisReport& r) {
  return {{"design", r.design},
          {"options", r.options},
          {"data",
           {{"n_pre", r.n_pre},
            {"n_post", r.n_post},
            {"paired", r.paired},
            {"m_pre", r.m_pre},
            {"m_post", r.m_post}}},
          {"summary", r.summary ? Json(*r.summary) : Json(nullptr)},
          {"results", r.outcomes}};
}

std::string report_text(const AnalysisReport& r) {
  std::string out = "Efficacy analysis\n";
  out += "  subjects: " + std::to_string(r.n_pre) + " pre, " + std::to_string(r.n_post) +
         " post (" + (r.paired ? "paired" : "unpaired") + "); replicates per subject: pre x" +
         std::to_string(r.m_pre) + ", post x" + std::to_string(r.m_post) + "\n";
  out += "  target E = " + format_sig6(r.design.target_e) +
         ", margin = " + format_sig6(r.design.margin_delta) +
         ", alpha = " + format_sig6(r.design.alpha) + " (T_I = " + format_sig6(r.design.t_i()) +
         ", T_A = " + format_sig6(r.design.t_a()) + ")\n";
  if (r.summary) {
    const auto& s = *r.summary;
    out += "  pre mean = " + format_sig6(s.mean_pre) + ", post mean = " + format_sig6(s.mean_post) +
           ", r_hat = " + format_sig6(s.r_hat);
    if (s.rho) out += ", rho = " + format_sig6(*s.rho);
    if (s.k1_hat) out += ", k1 = " + format_sig6(s.k1_hat->k);
    if (s.k2_hat) out += ", k2 = " + format_sig6(s.k2_hat->k);
    out += "\n";
  } else {
    out += "  pre-treatment mean is zero: efficacy is undefined\n";
  }
  out += "\n";
  constexpr std::size_t w = 12;
  out += pad("method", w) + pad("r_hat", w) + pad("lcl", w) + pad("ucl", w) + pad("p_I", w) +
         pad("p_A", w) + "classification\n";
  for (const auto& o : r.outcomes) {
    out += pad(std::string(method_name(o.method)), w) + pad(format_sig6(o.r_hat), w) +
           pad(cell(o.lcl), w) + pad(cell(o.ucl), w) + pad(cell(o.p_i), w) + pad(cell(o.p_a), w) +
           verdict(o) + "\n";
  }
  return out;
}

const std::vector<SpeciesPreset>& species_presets() {
  static const std::vector<SpeciesPreset> presets = {
      make_preset(Species::hookworm, "Hookworm", 74.0, 35.0),
      make_preset(Species::ascaris, "Ascaris lumbricoides", 1255.0, 0.0),
      make_preset(Species::trichuris, "Trichuris trichiura", 162.0, 83.0),
  };
  return presets;
}

const SpeciesPreset* find_preset(std::string_view name) {
  auto s = parse_species(name);
  if (!s) return nullptr;
  for (const auto& p : species_presets()) {
    if (p.name == species_name(*s)) return &p;
  }
  return nullptr;
}

Json presets_json() {
  Json arr = Json::array();
  for (const auto& p : species_presets()) {
    arr.push_back({{"name", p.name},
                   {"label", p.label},
                   {"target_e", p.target_e},
                   {"delta", p.delta},
                   {"observed", {{"pre_mean", p.pre_mean}, {"post_mean", p.post_mean}}},
                   {"scenario", p.scenario}});
  }
  return {{"presets", arr}};
}

}  // namespace nbratio
