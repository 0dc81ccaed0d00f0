#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nbratio/efficacy.hpp"
#include "nbratio/estimators.hpp"
#include "nbratio/montecarlo.hpp"
#include "nbratio/serialize.hpp"

namespace nbratio {

// What `analyze` reports, shared by the CLI and the HTTP service.
struct AnalysisReport {
  EfficacyDesign design;
  MethodOptions options;
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  bool paired = true;
  int m_pre = 1;
  int m_post = 1;
  std::optional<SampleSummary> summary;  // absent when the pre-treatment mean is zero
  std::vector<MethodOutcome> outcomes;

  // Every requested method failed (exit code 3 / HTTP 422).
  bool all_failed() const;
};

AnalysisReport analyze_report(const PairedDataset& data, const EfficacyDesign& design,
                              const std::vector<Method>& methods,
                              const MethodOptions& options = {});

Json report_json(const AnalysisReport& report);

// Table-shaped text; numbers at 6 significant digits.
std::string report_text(const AnalysisReport& report);

// %.6g
std::string format_sig6(double v);

struct SpeciesPreset {
  std::string name;
  std::string label;
  double target_e = 0.0;
  double delta = 0.05;
  double pre_mean = 0.0;   // observed survey means
  double post_mean = 0.0;
  SimScenario scenario;
};

const std::vector<SpeciesPreset>& species_presets();
const SpeciesPreset* find_preset(std::string_view name);
Json presets_json();

}  // namespace nbratio
