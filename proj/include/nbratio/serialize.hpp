#pragma once

// JSON mapping for the public types. Absent optionals are written as null;
// NaN estimates are written as null and read back as NaN.

#include <json.hpp>

#include "nbratio/efficacy.hpp"
#include "nbratio/estimators.hpp"
#include "nbratio/montecarlo.hpp"

namespace nbratio {

using Json = nlohmann::json;

void to_json(Json& j, Method m);
void from_json(const Json& j, Method& m);
void to_json(Json& j, KScaling k);
void from_json(const Json& j, KScaling& k);
void to_json(Json& j, CorrelationKind c);
void from_json(const Json& j, CorrelationKind& c);

void to_json(Json& j, const BetaParams& p);
void from_json(const Json& j, BetaParams& p);
void to_json(Json& j, const EfficacyDesign& d);
void from_json(const Json& j, EfficacyDesign& d);
void to_json(Json& j, const MethodOptions& o);
void from_json(const Json& j, MethodOptions& o);
void to_json(Json& j, const Typology& t);
void from_json(const Json& j, Typology& t);
void to_json(Json& j, const MethodOutcome& o);
void from_json(const Json& j, MethodOutcome& o);
void to_json(Json& j, const PairedDataset& d);
void from_json(const Json& j, PairedDataset& d);
void to_json(Json& j, const ShapeEstimate& k);
void from_json(const Json& j, ShapeEstimate& k);
void to_json(Json& j, const SampleSummary& s);
void from_json(const Json& j, SampleSummary& s);

void to_json(Json& j, const SimScenario& s);
void from_json(const Json& j, SimScenario& s);
void to_json(Json& j, const ScanCell& c);
void from_json(const Json& j, ScanCell& c);
void to_json(Json& j, const ScanResult& r);
void from_json(const Json& j, ScanResult& r);
void to_json(Json& j, const TypologySeries& s);
void to_json(Json& j, const TypologyCurves& c);
void to_json(Json& j, const PlanCriteria& c);
void from_json(const Json& j, PlanCriteria& c);
void to_json(Json& j, const PlanEvaluation& e);
void to_json(Json& j, const PlanReport& r);

// Scenario fields present in `j` override those of `base`; unknown keys are
// rejected with std::invalid_argument naming the key.
SimScenario scenario_from_json(const Json& j, SimScenario base = {});

// Two-space indented with a trailing newline; the one rendering used for
// every JSON document the CLI and service emit.
std::string dump_pretty(const Json& j);

}  // namespace nbratio
