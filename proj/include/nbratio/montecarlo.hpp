#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "nbratio/efficacy.hpp"
#include "nbratio/estimators.hpp"

namespace nbratio {

// Generative parameters for a Monte Carlo scan over true efficacies.
struct SimScenario {
  int n = 91;  // subjects (paired design)
  double mu1 = 74.0;
  double k1 = 0.84;
  double k2 = 0.58;
  double rho = 0.65;  // latent gamma correlation
  std::vector<double> r_grid = {0.65, 0.70};
  std::uint64_t replicates = 10'000;
  std::uint64_t seed = 1;
  EfficacyDesign design{0.70, 0.05, 0.025};
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  MethodOptions options;

  // Throws std::invalid_argument / InfeasibleCorrelation.
  void validate() const;
  bool operator==(const SimScenario&) const = default;
};

// Supremum of the latent correlations the shared-shock construction can
// produce for the two shapes.
double max_latent_correlation(double k1, double k2);

// Efficacy grid values are kept at 1e-10 resolution so that T_A = E - delta
// prints as 0.65 rather than 0.6499999999999999.
inline double grid_round(double r) { return std::round(r * 1e10) / 1e10; }

enum class Species { hookworm, ascaris, trichuris };

std::string_view species_name(Species s);
std::optional<Species> parse_species(std::string_view name);

// Field-survey parameters: N = 91, delta = 0.05, r grid {T_A, T_I}, BNB prior
// Beta(0.01, 0.01) and 99% Binomial intervals.
SimScenario survey_scenario(Species species);

using Rng = std::mt19937_64;

// Independent generator for one (seed, efficacy, replicate) cell.
Rng stream_rng(std::uint64_t seed, double r, std::uint64_t replicate);

struct SimulatedPair {
  Counts pre;
  Counts post;
};

// Shared-shock bivariate gamma mixed with Poisson noise. Marginals are
// NB(k1, mu1) and NB(k2, (1 - r) mu1); the latent gammas have correlation rho.
SimulatedPair simulate_paired(int n, double mu1, double r, double k1, double k2, double rho,
                              Rng& rng);
void simulate_paired_into(SimulatedPair& out, int n, double mu1, double r, double k1, double k2,
                          double rho, Rng& rng);

enum class TypologySlot { reduced, inconclusive, borderline, adequate, degenerate };

struct ScanCell {
  Method method = Method::waavp;
  double r = 0.0;
  std::uint64_t replicates = 0;
  std::uint64_t reject_inferiority = 0;
  std::uint64_t reject_noninferiority = 0;
  std::uint64_t degenerate = 0;
  // reduced, inconclusive, borderline, adequate (non-degenerate only)
  std::array<std::uint64_t, 4> groups{};

  double rate(std::uint64_t count) const {
    return replicates == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(replicates);
  }
  double reject_inferiority_rate() const { return rate(reject_inferiority); }
  double reject_noninferiority_rate() const { return rate(reject_noninferiority); }
  double frequency(TypologySlot slot) const;

  bool operator==(const ScanCell&) const = default;
};

struct ScanResult {
  SimScenario scenario;
  std::vector<ScanCell> cells;  // method-major, r ascending within a method

  const ScanCell* find(Method method, double r) const;
  bool operator==(const ScanResult&) const = default;
};

class ScanCancelled : public std::runtime_error {
 public:
  ScanCancelled() : std::runtime_error("cancelled") {}
};

struct ScanControl {
  unsigned threads = 1;
  // Called with (completed, total) replicate cells; calls are serialized and
  // `completed` is non-decreasing.
  std::function<void(std::uint64_t, std::uint64_t)> progress;
  const std::atomic<bool>* cancel = nullptr;
};

// Deterministic for a fixed scenario regardless of `threads`. Throws
// ScanCancelled when the cancel flag is raised.
ScanResult run_scan(const SimScenario& scenario, const ScanControl& control = {});

struct TypologySeries {
  Method method = Method::waavp;
  std::vector<double> r;
  std::vector<double> reduced;
  std::vector<double> inconclusive;
  std::vector<double> borderline;
  std::vector<double> adequate;
  std::vector<double> degenerate;
};

struct TypologyCurves {
  double t_a = 0.0;
  double t_i = 0.0;
  std::vector<TypologySeries> series;
};

// Plot-ready frequencies per method. With `window`, only r within
// [T_A - window, T_I + window] is kept.
TypologyCurves typology_curves(const ScanResult& result,
                               std::optional<double> window = std::nullopt);

struct PlanCriteria {
  // Largest acceptable probability of an inconclusive (or unanalysable)
  // result at any r inside `inconclusive_ranges`.
  double max_inconclusive = 1.0;
  // Closed intervals of r; empty means [0, T_A - delta] and [T_I, 1].
  std::vector<std::pair<double, double>> inconclusive_ranges;
  // Largest acceptable probability of a classification whose claim is false
  // at the true r, over the whole grid.
  double max_misleading = 1.0;
  Method method = Method::bnb;

  void validate() const;
};

struct PlanEvaluation {
  int n = 0;
  double worst_inconclusive = 0.0;
  double worst_misleading = 0.0;
  bool satisfied = false;
};

struct PlanReport {
  PlanCriteria criteria;
  std::vector<PlanEvaluation> evaluations;  // ascending n
  std::vector<ScanResult> scans;
  std::optional<int> recommended_n;
};

// Probability that the classification at true efficacy r makes a false claim.
double misleading_frequency(const ScanCell& cell, const EfficacyDesign& design);

// Grid a plan scans when none is given: T_A - window .. T_I + window, clipped
// to [0, 1], always containing T_A and T_I, values rounded to 1e-10 so they print cleanly.
std::vector<double> plan_default_grid(const EfficacyDesign& design, double window = 0.10,
                                      double step = 0.02);
inline constexpr std::uint64_t kPlanDefaultReplicates = 2000;

PlanReport plan_sample_size(const SimScenario& base, std::vector<int> candidates,
                            const PlanCriteria& criteria, const ScanControl& control = {});

}  // namespace nbratio
