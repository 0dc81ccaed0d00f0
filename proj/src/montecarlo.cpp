#include "nbratio/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

constexpr std::uint64_t kChunk = 64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double gamma_draw(double shape, Rng& rng) {
  if (shape <= 0.0) return 0.0;
  return std::gamma_distribution<double>(shape, 1.0)(rng);
}

std::int64_t poisson_draw(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

struct Tally {
  std::uint64_t reject_i = 0;
  std::uint64_t reject_a = 0;
  std::uint64_t degenerate = 0;
  std::array<std::uint64_t, 4> groups{};
};

void record(Tally& t, const MethodOutcome& o) {
  if (!o.usable()) {
    ++t.degenerate;
    return;
  }
  if (o.reject_inferiority()) ++t.reject_i;
  if (o.reject_noninferiority()) ++t.reject_a;
  ++t.groups[static_cast<int>(o.classification.group) - 1];
}

bool in_ranges(double r, const std::vector<std::pair<double, double>>& ranges) {
  constexpr double eps = 1e-9;
  return std::any_of(ranges.begin(), ranges.end(), [&](const auto& iv) {
    return r >= iv.first - eps && r <= iv.second + eps;
  });
}

}  // namespace

double max_latent_correlation(double k1, double k2) {
  return std::sqrt(std::min(k1, k2) / std::max(k1, k2));
}

void SimScenario::validate() const {
  if (n < 2) throw std::invalid_argument("n must be at least 2");
  if (!(mu1 > 0.0) || !std::isfinite(mu1)) throw std::invalid_argument("mu1 must be positive");
  if (!(k1 > 0.0) || !(k2 > 0.0) || !std::isfinite(k1) || !std::isfinite(k2)) {
    throw std::invalid_argument("k1 and k2 must be positive");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
  if (rho >= max_latent_correlation(k1, k2)) {
    throw InfeasibleCorrelation("rho = " + std::to_string(rho) +
                                " is not attainable with k1 = " + std::to_string(k1) +
                                ", k2 = " + std::to_string(k2) + " (must be below " +
                                std::to_string(max_latent_correlation(k1, k2)) + ")");
  }
  if (r_grid.empty()) throw std::invalid_argument("r grid is empty");
  for (double r : r_grid) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("r values must lie in [0, 1]");
  }
  design.validate();
  options.bnb_prior.validate();
  options.binomial_prior.validate();
}

std::string_view species_name(Species s) {
  switch (s) {
    case Species::hookworm: return "hookworm";
    case Species::ascaris: return "ascaris";
    case Species::trichuris: return "trichuris";
  }
  return "?";
}

std::optional<Species> parse_species(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto s : {Species::hookworm, Species::ascaris, Species::trichuris}) {
    if (lower == species_name(s)) return s;
  }
  return std::nullopt;
}

SimScenario survey_scenario(Species species) {
  SimScenario s;
  s.n = 91;
  switch (species) {
    case Species::hookworm:
      s.mu1 = 74.0; s.k1 = 0.84; s.k2 = 0.58; s.rho = 0.65;
      s.design = {0.70, 0.05, 0.025};
      break;
    case Species::ascaris:
      s.mu1 = 1255.0; s.k1 = 0.08; s.k2 = 0.0512; s.rho = 0.67;
      s.design = {0.95, 0.05, 0.025};
      break;
    case Species::trichuris:
      s.mu1 = 162.0; s.k1 = 0.92; s.k2 = 0.53; s.rho = 0.68;
      s.design = {0.50, 0.05, 0.025};
      break;
  }
  s.r_grid = {grid_round(s.design.t_a()), grid_round(s.design.t_i())};
  // settings under which the published error rates were produced
  s.options.bnb_prior = {0.01, 0.01};
  s.options.binomial_level_99 = true;
  return s;
}

Rng stream_rng(std::uint64_t seed, double r, std::uint64_t replicate) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(r));
  h = splitmix64(h ^ replicate);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

void simulate_paired_into(SimulatedPair& out, int n, double mu1, double r, double k1, double k2,
                          double rho, Rng& rng) {
  const double k0 = rho * std::sqrt(k1 * k2);
  const double s1 = k1 - k0;
  const double s2 = k2 - k0;
  const double m2 = (1.0 - r) * mu1;
  out.pre.resize(static_cast<std::size_t>(n));
  out.post.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double shared = gamma_draw(k0, rng);
    const double g1 = shared + gamma_draw(s1, rng);
    const double g2 = shared + gamma_draw(s2, rng);
    out.pre[i] = poisson_draw(mu1 * g1 / k1, rng);
    out.post[i] = poisson_draw(m2 * g2 / k2, rng);
  }
}

SimulatedPair simulate_paired(int n, double mu1, double r, double k1, double k2, double rho,
                              Rng& rng) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("k1 and k2 must be positive");
  if (!(rho >= 0.0) || rho >= max_latent_correlation(k1, k2)) {
    throw InfeasibleCorrelation("rho = " + std::to_string(rho) + " is not attainable with k1 = " +
                                std::to_string(k1) + ", k2 = " + std::to_string(k2));
  }
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("r must lie in [0, 1]");
  SimulatedPair out;
  simulate_paired_into(out, n, mu1, r, k1, k2, rho, rng);
  return out;
}

double ScanCell::frequency(TypologySlot slot) const {
  switch (slot) {
    case TypologySlot::reduced: return rate(groups[0]);
    case TypologySlot::inconclusive: return rate(groups[1]);
    case TypologySlot::borderline: return rate(groups[2]);
    case TypologySlot::adequate: return rate(groups[3]);
    case TypologySlot::degenerate: return rate(degenerate);
  }
  return 0.0;
}

const ScanCell* ScanResult::find(Method method, double r) const {
  for (const auto& c : cells) {
    if (c.method == method && std::abs(c.r - r) < 1e-12) return &c;
  }
  return nullptr;
}

ScanResult run_scan(const SimScenario& scenario, const ScanControl& control) {
  scenario.validate();
  ScanResult result;
  result.scenario = scenario;
  if (scenario.replicates == 0 || scenario.methods.empty()) return result;

  std::vector<double> grid = scenario.r_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::size_t nm = scenario.methods.size();
  const std::size_t ng = grid.size();
  std::vector<Tally> totals(nm * ng);

  const std::uint64_t chunks_per_r = (scenario.replicates + kChunk - 1) / kChunk;
  const std::uint64_t total_units = chunks_per_r * ng;
  const std::uint64_t total_cells = scenario.replicates * ng;
  const bool needs_shapes = std::find(scenario.methods.begin(), scenario.methods.end(),
                                      Method::bnb) != scenario.methods.end();

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex merge_mutex;
  std::uint64_t completed = 0;
  std::exception_ptr error;

  auto worker = [&] {
    SimulatedPair pair;
    PairedDataset data;
    std::vector<Tally> local(nm);
    try {
      for (;;) {
        if (stop.load(std::memory_order_relaxed)) return;
        if (control.cancel && control.cancel->load(std::memory_order_relaxed)) {
          stop = true;
          return;
        }
        const std::uint64_t unit = next.fetch_add(1);
        if (unit >= total_units) return;
        const std::size_t gi = unit / chunks_per_r;
        const std::uint64_t first = (unit % chunks_per_r) * kChunk;
        const std::uint64_t last = std::min(first + kChunk, scenario.replicates);
        const double r = grid[gi];
        std::fill(local.begin(), local.end(), Tally{});

        for (std::uint64_t rep = first; rep < last; ++rep) {
          Rng rng = stream_rng(scenario.seed, r, rep);
          simulate_paired_into(pair, scenario.n, scenario.mu1, r, scenario.k1, scenario.k2,
                               scenario.rho, rng);
          data.pre.swap(pair.pre);
          data.post.swap(pair.post);
          SampleSummary summary;
          bool ok = true;
          try {
            summary = summarize(data, {scenario.options.correlation, needs_shapes});
          } catch (const std::exception&) {
            ok = false;  // zero pre-treatment total: nothing is estimable
          }
          for (std::size_t mi = 0; mi < nm; ++mi) {
            if (!ok) {
              ++local[mi].degenerate;
              continue;
            }
            record(local[mi],
                   run_method(scenario.methods[mi], summary, scenario.design, scenario.options));
          }
          data.pre.swap(pair.pre);
          data.post.swap(pair.post);
        }

        std::lock_guard lock(merge_mutex);
        for (std::size_t mi = 0; mi < nm; ++mi) {
          auto& t = totals[mi * ng + gi];
          t.reject_i += local[mi].reject_i;
          t.reject_a += local[mi].reject_a;
          t.degenerate += local[mi].degenerate;
          for (int g = 0; g < 4; ++g) t.groups[g] += local[mi].groups[g];
        }
        completed += last - first;
        if (control.progress) control.progress(completed, total_cells);
      }
    } catch (...) {
      std::lock_guard lock(merge_mutex);
      if (!error) error = std::current_exception();
      stop = true;
    }
  };

  const unsigned threads = std::max(1u, control.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  if (control.cancel && control.cancel->load()) throw ScanCancelled();

  result.cells.reserve(nm * ng);
  for (std::size_t mi = 0; mi < nm; ++mi) {
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const auto& t = totals[mi * ng + gi];
      ScanCell c;
      c.method = scenario.methods[mi];
      c.r = grid[gi];
      c.replicates = scenario.replicates;
      c.reject_inferiority = t.reject_i;
      c.reject_noninferiority = t.reject_a;
      c.degenerate = t.degenerate;
      c.groups = t.groups;
      result.cells.push_back(c);
    }
  }
  return result;
}

TypologyCurves typology_curves(const ScanResult& result, std::optional<double> window) {
  TypologyCurves out;
  out.t_a = result.scenario.design.t_a();
  out.t_i = result.scenario.design.t_i();
  if (window && !(*window >= 0.0)) throw std::invalid_argument("window must be non-negative");
  for (auto m : result.scenario.methods) {
    TypologySeries s;
    s.method = m;
    for (const auto& c : result.cells) {
      if (c.method != m) continue;
      if (window && (c.r < out.t_a - *window - 1e-12 || c.r > out.t_i + *window + 1e-12)) continue;
      s.r.push_back(c.r);
      s.reduced.push_back(c.frequency(TypologySlot::reduced));
      s.inconclusive.push_back(c.frequency(TypologySlot::inconclusive));
      s.borderline.push_back(c.frequency(TypologySlot::borderline));
      s.adequate.push_back(c.frequency(TypologySlot::adequate));
      s.degenerate.push_back(c.frequency(TypologySlot::degenerate));
    }
    out.series.push_back(std::move(s));
  }
  return out;
}

void PlanCriteria::validate() const {
  if (!(max_inconclusive >= 0.0 && max_inconclusive <= 1.0)) {
    throw std::invalid_argument("max_inconclusive must lie in [0, 1]");
  }
  if (!(max_misleading >= 0.0 && max_misleading <= 1.0)) {
    throw std::invalid_argument("max_misleading must lie in [0, 1]");
  }
  for (const auto& [lo, hi] : inconclusive_ranges) {
    if (!(lo <= hi)) throw std::invalid_argument("inconclusive range has lower > upper");
  }
}

double misleading_frequency(const ScanCell& cell, const EfficacyDesign& design) {
  double f = 0.0;
  // Reduced claims r < T_I, Adequate claims r >= T_A, Borderline claims both.
  if (cell.r >= design.t_i()) f += cell.frequency(TypologySlot::reduced);
  if (cell.r < design.t_a()) f += cell.frequency(TypologySlot::adequate);
  if (cell.r < design.t_a() || cell.r >= design.t_i()) f += cell.frequency(TypologySlot::borderline);
  return f;
}

std::vector<double> plan_default_grid(const EfficacyDesign& design, double window, double step) {
  if (!(step > 0.0) || window < 0.0) throw std::invalid_argument("grid step must be positive");
  const double lo = std::max(0.0, design.t_a() - window);
  const double hi = std::min(1.0, design.t_i() + window);
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    grid.push_back(grid_round(lo + static_cast<double>(i) * step));
  }
  // the thresholds themselves are always scanned, whatever the step
  grid.push_back(grid_round(design.t_a()));
  grid.push_back(grid_round(design.t_i()));
  grid.push_back(grid_round(hi));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

PlanReport plan_sample_size(const SimScenario& base, std::vector<int> candidates,
                            const PlanCriteria& criteria, const ScanControl& control) {
  criteria.validate();
  if (candidates.empty()) throw std::invalid_argument("no candidate sample sizes");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.front() < 2) throw std::invalid_argument("candidate sample sizes must be >= 2");

  SimScenario scenario = base;
  if (std::find(scenario.methods.begin(), scenario.methods.end(), criteria.method) ==
      scenario.methods.end()) {
    scenario.methods.push_back(criteria.method);
  }

  PlanReport report;
  report.criteria = criteria;
  if (report.criteria.inconclusive_ranges.empty()) {
    const auto& d = scenario.design;
    const double upper = grid_round(d.t_a() - d.margin_delta);
    report.criteria.inconclusive_ranges = {{0.0, upper}, {d.t_i(), 1.0}};
  }

  const std::uint64_t per_scan = scenario.replicates * scenario.r_grid.size();
  const std::uint64_t overall = per_scan * candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scenario.n = candidates[i];
    ScanControl c = control;
    if (control.progress) {
      c.progress = [&, offset = per_scan * i](std::uint64_t done, std::uint64_t) {
        control.progress(offset + done, overall);
      };
    }
    ScanResult scan = run_scan(scenario, c);

    PlanEvaluation ev;
    ev.n = candidates[i];
    for (const auto& cell : scan.cells) {
      if (cell.method != criteria.method) continue;
      if (in_ranges(cell.r, report.criteria.inconclusive_ranges)) {
        const double inc = cell.frequency(TypologySlot::inconclusive) +
                           cell.frequency(TypologySlot::degenerate);
        ev.worst_inconclusive = std::max(ev.worst_inconclusive, inc);
      }
      ev.worst_misleading = std::max(ev.worst_misleading, misleading_frequency(cell, scenario.design));
    }
    ev.satisfied = ev.worst_inconclusive <= criteria.max_inconclusive &&
                   ev.worst_misleading <= criteria.max_misleading;
    if (ev.satisfied && !report.recommended_n) report.recommended_n = ev.n;
    report.evaluations.push_back(ev);
    report.scans.push_back(std::move(scan));
  }
  return report;
}

}  // namespace nbratio
