// Acceptance criteria, one per invocation: `acceptance <criterion>` (or `all`).
// Each prints a single PASS/FAIL line, preceded by indented detail lines.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nbratio/bnb.hpp"
#include "nbratio/distributions.hpp"
#include "nbratio/efficacy.hpp"
#include "nbratio/montecarlo.hpp"
#include "nbratio/report.hpp"
#include "nbratio/serialize.hpp"

using namespace nbratio;
using High = boost::multiprecision::cpp_bin_float_50;

namespace {

// Tolerances and sizes, fixed here so that a run cannot be tuned after the fact.
constexpr std::uint64_t kTableReplicates = 10'000;
constexpr double kTableFloor = 0.012;       // absolute, per cell
constexpr double kTableSeMultiple = 3.0;
constexpr std::uint64_t kPatternReplicates = 1'000;
constexpr int kDerivativePoints = 1'000;
constexpr double kDerivativeTol = 1e-6;
constexpr int kDeltaDraws = 1'000'000;
constexpr double kDeltaMeanTol = 1e-3;
constexpr double kDeltaVarTol = 1e-2;
constexpr double kNormalisationTol = 1e-8;
constexpr double kRecurrenceTol = 1e-10;
constexpr double kLatencyBudgetMs = 3.3;
constexpr int kLatencyDatasets = 3'000;
constexpr unsigned kScalingWorkers = 8;
constexpr double kScalingEfficiency = 0.7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Published rates, N = 91, ordered WAAVP, Gamma, Binomial, Asymptotic, BNB.
struct PublishedRow {
  Species species;
  bool inferiority;
  double r;
  std::array<double, 5> rates;
};

const std::vector<PublishedRow> kTypeI = {
    {Species::hookworm, true, 0.70, {0.036, 0.033, 0.327, 0.094, 0.038}},
    {Species::hookworm, false, 0.65, {0.021, 0.029, 0.346, 0.116, 0.021}},
    {Species::ascaris, true, 0.95, {0.097, 0.081, 0.460, 0.170, 0.094}},
    {Species::ascaris, false, 0.90, {0.024, 0.053, 0.469, 0.167, 0.014}},
    {Species::trichuris, true, 0.50, {0.039, 0.035, 0.424, 0.130, 0.048}},
    {Species::trichuris, false, 0.45, {0.019, 0.028, 0.426, 0.129, 0.020}},
};

const std::vector<PublishedRow> kTypeII = {
    {Species::hookworm, true, 0.65, {0.680, 0.707, 0.166, 0.481, 0.672}},
    {Species::hookworm, false, 0.70, {0.717, 0.670, 0.153, 0.402, 0.721}},
    {Species::ascaris, true, 0.90, {0.416, 0.489, 0.062, 0.324, 0.440}},
    {Species::ascaris, false, 0.95, {0.242, 0.177, 0.019, 0.083, 0.342}},
    {Species::trichuris, true, 0.45, {0.820, 0.835, 0.246, 0.605, 0.794}},
    {Species::trichuris, false, 0.50, {0.875, 0.848, 0.237, 0.578, 0.870}},
};

double tolerance(double p, std::uint64_t n) {
  return std::max(kTableFloor, kTableSeMultiple * std::sqrt(p * (1.0 - p) / static_cast<double>(n)));
}

// Field scenario at N = 91 with the full replicate count; cached per species.
const ScanResult& table_scan(Species s) {
  static std::map<Species, ScanResult> cache;
  auto it = cache.find(s);
  if (it != cache.end()) return it->second;
  SimScenario sc = survey_scenario(s);
  sc.replicates = kTableReplicates;
  ScanControl c;
  c.threads = std::max(1u, std::thread::hardware_concurrency());
  return cache.emplace(s, run_scan(sc, c)).first->second;
}

// Rate the row reports, from the scan cell: type I is a rejection of a true
// null, type II a failure to reject a false one.
double row_rate(const ScanCell& cell, bool inferiority, bool type_i) {
  const double reject = inferiority ? cell.reject_inferiority_rate() : cell.reject_noninferiority_rate();
  return type_i ? reject : 1.0 - reject;
}

// Checks each listed cell; `which` restricts the pass/fail verdict to the
// named (species, inferiority, method) cells, the rest being reported only.
Outcome compare_table(const std::vector<PublishedRow>& rows, bool type_i,
                      const std::vector<std::tuple<Species, bool, Method>>& which) {
  int checked = 0, failed = 0, others_off = 0;
  for (const auto& row : rows) {
    const auto& scan = table_scan(row.species);
    for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
      const Method method = kAllMethods[m];
      const ScanCell* cell = scan.find(method, row.r);
      if (!cell) {
        std::printf("  missing cell %s r=%g\n", std::string(method_name(method)).c_str(), row.r);
        ++failed;
        continue;
      }
      const double got = row_rate(*cell, row.inferiority, type_i);
      const double want = row.rates[m];
      const double tol = tolerance(want, cell->replicates);
      const bool ok = std::abs(got - want) <= tol;
      const bool scored =
          which.empty() ||
          std::find(which.begin(), which.end(), std::make_tuple(row.species, row.inferiority, method)) !=
              which.end();
      std::printf("  %-9s %-16s r=%.2f %-10s published %.3f simulated %.4f tol %.4f %s%s\n",
                  std::string(species_name(row.species)).c_str(),
                  row.inferiority ? "inferiority" : "non-inferiority", row.r,
                  std::string(method_name(method)).c_str(), want, got, tol, ok ? "ok" : "OFF",
                  scored ? "" : " (reported only)");
      if (scored) {
        ++checked;
        if (!ok) ++failed;
      } else if (!ok) {
        ++others_off;
      }
    }
  }
  std::string detail = std::to_string(checked - failed) + "/" + std::to_string(checked) +
                       " cells within max(" + fmt("%.3f", kTableFloor) + ", 3 SE)";
  if (!which.empty()) detail += "; " + std::to_string(others_off) + " unscored cells off";
  return {failed == 0, detail};
}

Outcome point_estimates() {
  const std::map<std::string, double> published = {{"hookworm", 53}, {"ascaris", 100}, {"trichuris", 49}};
  bool ok = true;
  std::string detail;
  for (const auto& p : species_presets()) {
    // the same means pushed through the library estimator
    PairedDataset d;
    d.pre.assign(91, static_cast<std::int64_t>(p.pre_mean));
    d.post.assign(91, static_cast<std::int64_t>(p.post_mean));
    const double from_means = 1.0 - p.post_mean / p.pre_mean;
    const double r_hat = summarize(d, {CorrelationKind::pearson, false}).r_hat;
    const double pct = std::round(100.0 * r_hat);
    const bool row_ok = r_hat == from_means && pct == published.at(p.name);
    ok = ok && row_ok;
    std::printf("  %-9s r_hat = %.4f (%.1f%%) published %g%% %s\n", p.name.c_str(), r_hat, 100 * r_hat,
                published.at(p.name), row_ok ? "ok" : "OFF");
    detail += (detail.empty() ? "" : ", ") + p.name + " " + fmt("%.1f%%", 100 * r_hat);
  }
  return {ok, detail};
}

Outcome type_i_table() { return compare_table(kTypeI, true, {}); }

Outcome type_ii_spot_checks() {
  return compare_table(kTypeII, false,
                       {{Species::hookworm, true, Method::waavp},
                        {Species::hookworm, true, Method::bnb},
                        {Species::ascaris, false, Method::bnb}});
}

Outcome classification_pattern() {
  struct Expect {
    Species species;
    std::vector<std::pair<Method, TypologySlot>> modal;
  };
  const std::vector<Expect> expected = {
      {Species::hookworm,
       {{Method::waavp, TypologySlot::reduced},
        {Method::gamma, TypologySlot::reduced},
        {Method::binomial, TypologySlot::reduced},
        {Method::asymptotic, TypologySlot::reduced},
        {Method::bnb, TypologySlot::reduced}}},
      {Species::ascaris,
       {{Method::waavp, TypologySlot::degenerate},
        {Method::gamma, TypologySlot::degenerate},
        {Method::binomial, TypologySlot::adequate},
        {Method::asymptotic, TypologySlot::degenerate},
        {Method::bnb, TypologySlot::adequate}}},
      {Species::trichuris,
       {{Method::waavp, TypologySlot::inconclusive},
        {Method::gamma, TypologySlot::inconclusive},
        {Method::asymptotic, TypologySlot::inconclusive},
        {Method::bnb, TypologySlot::inconclusive}}},
  };
  const char* names[] = {"Reduced", "Inconclusive", "Borderline", "Adequate", "degenerate"};
  int good = 0, total = 0;
  for (const auto& e : expected) {
    const auto* preset = find_preset(species_name(e.species));
    SimScenario sc = survey_scenario(e.species);
    const double r_hat = 1.0 - preset->post_mean / preset->pre_mean;
    sc.r_grid = {r_hat};
    sc.replicates = kPatternReplicates;
    const auto res = run_scan(sc);
    for (const auto& [method, want] : e.modal) {
      const ScanCell* cell = res.find(method, r_hat);
      TypologySlot modal = TypologySlot::reduced;
      double best = -1.0;
      for (auto slot : {TypologySlot::reduced, TypologySlot::inconclusive, TypologySlot::borderline,
                        TypologySlot::adequate, TypologySlot::degenerate}) {
        if (cell->frequency(slot) > best) {
          best = cell->frequency(slot);
          modal = slot;
        }
      }
      ++total;
      if (modal == want) ++good;
      std::printf("  %-9s r=%.4f %-10s modal %-12s (%.3f) expected %-12s %s\n",
                  std::string(species_name(e.species)).c_str(), r_hat,
                  std::string(method_name(method)).c_str(), names[static_cast<int>(modal)], best,
                  names[static_cast<int>(want)], modal == want ? "ok" : "OFF");
    }
  }
  return {good == total, std::to_string(good) + "/" + std::to_string(total) + " modal classifications match"};
}

High g_high(const High& p1, const TransformShape& s) {
  const High a = High(s.k1) * (1 - High(s.r));
  const High k2(s.k2);
  return p1 * a / (p1 * a - p1 * k2 + k2);
}

High central_difference(int order, double p1, const TransformShape& s) {
  const double a = s.k1 * (1.0 - s.r);
  const double d = p1 * a - p1 * s.k2 + s.k2;
  const double w = std::abs(a - s.k2);
  const High h = High("1e-8") * std::min(1.0, w > 0.0 ? d / w : 1.0);
  const High x(p1);
  switch (order) {
    case 1: return (g_high(x + h, s) - g_high(x - h, s)) / (2 * h);
    case 2: return (g_high(x + h, s) - 2 * g_high(x, s) + g_high(x - h, s)) / (h * h);
    case 3:
      return (g_high(x + 2 * h, s) - 2 * g_high(x + h, s) + 2 * g_high(x - h, s) - g_high(x - 2 * h, s)) /
             (2 * h * h * h);
    default:
      return (g_high(x + 2 * h, s) - 4 * g_high(x + h, s) + 6 * g_high(x, s) - 4 * g_high(x - h, s) +
              g_high(x - 2 * h, s)) /
             (h * h * h * h);
  }
}

High bnb_pmf_direct(std::int64_t s, const BnbParams& b) {
  using boost::multiprecision::lgamma;
  const High n(b.n_failures), a(b.alpha), be(b.beta), ss(static_cast<double>(s));
  auto lbeta = [](const High& x, const High& y) { return lgamma(x) + lgamma(y) - lgamma(x + y); };
  return exp(lgamma(n + ss) - lgamma(n) - lgamma(ss + 1) + lbeta(be + n, a + ss) - lbeta(be, a));
}

double rel(double got, const High& want) {
  const High d = abs(High(got) - want);
  return (want == 0 ? d : d / abs(want)).convert_to<double>();
}

Outcome bnb_oracles() {
  std::mt19937_64 rng(20240601);
  auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto logu = [&](double lo, double hi) { return std::exp(unif(std::log(lo), std::log(hi))); };

  // (a) derivatives
  double worst_a = 0.0;
  for (int i = 0; i < kDerivativePoints; ++i) {
    const TransformShape shape{logu(0.01, 50.0), logu(0.01, 50.0), unif(0.0, 0.999)};
    const double p1 = unif(0.001, 0.999);
    const auto d = bnb_transform_derivatives(p1, shape);
    for (int order = 1; order <= 4; ++order) {
      const High want = central_difference(order, p1, shape);
      if (abs(want) < 1e-250) continue;
      worst_a = std::max(worst_a, rel(d[order], want));
    }
  }
  const bool ok_a = worst_a <= kDerivativeTol;
  std::printf("  (a) derivatives on %d points: worst relative error %.2e (tol %.0e) %s\n",
              kDerivativePoints, worst_a, kDerivativeTol, ok_a ? "ok" : "OFF");

  // (b) delta-method moments against transform Monte Carlo
  double worst_mean = 0.0, worst_var = 0.0;
  const std::vector<std::pair<BetaParams, TransformShape>> cases = {
      {{6735.0, 77.4}, {0.84, 0.58, 0.70}},     // hookworm-sized posterior
      {{1255.0 * 91 * 0.01, 91 * 0.08}, {0.08, 0.0512, 0.95}},
      {{162.0 * 91, 91 * 0.92}, {0.92, 0.53, 0.50}},
  };
  for (const auto& [post, shape] : cases) {
    const auto m = delta_method_moments(post, shape);
    std::gamma_distribution<double> ga(post.alpha, 1.0), gb(post.beta, 1.0);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < kDeltaDraws; ++i) {
      const double x = ga(rng), y = gb(rng);
      const double v = bnb_transform(x / (x + y), shape);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / kDeltaDraws;
    const double var = sum2 / kDeltaDraws - mean * mean;
    worst_mean = std::max(worst_mean, std::abs(m.mean - mean) / mean);
    worst_var = std::max(worst_var, std::abs(m.variance - var) / var);
  }
  const bool ok_b = worst_mean <= kDeltaMeanTol && worst_var <= kDeltaVarTol;
  std::printf("  (b) delta method vs %d draws: mean %.2e (tol %.0e), variance %.2e (tol %.0e) %s\n",
              kDeltaDraws, worst_mean, kDeltaMeanTol, worst_var, kDeltaVarTol, ok_b ? "ok" : "OFF");

  // (c) normalisation; beta >= 6 keeps the mass past the summed range negligible
  double worst_c = 0.0;
  for (int i = 0; i < 25; ++i) {
    const BnbParams b{logu(0.5, 20.0), logu(6.0, 60.0), logu(0.1, 30.0)};
    worst_c = std::max(worst_c, std::abs(bnb_cdf(200000, b) - 1.0));
  }
  const bool ok_c = worst_c <= kNormalisationTol;
  std::printf("  (c) pmf normalisation: worst |sum - 1| %.2e (tol %.0e) %s\n", worst_c, kNormalisationTol,
              ok_c ? "ok" : "OFF");

  // (d) ratio recurrence against the direct pmf
  double worst_d = 0.0;
  for (int i = 0; i < 500; ++i) {
    const BnbParams b{logu(0.5, 200.0), logu(3.0, 400.0), logu(0.05, 200.0)};
    const auto s = std::uniform_int_distribution<std::int64_t>(0, 3000)(rng);
    worst_d = std::max(worst_d, rel(bnb_pmf_ratio(s, b), bnb_pmf_direct(s + 1, b) / bnb_pmf_direct(s, b)));
    // compared through the log so that far-tail pmfs below double range still count
    const High direct = bnb_pmf_direct(s, b);
    worst_d = std::max(worst_d, abs(exp(High(bnb_logpmf(s, b)) - log(direct)) - 1).convert_to<double>());
  }
  const bool ok_d = worst_d <= kRecurrenceTol;
  std::printf("  (d) recurrence vs direct pmf: worst relative error %.2e (tol %.0e) %s\n", worst_d,
              kRecurrenceTol, ok_d ? "ok" : "OFF");

  return {ok_a && ok_b && ok_c && ok_d,
          "derivatives " + fmt("%.1e", worst_a) + ", delta mean " + fmt("%.1e", worst_mean) + " var " +
              fmt("%.1e", worst_var) + ", normalisation " + fmt("%.1e", worst_c) + ", recurrence " +
              fmt("%.1e", worst_d)};
}

struct Captured {
  int code = -1;
  std::string out;
};

Captured run_cli(const std::string& args) {
  namespace fs = std::filesystem;
  const auto out = fs::temp_directory_path() / ("nbratio_acc_" + std::to_string(::getpid()) + ".out");
  const std::string cmd = "'" NBRATIO_CLI "' " + args + " >'" + out.string() + "'";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  fs::remove(out);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

Outcome degenerate_handling() {
  std::mt19937_64 rng(7);
  int bad = 0;
  const int datasets = 200;
  for (int i = 0; i < datasets; ++i) {
    PairedDataset d;
    const int n = std::uniform_int_distribution<int>(2, 120)(rng);
    const double mean = std::exp(std::uniform_real_distribution<double>(0.0, 7.0)(rng));
    std::gamma_distribution<double> shock(0.5, mean / 0.5);
    for (int j = 0; j < n; ++j) {
      d.pre.push_back(std::poisson_distribution<std::int64_t>(shock(rng))(rng));
      d.post.push_back(0);
    }
    if (d.pre == std::vector<std::int64_t>(d.pre.size(), 0)) d.pre[0] = 1;
    const double e = std::uniform_real_distribution<double>(0.5, 0.99)(rng);
    const auto rep = analyze_report(d, {e, 0.05, 0.025}, {kAllMethods.begin(), kAllMethods.end()});
    for (const auto& o : rep.outcomes) {
      const bool should_degenerate = o.method == Method::waavp || o.method == Method::gamma ||
                                     o.method == Method::asymptotic;
      const bool ok = should_degenerate ? (o.degenerate == std::string(kZeroPostReason) && !o.failure)
                                        : o.usable();
      if (!ok) ++bad;
    }
  }
  std::printf("  library: %d of %d zero-post datasets x 5 methods off\n", bad, datasets);

  // and through the CLI
  namespace fs = std::filesystem;
  const auto csv = fs::temp_directory_path() / ("nbratio_acc_zero_" + std::to_string(::getpid()) + ".csv");
  std::ofstream(csv) << "id,pre,post\n1,1200,0\n2,40,0\n3,8000,0\n4,15,0\n5,3,0\n6,0,0\n";
  const auto run = run_cli("analyze --json --data '" + csv.string() + "' --target 0.95 --delta 0.05 --methods all");
  fs::remove(csv);
  bool cli_ok = run.code == 0;
  if (cli_ok) {
    for (const auto& o : Json::parse(run.out).at("results")) {
      const auto m = o.at("method").get<std::string>();
      const bool degen = !o.at("degenerate").is_null();
      const bool expect = m == "WAAVP" || m == "Gamma" || m == "Asymptotic";
      cli_ok = cli_ok && degen == expect && o.at("failure").is_null();
      std::printf("  cli %-10s %s\n", m.c_str(),
                  degen ? o.at("degenerate").get<std::string>().c_str()
                        : o.at("classification").at("group").get<std::string>().c_str());
    }
  }
  return {bad == 0 && cli_ok, "library " + std::to_string(datasets) + " datasets, " +
                                  std::to_string(bad) + " off; cli exit " + std::to_string(run.code)};
}

Outcome performance_latency() {
  const SimScenario sc = survey_scenario(Species::hookworm);
  SimulatedPair pair;
  PairedDataset data;
  std::vector<double> ms;
  ms.reserve(kLatencyDatasets);
  volatile int sink = 0;
  for (int i = 0; i < kLatencyDatasets; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = stream_rng(1, 0.70, static_cast<std::uint64_t>(i));
    simulate_paired_into(pair, sc.n, sc.mu1, 0.70, sc.k1, sc.k2, sc.rho, rng);
    data.pre.swap(pair.pre);
    data.post.swap(pair.post);
    const auto out = analyze_all(data, sc.design, {kAllMethods.begin(), kAllMethods.end()}, sc.options);
    sink = sink + static_cast<int>(out.size());
    data.pre.swap(pair.pre);
    data.post.swap(pair.post);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  std::printf("  %d N=91 datasets, simulate + five methods: median %.3f ms, p90 %.3f ms\n", kLatencyDatasets,
              median, ms[ms.size() * 9 / 10]);
  return {median <= kLatencyBudgetMs, "median " + fmt("%.3f", median) + " ms (budget " + fmt("%.1f", kLatencyBudgetMs) + " ms)"};
}

Outcome performance_scaling() {
  SimScenario sc = survey_scenario(Species::hookworm);
  sc.replicates = 4000;
  auto timed = [&](unsigned threads) {
    ScanControl c;
    c.threads = threads;
    const auto t0 = std::chrono::steady_clock::now();
    run_scan(sc, c);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double t1 = timed(1);
  const double tn = timed(kScalingWorkers);
  const double efficiency = t1 / tn / kScalingWorkers;
  std::printf("  1 worker %.2f s, %u workers %.2f s, %u hardware threads\n", t1, kScalingWorkers, tn,
              std::thread::hardware_concurrency());
  return {efficiency >= kScalingEfficiency,
          "speed-up " + fmt("%.2f", t1 / tn) + "x on " + std::to_string(kScalingWorkers) +
              " workers, efficiency " + fmt("%.2f", efficiency) + " (need " + fmt("%.1f", kScalingEfficiency) +
              "; " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads)"};
}

Outcome determinism() {
  const auto one = run_cli("simulate --preset hookworm --seed 1 --threads 1");
  const auto eight = run_cli("simulate --preset hookworm --seed 1 --threads 8");
  const bool same = one.code == 0 && eight.code == 0 && !one.out.empty() && one.out == eight.out;
  std::printf("  outputs %zu and %zu bytes, exit %d and %d\n", one.out.size(), eight.out.size(), one.code,
              eight.code);
  return {same, same ? "byte-identical ScanResult JSON" : "outputs differ"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria = {
    {"point_estimates", point_estimates},
    {"type_i_table", type_i_table},
    {"type_ii_spot_checks", type_ii_spot_checks},
    {"classification_pattern", classification_pattern},
    {"bnb_oracles", bnb_oracles},
    {"degenerate_handling", degenerate_handling},
    {"performance_latency", performance_latency},
    {"performance_scaling", performance_scaling},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  int failures = 0;
  bool found = false;
  for (const auto& [name, check] : kCriteria) {
    if (which != "all" && which != name) continue;
    found = true;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  if (!found) {
    std::fprintf(stderr, "unknown criterion '%s'\n", which.c_str());
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
