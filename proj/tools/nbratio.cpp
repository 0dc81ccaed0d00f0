#include <CLI11.hpp>

#include <csignal>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nbratio/errors.hpp"
#include "nbratio/io.hpp"
#include "nbratio/montecarlo.hpp"
#include "nbratio/report.hpp"
#include "nbratio/serialize.hpp"
#include "nbratio/service.hpp"

using namespace nbratio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DesignFlags {
  std::optional<std::string> preset;
  std::optional<double> target;
  std::optional<double> delta;
  std::optional<double> alpha;
  std::string methods = "all";
  std::optional<double> prior_a0;
  std::optional<double> prior_b0;
  bool binomial_99 = false;
  bool waavp_literal_v = false;
  std::optional<std::string> k_scaling;
  std::optional<std::string> correlation;
};

struct OutputFlags {
  std::string out;
  bool json = false;
  bool text = false;
};

struct ScenarioFlags {
  std::string scenario_file;
  std::optional<int> n;
  std::optional<double> mu1;
  std::optional<double> k1;
  std::optional<double> k2;
  std::optional<double> rho;
  std::vector<double> r;
  std::string r_grid;
  std::optional<std::uint64_t> reps;
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_design_flags(CLI::App* app, DesignFlags& f) {
  app->add_option("--preset", f.preset, "Species preset: hookworm, ascaris or trichuris");
  app->add_option("--target", f.target, "Target efficacy E")->check(CLI::Range(0.0, 1.0));
  app->add_option("--delta", f.delta, "Non-inferiority margin")->check(CLI::Range(0.0, 1.0));
  app->add_option("--alpha", f.alpha, "Significance level of each one-sided test")
      ->check(CLI::Range(0.0, 0.5));
  app->add_option("--methods", f.methods, "Comma-separated methods or 'all'")
      ->capture_default_str();
  app->add_option("--prior-a0", f.prior_a0, "Beta prior alpha for BNB and Binomial")
      ->check(CLI::PositiveNumber);
  app->add_option("--prior-b0", f.prior_b0, "Beta prior beta for BNB and Binomial")
      ->check(CLI::PositiveNumber);
  app->add_flag("--binomial-99", f.binomial_99, "99% limits for the Binomial method");
  app->add_flag("--waavp-literal-v", f.waavp_literal_v,
                "Single-power mean denominators in the WAAVP variance");
  app->add_option("--k-scaling", f.k_scaling, "Paired shape adjustment for BNB")
      ->check(CLI::IsMember({"divide", "multiply"}));
  app->add_option("--correlation", f.correlation, "Paired correlation estimator")
      ->check(CLI::IsMember({"pearson", "spearman"}));
}

// analyze defaults to text, simulate and plan to JSON.
void add_output_flags(CLI::App* app, OutputFlags& f, bool json_default) {
  app->add_option("--out", f.out, "Write output to this file instead of stdout");
  auto* json = app->add_flag("--json", f.json, json_default ? "Emit JSON (default)" : "Emit JSON");
  if (json_default) {
    app->add_flag("--text", f.text, "Emit a readable table instead of JSON")->excludes(json);
  }
}

void add_scenario_flags(CLI::App* app, ScenarioFlags& f) {
  app->add_option("--scenario", f.scenario_file, "Scenario JSON file (fields override preset)")
      ->check(CLI::ExistingFile);
  app->add_option("--n", f.n, "Subjects per dataset")->check(CLI::Range(2, 1000000));
  app->add_option("--mu1", f.mu1, "Pre-treatment mean")->check(CLI::PositiveNumber);
  app->add_option("--k1", f.k1, "Pre-treatment shape")->check(CLI::PositiveNumber);
  app->add_option("--k2", f.k2, "Post-treatment shape")->check(CLI::PositiveNumber);
  app->add_option("--rho", f.rho, "Latent pre/post correlation")->check(CLI::Range(0.0, 1.0));
  app->add_option("--r", f.r, "True efficacy values (repeatable or comma-separated)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--r-grid", f.r_grid, "Efficacy grid as start:stop:step");
  app->add_option("--reps", f.reps, "Replicates per efficacy value");
  app->add_option("--seed", f.seed, "Random seed")->required();
  app->add_option("--threads", f.threads, "Worker threads")
      ->envname("NBRATIO_THREADS")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw InputError("--r-grid must look like start:stop:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || hi < lo || lo < 0.0 || hi > 1.0) {
    throw InputError("--r-grid needs 0 <= start <= stop <= 1 and step > 0");
  }
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    out.push_back(grid_round(lo + static_cast<double>(i) * step));
  }
  return out;
}

const SpeciesPreset* lookup_preset(const DesignFlags& f) {
  if (!f.preset) return nullptr;
  const auto* p = find_preset(*f.preset);
  if (!p) throw InputError("unknown preset '" + *f.preset + "'");
  return p;
}

EfficacyDesign build_design(const DesignFlags& f, EfficacyDesign base) {
  if (f.target) base.target_e = *f.target;
  if (f.delta) base.margin_delta = *f.delta;
  if (f.alpha) base.alpha = *f.alpha;
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return base;
}

MethodOptions build_options(const DesignFlags& f, MethodOptions o) {
  if (f.prior_a0) o.bnb_prior.alpha = o.binomial_prior.alpha = *f.prior_a0;
  if (f.prior_b0) o.bnb_prior.beta = o.binomial_prior.beta = *f.prior_b0;
  if (f.binomial_99) o.binomial_level_99 = true;
  if (f.waavp_literal_v) o.waavp_literal_v = true;
  if (f.k_scaling) o.k_scaling = *f.k_scaling == "multiply" ? KScaling::multiply : KScaling::divide;
  if (f.correlation) {
    o.correlation = *f.correlation == "spearman" ? CorrelationKind::spearman : CorrelationKind::pearson;
  }
  return o;
}

std::vector<Method> build_methods(const DesignFlags& f) {
  try {
    return parse_method_list(f.methods);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

void emit(const OutputFlags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(f.out, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + f.out + "'");
  out << text;
}

SimScenario build_scenario(const DesignFlags& d, const ScenarioFlags& s, bool planning) {
  const auto* preset = lookup_preset(d);
  SimScenario sc = preset ? preset->scenario : SimScenario{};
  if (!s.scenario_file.empty()) {
    std::ifstream in(s.scenario_file, std::ios::binary);
    try {
      sc = scenario_from_json(Json::parse(in), sc);
    } catch (const std::exception& e) {
      throw InputError(s.scenario_file + ": " + e.what());
    }
  }
  sc.design = build_design(d, sc.design);
  sc.options = build_options(d, sc.options);
  if (d.methods != "all" || s.scenario_file.empty()) sc.methods = build_methods(d);
  if (s.n) sc.n = *s.n;
  if (s.mu1) sc.mu1 = *s.mu1;
  if (s.k1) sc.k1 = *s.k1;
  if (s.k2) sc.k2 = *s.k2;
  if (s.rho) sc.rho = *s.rho;
  if (s.seed) sc.seed = *s.seed;
  if (s.reps) sc.replicates = *s.reps;

  std::vector<double> grid = s.r;
  if (!s.r_grid.empty()) {
    auto g = parse_grid(s.r_grid);
    grid.insert(grid.end(), g.begin(), g.end());
  }
  if (!grid.empty()) {
    sc.r_grid = grid;
  } else if (s.scenario_file.empty() || preset) {
    sc.r_grid = planning ? plan_default_grid(sc.design)
                         : std::vector<double>{grid_round(sc.design.t_a()), grid_round(sc.design.t_i())};
  }
  try {
    sc.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  return sc;
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string scan_text(const ScanResult& res) {
  const auto& s = res.scenario;
  std::string out = "Monte Carlo scan: N = " + std::to_string(s.n) + ", mu1 = " +
                    format_sig6(s.mu1) + ", k1 = " + format_sig6(s.k1) + ", k2 = " +
                    format_sig6(s.k2) + ", rho = " + format_sig6(s.rho) + ", " +
                    std::to_string(s.replicates) + " replicates per r, seed " +
                    std::to_string(s.seed) + "\n";
  out += "T_I = " + format_sig6(s.design.t_i()) + ", T_A = " + format_sig6(s.design.t_a()) +
         ", alpha = " + format_sig6(s.design.alpha) + "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-11s %-7s %-9s %-9s %-9s %-9s %-9s %-9s %-9s\n", "method", "r",
                "rej_I", "rej_A", "reduced", "inconcl", "border", "adequate", "degen");
  out += line;
  for (const auto& c : res.cells) {
    std::snprintf(line, sizeof line, "%-11s %-7s %-9s %-9s %-9s %-9s %-9s %-9s %-9s\n",
                  std::string(method_name(c.method)).c_str(), format_sig6(c.r).c_str(),
                  pct(c.reject_inferiority_rate()).c_str(),
                  pct(c.reject_noninferiority_rate()).c_str(),
                  pct(c.frequency(TypologySlot::reduced)).c_str(),
                  pct(c.frequency(TypologySlot::inconclusive)).c_str(),
                  pct(c.frequency(TypologySlot::borderline)).c_str(),
                  pct(c.frequency(TypologySlot::adequate)).c_str(),
                  pct(c.frequency(TypologySlot::degenerate)).c_str());
    out += line;
  }
  return out;
}

std::string plan_text(const PlanReport& rep) {
  std::string out = "Sample size plan (method " + std::string(method_name(rep.criteria.method)) +
                    ", max inconclusive " + format_sig6(rep.criteria.max_inconclusive) +
                    ", max misleading " + format_sig6(rep.criteria.max_misleading) + ")\n";
  out += "inconclusive checked for r in";
  for (const auto& [lo, hi] : rep.criteria.inconclusive_ranges) {
    out += " [" + format_sig6(lo) + ", " + format_sig6(hi) + "]";
  }
  out += "\n\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %-19s %-17s %s\n", "N", "worst inconclusive",
                "worst misleading", "meets criteria");
  out += line;
  for (const auto& e : rep.evaluations) {
    std::snprintf(line, sizeof line, "%-8d %-19s %-17s %s\n", e.n, pct(e.worst_inconclusive).c_str(),
                  pct(e.worst_misleading).c_str(), e.satisfied ? "yes" : "no");
    out += line;
  }
  out += rep.recommended_n ? "\nrecommended N = " + std::to_string(*rep.recommended_n) + "\n"
                           : "\nno candidate N meets the criteria\n";
  return out;
}

std::vector<int> parse_candidates(const std::string& list) {
  std::vector<int> out;
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      const int n = std::stoi(item, &pos);
      if (pos != item.size() || n < 2) throw std::invalid_argument("");
      out.push_back(n);
    } catch (const std::exception&) {
      throw InputError("--n-candidates entries must be integers >= 2, got '" + item + "'");
    }
  }
  if (out.empty()) throw InputError("--n-candidates is empty");
  return out;
}

std::pair<double, double> parse_range(const std::string& s) {
  double lo, hi;
  char c;
  std::istringstream in(s);
  if (!(in >> lo >> c >> hi) || c != ':' || !(in >> std::ws).eof() || lo > hi) {
    throw InputError("--inconclusive-range must look like low:high, got '" + s + "'");
  }
  return {lo, hi};
}

int run_serve(ServiceConfig config) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  PlannerService service(config);
  const int port = service.bind();
  std::cerr << "nbratio serving on http://" << config.bind << ":" << port << "\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.serve();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Negative binomial ratio-of-means efficacy workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NBRATIO_VERSION);

  // analyze
  DesignFlags a_design;
  OutputFlags a_out;
  std::string a_data;
  std::optional<std::string> a_format;
  std::optional<bool> a_paired;
  auto* analyze = app.add_subcommand("analyze", "Classify the efficacy observed in a dataset");
  analyze->add_option("--data", a_data, "CSV or JSON dataset")->required()->check(CLI::ExistingFile);
  analyze->add_option("--format", a_format, "csv or json (default: from extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  analyze->add_flag("--paired,!--unpaired", a_paired, "Pre and post rows belong to the same subjects");
  add_design_flags(analyze, a_design);
  add_output_flags(analyze, a_out, false);

  // simulate
  DesignFlags s_design;
  ScenarioFlags s_scen;
  OutputFlags s_out;
  std::string s_csv;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error rates over true efficacies");
  add_design_flags(simulate, s_design);
  add_scenario_flags(simulate, s_scen);
  add_output_flags(simulate, s_out, true);
  simulate->add_option("--csv", s_csv, "Also write tidy CSV (method,r,statistic,value,replicates)");

  // plan
  DesignFlags p_design;
  ScenarioFlags p_scen;
  OutputFlags p_out;
  std::string p_candidates;
  PlanCriteria p_criteria;
  std::vector<std::string> p_ranges;
  std::string p_method = "BNB";
  auto* plan = app.add_subcommand("plan", "Smallest sample size meeting classification criteria");
  add_design_flags(plan, p_design);
  add_scenario_flags(plan, p_scen);
  add_output_flags(plan, p_out, true);
  plan->add_option("--n-candidates", p_candidates, "Comma-separated sample sizes")->required();
  plan->add_option("--max-inconclusive", p_criteria.max_inconclusive,
                   "Largest tolerated inconclusive probability in the checked ranges")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  plan->add_option("--max-misleading", p_criteria.max_misleading,
                   "Largest tolerated probability of a false claim at any r")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  plan->add_option("--inconclusive-range", p_ranges,
                   "r range low:high where inconclusive results count (repeatable)");
  plan->add_option("--plan-method", p_method, "Method the criteria are evaluated on")
      ->capture_default_str();

  // serve
  ServiceConfig serve_cfg;
  serve_cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  double ttl_hours = 24.0;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--bind", serve_cfg.bind, "Bind address")
      ->envname("NBRATIO_BIND")
      ->capture_default_str();
  serve->add_option("--port", serve_cfg.port, "Port (0 picks a free one)")
      ->envname("NBRATIO_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--threads", serve_cfg.threads, "Monte Carlo workers per job")
      ->envname("NBRATIO_THREADS")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  serve->add_option("--max-replicates", serve_cfg.max_replicates, "Replicate cap per r value")
      ->envname("NBRATIO_MAX_REPLICATES")
      ->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Directory for snapshots of finished jobs")
      ->envname("NBRATIO_DATA_DIR");
  serve->add_option("--ttl-hours", ttl_hours, "Hours a finished job is kept")
      ->envname("NBRATIO_TTL_HOURS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--cors-origin", serve_cfg.cors_origin, "Access-Control-Allow-Origin value")
      ->envname("NBRATIO_CORS_ORIGIN")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*analyze) {
      const auto* preset = lookup_preset(a_design);
      EfficacyDesign base;
      if (preset) base = {preset->target_e, preset->delta, base.alpha};
      const auto design = build_design(a_design, base);
      const auto options = build_options(a_design, {});
      const auto methods = build_methods(a_design);
      std::optional<DataFormat> format;
      if (a_format) format = parse_data_format(*a_format);
      const auto data = ingest(a_data, format, a_paired);
      const auto report = analyze_report(data, design, methods, options);
      emit(a_out, a_out.json ? dump_pretty(report_json(report)) : report_text(report));
      return report.all_failed() ? kExitInfeasible : kExitOk;
    }
    if (*simulate) {
      const auto scenario = build_scenario(s_design, s_scen, false);
      ScanControl control;
      control.threads = s_scen.threads;
      const auto result = run_scan(scenario, control);
      emit(s_out, s_out.text ? scan_text(result) : dump_pretty(result));
      if (!s_csv.empty()) {
        std::ofstream csv(s_csv, std::ios::binary | std::ios::trunc);
        if (!csv) throw InputError("cannot write '" + s_csv + "'");
        csv << scan_tidy_csv(result);
      }
      return kExitOk;
    }
    if (*plan) {
      if (!p_scen.reps) p_scen.reps = kPlanDefaultReplicates;
      const auto scenario = build_scenario(p_design, p_scen, true);
      auto m = parse_method(p_method);
      if (!m) throw InputError("unknown method '" + p_method + "'");
      p_criteria.method = *m;
      for (const auto& r : p_ranges) p_criteria.inconclusive_ranges.push_back(parse_range(r));
      ScanControl control;
      control.threads = p_scen.threads;
      const auto report =
          plan_sample_size(scenario, parse_candidates(p_candidates), p_criteria, control);
      emit(p_out, p_out.text ? plan_text(report) : dump_pretty(report));
      return kExitOk;
    }
    if (*serve) {
      if (!data_dir.empty()) serve_cfg.data_dir = data_dir;
      serve_cfg.ttl = std::chrono::seconds(static_cast<long long>(ttl_hours * 3600.0));
      return run_serve(serve_cfg);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
