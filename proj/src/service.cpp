#include "nbratio/service.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <iomanip>
#include <sstream>
#include <thread>

#include "nbratio/errors.hpp"
#include "nbratio/io.hpp"
#include "nbratio/report.hpp"
#include "nbratio/serialize.hpp"

#ifndef NBRATIO_VERSION
#define NBRATIO_VERSION "0.0.0"
#endif

namespace nbratio {

namespace {

using Clock = std::chrono::system_clock;

enum class JobKind { scan, plan };
enum class JobState { queued, running, done, failed };

const char* kind_name(JobKind k) { return k == JobKind::scan ? "scan" : "plan"; }

const char* state_name(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

std::optional<JobState> parse_state(const std::string& s) {
  for (auto st : {JobState::queued, JobState::running, JobState::done, JobState::failed}) {
    if (s == state_name(st)) return st;
  }
  return std::nullopt;
}

std::string iso8601(Clock::time_point t) {
  const std::time_t tt = Clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<Clock::time_point> parse_iso8601(const std::string& s) {
  std::tm tm{};
  std::istringstream in(s);
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  if (in.fail()) return std::nullopt;
  return Clock::from_time_t(timegm(&tm));
}

std::string random_id() {
  static thread_local std::random_device rd;
  std::uint64_t a = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::uint64_t b = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return buf;
}

struct Job {
  std::string id;
  JobKind kind = JobKind::scan;
  JobState state = JobState::queued;
  double progress = 0.0;
  std::optional<Json> result;
  std::optional<std::string> error;
  Clock::time_point created;
  Clock::time_point updated;
  std::uint64_t revision = 0;

  SimScenario scenario;
  std::vector<int> candidates;
  PlanCriteria criteria;
  std::shared_ptr<std::atomic<bool>> cancel = std::make_shared<std::atomic<bool>>(false);

  bool terminal() const { return state == JobState::done || state == JobState::failed; }

  Json to_json() const {
    return {{"id", id},
            {"kind", kind_name(kind)},
            {"state", state_name(state)},
            {"progress", progress},
            {"result", result ? *result : Json(nullptr)},
            {"error", error ? Json(*error) : Json(nullptr)},
            {"created", iso8601(created)},
            {"updated", iso8601(updated)},
            {"revision", revision}};
  }
};

struct FieldError {
  std::string field;
  std::string message;
};

class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::vector<FieldError> fields)
      : std::runtime_error(fields.empty() ? "bad request" : fields.front().message),
        status_(status),
        fields_(std::move(fields)) {}
  RequestError(int status, std::string field, std::string message)
      : RequestError(status, std::vector<FieldError>{{std::move(field), std::move(message)}}) {}

  int status() const { return status_; }
  Json body() const {
    Json fields = Json::array();
    for (const auto& f : fields_) fields.push_back({{"field", f.field}, {"message", f.message}});
    return {{"error", what()}, {"fields", fields}};
  }

 private:
  int status_;
  std::vector<FieldError> fields_;
};

void check_keys(const Json& body, std::initializer_list<const char*> keys) {
  if (!body.is_object()) throw RequestError(400, "", "request body must be a JSON object");
  for (const auto& [k, v] : body.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) ==
        keys.end()) {
      throw RequestError(400, k, "unknown field '" + k + "'");
    }
  }
}

// Field-level checks of a dataset body before it is pooled.
void validate_counts(const Json& data, std::vector<FieldError>& errors) {
  if (!data.is_object()) {
    errors.push_back({"data", "must be an object with 'pre' and 'post' arrays"});
    return;
  }
  for (const char* group : {"pre", "post"}) {
    const std::string base = std::string("data.") + group;
    if (!data.contains(group) || !data[group].is_array()) {
      errors.push_back({base, "must be an array of counts"});
      continue;
    }
    const auto& arr = data[group];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto check = [&](const Json& v, const std::string& field) {
        if (!v.is_number_integer()) {
          errors.push_back({field, "must be a non-negative integer"});
        } else if (v.get<std::int64_t>() < 0) {
          errors.push_back({field, "count is negative"});
        }
      };
      const std::string field = base + "[" + std::to_string(i) + "]";
      if (arr[i].is_array()) {
        for (std::size_t r = 0; r < arr[i].size(); ++r) {
          check(arr[i][r], field + "[" + std::to_string(r) + "]");
        }
      } else {
        check(arr[i], field);
      }
    }
  }
  if (data.contains("paired") && !data["paired"].is_boolean()) {
    errors.push_back({"data.paired", "must be a boolean"});
  }
}

EfficacyDesign design_from(const Json& body, EfficacyDesign design,
                           std::vector<FieldError>& errors) {
  if (!body.contains("design")) return design;
  const auto& d = body["design"];
  if (!d.is_object()) {
    errors.push_back({"design", "must be an object"});
    return design;
  }
  for (const auto& [k, v] : d.items()) {
    double* slot = k == "target_e" ? &design.target_e
                   : k == "margin_delta" ? &design.margin_delta
                   : k == "alpha" ? &design.alpha
                                  : nullptr;
    if (k == "t_i" || k == "t_a") continue;  // derived, echoed back by responses
    if (!slot) {
      errors.push_back({"design." + k, "unknown field"});
    } else if (!v.is_number()) {
      errors.push_back({"design." + k, "must be a number"});
    } else {
      *slot = v.get<double>();
    }
  }
  if (!(design.target_e >= 0.0 && design.target_e <= 1.0)) {
    errors.push_back({"design.target_e", "must lie in [0, 1]"});
  }
  if (!(design.margin_delta >= 0.0 && design.margin_delta <= design.target_e)) {
    errors.push_back({"design.margin_delta", "must lie in [0, target_e]"});
  }
  if (!(design.alpha > 0.0 && design.alpha < 0.5)) {
    errors.push_back({"design.alpha", "must lie in (0, 0.5)"});
  }
  return design;
}

std::vector<Method> methods_from(const Json& body, std::vector<FieldError>& errors) {
  if (!body.contains("methods")) return {kAllMethods.begin(), kAllMethods.end()};
  try {
    const auto& m = body["methods"];
    if (m.is_string()) return parse_method_list(m.get<std::string>());
    return m.get<std::vector<Method>>();
  } catch (const std::exception& e) {
    errors.push_back({"methods", e.what()});
    return {};
  }
}

const SpeciesPreset* preset_from(const Json& body) {
  if (!body.contains("preset") || body["preset"].is_null()) return nullptr;
  if (!body["preset"].is_string()) throw RequestError(400, "preset", "must be a string");
  const auto* p = find_preset(body["preset"].get<std::string>());
  if (!p) throw RequestError(400, "preset", "unknown preset '" + body["preset"].get<std::string>() + "'");
  return p;
}

}  // namespace

struct PlannerService::Impl {
  ServiceConfig config;
  httplib::Server server;

  std::mutex mutex;
  std::condition_variable wake;
  std::map<std::string, Job> jobs;
  std::deque<std::string> queue;
  bool stopping = false;
  std::thread runner;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    if (config.data_dir) {
      std::filesystem::create_directories(*config.data_dir);
      load_snapshots();
    }
    routes();
    runner = std::thread([this] { run_jobs(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
      for (auto& [id, job] : jobs) job.cancel->store(true);
    }
    wake.notify_all();
    server.stop();
    if (runner.joinable()) runner.join();
  }

  std::filesystem::path snapshot_path(const std::string& id) const {
    return *config.data_dir / (id + ".json");
  }

  void write_snapshot(const Job& job) {
    if (!config.data_dir) return;
    const auto path = snapshot_path(job.id);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << dump_pretty(job.to_json());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
  }

  void load_snapshots() {
    for (const auto& entry : std::filesystem::directory_iterator(*config.data_dir)) {
      if (entry.path().extension() != ".json") continue;
      try {
        std::ifstream in(entry.path(), std::ios::binary);
        const Json j = Json::parse(in);
        Job job;
        job.id = j.at("id").get<std::string>();
        job.kind = j.at("kind").get<std::string>() == "plan" ? JobKind::plan : JobKind::scan;
        auto st = parse_state(j.at("state").get<std::string>());
        if (!st || (*st != JobState::done && *st != JobState::failed)) continue;
        job.state = *st;
        job.progress = j.at("progress").get<double>();
        if (!j.at("result").is_null()) job.result = j.at("result");
        if (!j.at("error").is_null()) job.error = j.at("error").get<std::string>();
        job.created = parse_iso8601(j.at("created").get<std::string>()).value_or(Clock::now());
        job.updated = parse_iso8601(j.at("updated").get<std::string>()).value_or(Clock::now());
        job.revision = j.at("revision").get<std::uint64_t>();
        jobs.emplace(job.id, std::move(job));
      } catch (const std::exception&) {
        // unreadable snapshot; leave it for inspection
      }
    }
  }

  void purge_locked() {
    const auto now = Clock::now();
    for (auto it = jobs.begin(); it != jobs.end();) {
      if (it->second.terminal() && it->second.updated + config.ttl <= now) {
        if (config.data_dir) {
          std::error_code ec;
          std::filesystem::remove(snapshot_path(it->first), ec);
        }
        it = jobs.erase(it);
      } else {
        ++it;
      }
    }
  }

  void finish(const std::string& id, JobState state, std::optional<Json> result,
              std::optional<std::string> error) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(id);
    if (it == jobs.end()) return;
    auto& job = it->second;
    job.state = state;
    if (state == JobState::done) job.progress = 1.0;
    job.result = std::move(result);
    job.error = std::move(error);
    job.updated = Clock::now();
    ++job.revision;
    write_snapshot(job);
  }

  void run_jobs() {
    for (;;) {
      std::string id;
      Job work;
      {
        std::unique_lock lock(mutex);
        wake.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        auto it = jobs.find(id);
        if (it == jobs.end() || it->second.state != JobState::queued) continue;
        it->second.state = JobState::running;
        it->second.updated = Clock::now();
        ++it->second.revision;
        work = it->second;
      }

      ScanControl control;
      control.threads = config.threads;
      control.cancel = work.cancel.get();
      control.progress = [this, id](std::uint64_t done, std::uint64_t total) {
        std::lock_guard lock(mutex);
        auto it = jobs.find(id);
        if (it == jobs.end() || total == 0) return;
        const double p = static_cast<double>(done) / static_cast<double>(total);
        if (p > it->second.progress) {
          it->second.progress = p;
          it->second.updated = Clock::now();
          ++it->second.revision;
        }
      };
      try {
        Json result;
        if (work.kind == JobKind::scan) {
          result = run_scan(work.scenario, control);
        } else {
          result = plan_sample_size(work.scenario, work.candidates, work.criteria, control);
        }
        finish(id, JobState::done, std::move(result), std::nullopt);
      } catch (const ScanCancelled&) {
        finish(id, JobState::failed, std::nullopt, "cancelled");
      } catch (const std::exception& e) {
        finish(id, JobState::failed, std::nullopt, e.what());
      }
    }
  }

  Json submit(Job job) {
    std::lock_guard lock(mutex);
    job.id = random_id();
    job.created = job.updated = Clock::now();
    const Json body = job.to_json();
    queue.push_back(job.id);
    jobs.emplace(job.id, std::move(job));
    wake.notify_one();
    return body;
  }

  SimScenario scenario_from_body(const Json& body, bool planning) {
    const SpeciesPreset* preset = preset_from(body);
    SimScenario scenario = preset ? preset->scenario : SimScenario{};
    if (planning) scenario.replicates = kPlanDefaultReplicates;
    if (body.contains("scenario")) {
      try {
        scenario = scenario_from_json(body["scenario"], scenario);
      } catch (const std::exception& e) {
        throw RequestError(400, "scenario", e.what());
      }
    }
    if (planning && !(body.contains("scenario") && body["scenario"].contains("r_grid"))) {
      scenario.r_grid = plan_default_grid(scenario.design);
    }
    if (scenario.replicates > config.max_replicates) {
      throw RequestError(400, "scenario.replicates",
                         "replicates per r exceeds the server cap of " +
                             std::to_string(config.max_replicates));
    }
    if (scenario.r_grid.size() > 1001) {
      throw RequestError(400, "scenario.r_grid", "at most 1001 r values per scan");
    }
    try {
      scenario.validate();
    } catch (const std::exception& e) {
      throw RequestError(400, "scenario", e.what());
    }
    return scenario;
  }

  static Json parse_body(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw RequestError(400, "", std::string("invalid JSON: ") + e.what());
    }
  }

  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(dump_pretty(body), "application/json");
  }

  template <typename F>
  auto guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      purge_expired();
      try {
        f(req, res);
      } catch (const RequestError& e) {
        send(res, e.status(), e.body());
      } catch (const std::exception& e) {
        send(res, 500, {{"error", e.what()}, {"fields", Json::array()}});
      }
    };
  }

  void purge_expired() {
    std::lock_guard lock(mutex);
    purge_locked();
  }

  void analyze(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    check_keys(body, {"data", "design", "methods", "options", "preset"});
    std::vector<FieldError> errors;
    if (!body.contains("data")) {
      errors.push_back({"data", "required"});
    } else {
      validate_counts(body["data"], errors);
    }
    const SpeciesPreset* preset = preset_from(body);
    EfficacyDesign base;
    if (preset) base = {preset->target_e, preset->delta, base.alpha};
    const EfficacyDesign design = design_from(body, base, errors);
    const auto methods = methods_from(body, errors);
    MethodOptions options;
    if (body.contains("options")) {
      try {
        from_json(body["options"], options);
        options.bnb_prior.validate();
        options.binomial_prior.validate();
      } catch (const std::exception& e) {
        errors.push_back({"options", e.what()});
      }
    }
    if (!errors.empty()) throw RequestError(400, std::move(errors));

    PairedDataset data;
    try {
      data = parse_dataset_json(body["data"]);
      data.validate_for_inference();
    } catch (const std::exception& e) {
      throw RequestError(400, "data", e.what());
    }
    const auto report = analyze_report(data, design, methods, options);
    send(res, report.all_failed() ? 422 : 200, report_json(report));
  }

  void simulate(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    check_keys(body, {"preset", "scenario"});
    Job job;
    job.kind = JobKind::scan;
    job.scenario = scenario_from_body(body, false);
    send(res, 202, submit(std::move(job)));
  }

  void plan(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    check_keys(body, {"preset", "scenario", "n_candidates", "criteria"});
    Job job;
    job.kind = JobKind::plan;
    job.scenario = scenario_from_body(body, true);
    if (!body.contains("n_candidates") || !body["n_candidates"].is_array() ||
        body["n_candidates"].empty()) {
      throw RequestError(400, "n_candidates", "must be a non-empty array of sample sizes");
    }
    for (const auto& n : body["n_candidates"]) {
      if (!n.is_number_integer() || n.get<std::int64_t>() < 2 || n.get<std::int64_t>() > 100000) {
        throw RequestError(400, "n_candidates", "sample sizes must be integers in [2, 100000]");
      }
      job.candidates.push_back(n.get<int>());
    }
    if (body.contains("criteria")) {
      try {
        from_json(body["criteria"], job.criteria);
        job.criteria.validate();
      } catch (const std::exception& e) {
        throw RequestError(400, "criteria", e.what());
      }
    }
    send(res, 202, submit(std::move(job)));
  }

  void get_job(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(req.matches[1]);
    if (it == jobs.end()) throw RequestError(404, "id", "no such job");
    send(res, 200, it->second.to_json());
  }

  void cancel_job(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(req.matches[1]);
    if (it == jobs.end()) throw RequestError(404, "id", "no such job");
    auto& job = it->second;
    if (job.state == JobState::queued) {
      job.state = JobState::failed;
      job.error = "cancelled";
      job.updated = Clock::now();
      ++job.revision;
      write_snapshot(job);
    } else if (job.state == JobState::running) {
      job.cancel->store(true);
    }
    send(res, 202, job.to_json());
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      send(res, 200,
           {{"status", "ok"},
            {"version", NBRATIO_VERSION},
            {"build", {{"compiler", __VERSION__}, {"date", __DATE__}, {"cplusplus", __cplusplus}}}});
    }));
    server.Get("/api/presets", guarded([](const httplib::Request&, httplib::Response& res) {
      send(res, 200, presets_json());
    }));
    server.Post("/api/analyze", guarded([this](const auto& q, auto& r) { analyze(q, r); }));
    server.Post("/api/simulate", guarded([this](const auto& q, auto& r) { simulate(q, r); }));
    server.Post("/api/plan", guarded([this](const auto& q, auto& r) { plan(q, r); }));
    server.Get(R"(/api/jobs/([^/]+))", guarded([this](const auto& q, auto& r) { get_job(q, r); }));
    server.Delete(R"(/api/jobs/([^/]+))",
                  guarded([this](const auto& q, auto& r) { cancel_job(q, r); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(dump_pretty({{"error", httplib::status_message(res.status)},
                                     {"fields", Json::array()}}),
                        "application/json");
      }
    });
  }
};

PlannerService::PlannerService(ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

PlannerService::~PlannerService() = default;

int PlannerService::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    const int port = impl_->server.bind_to_any_port(c.bind);
    if (port < 0) throw std::runtime_error("cannot bind to " + c.bind);
    c.port = port;
    return port;
  }
  if (!impl_->server.bind_to_port(c.bind, c.port)) {
    throw std::runtime_error("cannot bind to " + c.bind + ":" + std::to_string(c.port));
  }
  return c.port;
}

void PlannerService::serve() { impl_->server.listen_after_bind(); }

void PlannerService::stop() { impl_->server.stop(); }

void PlannerService::purge_expired() { impl_->purge_expired(); }

}  // namespace nbratio
