#include <httplib.h>

#include <filesystem>
#include <thread>

#include "nbratio/report.hpp"
#include "nbratio/serialize.hpp"
#include "nbratio/service.hpp"
#include "support.hpp"

using namespace nbratio;
using namespace std::chrono_literals;

namespace {

class Running {
 public:
  explicit Running(ServiceConfig config) : service_(config) {
    config.port = 0;
    port_ = service_.bind();
    thread_ = std::thread([this] { service_.serve(); });
    httplib::Client c("127.0.0.1", port_);
    for (int i = 0; i < 200 && !c.Get("/health"); ++i) std::this_thread::sleep_for(10ms);
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  PlannerService service_;
  int port_ = 0;
  std::thread thread_;
};

ServiceConfig test_config() {
  ServiceConfig c;
  c.port = 0;
  return c;
}

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

Json post(httplib::Client& c, const std::string& path, const Json& body, int want) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == want);
  return Json::parse(r->body);
}

// Polls until the job is terminal; returns every body seen.
std::vector<Json> poll(httplib::Client& c, const std::string& id) {
  std::vector<Json> seen;
  for (int i = 0; i < 6000; ++i) {
    seen.push_back(body_of(c.Get("/api/jobs/" + id)));
    const auto state = seen.back().at("state").get<std::string>();
    if (state == "done" || state == "failed") break;
    std::this_thread::sleep_for(10ms);
  }
  return seen;
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("nbratio_svc_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

const Json kSmallScan = {{"scenario",
                          {{"n", 20},
                           {"replicates", 100},
                           {"r_grid", {0.6, 0.7}},
                           {"seed", 3},
                           {"methods", {"BNB", "WAAVP"}}}}};

}  // namespace

TEST_CASE("health and presets") {
  Running s(test_config());
  auto c = s.client();
  auto r = c.Get("/health");
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto health = Json::parse(r->body);
  CHECK(health.at("status") == "ok");
  CHECK(health.contains("version"));
  CHECK(health.at("build").contains("compiler"));

  const auto presets = body_of(c.Get("/api/presets")).at("presets");
  std::map<std::string, double> targets;
  for (const auto& p : presets) targets[p.at("name").get<std::string>()] = p.at("target_e").get<double>();
  CHECK(targets == std::map<std::string, double>{{"ascaris", 0.95}, {"hookworm", 0.70}, {"trichuris", 0.50}});
  CHECK(presets == presets_json().at("presets"));
}

TEST_CASE("CORS headers and preflight") {
  ServiceConfig cfg = test_config();
  cfg.cors_origin = "http://localhost:5173";
  Running s(cfg);
  auto c = s.client();
  auto r = c.Options("/api/analyze");
  REQUIRE(r);
  CHECK(r->status == 204);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  CHECK(r->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  CHECK(c.Get("/health")->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
}

TEST_CASE("analyze") {
  Running s(test_config());
  auto c = s.client();

  SUBCASE("zero post-treatment total at E = 0.95") {
    const Json req = {{"data", {{"pre", {120, 40, 800, 15, 3}}, {"post", {0, 0, 0, 0, 0}}}},
                      {"design", {{"target_e", 0.95}, {"margin_delta", 0.05}}}};
    const auto j = post(c, "/api/analyze", req, 200);
    std::map<std::string, Json> by;
    for (const auto& o : j.at("results")) by[o.at("method").get<std::string>()] = o;
    CHECK(by.at("BNB").at("classification").at("group") == "Adequate");
    CHECK(by.at("BNB").at("degenerate").is_null());
    CHECK(by.at("Binomial").at("degenerate").is_null());
    for (const char* m : {"WAAVP", "Gamma", "Asymptotic"}) {
      CHECK(by.at(m).at("degenerate") == kZeroPostReason);
    }
  }

  SUBCASE("response equals the library report") {
    const PairedDataset d{{10, 30, 50, 7, 90}, {2, 9, 20, 1, 30}};
    const EfficacyDesign design{0.70, 0.05, 0.025};
    const Json req = {{"data", d}, {"design", design}, {"methods", "all"}};
    auto r = c.Post("/api/analyze", req.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == dump_pretty(report_json(analyze_report(d, design, {kAllMethods.begin(), kAllMethods.end()}))));
  }

  SUBCASE("validation failures name the field") {
    const auto neg = post(c, "/api/analyze", {{"data", {{"pre", {1, -2}}, {"post", {1, 1}}}}}, 400);
    CHECK(neg.at("fields").at(0).at("field") == "data.pre[1]");
    const auto frac = post(c, "/api/analyze", {{"data", {{"pre", {1, 2}}, {"post", {{1, 0.5}, {1, 1}}}}}}, 400);
    CHECK(frac.at("fields").at(0).at("field") == "data.post[0][1]");
    const auto design = post(c, "/api/analyze",
                             {{"data", {{"pre", {1, 2}}, {"post", {1, 1}}}}, {"design", {{"target_e", 1.5}}}},
                             400);
    CHECK(design.at("fields").at(0).at("field") == "design.target_e");
    post(c, "/api/analyze", {{"data", {{"pre", {1, 2}}, {"post", {1, 1}}}}, {"methods", {"nope"}}}, 400);
    post(c, "/api/analyze", {{"data", {{"pre", {1, 2}}, {"post", {1}}}}}, 400);
    post(c, "/api/analyze", {{"data", {{"pre", {1, 2}}, {"post", {1, 1}}}}, {"extra", 1}}, 400);
    post(c, "/api/analyze", {{"design", {{"target_e", 0.9}}}}, 400);
    auto bad = c.Post("/api/analyze", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
  }

  SUBCASE("zero pre-treatment mean fails every method") {
    const auto j = post(c, "/api/analyze", {{"data", {{"pre", {0, 0, 0}}, {"post", {0, 1, 0}}}}}, 422);
    for (const auto& o : j.at("results")) CHECK_FALSE(o.at("failure").is_null());
  }

  SUBCASE("preset supplies the design") {
    const auto j = post(c, "/api/analyze",
                        {{"data", {{"pre", {10, 20, 30}}, {"post", {5, 9, 16}}}}, {"preset", "trichuris"}}, 200);
    CHECK(j.at("design").at("target_e") == 0.5);
    post(c, "/api/analyze", {{"data", {{"pre", {10, 20}}, {"post", {5, 9}}}}, {"preset", "pinworm"}}, 400);
  }
}

TEST_CASE("simulation jobs") {
  Running s(test_config());
  auto c = s.client();
  const auto accepted = post(c, "/api/simulate", kSmallScan, 202);
  const auto id = accepted.at("id").get<std::string>();
  CHECK(id.size() >= 32);  // 128 random bits, hex
  CHECK(accepted.at("kind") == "scan");
  const auto seen = poll(c, id);
  REQUIRE(seen.back().at("state") == "done");
  double prev = 0.0;
  std::string prev_state = "queued";
  const std::map<std::string, int> order{{"queued", 0}, {"running", 1}, {"done", 2}, {"failed", 2}};
  for (const auto& j : seen) {
    CHECK(j.at("progress").get<double>() >= prev);
    prev = j.at("progress").get<double>();
    CHECK(order.at(j.at("state").get<std::string>()) >= order.at(prev_state));
    prev_state = j.at("state").get<std::string>();
  }
  CHECK(seen.back().at("progress") == 1.0);

  // the job result is the library scan
  SimScenario expected = scenario_from_json(kSmallScan.at("scenario"));
  CHECK(seen.back().at("result") == Json(run_scan(expected)));

  auto a = c.Get("/api/jobs/" + id);
  auto b = c.Get("/api/jobs/" + id);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->body == b->body);

  auto missing = c.Get("/api/jobs/doesnotexist");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto missing_del = c.Delete("/api/jobs/doesnotexist");
  REQUIRE(missing_del);
  CHECK(missing_del->status == 404);
}

TEST_CASE("replicate cap") {
  ServiceConfig cfg = test_config();
  cfg.max_replicates = 500;
  Running s(cfg);
  auto c = s.client();
  const auto j = post(c, "/api/simulate", {{"scenario", {{"replicates", 501}}}}, 400);
  CHECK(j.at("error").get<std::string>().find("500") != std::string::npos);
  CHECK(j.at("fields").at(0).at("field") == "scenario.replicates");
  post(c, "/api/simulate", {{"scenario", {{"rho", 0.99}}}}, 400);
  post(c, "/api/simulate", {{"scenario", {{"bogus", 1}}}}, 400);
}

TEST_CASE("cancelling a running job") {
  Running s(test_config());
  auto c = s.client();
  const Json big = {{"scenario", {{"replicates", 100000}, {"r_grid", {0.5, 0.6, 0.7, 0.8}}, {"seed", 1}}}};
  const auto id = post(c, "/api/simulate", big, 202).at("id").get<std::string>();
  // a second job waits in the queue behind it
  const auto queued = post(c, "/api/simulate", big, 202).at("id").get<std::string>();
  for (int i = 0; i < 500; ++i) {
    if (body_of(c.Get("/api/jobs/" + id)).at("progress").get<double>() > 0.0) break;
    std::this_thread::sleep_for(10ms);
  }
  c.Delete("/api/jobs/" + queued);
  auto del = c.Delete("/api/jobs/" + id);
  REQUIRE(del);
  CHECK(del->status == 202);
  const auto last = poll(c, id).back();
  CHECK(last.at("state") == "failed");
  CHECK(last.at("error") == "cancelled");
  CHECK(last.at("progress").get<double>() < 1.0);

  const auto q = body_of(c.Get("/api/jobs/" + queued));
  CHECK(q.at("state") == "failed");
  CHECK(q.at("error") == "cancelled");
}

TEST_CASE("plan jobs") {
  Running s(test_config());
  auto c = s.client();
  const Json req = {{"preset", "trichuris"},
                    {"scenario", {{"replicates", 100}, {"methods", {"BNB"}}}},
                    {"n_candidates", {20, 91}},
                    {"criteria", {{"max_inconclusive", 0.2}}}};
  const auto id = post(c, "/api/plan", req, 202).at("id").get<std::string>();
  const auto last = poll(c, id).back();
  REQUIRE(last.at("state") == "done");
  const auto& result = last.at("result");
  CHECK(result.at("evaluations").size() == 2);
  CHECK(result.at("curves").size() == 2);
  // default grid brackets the thresholds
  const auto grid = result.at("scans").at(0).at("scenario").at("r_grid").get<std::vector<double>>();
  CHECK(grid == plan_default_grid({0.50, 0.05, 0.025}));
  post(c, "/api/plan", {{"n_candidates", Json::array()}}, 400);
  post(c, "/api/plan", {{"n_candidates", {1}}}, 400);
  post(c, "/api/plan", {{"n_candidates", {20}}, {"criteria", {{"max_inconclusive", 2}}}}, 400);
}

TEST_CASE("finished jobs survive a restart") {
  ServiceConfig cfg = test_config();
  cfg.data_dir = temp_dir("snap");
  std::string id, before;
  {
    Running s(cfg);
    auto c = s.client();
    id = post(c, "/api/simulate", kSmallScan, 202).at("id").get<std::string>();
    REQUIRE(poll(c, id).back().at("state") == "done");
    before = c.Get("/api/jobs/" + id)->body;
  }
  CHECK(std::filesystem::exists(*cfg.data_dir / (id + ".json")));
  {
    Running s(cfg);
    auto c = s.client();
    auto r = c.Get("/api/jobs/" + id);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == before);
  }
  std::filesystem::remove_all(*cfg.data_dir);
}

TEST_CASE("jobs expire after the TTL") {
  ServiceConfig cfg = test_config();
  cfg.data_dir = temp_dir("ttl");
  cfg.ttl = std::chrono::seconds(1);
  Running s(cfg);
  auto c = s.client();
  const auto id = post(c, "/api/simulate", kSmallScan, 202).at("id").get<std::string>();
  const auto seen = poll(c, id);
  CHECK(seen.back().at("state") == "done");
  std::this_thread::sleep_for(1100ms);
  auto r = c.Get("/api/jobs/" + id);
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK_FALSE(std::filesystem::exists(*cfg.data_dir / (id + ".json")));
  std::filesystem::remove_all(*cfg.data_dir);
}

TEST_CASE("hookworm type I error at T_I through the service") {
  Running s(test_config());
  auto c = s.client();
  const Json req = {{"preset", "hookworm"},
                    {"scenario", {{"n", 91}, {"r_grid", {0.70}}, {"replicates", 10000}, {"seed", 1}, {"methods", {"BNB"}}}}};
  const auto id = post(c, "/api/simulate", req, 202).at("id").get<std::string>();
  const auto last = poll(c, id).back();
  REQUIRE(last.at("state") == "done");
  const auto& cell = last.at("result").at("cells").at(0);
  const double rate = cell.at("rates").at("reject_inferiority").get<double>();
  const double se = std::sqrt(0.038 * 0.962 / 10000.0);
  CHECK(std::abs(rate - 0.038) <= std::max(0.012, 3 * se));
}
