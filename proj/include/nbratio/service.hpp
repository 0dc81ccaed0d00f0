#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace nbratio {

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  unsigned threads = 1;
  std::uint64_t max_replicates = 100'000;  // per r value
  std::optional<std::filesystem::path> data_dir;  // snapshots of finished jobs
  std::chrono::seconds ttl = std::chrono::hours(24);
  std::string cors_origin = "*";
};

// HTTP front end: synchronous analysis, simulation/plan jobs polled by id,
// presets and liveness. Jobs run one at a time on a background runner, each
// using `threads` Monte Carlo workers.
class PlannerService {
 public:
  explicit PlannerService(ServiceConfig config);
  ~PlannerService();
  PlannerService(const PlannerService&) = delete;
  PlannerService& operator=(const PlannerService&) = delete;

  // Binds and returns the bound port; throws std::runtime_error on failure.
  int bind();
  // Serves until stop(); call after bind().
  void serve();
  void stop();

  // Drops expired jobs (and their snapshots). Called on every request.
  void purge_expired();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nbratio
