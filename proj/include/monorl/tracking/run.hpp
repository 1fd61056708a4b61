#ifndef MONORL_TRACKING_RUN_HPP_
#define MONORL_TRACKING_RUN_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace monorl {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Declared metric namespace.
inline constexpr std::string_view kEpisodicReturn = "charts/episodic_return";
inline constexpr std::string_view kEpisodicLength = "charts/episodic_length";
inline constexpr std::string_view kSps = "charts/SPS";
const std::vector<std::string>& MetricKeys();
bool IsDeclaredMetricKey(std::string_view key);
// Keys whose values are derived from wall-clock time. They are written to
// timing.jsonl so metrics.jsonl stays a deterministic function of the seed.
bool IsTimingMetricKey(std::string_view key);

struct MetricEvent {
  int64_t step = 0;
  std::string key;
  double value = 0.0;
  double wall_time_s = 0.0;

  bool operator==(const MetricEvent&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string exp_name;
  std::string algo_id;
  std::string env_id;
  uint64_t seed = 0;
  Json config = Json::object();  // full hyperparameter snapshot
  std::string invocation;
  std::string start_time;    // UTC ISO-8601
  std::string code_version;  // content hash of the algorithm source file
  Json sweep = nullptr;      // {"exp_name":..., "job_index":...} for bench jobs

  Json ToJson() const;
  static RunManifest FromJson(const Json& j);
};

struct RunStatus {
  bool completed = false;
  int64_t total_events = 0;
};

class TrackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "20261016T101530.123Z-3f9a": UTC timestamp (sortable) plus 4 random hex.
std::string NewRunId();
std::string UtcNowIso8601();

// Writer side of a run directory runs/<exp_name>/<run_id>/. Holds the
// directory's lock file for its lifetime. Metric lines are flushed at least
// every 100 events and on Close.
class RunHandle {
 public:
  // open_run: creates the directory, takes the lock, writes manifest.json.
  // An empty manifest.run_id is replaced by NewRunId(); empty start_time by
  // the current time.
  static RunHandle Open(const fs::path& runs_root, RunManifest manifest);

  RunHandle(RunHandle&& other) noexcept;
  RunHandle& operator=(RunHandle&&) = delete;
  RunHandle(const RunHandle&) = delete;
  RunHandle& operator=(const RunHandle&) = delete;
  ~RunHandle();

  // log_metric. Rejects non-finite values, undeclared keys and steps that go
  // backwards for a key.
  void Log(int64_t step, std::string_view key, double value);
  void Log(const MetricEvent& event);
  // close_run: flushes, writes status.json, releases the lock.
  void Close(bool completed = true);

  const fs::path& dir() const { return dir_; }
  fs::path model_dir() const { return dir_ / "model"; }
  const RunManifest& manifest() const { return manifest_; }
  int64_t total_events() const { return total_events_; }
  double ElapsedSeconds() const;
  bool closed() const { return closed_; }

 private:
  RunHandle(fs::path dir, RunManifest manifest);
  void Write(std::ofstream& out, int& pending, const MetricEvent& event);

  fs::path dir_;
  RunManifest manifest_;
  std::ofstream metrics_;
  std::ofstream timing_;
  int pending_metrics_ = 0;
  int pending_timing_ = 0;
  int64_t total_events_ = 0;
  std::vector<std::pair<std::string, int64_t>> last_step_;
  std::chrono::steady_clock::time_point start_;
  bool closed_ = false;
};

// Writes manifest.json exactly once; fails if the file already exists.
void WriteManifest(const fs::path& run_dir, const RunManifest& manifest);

std::string FormatMetricLine(const MetricEvent& event);

struct RunData {
  fs::path dir;
  RunManifest manifest;
  std::vector<MetricEvent> events;  // metrics.jsonl, file order
  std::vector<MetricEvent> timing;  // timing.jsonl, file order
  std::optional<RunStatus> status;
  std::vector<std::string> warnings;
};

// parse_run: inverse of the writer. A torn final line is skipped with a
// warning; any other malformed line, or a missing/corrupt manifest, throws
// TrackingError. Unknown metric keys pass through with a warning.
RunData ParseRun(const fs::path& run_dir);

// Values of one key in file order.
std::vector<MetricEvent> EventsForKey(const RunData& run, std::string_view key);

}  // namespace monorl

#endif  // MONORL_TRACKING_RUN_HPP_
