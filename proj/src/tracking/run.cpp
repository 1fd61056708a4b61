#include "monorl/tracking/run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <random>
#include <sstream>

namespace monorl {

namespace {

constexpr int kFlushEvery = 100;
constexpr const char* kLockName = ".lock";

std::string FormatUtc(std::chrono::system_clock::time_point now, bool compact) {
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), compact ? "%Y%m%dT%H%M%S" : "%Y-%m-%dT%H:%M:%S", &tm);
  char out[64];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

// Creates `path` exclusively; false if it already exists.
bool CreateExclusive(const fs::path& path, const std::string& contents) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) return false;
  size_t written = 0;
  while (written < contents.size()) {
    const ssize_t n = ::write(fd, contents.data() + written, contents.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw TrackingError("failed writing " + path.string());
    }
    written += static_cast<size_t>(n);
  }
  ::close(fd);
  return true;
}

MetricEvent ParseEventLine(const std::string& line) {
  const Json j = Json::parse(line);
  MetricEvent e;
  e.step = j.at("step").get<int64_t>();
  e.key = j.at("key").get<std::string>();
  e.value = j.at("value").get<double>();
  e.wall_time_s = j.at("wall_time_s").get<double>();
  return e;
}

void ParseEventFile(const fs::path& path, std::vector<MetricEvent>& out,
                    std::vector<std::string>& warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrackingError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    pos = last ? text.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      MetricEvent e = ParseEventLine(line);
      if (!IsDeclaredMetricKey(e.key)) {
        warnings.push_back(path.filename().string() + ":" + std::to_string(line_no) +
                           ": unknown metric key '" + e.key + "'");
      }
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      // Only the final line may be torn (crash mid-write).
      if (pos >= text.size()) {
        warnings.push_back(path.filename().string() + ":" + std::to_string(line_no) +
                           ": skipped torn trailing line");
        break;
      }
      throw TrackingError(path.string() + ":" + std::to_string(line_no) +
                          ": malformed metric line: " + ex.what());
    }
  }
}

}  // namespace

const std::vector<std::string>& MetricKeys() {
  static const std::vector<std::string> keys = {
      "charts/episodic_return", "charts/episodic_length", "charts/SPS",
      "losses/policy_loss",     "losses/value_loss",      "losses/entropy",
      "losses/approx_kl",       "losses/clip_fraction",   "losses/qf_loss",
      "losses/qf1_loss",        "losses/qf2_loss",        "losses/actor_loss",
      "losses/alpha",           "losses/alpha_loss",
  };
  return keys;
}

bool IsDeclaredMetricKey(std::string_view key) {
  const auto& keys = MetricKeys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

bool IsTimingMetricKey(std::string_view key) { return key == kSps; }

Json RunManifest::ToJson() const {
  Json j;
  j["run_id"] = run_id;
  j["exp_name"] = exp_name;
  j["algo_id"] = algo_id;
  j["env_id"] = env_id;
  j["seed"] = seed;
  j["config"] = config;
  j["invocation"] = invocation;
  j["start_time"] = start_time;
  j["code_version"] = code_version;
  j["sweep"] = sweep;
  return j;
}

RunManifest RunManifest::FromJson(const Json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.exp_name = j.at("exp_name").get<std::string>();
  m.algo_id = j.at("algo_id").get<std::string>();
  m.env_id = j.at("env_id").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.config = j.at("config");
  if (!m.config.is_object()) throw TrackingError("manifest config is not an object");
  m.invocation = j.at("invocation").get<std::string>();
  m.start_time = j.at("start_time").get<std::string>();
  m.code_version = j.at("code_version").get<std::string>();
  m.sweep = j.contains("sweep") ? j.at("sweep") : Json(nullptr);
  return m;
}

std::string NewRunId() {
  std::random_device rd;
  char hex[8];
  std::snprintf(hex, sizeof(hex), "%04x", static_cast<unsigned>(rd() & 0xffff));
  return FormatUtc(std::chrono::system_clock::now(), true) + "-" + hex;
}

std::string UtcNowIso8601() { return FormatUtc(std::chrono::system_clock::now(), false); }

std::string FormatMetricLine(const MetricEvent& event) {
  Json j;
  j["step"] = event.step;
  j["key"] = event.key;
  j["value"] = event.value;
  j["wall_time_s"] = event.wall_time_s;
  return j.dump();
}

void WriteManifest(const fs::path& run_dir, const RunManifest& manifest) {
  const fs::path path = run_dir / "manifest.json";
  if (!CreateExclusive(path, manifest.ToJson().dump(2) + "\n")) {
    throw TrackingError("manifest already exists (immutable): " + path.string());
  }
}

RunHandle RunHandle::Open(const fs::path& runs_root, RunManifest manifest) {
  if (manifest.exp_name.empty()) throw TrackingError("open_run: exp_name is empty");
  if (manifest.start_time.empty()) manifest.start_time = UtcNowIso8601();
  const fs::path exp_dir = runs_root / manifest.exp_name;
  fs::create_directories(exp_dir);
  const bool fixed_id = !manifest.run_id.empty();
  for (int attempt = 0;; ++attempt) {
    if (!fixed_id) manifest.run_id = NewRunId();
    const fs::path dir = exp_dir / manifest.run_id;
    if (fs::create_directory(dir)) return RunHandle(dir, std::move(manifest));
    if (fixed_id || attempt > 16) {
      throw TrackingError("open_run: run directory already exists: " + dir.string());
    }
  }
}

RunHandle::RunHandle(fs::path dir, RunManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)), start_(std::chrono::steady_clock::now()) {
  if (!CreateExclusive(dir_ / kLockName, std::to_string(::getpid()) + "\n")) {
    throw TrackingError("run directory is locked by another writer: " + dir_.string());
  }
  WriteManifest(dir_, manifest_);
  metrics_.open(dir_ / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  timing_.open(dir_ / "timing.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics_ || !timing_) throw TrackingError("cannot create metric files in " + dir_.string());
}

RunHandle::RunHandle(RunHandle&& other) noexcept
    : dir_(std::move(other.dir_)),
      manifest_(std::move(other.manifest_)),
      metrics_(std::move(other.metrics_)),
      timing_(std::move(other.timing_)),
      pending_metrics_(other.pending_metrics_),
      pending_timing_(other.pending_timing_),
      total_events_(other.total_events_),
      last_step_(std::move(other.last_step_)),
      start_(other.start_),
      closed_(other.closed_) {
  other.closed_ = true;
}

RunHandle::~RunHandle() {
  if (closed_) return;
  // Abandoned without close: flush what we have, leave no status.json.
  metrics_.flush();
  timing_.flush();
  std::error_code ec;
  fs::remove(dir_ / kLockName, ec);
}

double RunHandle::ElapsedSeconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void RunHandle::Log(int64_t step, std::string_view key, double value) {
  Log(MetricEvent{step, std::string(key), value, ElapsedSeconds()});
}

void RunHandle::Log(const MetricEvent& event) {
  if (closed_) throw TrackingError("log_metric on a closed run");
  if (!std::isfinite(event.value)) {
    throw TrackingError("log_metric: non-finite value for '" + event.key + "' at step " +
                        std::to_string(event.step));
  }
  if (!IsDeclaredMetricKey(event.key)) {
    throw TrackingError("log_metric: undeclared metric key '" + event.key + "'");
  }
  auto it = std::find_if(last_step_.begin(), last_step_.end(),
                         [&](const auto& p) { return p.first == event.key; });
  if (it == last_step_.end()) {
    last_step_.emplace_back(event.key, event.step);
  } else {
    if (event.step < it->second) {
      throw TrackingError("log_metric: step for '" + event.key + "' went backwards (" +
                          std::to_string(it->second) + " -> " + std::to_string(event.step) + ")");
    }
    it->second = event.step;
  }
  if (IsTimingMetricKey(event.key)) {
    Write(timing_, pending_timing_, event);
  } else {
    Write(metrics_, pending_metrics_, event);
  }
  ++total_events_;
}

void RunHandle::Write(std::ofstream& out, int& pending, const MetricEvent& event) {
  out << FormatMetricLine(event) << '\n';
  if (++pending >= kFlushEvery) {
    out.flush();
    pending = 0;
  }
}

void RunHandle::Close(bool completed) {
  if (closed_) return;
  metrics_.flush();
  timing_.flush();
  metrics_.close();
  timing_.close();
  Json status;
  status["completed"] = completed;
  status["total_events"] = total_events_;
  std::ofstream(dir_ / "status.json", std::ios::binary | std::ios::trunc) << status.dump(2) << "\n";
  std::error_code ec;
  fs::remove(dir_ / kLockName, ec);
  closed_ = true;
}

RunData ParseRun(const fs::path& run_dir) {
  RunData run;
  run.dir = run_dir;
  const fs::path manifest_path = run_dir / "manifest.json";
  {
    std::ifstream in(manifest_path);
    if (!in) throw TrackingError("missing manifest: " + manifest_path.string());
    try {
      run.manifest = RunManifest::FromJson(Json::parse(in));
    } catch (const TrackingError&) {
      throw;
    } catch (const std::exception& ex) {
      throw TrackingError("corrupt manifest " + manifest_path.string() + ": " + ex.what());
    }
  }
  const fs::path metrics_path = run_dir / "metrics.jsonl";
  if (!fs::exists(metrics_path)) throw TrackingError("missing " + metrics_path.string());
  ParseEventFile(metrics_path, run.events, run.warnings);
  if (fs::exists(run_dir / "timing.jsonl")) {
    ParseEventFile(run_dir / "timing.jsonl", run.timing, run.warnings);
  }
  const fs::path status_path = run_dir / "status.json";
  if (fs::exists(status_path)) {
    try {
      std::ifstream in(status_path);
      const Json j = Json::parse(in);
      run.status = RunStatus{j.at("completed").get<bool>(), j.at("total_events").get<int64_t>()};
    } catch (const std::exception& ex) {
      run.warnings.push_back("unreadable status.json: " + std::string(ex.what()));
    }
  }
  return run;
}

std::vector<MetricEvent> EventsForKey(const RunData& run, std::string_view key) {
  std::vector<MetricEvent> out;
  const auto& source = IsTimingMetricKey(key) ? run.timing : run.events;
  for (const auto& e : source) {
    if (e.key == key) out.push_back(e);
  }
  return out;
}

}  // namespace monorl
