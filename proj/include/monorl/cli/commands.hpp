// Building blocks of the monorl command-line tool: sweep specs, the local
// process-pool bench runner and report generation. tools/monorl.cpp only
// parses arguments and maps results to exit codes.
#ifndef MONORL_CLI_COMMANDS_HPP_
#define MONORL_CLI_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "monorl/algorithms/train.hpp"
#include "monorl/tracking/curves.hpp"

namespace monorl {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // usage or configuration error
inline constexpr int kExitFailure = 2;  // a run (or some bench jobs) failed

// Runs root used when --runs-dir is absent: $MONORL_RUNS_DIR, else "runs".
std::filesystem::path DefaultRunsRoot();

// ---- Sweep specs ----

struct SweepExperiment {
  std::string algo_id;
  std::string env_id;
  int64_t total_timesteps = 0;
  Json overrides = Json::object();  // typed config values
};

// JSON form:
//   {"exp_name": "bench", "max_parallel": 3, "seeds": [1, 2, 3],
//    "experiments": [{"algo_id": "ppo", "env_id": "cartpole-v1",
//                     "total_timesteps": 250000, "overrides": {...}}]}
// "overrides" is optional. Jobs are experiments x seeds, experiment-major.
struct SweepSpec {
  std::string exp_name;
  std::vector<SweepExperiment> experiments;
  std::vector<uint64_t> seeds;
  int max_parallel = 1;

  // Throws ConfigError on a malformed spec: missing or mistyped fields,
  // empty lists, max_parallel < 1, unknown algorithms, or overrides that
  // fail the algorithm's schema. Environment compatibility is checked per
  // job at run time.
  static SweepSpec FromJson(const Json& j);
  Json ToJson() const;
};

SweepSpec LoadSweepSpec(const std::filesystem::path& path);

struct SweepJob {
  int index = 0;
  int num_jobs = 0;
  std::string exp_name;
  SweepExperiment experiment;
  uint64_t seed = 0;

  // Value of the manifest "sweep" field.
  Json Membership() const;
  Json ToJson() const;
  static SweepJob FromJson(const Json& j);
};

std::vector<SweepJob> ExpandJobs(const SweepSpec& spec);

// Runs one job in the current process (the worker side of bench).
TrainOutcome RunSweepJob(const SweepJob& job, const std::filesystem::path& runs_root,
                         const std::string& run_id, const std::string& invocation);

struct JobResult {
  SweepJob job;
  bool ok = false;
  std::filesystem::path run_dir;  // empty if the job failed before opening its run
  double final_return = 0.0;      // mean of the last 100 episodic returns
  std::string error;              // last line of the worker log on failure
  std::filesystem::path log_path;
};

// Executes every job as a separate worker process
//   <worker_exe> bench-job --job-json <json> --run-id <id> --runs-dir <root>
// with at most spec.max_parallel running at once. Worker stdout/stderr go to
// <runs_root>/<exp_name>/_logs/job-<index>.log. A failing job never stops
// its siblings. Results are in job order.
std::vector<JobResult> RunBench(const SweepSpec& spec, const std::filesystem::path& runs_root,
                                const std::filesystem::path& worker_exe);

// Fixed-width summary table: job, algo, env, seed, status, final return.
void PrintBenchSummary(std::ostream& out, const std::vector<JobResult>& results);

// ---- Reports ----

// Run directories (those holding manifest.json) matched by glob patterns.
// A matched directory without a manifest is searched recursively. Sorted,
// without duplicates.
std::vector<std::filesystem::path> DiscoverRuns(const std::vector<std::string>& patterns);

// One chart per env_id (sorted), one curve per algo_id within it (sorted):
// each run's series is EMA-smoothed, then the group is aggregated onto
// `grid_points` samples. Throws TrackingError naming runs without `metric`.
std::vector<ChartSpec> BuildReportCharts(const std::vector<RunData>& runs,
                                         const std::string& metric, double smoothing_weight,
                                         int grid_points);

struct ReportResult {
  int runs = 0;
  int charts = 0;
  int curves = 0;
};

// Discover, parse, aggregate and render to out_path. Throws TrackingError
// when no run matches.
ReportResult WriteReport(const std::vector<std::string>& patterns, const std::string& metric,
                         double smoothing_weight, int grid_points,
                         const std::filesystem::path& out_path);

}  // namespace monorl

#endif  // MONORL_CLI_COMMANDS_HPP_
