// monorl command-line tool: train, bench, report, list-algos, list-envs.
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monorl/cli/commands.hpp"
#include "monorl/error.hpp"

namespace {

using namespace monorl;

std::string JoinArgs(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    out += argv[i];
  }
  return out;
}

fs::path SelfExe(const char* argv0) {
  std::error_code ec;
  const fs::path p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::absolute(argv0) : p;
}

std::string FormatReturn(double v) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

int ListAlgosCmd(bool verbose) {
  for (const AlgoInfo& algo : ListAlgos()) {
    std::cout << std::left << std::setw(16) << algo.id << algo.description << "\n";
    if (!verbose) continue;
    for (const ParamSpec& p : algo.schema()) {
      std::cout << "    " << std::setw(28) << p.name << std::setw(14) << p.default_value.dump()
                << (p.type == ParamType::kBool ? "true|false" : p.DescribeBounds()) << "\n";
    }
  }
  return kExitOk;
}

int ListEnvsCmd() {
  for (const EnvDescriptor& env : ListEnvs()) {
    std::cout << std::left << std::setw(16) << env.id << "obs_dim=" << env.observation_dim
              << " action_space=" << env.action_space.Describe() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monorl: single-file reinforcement learning algorithms with run tracking"};
  app.require_subcommand(1);
  const std::string invocation = JoinArgs(argc, argv);
  const fs::path default_root = DefaultRunsRoot();

  // train
  std::string algo_id, env_id, exp_name;
  uint64_t seed = 1;
  int64_t total_timesteps = 0;
  std::vector<std::string> assignments;
  std::string runs_dir = default_root.string();
  auto* train = app.add_subcommand("train", "Train one algorithm on one environment");
  train->add_option("algo", algo_id, "Algorithm id (see list-algos)")->required();
  train->add_option("--env", env_id, "Environment id (see list-envs)")->required();
  train->add_option("--seed", seed, "Random seed")->capture_default_str();
  train->add_option("--total-timesteps", total_timesteps, "Environment steps to train for")
      ->required();
  train->add_option("--set", assignments, "Hyperparameter override key=value (repeatable)");
  train->add_option("--runs-dir", runs_dir, "Runs root ($MONORL_RUNS_DIR or ./runs)")
      ->capture_default_str();
  train->add_option("--exp-name", exp_name, "Experiment name (default: the algorithm id)");

  // bench
  std::string spec_path;
  auto* bench = app.add_subcommand("bench", "Run a multi-seed sweep from a JSON spec");
  bench->add_option("spec", spec_path, "SweepSpec JSON file")->required();
  bench->add_option("--runs-dir", runs_dir, "Runs root ($MONORL_RUNS_DIR or ./runs)")
      ->capture_default_str();

  // bench-job (worker side of bench, not listed in help)
  std::string job_json, run_id;
  auto* bench_job = app.add_subcommand("bench-job", "");
  bench_job->group("");
  bench_job->add_option("--job-json", job_json)->required();
  bench_job->add_option("--run-id", run_id)->required();
  bench_job->add_option("--runs-dir", runs_dir)->required();

  // report
  std::vector<std::string> patterns;
  std::string metric = std::string(kEpisodicReturn);
  double smoothing = 0.0;
  int grid_points = 100;
  std::string out_path = "report.svg";
  auto* report = app.add_subcommand("report", "Render learning curves of tracked runs to SVG");
  report->add_option("runs", patterns, "Run directory globs (quote them)")->required();
  report->add_option("--metric", metric, "Metric key")->capture_default_str();
  report->add_option("--smoothing", smoothing, "EMA smoothing weight in [0, 1)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  report->add_option("--grid-points", grid_points, "Samples per curve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->add_option("--out", out_path, "Output SVG path")->capture_default_str();

  bool verbose = false;
  auto* list_algos = app.add_subcommand("list-algos", "List algorithms");
  list_algos->add_flag("-v,--verbose", verbose, "Show hyperparameters, defaults and bounds");
  auto* list_envs = app.add_subcommand("list-envs", "List environments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*list_algos) return ListAlgosCmd(verbose);
    if (*list_envs) return ListEnvsCmd();

    if (*train) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const std::string& a : assignments) overrides.push_back(SplitAssignment(a));
      TrainRequest request;
      request.config = MakeAlgoConfig(algo_id, env_id, seed, total_timesteps, overrides);
      CheckCompatible(FindAlgo(algo_id), env_id);
      request.runs_root = runs_dir;
      request.exp_name = exp_name.empty() ? algo_id : exp_name;
      request.invocation = invocation;
      TrainOutcome outcome;
      try {
        outcome = RunTraining(request);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::cerr << "error: training failed: " << e.what() << "\n";
        return kExitFailure;
      }
      std::cout << "run_dir: " << outcome.run_dir.string() << "\n"
                << "final_mean_return: " << FormatReturn(outcome.report.final_mean_return) << "\n";
      return kExitOk;
    }

    if (*bench) {
      const SweepSpec spec = LoadSweepSpec(spec_path);
      const auto results = RunBench(spec, runs_dir, SelfExe(argv[0]));
      PrintBenchSummary(std::cout, results);
      int failed = 0;
      for (const JobResult& r : results) failed += r.ok ? 0 : 1;
      std::cout << results.size() - failed << "/" << results.size() << " jobs succeeded\n";
      return failed == 0 ? kExitOk : kExitFailure;
    }

    if (*bench_job) {
      const SweepJob job = SweepJob::FromJson(Json::parse(job_json));
      try {
        const TrainOutcome outcome = RunSweepJob(job, runs_dir, run_id, invocation);
        std::cout << "run_dir: " << outcome.run_dir.string() << "\n"
                  << "final_mean_return: " << FormatReturn(outcome.report.final_mean_return)
                  << "\n";
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
      }
      return kExitOk;
    }

    if (*report) {
      const ReportResult r = WriteReport(patterns, metric, smoothing, grid_points, out_path);
      std::cout << "wrote " << out_path << ": " << r.runs << " runs, " << r.charts << " charts, "
                << r.curves << " curves\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (*train) std::cerr << train->help();
    return kExitUsage;
  } catch (const TrackingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return *report ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
