#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <ostream>
#include <sstream>

#include "monorl/cli/commands.hpp"
#include "monorl/error.hpp"

namespace monorl {

namespace {

const Json& Field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("sweep spec: " + where + " is missing \"" + key + "\"");
  }
  return j.at(key);
}

std::string LastNonEmptyLine(const fs::path& path) {
  std::ifstream in(path);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

}  // namespace

fs::path DefaultRunsRoot() {
  const char* env = std::getenv("MONORL_RUNS_DIR");
  return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

SweepSpec SweepSpec::FromJson(const Json& j) {
  if (!j.is_object()) throw ConfigError("sweep spec: top level must be an object");
  SweepSpec spec;
  const Json& name = Field(j, "exp_name", "spec");
  if (!name.is_string() || name.get<std::string>().empty()) {
    throw ConfigError("sweep spec: exp_name must be a non-empty string");
  }
  spec.exp_name = name.get<std::string>();
  if (spec.exp_name.find('/') != std::string::npos || spec.exp_name == "." ||
      spec.exp_name == "..") {
    throw ConfigError("sweep spec: exp_name must be a plain directory name");
  }

  if (j.contains("max_parallel")) {
    const Json& mp = j.at("max_parallel");
    if (!mp.is_number_integer() || mp.get<int64_t>() < 1) {
      throw ConfigError("sweep spec: max_parallel must be an integer >= 1");
    }
    spec.max_parallel = static_cast<int>(mp.get<int64_t>());
  }

  const Json& seeds = Field(j, "seeds", "spec");
  if (!seeds.is_array() || seeds.empty()) {
    throw ConfigError("sweep spec: seeds must be a non-empty array");
  }
  for (const Json& s : seeds) {
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<int64_t>() >= 0)) {
      throw ConfigError("sweep spec: seeds must be non-negative integers");
    }
    spec.seeds.push_back(s.get<uint64_t>());
  }

  const Json& experiments = Field(j, "experiments", "spec");
  if (!experiments.is_array() || experiments.empty()) {
    throw ConfigError("sweep spec: experiments must be a non-empty array");
  }
  for (size_t i = 0; i < experiments.size(); ++i) {
    const Json& e = experiments[i];
    const std::string where = "experiments[" + std::to_string(i) + "]";
    SweepExperiment exp;
    const Json& algo = Field(e, "algo_id", where);
    const Json& env = Field(e, "env_id", where);
    const Json& steps = Field(e, "total_timesteps", where);
    if (!algo.is_string() || !env.is_string()) {
      throw ConfigError("sweep spec: " + where + " algo_id and env_id must be strings");
    }
    if (!steps.is_number_integer() || steps.get<int64_t>() < 0) {
      throw ConfigError("sweep spec: " + where + " total_timesteps must be an integer >= 0");
    }
    exp.algo_id = algo.get<std::string>();
    exp.env_id = env.get<std::string>();
    exp.total_timesteps = steps.get<int64_t>();
    if (e.contains("overrides")) {
      if (!e.at("overrides").is_object()) {
        throw ConfigError("sweep spec: " + where + " overrides must be an object");
      }
      exp.overrides = e.at("overrides");
    }
    // Schema check now, so a typo fails the whole sweep before any job runs.
    const AlgoInfo& info = FindAlgo(exp.algo_id);
    BuildConfigJson(info.schema(), exp.algo_id, exp.env_id, spec.seeds.front(), exp.total_timesteps,
                    exp.overrides);
    spec.experiments.push_back(std::move(exp));
  }
  return spec;
}

Json SweepSpec::ToJson() const {
  Json j;
  j["exp_name"] = exp_name;
  j["max_parallel"] = max_parallel;
  j["seeds"] = seeds;
  j["experiments"] = Json::array();
  for (const SweepExperiment& e : experiments) {
    j["experiments"].push_back({{"algo_id", e.algo_id},
                                {"env_id", e.env_id},
                                {"total_timesteps", e.total_timesteps},
                                {"overrides", e.overrides}});
  }
  return j;
}

SweepSpec LoadSweepSpec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read sweep spec " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("sweep spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return SweepSpec::FromJson(j);
}

Json SweepJob::Membership() const {
  return {{"exp_name", exp_name}, {"job_index", index}, {"num_jobs", num_jobs}};
}

Json SweepJob::ToJson() const {
  return {{"index", index},
          {"num_jobs", num_jobs},
          {"exp_name", exp_name},
          {"algo_id", experiment.algo_id},
          {"env_id", experiment.env_id},
          {"total_timesteps", experiment.total_timesteps},
          {"overrides", experiment.overrides},
          {"seed", seed}};
}

SweepJob SweepJob::FromJson(const Json& j) {
  try {
    SweepJob job;
    job.index = j.at("index").get<int>();
    job.num_jobs = j.at("num_jobs").get<int>();
    job.exp_name = j.at("exp_name").get<std::string>();
    job.experiment.algo_id = j.at("algo_id").get<std::string>();
    job.experiment.env_id = j.at("env_id").get<std::string>();
    job.experiment.total_timesteps = j.at("total_timesteps").get<int64_t>();
    job.experiment.overrides = j.at("overrides");
    job.seed = j.at("seed").get<uint64_t>();
    return job;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed job description: ") + e.what());
  }
}

std::vector<SweepJob> ExpandJobs(const SweepSpec& spec) {
  std::vector<SweepJob> jobs;
  const int n = static_cast<int>(spec.experiments.size() * spec.seeds.size());
  for (const SweepExperiment& e : spec.experiments) {
    for (uint64_t seed : spec.seeds) {
      SweepJob job;
      job.index = static_cast<int>(jobs.size());
      job.num_jobs = n;
      job.exp_name = spec.exp_name;
      job.experiment = e;
      job.seed = seed;
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

TrainOutcome RunSweepJob(const SweepJob& job, const fs::path& runs_root, const std::string& run_id,
                         const std::string& invocation) {
  const AlgoInfo& info = FindAlgo(job.experiment.algo_id);
  TrainRequest request;
  request.config =
      BuildConfigJson(info.schema(), job.experiment.algo_id, job.experiment.env_id, job.seed,
                      job.experiment.total_timesteps, job.experiment.overrides);
  request.runs_root = runs_root;
  request.exp_name = job.exp_name;
  request.invocation = invocation;
  request.sweep = job.Membership();
  request.run_id = run_id;
  return RunTraining(request);
}

std::vector<JobResult> RunBench(const SweepSpec& spec, const fs::path& runs_root,
                                const fs::path& worker_exe) {
  const std::vector<SweepJob> jobs = ExpandJobs(spec);
  const fs::path log_dir = runs_root / spec.exp_name / "_logs";
  fs::create_directories(log_dir);

  std::vector<JobResult> results(jobs.size());
  std::vector<std::string> run_ids(jobs.size());
  for (size_t i = 0; i < jobs.size(); ++i) {
    results[i].job = jobs[i];
    std::ostringstream name;
    name << "job-" << std::setw(3) << std::setfill('0') << i << ".log";
    results[i].log_path = log_dir / name.str();
    do {
      run_ids[i] = NewRunId();
    } while (std::find(run_ids.begin(), run_ids.begin() + i, run_ids[i]) != run_ids.begin() + i);
  }

  std::map<pid_t, size_t> running;
  std::vector<int> exit_status(jobs.size(), -1);
  size_t next = 0;
  std::cout.flush();
  std::cerr.flush();

  auto launch = [&](size_t i) {
    const std::string job_json = jobs[i].ToJson().dump();
    const std::string root = runs_root.string();
    const std::string log = results[i].log_path.string();
    const std::string exe = worker_exe.string();
    std::vector<std::string> args = {exe,        "bench-job", "--job-json", job_json,
                                     "--run-id", run_ids[i],  "--runs-dir", root};
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
      const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd >= 0) {
        ::dup2(fd, STDOUT_FILENO);
        ::dup2(fd, STDERR_FILENO);
        ::close(fd);
      }
      std::vector<char*> argv;
      for (std::string& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(exe.c_str(), argv.data());
      std::fprintf(stderr, "error: cannot execute %s: %s\n", exe.c_str(), std::strerror(errno));
      ::_exit(127);
    }
    running[pid] = i;
  };

  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && static_cast<int>(running.size()) < spec.max_parallel) {
      launch(next++);
    }
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("waitpid failed: ") + std::strerror(errno));
    }
    auto it = running.find(pid);
    if (it == running.end()) continue;
    exit_status[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    running.erase(it);
  }

  for (size_t i = 0; i < jobs.size(); ++i) {
    JobResult& r = results[i];
    const fs::path dir = runs_root / spec.exp_name / run_ids[i];
    if (fs::exists(dir / "manifest.json")) r.run_dir = dir;
    bool completed = false;
    if (!r.run_dir.empty()) {
      try {
        const RunData data = ParseRun(r.run_dir);
        completed = data.status.has_value() && data.status->completed;
        std::vector<double> returns;
        for (const MetricEvent& e : EventsForKey(data, kEpisodicReturn)) returns.push_back(e.value);
        r.final_return = TailMean(returns, 100);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
    r.ok = exit_status[i] == 0 && completed;
    if (!r.ok && r.error.empty()) {
      r.error = LastNonEmptyLine(r.log_path);
      if (r.error.rfind("error: ", 0) == 0) r.error.erase(0, 7);
      if (r.error.empty()) r.error = "worker exited with status " + std::to_string(exit_status[i]);
    }
  }
  return results;
}

void PrintBenchSummary(std::ostream& out, const std::vector<JobResult>& results) {
  out << std::left << std::setw(5) << "job" << std::setw(16) << "algo" << std::setw(18) << "env"
      << std::setw(8) << "seed" << std::setw(8) << "status" << "final_return\n";
  for (const JobResult& r : results) {
    out << std::left << std::setw(5) << r.job.index << std::setw(16) << r.job.experiment.algo_id
        << std::setw(18) << r.job.experiment.env_id << std::setw(8) << r.job.seed << std::setw(8)
        << (r.ok ? "ok" : "FAILED");
    if (r.ok) {
      if (std::isnan(r.final_return)) {
        out << "n/a";
      } else {
        out << std::fixed << std::setprecision(2) << r.final_return;
        out.unsetf(std::ios::floatfield);
      }
    } else {
      out << r.error;
    }
    out << "\n";
  }
}

}  // namespace monorl
