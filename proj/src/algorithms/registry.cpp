#include <cmath>
#include <limits>

#include "monorl/algorithms/code_versions.hpp"
#include "monorl/algorithms/train.hpp"

namespace monorl {

double TailMean(const std::vector<double>& values, size_t window) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

const std::vector<AlgoInfo>& ListAlgos() {
  static const std::vector<AlgoInfo> algos = {
      {"ppo", "PPO, categorical policy", SpaceKind::kDiscrete, PpoSchema, TrainPpo, "ppo.cpp",
       kCodeVersionPpo},
      {"ppo_continuous", "PPO, diagonal Gaussian policy with obs/reward normalization",
       SpaceKind::kContinuous, PpoContinuousSchema, TrainPpoContinuous, "ppo_continuous.cpp",
       kCodeVersionPpoContinuous},
      {"ppo_masked", "PPO with invalid-action masking", SpaceKind::kDiscreteMasked,
       PpoMaskedSchema, TrainPpoMasked, "ppo_masked.cpp", kCodeVersionPpoMasked},
      {"dqn", "DQN with hard target sync and epsilon-greedy exploration", SpaceKind::kDiscrete,
       DqnSchema, TrainDqn, "dqn.cpp", kCodeVersionDqn},
      {"c51", "Categorical distributional DQN", SpaceKind::kDiscrete, C51Schema, TrainC51,
       "c51.cpp", kCodeVersionC51},
      {"ddpg", "Deep deterministic policy gradient", SpaceKind::kContinuous, DdpgSchema,
       TrainDdpg, "ddpg.cpp", kCodeVersionDdpg},
      {"td3", "Twin delayed DDPG", SpaceKind::kContinuous, Td3Schema, TrainTd3, "td3.cpp",
       kCodeVersionTd3},
      {"sac", "Soft actor-critic with automatic entropy tuning", SpaceKind::kContinuous,
       SacSchema, TrainSac, "sac.cpp", kCodeVersionSac},
  };
  return algos;
}

const AlgoInfo& FindAlgo(std::string_view algo_id) {
  for (const auto& algo : ListAlgos()) {
    if (algo.id == algo_id) return algo;
  }
  std::string known;
  for (const auto& algo : ListAlgos()) known += (known.empty() ? "" : ", ") + algo.id;
  throw ConfigError("unknown algorithm '" + std::string(algo_id) + "' (known: " + known + ")");
}

void CheckCompatible(const AlgoInfo& algo, std::string_view env_id) {
  EnvDescriptor env;
  try {
    env = DescribeEnv(env_id);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (env.action_space.kind != algo.action_space) {
    const char* kind = algo.action_space == SpaceKind::kContinuous       ? "continuous"
                       : algo.action_space == SpaceKind::kDiscreteMasked ? "discrete_masked"
                                                                         : "discrete";
    throw ConfigError(algo.id + " needs a " + kind + " action space, but " + env.id + " has " +
                      env.action_space.Describe());
  }
}

AlgoConfig MakeAlgoConfig(std::string_view algo_id, std::string_view env_id, uint64_t seed,
                          int64_t total_timesteps,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  const AlgoInfo& algo = FindAlgo(algo_id);
  return BuildConfig(algo.schema(), algo.id, std::string(env_id), seed, total_timesteps, overrides);
}

TrainOutcome RunTraining(const TrainRequest& request) {
  const AlgoInfo& algo = FindAlgo(request.config.algo_id);
  ValidateConfig(algo.schema(), request.config);
  CheckCompatible(algo, request.config.env_id);

  RunManifest manifest;
  manifest.run_id = request.run_id;
  manifest.exp_name = request.exp_name;
  manifest.algo_id = algo.id;
  manifest.env_id = request.config.env_id;
  manifest.seed = request.config.seed;
  manifest.config = request.config.ToJson();
  manifest.invocation = request.invocation;
  manifest.code_version = algo.code_version;
  manifest.sweep = request.sweep;
  RunHandle run = RunHandle::Open(request.runs_root, manifest);
  TrainOutcome outcome;
  outcome.run_dir = run.dir();
  try {
    outcome.report = algo.train(request.config, run);
  } catch (...) {
    run.Close(false);
    throw;
  }
  run.Close(true);
  return outcome;
}

}  // namespace monorl
