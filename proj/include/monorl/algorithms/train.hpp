#ifndef MONORL_ALGORITHMS_TRAIN_HPP_
#define MONORL_ALGORITHMS_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "monorl/algorithms/config.hpp"
#include "monorl/envs/env.hpp"
#include "monorl/tracking/checkpoint.hpp"
#include "monorl/tracking/run.hpp"

namespace monorl {

struct FinalReport {
  std::filesystem::path checkpoint_dir;
  int64_t env_steps = 0;
  std::vector<double> episode_returns;  // completion order
  // Mean of the last (up to) 100 episode returns; NaN if no episode finished.
  double final_mean_return = 0.0;
};

// Mean of the last `window` entries (all if fewer); NaN when empty.
double TailMean(const std::vector<double>& values, size_t window);

using TrainFn = FinalReport (*)(const AlgoConfig&, RunHandle&);

struct AlgoInfo {
  std::string id;
  std::string description;
  SpaceKind action_space;  // the only kind the algorithm accepts
  ConfigSchema (*schema)();
  TrainFn train;
  std::string source_file;   // e.g. "ppo.cpp"
  std::string code_version;  // "sha256:<hex>" of that file
};

const std::vector<AlgoInfo>& ListAlgos();
// Throws ConfigError listing the known ids.
const AlgoInfo& FindAlgo(std::string_view algo_id);
// Throws ConfigError when env_id is unknown or its action space differs
// from what the algorithm needs.
void CheckCompatible(const AlgoInfo& algo, std::string_view env_id);

AlgoConfig MakeAlgoConfig(std::string_view algo_id, std::string_view env_id, uint64_t seed,
                          int64_t total_timesteps,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

struct TrainRequest {
  AlgoConfig config;
  std::filesystem::path runs_root;
  std::string exp_name;
  std::string invocation;
  Json sweep = nullptr;
  std::string run_id;  // empty: generated
};

struct TrainOutcome {
  std::filesystem::path run_dir;
  FinalReport report;
};

// Validates, checks env compatibility, opens the run, trains and closes it.
// Configuration problems throw before the run directory is created. If
// training throws, the run is closed with completed = false and the error
// is rethrown.
TrainOutcome RunTraining(const TrainRequest& request);

// ---- Per-algorithm entry points (one source file each) ----

ConfigSchema PpoSchema();
FinalReport TrainPpo(const AlgoConfig& config, RunHandle& run);
ConfigSchema PpoContinuousSchema();
FinalReport TrainPpoContinuous(const AlgoConfig& config, RunHandle& run);
ConfigSchema PpoMaskedSchema();
FinalReport TrainPpoMasked(const AlgoConfig& config, RunHandle& run);
ConfigSchema DqnSchema();
FinalReport TrainDqn(const AlgoConfig& config, RunHandle& run);
ConfigSchema C51Schema();
FinalReport TrainC51(const AlgoConfig& config, RunHandle& run);
ConfigSchema DdpgSchema();
FinalReport TrainDdpg(const AlgoConfig& config, RunHandle& run);
ConfigSchema Td3Schema();
FinalReport TrainTd3(const AlgoConfig& config, RunHandle& run);
ConfigSchema SacSchema();
FinalReport TrainSac(const AlgoConfig& config, RunHandle& run);

// Name of the per-step trajectory log ppo_masked writes into its run
// directory: CSV with header "step,env,cell,mask,action", where mask is the
// legality bit string observed before acting.
inline constexpr const char* kTrajectoryLog = "trajectories.csv";

}  // namespace monorl

#endif  // MONORL_ALGORITHMS_TRAIN_HPP_
