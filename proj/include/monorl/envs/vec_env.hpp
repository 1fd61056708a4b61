#ifndef MONORL_ENVS_VEC_ENV_HPP_
#define MONORL_ENVS_VEC_ENV_HPP_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "monorl/envs/env.hpp"
#include "monorl/nn/mlp.hpp"
#include "monorl/nn/rng.hpp"

namespace monorl {

struct VecStep {
  // Row i is the observation the agent acts on next: the first observation of
  // a new episode if slot i just finished.
  Matrix obs;
  std::vector<double> rewards;  // raw rewards of this transition
  std::vector<uint8_t> terminated;
  std::vector<uint8_t> truncated;
  std::vector<std::optional<EpisodeInfo>> infos;
  // True successor observation of this transition. Equals obs except in
  // slots that were auto-reset, where it holds the finished episode's last
  // observation.
  Matrix final_obs;
  // num_envs x n legality flags for the next action (masked envs only).
  std::vector<uint8_t> masks;
};

// N synchronized copies of one environment with auto-reset. Slot i draws
// from Rng(seed).Child("env", i) and nothing else.
class VecEnv {
 public:
  VecEnv(const std::string& env_id, int num_envs, uint64_t seed);

  int num_envs() const { return static_cast<int>(envs_.size()); }
  int observation_dim() const { return observation_dim_; }
  const ActionSpace& action_space() const { return space_; }
  const std::string& env_id() const { return env_id_; }

  Matrix Reset();
  VecStep StepDiscrete(std::span<const int> actions);
  // actions: num_envs x dim. Values are passed through unchanged; the
  // environment applies its own bounds.
  VecStep StepContinuous(const MatrixD& actions);

  // Current per-slot masks, flattened num_envs x n.
  std::vector<uint8_t> Masks() const;
  // Steps taken so far in each slot's live episode.
  std::vector<int> LiveEpisodeLengths() const { return live_lengths_; }

 private:
  template <typename StepFn>
  VecStep StepAll(StepFn&& step_fn);

  std::string env_id_;
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<Rng> rngs_;
  std::vector<int> live_lengths_;
  int observation_dim_ = 0;
  ActionSpace space_;
  bool needs_reset_ = true;
};

// Per-dimension running mean/variance, merged with the parallel
// (Chan et al.) update. A fresh accumulator has count 0, mean 0, var 1.
struct RunningMeanVar {
  double count = 0.0;
  VectorD mean;
  VectorD var;

  RunningMeanVar() = default;
  explicit RunningMeanVar(int dim) : mean(VectorD::Zero(dim)), var(VectorD::Ones(dim)) {}

  int dim() const { return static_cast<int>(mean.size()); }
};

// Merge a batch (rows = samples) into acc.
RunningMeanVar RmvUpdate(const RunningMeanVar& acc, const MatrixD& batch);
RunningMeanVar RmvMerge(const RunningMeanVar& a, const RunningMeanVar& b);

inline constexpr double kNormEps = 1e-8;
inline constexpr double kNormClip = 10.0;

// clip((obs - mean) / sqrt(var + 1e-8), -10, 10), row-wise.
MatrixD NormalizeObs(const RunningMeanVar& acc, const MatrixD& obs);

// Discounted-return reward scaling for N parallel streams. Raw rewards are
// never modified in place; callers keep them for episode statistics.
class RewardNormalizer {
 public:
  RewardNormalizer(int num_envs, double gamma)
      : gamma_(gamma), returns_(num_envs, 0.0), rmv_(1) {}

  // R <- gamma R + r; update the running variance of R; emit
  // clip(r / sqrt(var + 1e-8), -10, 10). R resets for slots in `done`.
  std::vector<double> Normalize(std::span<const double> rewards, std::span<const uint8_t> done);

  const RunningMeanVar& stats() const { return rmv_; }

 private:
  double gamma_;
  std::vector<double> returns_;
  RunningMeanVar rmv_;
};

// Single-stream form of the reward path, for callers holding their own state.
double NormalizeReward(double gamma, double& return_acc, RunningMeanVar& rmv, double reward);

}  // namespace monorl

#endif  // MONORL_ENVS_VEC_ENV_HPP_
