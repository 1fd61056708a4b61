// Small helpers shared by the training files. Anything algorithmic stays in
// the individual files.
#ifndef MONORL_SRC_ALGORITHMS_COMMON_HPP_
#define MONORL_SRC_ALGORITHMS_COMMON_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "monorl/algorithms/train.hpp"
#include "monorl/envs/env.hpp"
#include "monorl/nn/mlp.hpp"
#include "monorl/tracking/run.hpp"

namespace monorl::detail {

inline ParamSpec FloatParam(std::string name, double value, double min, double max,
                            bool min_open = false, bool max_open = false) {
  ParamSpec p;
  p.name = std::move(name);
  p.type = ParamType::kFloat;
  p.default_value = value;
  p.min = min;
  p.max = max;
  p.min_open = min_open;
  p.max_open = max_open;
  return p;
}

inline ParamSpec IntParam(std::string name, int64_t value, double min, double max = 1e300) {
  ParamSpec p;
  p.name = std::move(name);
  p.type = ParamType::kInt;
  p.default_value = value;
  p.min = min;
  p.max = max;
  return p;
}

inline ParamSpec BoolParam(std::string name, bool value) {
  ParamSpec p;
  p.name = std::move(name);
  p.type = ParamType::kBool;
  p.default_value = value;
  return p;
}

inline constexpr double kInf = 1e300;

// Throws ConfigError when the env's action space is not `kind`.
inline void RequireActionSpace(const AlgoConfig& config, SpaceKind kind) {
  CheckCompatible(FindAlgo(config.algo_id), config.env_id);
  if (DescribeEnv(config.env_id).action_space.kind != kind) {
    throw ConfigError(config.algo_id + " cannot run on " + config.env_id);
  }
}

inline void RecordEpisodes(RunHandle& run, int64_t step,
                           const std::vector<std::optional<EpisodeInfo>>& infos,
                           std::vector<double>& returns) {
  for (const auto& info : infos) {
    if (!info) continue;
    run.Log(step, kEpisodicReturn, info->episodic_return);
    run.Log(step, kEpisodicLength, info->episodic_length);
    returns.push_back(info->episodic_return);
  }
}

inline void LogSps(RunHandle& run, int64_t step) {
  const double elapsed = run.ElapsedSeconds();
  run.Log(step, kSps, elapsed > 0 ? std::floor(static_cast<double>(step) / elapsed) : 0.0);
}

inline FinalReport Finish(RunHandle& run, const Checkpoint& checkpoint, int64_t env_steps,
                          std::vector<double> returns) {
  FinalReport report;
  report.checkpoint_dir = run.model_dir();
  SaveCheckpoint(report.checkpoint_dir, checkpoint);
  report.env_steps = env_steps;
  report.final_mean_return = TailMean(returns, 100);
  report.episode_returns = std::move(returns);
  return report;
}

// [a | b] column concatenation of equal-height batches.
inline Matrix ConcatCols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

inline Matrix RowsOf(const Matrix& source, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  return out;
}

}  // namespace monorl::detail

#endif  // MONORL_SRC_ALGORITHMS_COMMON_HPP_
