#include "monorl/envs/vec_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "monorl/error.hpp"

namespace monorl {

VecEnv::VecEnv(const std::string& env_id, int num_envs, uint64_t seed) : env_id_(env_id) {
  if (num_envs < 1) throw std::invalid_argument("VecEnv: num_envs must be >= 1");
  const Rng root(seed);
  for (int i = 0; i < num_envs; ++i) {
    envs_.push_back(MakeEnv(env_id));
    rngs_.push_back(root.Child("env", static_cast<uint64_t>(i)));
  }
  live_lengths_.assign(num_envs, 0);
  observation_dim_ = envs_.front()->observation_dim();
  space_ = envs_.front()->action_space();
}

Matrix VecEnv::Reset() {
  Matrix obs(num_envs(), observation_dim_);
  for (int i = 0; i < num_envs(); ++i) {
    const auto o = envs_[i]->Reset(rngs_[i]);
    obs.row(i) = Eigen::Map<const Vector>(o.data(), observation_dim_).transpose();
    live_lengths_[i] = 0;
  }
  needs_reset_ = false;
  return obs;
}

std::vector<uint8_t> VecEnv::Masks() const {
  std::vector<uint8_t> masks;
  for (const auto& env : envs_) {
    const auto m = env->ActionMask();
    masks.insert(masks.end(), m.begin(), m.end());
  }
  return masks;
}

template <typename StepFn>
VecStep VecEnv::StepAll(StepFn&& step_fn) {
  if (needs_reset_) throw std::logic_error("VecEnv: Reset must be called before stepping");
  const int n = num_envs();
  VecStep out;
  out.obs.resize(n, observation_dim_);
  out.final_obs.resize(n, observation_dim_);
  out.rewards.resize(n);
  out.terminated.resize(n);
  out.truncated.resize(n);
  out.infos.resize(n);
  for (int i = 0; i < n; ++i) {
    EnvStep s = step_fn(*envs_[i], i);
    out.final_obs.row(i) = Eigen::Map<const Vector>(s.obs.data(), observation_dim_).transpose();
    out.rewards[i] = s.reward;
    out.terminated[i] = s.terminated;
    out.truncated[i] = s.truncated;
    out.infos[i] = s.info;
    live_lengths_[i] += 1;
    if (s.done()) {
      const auto first = envs_[i]->Reset(rngs_[i]);
      out.obs.row(i) = Eigen::Map<const Vector>(first.data(), observation_dim_).transpose();
      live_lengths_[i] = 0;
    } else {
      out.obs.row(i) = out.final_obs.row(i);
    }
  }
  if (space_.kind == SpaceKind::kDiscreteMasked) out.masks = Masks();
  return out;
}

VecStep VecEnv::StepDiscrete(std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != num_envs()) {
    throw DimensionError("VecEnv::StepDiscrete actions", num_envs(),
                         static_cast<long>(actions.size()));
  }
  return StepAll([&](Env& env, int i) { return env.StepDiscrete(actions[i]); });
}

VecStep VecEnv::StepContinuous(const MatrixD& actions) {
  if (actions.rows() != num_envs()) {
    throw DimensionError("VecEnv::StepContinuous rows", num_envs(),
                         static_cast<long>(actions.rows()));
  }
  if (actions.cols() != space_.n) {
    throw DimensionError("VecEnv::StepContinuous cols", space_.n,
                         static_cast<long>(actions.cols()));
  }
  return StepAll([&](Env& env, int i) {
    return env.StepContinuous(
        std::span<const double>(actions.row(i).data(), static_cast<size_t>(actions.cols())));
  });
}

RunningMeanVar RmvMerge(const RunningMeanVar& a, const RunningMeanVar& b) {
  if (a.dim() != b.dim()) throw DimensionError("RmvMerge dims", a.dim(), b.dim());
  if (b.count <= 0.0) return a;
  if (a.count <= 0.0) return b;
  const double total = a.count + b.count;
  const VectorD delta = b.mean - a.mean;
  RunningMeanVar out;
  out.count = total;
  out.mean = a.mean + delta * (b.count / total);
  const VectorD m2 = a.var * a.count + b.var * b.count +
                     delta.cwiseProduct(delta) * (a.count * b.count / total);
  out.var = (m2 / total).cwiseMax(0.0);
  return out;
}

RunningMeanVar RmvUpdate(const RunningMeanVar& acc, const MatrixD& batch) {
  if (batch.cols() != acc.dim()) {
    throw DimensionError("RmvUpdate batch columns", acc.dim(), static_cast<long>(batch.cols()));
  }
  if (batch.rows() == 0) return acc;
  RunningMeanVar b;
  b.count = static_cast<double>(batch.rows());
  b.mean = batch.colwise().mean().transpose();
  const MatrixD centered = batch.rowwise() - b.mean.transpose();
  b.var = centered.array().square().colwise().sum().transpose() / b.count;
  return RmvMerge(acc, b);
}

MatrixD NormalizeObs(const RunningMeanVar& acc, const MatrixD& obs) {
  if (obs.cols() != acc.dim()) {
    throw DimensionError("NormalizeObs columns", acc.dim(), static_cast<long>(obs.cols()));
  }
  const VectorD inv_std = (acc.var.array() + kNormEps).sqrt().inverse();
  MatrixD out = (obs.rowwise() - acc.mean.transpose()).array().rowwise() * inv_std.transpose().array();
  return out.cwiseMax(-kNormClip).cwiseMin(kNormClip);
}

std::vector<double> RewardNormalizer::Normalize(std::span<const double> rewards,
                                                std::span<const uint8_t> done) {
  const auto n = returns_.size();
  if (rewards.size() != n || done.size() != n) {
    throw DimensionError("RewardNormalizer sizes", static_cast<long>(n),
                         static_cast<long>(rewards.size()));
  }
  MatrixD batch(static_cast<Eigen::Index>(n), 1);
  for (size_t i = 0; i < n; ++i) {
    returns_[i] = gamma_ * returns_[i] + rewards[i];
    batch(static_cast<Eigen::Index>(i), 0) = returns_[i];
  }
  rmv_ = RmvUpdate(rmv_, batch);
  const double return_std = std::sqrt(rmv_.var[0] + kNormEps);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(rewards[i] / return_std, -kNormClip, kNormClip);
    if (done[i]) returns_[i] = 0.0;
  }
  return out;
}

double NormalizeReward(double gamma, double& return_acc, RunningMeanVar& rmv, double reward) {
  return_acc = gamma * return_acc + reward;
  MatrixD batch(1, 1);
  batch(0, 0) = return_acc;
  rmv = RmvUpdate(rmv, batch);
  return std::clamp(reward / std::sqrt(rmv.var[0] + kNormEps), -kNormClip, kNormClip);
}

}  // namespace monorl
