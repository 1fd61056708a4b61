#include "monorl/memory/buffers.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "monorl/error.hpp"

namespace monorl {

RolloutBuffer::RolloutBuffer(int num_steps, int num_envs, int obs_dim, int act_dim, int mask_dim)
    : num_steps_(num_steps),
      num_envs_(num_envs),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      mask_dim_(mask_dim) {
  if (num_steps < 1 || num_envs < 1 || obs_dim < 1 || act_dim < 1 || mask_dim < 0) {
    throw std::invalid_argument("RolloutBuffer: dimensions must be positive");
  }
  const int n = num_steps * num_envs;
  obs_.resize(n, obs_dim);
  actions_.resize(n, act_dim);
  log_probs_.assign(n, 0.0);
  rewards_.assign(n, 0.0);
  terminateds_.assign(n, 0.0);
  values_.assign(n, 0.0);
  masks_.assign(static_cast<size_t>(n) * mask_dim, 0);
}

void RolloutBuffer::Add(const Matrix& obs, const Matrix& actions, std::span<const double> log_probs,
                        std::span<const double> rewards, std::span<const double> terminateds,
                        std::span<const double> values, std::span<const uint8_t> masks) {
  if (full()) throw std::logic_error("RolloutBuffer::Add: buffer is full");
  const auto n = static_cast<size_t>(num_envs_);
  if (obs.rows() != num_envs_ || obs.cols() != obs_dim_) {
    throw DimensionError("RolloutBuffer::Add obs shape", num_envs_ * obs_dim_,
                         static_cast<long>(obs.size()));
  }
  if (actions.rows() != num_envs_ || actions.cols() != act_dim_) {
    throw DimensionError("RolloutBuffer::Add actions shape", num_envs_ * act_dim_,
                         static_cast<long>(actions.size()));
  }
  for (auto size : {log_probs.size(), rewards.size(), terminateds.size(), values.size()}) {
    if (size != n) throw DimensionError("RolloutBuffer::Add per-env vector", num_envs_, static_cast<long>(size));
  }
  if (masks.size() != n * mask_dim_) {
    throw DimensionError("RolloutBuffer::Add masks", num_envs_ * mask_dim_,
                         static_cast<long>(masks.size()));
  }
  const int base = filled_ * num_envs_;
  obs_.middleRows(base, num_envs_) = obs;
  actions_.middleRows(base, num_envs_) = actions;
  for (size_t i = 0; i < n; ++i) {
    log_probs_[base + i] = log_probs[i];
    rewards_[base + i] = rewards[i];
    terminateds_[base + i] = terminateds[i];
    values_[base + i] = values[i];
  }
  std::copy(masks.begin(), masks.end(), masks_.begin() + static_cast<long>(base) * mask_dim_);
  ++filled_;
}

GaeResult ComputeGae(const RolloutBuffer& rb, std::span<const double> last_values,
                     std::span<const double> last_terminateds, double gamma, double lam) {
  if (!rb.full()) {
    throw std::logic_error("ComputeGae: buffer holds " + std::to_string(rb.filled()) + " of " +
                           std::to_string(rb.num_steps()) + " steps");
  }
  if (gamma < 0 || gamma > 1 || lam < 0 || lam > 1) {
    throw std::invalid_argument("ComputeGae: gamma and lambda must lie in [0, 1]");
  }
  const int T = rb.num_steps();
  const int N = rb.num_envs();
  if (static_cast<int>(last_values.size()) != N || static_cast<int>(last_terminateds.size()) != N) {
    throw DimensionError("ComputeGae last_values", N, static_cast<long>(last_values.size()));
  }
  GaeResult out;
  out.advantages.assign(rb.size(), 0.0);
  out.returns.assign(rb.size(), 0.0);
  for (int i = 0; i < N; ++i) {
    double next_adv = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const double next_value = t == T - 1 ? last_values[i] : rb.value(t + 1, i);
      const double next_nonterminal =
          1.0 - (t == T - 1 ? last_terminateds[i] : rb.terminated(t + 1, i));
      const double delta =
          rb.reward(t, i) + gamma * next_value * next_nonterminal - rb.value(t, i);
      next_adv = delta + gamma * lam * next_nonterminal * next_adv;
      const int k = rb.Index(t, i);
      out.advantages[k] = next_adv;
      out.returns[k] = next_adv + rb.value(t, i);
    }
  }
  return out;
}

std::vector<std::vector<int>> Minibatches(int batch_size, int num_minibatches, Rng& rng) {
  if (num_minibatches < 1 || batch_size < num_minibatches || batch_size % num_minibatches != 0) {
    throw std::invalid_argument("Minibatches: batch of " + std::to_string(batch_size) +
                                " cannot split into " + std::to_string(num_minibatches) +
                                " equal parts");
  }
  std::vector<int> perm(batch_size);
  std::iota(perm.begin(), perm.end(), 0);
  // Fisher-Yates with the project RNG (std::shuffle is not portable).
  for (int i = batch_size - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.Below(static_cast<uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  const int mb = batch_size / num_minibatches;
  std::vector<std::vector<int>> out;
  out.reserve(num_minibatches);
  for (int k = 0; k < num_minibatches; ++k) {
    out.emplace_back(perm.begin() + k * mb, perm.begin() + (k + 1) * mb);
  }
  return out;
}

std::vector<std::vector<int>> Minibatches(const RolloutBuffer& rb, int num_minibatches, Rng& rng) {
  if (!rb.full()) throw std::logic_error("Minibatches: buffer not full");
  return Minibatches(rb.size(), num_minibatches, rng);
}

ReplayBuffer::ReplayBuffer(int capacity, int obs_dim, int act_dim) : capacity_(capacity) {
  if (capacity < 1 || obs_dim < 1 || act_dim < 1) {
    throw std::invalid_argument("ReplayBuffer: dimensions must be positive");
  }
  obs_.resize(capacity, obs_dim);
  next_obs_.resize(capacity, obs_dim);
  actions_.resize(capacity, act_dim);
  rewards_.assign(capacity, 0.0f);
  terminateds_.assign(capacity, 0.0f);
}

void ReplayBuffer::Add(std::span<const float> obs, std::span<const float> action, double reward,
                       std::span<const float> next_obs, bool terminated) {
  if (static_cast<long>(obs.size()) != obs_.cols() ||
      static_cast<long>(next_obs.size()) != obs_.cols()) {
    throw DimensionError("ReplayBuffer::Add obs", static_cast<long>(obs_.cols()),
                         static_cast<long>(obs.size()));
  }
  if (static_cast<long>(action.size()) != actions_.cols()) {
    throw DimensionError("ReplayBuffer::Add action", static_cast<long>(actions_.cols()),
                         static_cast<long>(action.size()));
  }
  obs_.row(cursor_) = Eigen::Map<const Vector>(obs.data(), obs_.cols()).transpose();
  next_obs_.row(cursor_) = Eigen::Map<const Vector>(next_obs.data(), obs_.cols()).transpose();
  actions_.row(cursor_) = Eigen::Map<const Vector>(action.data(), actions_.cols()).transpose();
  rewards_[cursor_] = static_cast<float>(reward);
  terminateds_[cursor_] = terminated ? 1.0f : 0.0f;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++inserts_;
}

ReplayBatch ReplayBuffer::Sample(int batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::Sample: buffer is empty");
  ReplayBatch b;
  b.obs.resize(batch_size, obs_.cols());
  b.next_obs.resize(batch_size, obs_.cols());
  b.actions.resize(batch_size, actions_.cols());
  b.rewards.resize(batch_size);
  b.terminateds.resize(batch_size);
  b.indices.resize(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const int i = static_cast<int>(rng.Below(static_cast<uint64_t>(size_)));
    b.indices[k] = i;
    b.obs.row(k) = obs_.row(i);
    b.next_obs.row(k) = next_obs_.row(i);
    b.actions.row(k) = actions_.row(i);
    b.rewards[k] = rewards_[i];
    b.terminateds[k] = terminateds_[i];
  }
  return b;
}

int ReplayBuffer::SlotOfOldest(int k) const {
  if (k < 0 || k >= size_) throw std::out_of_range("ReplayBuffer::SlotOfOldest");
  const int oldest = size_ < capacity_ ? 0 : cursor_;
  return (oldest + k) % capacity_;
}

}  // namespace monorl
