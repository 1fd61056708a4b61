#ifndef MONORL_MEMORY_BUFFERS_HPP_
#define MONORL_MEMORY_BUFFERS_HPP_

#include <span>
#include <vector>

#include "monorl/nn/mlp.hpp"
#include "monorl/nn/rng.hpp"

namespace monorl {

// On-policy storage for num_steps x num_envs transitions. Rows are flattened
// step-major: row = t * num_envs + env.
//
// terminateds[t][i] follows the "done attached to the observation"
// convention: it is 1 when obs[t][i] is the first observation after a
// terminal transition, so the transition (t-1 -> t) must not bootstrap.
class RolloutBuffer {
 public:
  RolloutBuffer(int num_steps, int num_envs, int obs_dim, int act_dim, int mask_dim = 0);

  // Appends one step for all envs. actions: num_envs x act_dim (discrete
  // actions stored as their index). masks: num_envs x mask_dim flattened.
  void Add(const Matrix& obs, const Matrix& actions, std::span<const double> log_probs,
           std::span<const double> rewards, std::span<const double> terminateds,
           std::span<const double> values, std::span<const uint8_t> masks = {});
  void Clear() { filled_ = 0; }

  int num_steps() const { return num_steps_; }
  int num_envs() const { return num_envs_; }
  int filled() const { return filled_; }
  bool full() const { return filled_ == num_steps_; }
  int size() const { return num_steps_ * num_envs_; }
  int mask_dim() const { return mask_dim_; }

  const Matrix& obs() const { return obs_; }
  const Matrix& actions() const { return actions_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<double>& terminateds() const { return terminateds_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<uint8_t>& masks() const { return masks_; }

  double reward(int t, int env) const { return rewards_[Index(t, env)]; }
  double value(int t, int env) const { return values_[Index(t, env)]; }
  double terminated(int t, int env) const { return terminateds_[Index(t, env)]; }
  int Index(int t, int env) const { return t * num_envs_ + env; }

 private:
  int num_steps_;
  int num_envs_;
  int obs_dim_;
  int act_dim_;
  int mask_dim_;
  int filled_ = 0;
  Matrix obs_;
  Matrix actions_;
  std::vector<double> log_probs_, rewards_, terminateds_, values_;
  std::vector<uint8_t> masks_;
};

struct GaeResult {
  std::vector<double> advantages;  // flattened like the buffer
  std::vector<double> returns;     // advantages + values
};

// Backward GAE recursion:
//   delta_t = r_t + gamma V_{t+1} (1 - term_{t+1}) - V_t
//   A_t     = delta_t + gamma lam (1 - term_{t+1}) A_{t+1}
// with V_T, term_T taken from last_values / last_terminateds.
// Throws std::logic_error if the buffer is not full.
GaeResult ComputeGae(const RolloutBuffer& rb, std::span<const double> last_values,
                     std::span<const double> last_terminateds, double gamma, double lam);

// One epoch of minibatches: a fresh permutation of the rb.size() flat
// indices cut into num_minibatches equal parts.
std::vector<std::vector<int>> Minibatches(const RolloutBuffer& rb, int num_minibatches, Rng& rng);
std::vector<std::vector<int>> Minibatches(int batch_size, int num_minibatches, Rng& rng);

struct ReplayBatch {
  Matrix obs;
  Matrix actions;
  Matrix next_obs;
  std::vector<float> rewards;
  std::vector<float> terminateds;
  std::vector<int> indices;  // ring slots the rows came from
};

// Fixed-capacity FIFO ring of transitions. Observations are stored raw.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int obs_dim, int act_dim);

  // next_obs must be the true successor, not an auto-reset observation.
  void Add(std::span<const float> obs, std::span<const float> action, double reward,
           std::span<const float> next_obs, bool terminated);
  // Uniform with replacement over the current contents.
  ReplayBatch Sample(int batch_size, Rng& rng) const;

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  long inserts() const { return inserts_; }
  // Ring slot of the k-th oldest stored transition (k < size()).
  int SlotOfOldest(int k) const;
  std::span<const float> obs_at(int slot) const {
    return {obs_.row(slot).data(), static_cast<size_t>(obs_.cols())};
  }
  std::span<const float> action_at(int slot) const {
    return {actions_.row(slot).data(), static_cast<size_t>(actions_.cols())};
  }
  float reward_at(int slot) const { return rewards_[slot]; }

 private:
  int capacity_;
  int size_ = 0;
  int cursor_ = 0;
  long inserts_ = 0;
  Matrix obs_, actions_, next_obs_;
  std::vector<float> rewards_, terminateds_;
};

}  // namespace monorl

#endif  // MONORL_MEMORY_BUFFERS_HPP_
