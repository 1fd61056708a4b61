#ifndef MONORL_ENVS_ENV_HPP_
#define MONORL_ENVS_ENV_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monorl/nn/rng.hpp"

namespace monorl {

enum class SpaceKind { kDiscrete, kContinuous, kDiscreteMasked };

struct ActionSpace {
  SpaceKind kind = SpaceKind::kDiscrete;
  int n = 0;                 // action count (discrete) or dimension (continuous)
  std::vector<double> low;   // continuous only
  std::vector<double> high;  // continuous only

  bool discrete() const { return kind != SpaceKind::kContinuous; }
  // {"discrete": n} | {"continuous": dim, "low": [...], "high": [...]} |
  // {"discrete_masked": n}
  std::string Describe() const;
};

// Summary emitted on the step that ends an episode. episodic_return is the
// sum of raw rewards.
struct EpisodeInfo {
  double episodic_return = 0.0;
  int episodic_length = 0;
};

struct EnvStep {
  std::vector<float> obs;
  double reward = 0.0;
  bool terminated = false;  // MDP terminal; the only flag that stops bootstrapping
  bool truncated = false;   // time limit
  std::optional<EpisodeInfo> info;

  bool done() const { return terminated || truncated; }
};

// A single stateful environment instance. Implementations keep their own
// episode accumulators and fill EnvStep::info when an episode ends. Stepping
// a finished episode without Reset is an error.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string_view id() const = 0;
  virtual int observation_dim() const = 0;
  virtual ActionSpace action_space() const = 0;

  virtual std::vector<float> Reset(Rng& rng) = 0;
  virtual EnvStep StepDiscrete(int action);
  virtual EnvStep StepContinuous(std::span<const double> action);
  // Legal actions for the current state (all true unless masked).
  virtual std::vector<uint8_t> ActionMask() const;
};

struct EnvDescriptor {
  std::string id;
  int observation_dim = 0;
  ActionSpace action_space;
};

// Registry: "cartpole-v1", "pendulum-v1", "maskedgrid-v0".
std::unique_ptr<Env> MakeEnv(std::string_view id);
std::vector<EnvDescriptor> ListEnvs();
EnvDescriptor DescribeEnv(std::string_view id);

// Episode bookkeeping shared by the built-in environments.
class EpisodeTracker {
 public:
  void Reset() {
    return_ = 0.0;
    length_ = 0;
  }
  std::optional<EpisodeInfo> Record(double reward, bool done) {
    return_ += reward;
    length_ += 1;
    if (!done) return std::nullopt;
    return EpisodeInfo{return_, length_};
  }
  int length() const { return length_; }

 private:
  double return_ = 0.0;
  int length_ = 0;
};

}  // namespace monorl

#endif  // MONORL_ENVS_ENV_HPP_
