#ifndef MONORL_ENVS_CLASSIC_HPP_
#define MONORL_ENVS_CLASSIC_HPP_

#include <array>
#include <vector>

#include "monorl/envs/env.hpp"

namespace monorl {

// --- CartPole -------------------------------------------------------------

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double dt = 0.02;
  double x_limit = 2.4;
  double theta_limit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  int max_steps = 500;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  int steps = 0;
};

struct CartPoleTransition {
  CartPoleState state;
  EnvStep step;  // info left empty; the Env wrapper owns episode stats
};

CartPoleState CartPoleReset(Rng& rng);
std::vector<float> CartPoleObservation(const CartPoleState& s);
// Explicit Euler step. Throws std::logic_error if `s` is already past a
// termination bound or at the step limit.
CartPoleTransition CartPoleStep(const CartPoleState& s, int action,
                                const CartPoleParams& p = {});

class CartPoleEnv final : public Env {
 public:
  std::string_view id() const override { return "cartpole-v1"; }
  int observation_dim() const override { return 4; }
  ActionSpace action_space() const override { return {SpaceKind::kDiscrete, 2, {}, {}}; }
  std::vector<float> Reset(Rng& rng) override;
  EnvStep StepDiscrete(int action) override;
  const CartPoleState& state() const { return state_; }
  void set_state(const CartPoleState& s) {
    state_ = s;
    done_ = false;
  }

 private:
  CartPoleState state_;
  EpisodeTracker episode_;
  bool done_ = true;
};

// --- Pendulum -------------------------------------------------------------

struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int max_steps = 200;
};

struct PendulumState {
  double theta = 0.0;      // wrapped to [-pi, pi)
  double theta_dot = 0.0;  // clipped to [-max_speed, max_speed]
  int steps = 0;
};

struct PendulumTransition {
  PendulumState state;
  EnvStep step;
};

// ((x + pi) mod 2 pi) - pi
double WrapAngle(double x);
PendulumState PendulumReset(Rng& rng);
std::vector<float> PendulumObservation(const PendulumState& s);
PendulumTransition PendulumStep(const PendulumState& s, double torque,
                                const PendulumParams& p = {});

class PendulumEnv final : public Env {
 public:
  std::string_view id() const override { return "pendulum-v1"; }
  int observation_dim() const override { return 3; }
  ActionSpace action_space() const override {
    return {SpaceKind::kContinuous, 1, {-2.0}, {2.0}};
  }
  std::vector<float> Reset(Rng& rng) override;
  EnvStep StepContinuous(std::span<const double> action) override;
  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s) {
    state_ = s;
    done_ = false;
  }

 private:
  PendulumState state_;
  EpisodeTracker episode_;
  bool done_ = true;
};

// --- MaskedGrid -----------------------------------------------------------

// 5x5 grid, goal in the bottom-right corner. Actions: 0 up (row - 1),
// 1 down (row + 1), 2 left (col - 1), 3 right (col + 1). Moves that would
// leave the grid are masked out and rejected.
inline constexpr int kGridSize = 5;
inline constexpr int kGridActions = 4;
inline constexpr int kGridMaxSteps = 100;
inline constexpr double kGridStepReward = -0.01;
inline constexpr double kGridGoalReward = 1.0;

struct MaskedGridState {
  int row = 0;
  int col = 0;
  int steps = 0;
  std::array<uint8_t, kGridActions> mask{};
};

struct MaskedGridTransition {
  MaskedGridState state;
  EnvStep step;
};

std::array<uint8_t, kGridActions> GridMask(int row, int col);
MaskedGridState MaskedGridAt(int row, int col);
// Uniform over the 24 non-goal cells.
MaskedGridState MaskedGridReset(Rng& rng);
// One-hot encoding of the agent cell (25 entries).
std::vector<float> MaskedGridObservation(const MaskedGridState& s);
// Throws std::invalid_argument on a masked action.
MaskedGridTransition MaskedGridStep(const MaskedGridState& s, int action);

class MaskedGridEnv final : public Env {
 public:
  std::string_view id() const override { return "maskedgrid-v0"; }
  int observation_dim() const override { return kGridSize * kGridSize; }
  ActionSpace action_space() const override {
    return {SpaceKind::kDiscreteMasked, kGridActions, {}, {}};
  }
  std::vector<float> Reset(Rng& rng) override;
  EnvStep StepDiscrete(int action) override;
  std::vector<uint8_t> ActionMask() const override;
  const MaskedGridState& state() const { return state_; }

 private:
  MaskedGridState state_;
  EpisodeTracker episode_;
  bool done_ = true;
};

}  // namespace monorl

#endif  // MONORL_ENVS_CLASSIC_HPP_
