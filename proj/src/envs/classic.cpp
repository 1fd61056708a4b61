#include "monorl/envs/classic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace monorl {

// --- CartPole -------------------------------------------------------------

CartPoleState CartPoleReset(Rng& rng) {
  CartPoleState s;
  s.x = rng.Uniform(-0.05, 0.05);
  s.x_dot = rng.Uniform(-0.05, 0.05);
  s.theta = rng.Uniform(-0.05, 0.05);
  s.theta_dot = rng.Uniform(-0.05, 0.05);
  return s;
}

std::vector<float> CartPoleObservation(const CartPoleState& s) {
  return {static_cast<float>(s.x), static_cast<float>(s.x_dot), static_cast<float>(s.theta),
          static_cast<float>(s.theta_dot)};
}

CartPoleTransition CartPoleStep(const CartPoleState& s, int action, const CartPoleParams& p) {
  if (action != 0 && action != 1) {
    throw std::invalid_argument("cartpole: action must be 0 or 1, got " + std::to_string(action));
  }
  if (std::abs(s.x) > p.x_limit || std::abs(s.theta) > p.theta_limit || s.steps >= p.max_steps) {
    throw std::logic_error("cartpole: stepping a finished episode");
  }
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_mass_length = p.pole_mass * p.half_length;
  const double force = action == 1 ? p.force : -p.force;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  CartPoleTransition t;
  t.state.x = s.x + p.dt * s.x_dot;
  t.state.x_dot = s.x_dot + p.dt * x_acc;
  t.state.theta = s.theta + p.dt * s.theta_dot;
  t.state.theta_dot = s.theta_dot + p.dt * theta_acc;
  t.state.steps = s.steps + 1;

  t.step.obs = CartPoleObservation(t.state);
  t.step.reward = 1.0;
  t.step.terminated =
      std::abs(t.state.x) > p.x_limit || std::abs(t.state.theta) > p.theta_limit;
  t.step.truncated = !t.step.terminated && t.state.steps >= p.max_steps;
  return t;
}

std::vector<float> CartPoleEnv::Reset(Rng& rng) {
  state_ = CartPoleReset(rng);
  episode_.Reset();
  done_ = false;
  return CartPoleObservation(state_);
}

EnvStep CartPoleEnv::StepDiscrete(int action) {
  if (done_) throw std::logic_error("cartpole: Reset required before stepping");
  auto t = CartPoleStep(state_, action);
  state_ = t.state;
  done_ = t.step.done();
  t.step.info = episode_.Record(t.step.reward, done_);
  return std::move(t.step);
}

// --- Pendulum -------------------------------------------------------------

double WrapAngle(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(x + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  return r - std::numbers::pi;
}

PendulumState PendulumReset(Rng& rng) {
  PendulumState s;
  s.theta = WrapAngle(rng.Uniform(-std::numbers::pi, std::numbers::pi));
  s.theta_dot = rng.Uniform(-1.0, 1.0);
  return s;
}

std::vector<float> PendulumObservation(const PendulumState& s) {
  return {static_cast<float>(std::cos(s.theta)), static_cast<float>(std::sin(s.theta)),
          static_cast<float>(s.theta_dot)};
}

PendulumTransition PendulumStep(const PendulumState& s, double torque, const PendulumParams& p) {
  if (!std::isfinite(torque)) throw std::invalid_argument("pendulum: non-finite torque");
  const double u = std::clamp(torque, -p.max_torque, p.max_torque);
  const double th = WrapAngle(s.theta);
  const double cost = th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * u * u;

  double theta_dot = s.theta_dot + (3.0 * p.gravity / (2.0 * p.length) * std::sin(s.theta) +
                                    3.0 / (p.mass * p.length * p.length) * u) *
                                       p.dt;
  theta_dot = std::clamp(theta_dot, -p.max_speed, p.max_speed);

  PendulumTransition t;
  t.state.theta = WrapAngle(s.theta + theta_dot * p.dt);
  t.state.theta_dot = theta_dot;
  t.state.steps = s.steps + 1;
  t.step.obs = PendulumObservation(t.state);
  t.step.reward = -cost;
  t.step.terminated = false;
  t.step.truncated = t.state.steps >= p.max_steps;
  return t;
}

std::vector<float> PendulumEnv::Reset(Rng& rng) {
  state_ = PendulumReset(rng);
  episode_.Reset();
  done_ = false;
  return PendulumObservation(state_);
}

EnvStep PendulumEnv::StepContinuous(std::span<const double> action) {
  if (done_) throw std::logic_error("pendulum: Reset required before stepping");
  if (action.size() != 1) {
    throw std::invalid_argument("pendulum: action must have 1 entry, got " +
                                std::to_string(action.size()));
  }
  auto t = PendulumStep(state_, action[0]);
  state_ = t.state;
  done_ = t.step.done();
  t.step.info = episode_.Record(t.step.reward, done_);
  return std::move(t.step);
}

// --- MaskedGrid -----------------------------------------------------------

namespace {
constexpr int kRowDelta[kGridActions] = {-1, 1, 0, 0};
constexpr int kColDelta[kGridActions] = {0, 0, -1, 1};
constexpr int kGoalRow = kGridSize - 1;
constexpr int kGoalCol = kGridSize - 1;

bool OnGrid(int row, int col) { return row >= 0 && row < kGridSize && col >= 0 && col < kGridSize; }
}  // namespace

std::array<uint8_t, kGridActions> GridMask(int row, int col) {
  std::array<uint8_t, kGridActions> mask{};
  for (int a = 0; a < kGridActions; ++a) {
    mask[a] = OnGrid(row + kRowDelta[a], col + kColDelta[a]) ? 1 : 0;
  }
  return mask;
}

MaskedGridState MaskedGridAt(int row, int col) {
  if (!OnGrid(row, col)) throw std::invalid_argument("maskedgrid: cell off grid");
  MaskedGridState s;
  s.row = row;
  s.col = col;
  s.mask = GridMask(row, col);
  return s;
}

MaskedGridState MaskedGridReset(Rng& rng) {
  const int cell = static_cast<int>(rng.Below(kGridSize * kGridSize - 1));
  return MaskedGridAt(cell / kGridSize, cell % kGridSize);
}

std::vector<float> MaskedGridObservation(const MaskedGridState& s) {
  std::vector<float> obs(kGridSize * kGridSize, 0.0f);
  obs[s.row * kGridSize + s.col] = 1.0f;
  return obs;
}

MaskedGridTransition MaskedGridStep(const MaskedGridState& s, int action) {
  if (action < 0 || action >= kGridActions) {
    throw std::invalid_argument("maskedgrid: action out of range: " + std::to_string(action));
  }
  if (!s.mask[action]) {
    throw std::invalid_argument("maskedgrid: illegal action " + std::to_string(action) +
                                " at (" + std::to_string(s.row) + "," + std::to_string(s.col) +
                                ")");
  }
  MaskedGridTransition t;
  t.state = MaskedGridAt(s.row + kRowDelta[action], s.col + kColDelta[action]);
  t.state.steps = s.steps + 1;
  const bool at_goal = t.state.row == kGoalRow && t.state.col == kGoalCol;
  t.step.obs = MaskedGridObservation(t.state);
  t.step.reward = kGridStepReward + (at_goal ? kGridGoalReward : 0.0);
  t.step.terminated = at_goal;
  t.step.truncated = !at_goal && t.state.steps >= kGridMaxSteps;
  return t;
}

std::vector<float> MaskedGridEnv::Reset(Rng& rng) {
  state_ = MaskedGridReset(rng);
  episode_.Reset();
  done_ = false;
  return MaskedGridObservation(state_);
}

EnvStep MaskedGridEnv::StepDiscrete(int action) {
  if (done_) throw std::logic_error("maskedgrid: Reset required before stepping");
  auto t = MaskedGridStep(state_, action);
  state_ = t.state;
  done_ = t.step.done();
  t.step.info = episode_.Record(t.step.reward, done_);
  return std::move(t.step);
}

std::vector<uint8_t> MaskedGridEnv::ActionMask() const {
  return {state_.mask.begin(), state_.mask.end()};
}

}  // namespace monorl
