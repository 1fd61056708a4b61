// C51: categorical distributional DQN for discrete-action environments.
//
// The network outputs n_actions x n_atoms logits; a softmax per action gives
// the return distribution over a fixed support. The target distribution of
// the greedy next action (by expected value under the target network) is
// projected onto the support, and the online distribution is fitted to it
// with cross-entropy. Exploration, replay and target sync follow dqn.
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "common.hpp"
#include "monorl/algorithms/losses.hpp"
#include "monorl/envs/vec_env.hpp"
#include "monorl/memory/buffers.hpp"
#include "monorl/nn/distributions.hpp"
#include "monorl/nn/init.hpp"
#include "monorl/nn/optim.hpp"

namespace monorl {

using namespace detail;

ConfigSchema C51Schema() {
  return {
      FloatParam("learning_rate", 2.5e-4, 0, kInf, true),
      IntParam("buffer_size", 10000, 1),
      FloatParam("gamma", 0.99, 0, 1),
      IntParam("target_network_frequency", 500, 1),
      IntParam("batch_size", 128, 1),
      FloatParam("start_e", 1.0, 0, 1),
      FloatParam("end_e", 0.05, 0, 1),
      FloatParam("exploration_fraction", 0.5, 0, 1),
      IntParam("learning_starts", 10000, 0),
      IntParam("train_frequency", 10, 1),
      IntParam("n_atoms", 101, 2),
      FloatParam("v_min", -100.0, -kInf, kInf),
      FloatParam("v_max", 100.0, -kInf, kInf),
  };
}

namespace {

constexpr double kProbClampLow = 1e-5;
constexpr double kProbClampHigh = 1.0 - 1e-5;

// Per-action softmax distributions of one output row.
std::vector<Categorical> RowDistributions(const Matrix& logits, int row, int n_actions,
                                          int n_atoms) {
  std::vector<Categorical> dists;
  dists.reserve(n_actions);
  for (int a = 0; a < n_actions; ++a) {
    dists.emplace_back(
        std::span<const float>(logits.row(row).data() + a * n_atoms, static_cast<size_t>(n_atoms)));
  }
  return dists;
}

int GreedyAction(const C51Support& support, const std::vector<Categorical>& dists) {
  std::vector<double> q(dists.size());
  for (size_t a = 0; a < dists.size(); ++a) q[a] = C51Expectation(support, dists[a].probs());
  return Argmax(q);
}

}  // namespace

FinalReport TrainC51(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kDiscrete);
  const double learning_rate = config.Float("learning_rate");
  const int buffer_size = static_cast<int>(config.Int("buffer_size"));
  const double gamma = config.Float("gamma");
  const int64_t target_frequency = config.Int("target_network_frequency");
  const int batch_size = static_cast<int>(config.Int("batch_size"));
  const double start_e = config.Float("start_e");
  const double end_e = config.Float("end_e");
  const double exploration_fraction = config.Float("exploration_fraction");
  const int64_t learning_starts = config.Int("learning_starts");
  const int64_t train_frequency = config.Int("train_frequency");
  const int n_atoms = static_cast<int>(config.Int("n_atoms"));
  const double v_min = config.Float("v_min");
  const double v_max = config.Float("v_max");
  if (!(v_min < v_max)) throw ConfigError("c51 needs v_min < v_max");
  const int64_t total = config.total_timesteps;
  const auto exploration_steps = static_cast<int64_t>(exploration_fraction * total);

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng sample_rng = root.Child("minibatch");
  VecEnv envs(config.env_id, 1, config.seed);
  const int obs_dim = envs.observation_dim();
  const int n_actions = envs.action_space().n;
  const C51Support support(v_min, v_max, n_atoms);

  Mlp q_network(StackSpecs(obs_dim, {120, 84}, n_actions * n_atoms, Activation::kRelu));
  InitFanInUniform(q_network, init_rng);
  Mlp target_network = q_network;
  AdamState<float> opt(AdamConfig{learning_rate, 0.9, 0.999, 0.01 / batch_size});

  ReplayBuffer rb(buffer_size, obs_dim, 1);
  std::vector<double> episode_returns;
  Matrix obs = envs.Reset();

  for (int64_t step = 1; step <= total; ++step) {
    const double epsilon = LinearAnneal(start_e, end_e, exploration_steps, step - 1);
    int action;
    if (action_rng.Uniform() < epsilon) {
      action = static_cast<int>(action_rng.Below(n_actions));
    } else {
      const Matrix logits = q_network.Predict(obs);
      action = GreedyAction(support, RowDistributions(logits, 0, n_actions, n_atoms));
    }

    const int actions[1] = {action};
    VecStep out = envs.StepDiscrete(actions);
    const float action_f = static_cast<float>(action);
    rb.Add({obs.row(0).data(), static_cast<size_t>(obs_dim)}, {&action_f, 1}, out.rewards[0],
           {out.final_obs.row(0).data(), static_cast<size_t>(obs_dim)}, out.terminated[0] != 0);
    obs = std::move(out.obs);
    RecordEpisodes(run, step, out.infos, episode_returns);

    if (step > learning_starts) {
      if (step % train_frequency == 0) {
        const ReplayBatch batch = rb.Sample(batch_size, sample_rng);
        const Matrix next_logits = target_network.Predict(batch.next_obs);
        const auto fwd = q_network.Forward(batch.obs);
        Matrix d_logits = Matrix::Zero(batch_size, n_actions * n_atoms);
        double loss = 0.0;
        std::vector<double> g(n_atoms);
        for (int k = 0; k < batch_size; ++k) {
          const auto next_dists = RowDistributions(next_logits, k, n_actions, n_atoms);
          const int next_action = GreedyAction(support, next_dists);
          const std::vector<double> target = C51Project(
              support, next_dists[next_action].probs(), batch.rewards[k], batch.terminateds[k], gamma);

          const int a = static_cast<int>(batch.actions(k, 0));
          const Categorical dist(std::span<const float>(
              fwd.outputs.row(k).data() + a * n_atoms, static_cast<size_t>(n_atoms)));
          const auto& p = dist.probs();
          // Cross-entropy on clamped probabilities; the clamp passes no
          // gradient outside its range.
          double pg = 0.0;
          for (int i = 0; i < n_atoms; ++i) {
            const double clamped = std::clamp(p[i], kProbClampLow, kProbClampHigh);
            loss -= target[i] * std::log(clamped);
            g[i] = clamped == p[i] ? -target[i] / p[i] : 0.0;
            pg += p[i] * g[i];
          }
          for (int i = 0; i < n_atoms; ++i) {
            d_logits(k, a * n_atoms + i) = static_cast<float>(p[i] * (g[i] - pg) / batch_size);
          }
        }
        loss /= batch_size;
        auto grads = q_network.Backward(fwd.cache, d_logits).grads;
        AdamStep(q_network, grads, opt);
        if (step % 100 == 0) {
          run.Log(step, "losses/qf_loss", loss);
          LogSps(run, step);
        }
      }
      if (step % target_frequency == 0) target_network = q_network;
    }
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"q_network", q_network});
  return Finish(run, checkpoint, total, std::move(episode_returns));
}

}  // namespace monorl
