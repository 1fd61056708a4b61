// DQN for discrete-action environments.
//
// One environment, a 120-84 relu Q-network, uniform replay, epsilon-greedy
// exploration annealed linearly, MSE TD loss against a hard-synced target
// network. Replay stores the true successor of each transition, so time-limit
// cuts bootstrap and only termination zeroes the target.
#include <cmath>
#include <span>
#include <vector>

#include "common.hpp"
#include "monorl/algorithms/losses.hpp"
#include "monorl/envs/vec_env.hpp"
#include "monorl/memory/buffers.hpp"
#include "monorl/nn/init.hpp"
#include "monorl/nn/optim.hpp"

namespace monorl {

using namespace detail;

ConfigSchema DqnSchema() {
  return {
      FloatParam("learning_rate", 2.5e-4, 0, kInf, true),
      IntParam("buffer_size", 10000, 1),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("tau", 1.0, 0, 1, true),
      IntParam("target_network_frequency", 500, 1),
      IntParam("batch_size", 128, 1),
      FloatParam("start_e", 1.0, 0, 1),
      FloatParam("end_e", 0.05, 0, 1),
      FloatParam("exploration_fraction", 0.5, 0, 1),
      IntParam("learning_starts", 10000, 0),
      IntParam("train_frequency", 10, 1),
  };
}

FinalReport TrainDqn(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kDiscrete);
  const double learning_rate = config.Float("learning_rate");
  const int buffer_size = static_cast<int>(config.Int("buffer_size"));
  const double gamma = config.Float("gamma");
  const double tau = config.Float("tau");
  const int64_t target_frequency = config.Int("target_network_frequency");
  const int batch_size = static_cast<int>(config.Int("batch_size"));
  const double start_e = config.Float("start_e");
  const double end_e = config.Float("end_e");
  const double exploration_fraction = config.Float("exploration_fraction");
  const int64_t learning_starts = config.Int("learning_starts");
  const int64_t train_frequency = config.Int("train_frequency");
  const int64_t total = config.total_timesteps;
  const auto exploration_steps = static_cast<int64_t>(exploration_fraction * total);

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng sample_rng = root.Child("minibatch");
  VecEnv envs(config.env_id, 1, config.seed);
  const int obs_dim = envs.observation_dim();
  const int n_actions = envs.action_space().n;

  Mlp q_network(StackSpecs(obs_dim, {120, 84}, n_actions, Activation::kRelu));
  InitFanInUniform(q_network, init_rng);
  Mlp target_network = q_network;
  AdamState<float> opt(AdamConfig{learning_rate, 0.9, 0.999, 1e-8});

  ReplayBuffer rb(buffer_size, obs_dim, 1);
  std::vector<double> episode_returns;
  Matrix obs = envs.Reset();

  for (int64_t step = 1; step <= total; ++step) {
    const double epsilon = LinearAnneal(start_e, end_e, exploration_steps, step - 1);
    int action;
    if (action_rng.Uniform() < epsilon) {
      action = static_cast<int>(action_rng.Below(n_actions));
    } else {
      const Matrix q = q_network.Predict(obs);
      action = Argmax(std::span<const float>(q.row(0).data(), n_actions));
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
        const Matrix q_next = target_network.Predict(batch.next_obs);
        const auto fwd = q_network.Forward(batch.obs);
        Matrix d_q = Matrix::Zero(batch_size, n_actions);
        double loss = 0.0;
        std::vector<double> next_row(n_actions);
        for (int k = 0; k < batch_size; ++k) {
          for (int a = 0; a < n_actions; ++a) next_row[a] = q_next(k, a);
          const double y = DqnTarget(batch.rewards[k], batch.terminateds[k], gamma, next_row);
          const int a = static_cast<int>(batch.actions(k, 0));
          const double diff = fwd.outputs(k, a) - y;
          loss += diff * diff;
          d_q(k, a) = static_cast<float>(2.0 * diff / batch_size);
        }
        loss /= batch_size;
        auto grads = q_network.Backward(fwd.cache, d_q).grads;
        AdamStep(q_network, grads, opt);
        if (step % 100 == 0) {
          run.Log(step, "losses/qf_loss", loss);
          LogSps(run, step);
        }
      }
      if (step % target_frequency == 0) PolyakUpdate(target_network, q_network, tau);
    }
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"q_network", q_network});
  return Finish(run, checkpoint, total, std::move(episode_returns));
}

}  // namespace monorl
