// DDPG for continuous-action environments.
//
// Deterministic tanh actor rescaled to the action bounds, one Q critic over
// [obs | action], Gaussian exploration noise, uniform replay and Polyak
// target networks. The actor and targets update every policy_frequency
// steps. Actions are uniform random until learning_starts.
#include <algorithm>
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

ConfigSchema DdpgSchema() {
  return {
      FloatParam("learning_rate", 3e-4, 0, kInf, true),
      IntParam("buffer_size", 100000, 1),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("tau", 0.005, 0, 1, true),
      IntParam("batch_size", 256, 1),
      FloatParam("exploration_noise", 0.1, 0, kInf),
      IntParam("learning_starts", 5000, 0),
      IntParam("policy_frequency", 2, 1),
  };
}

FinalReport TrainDdpg(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kContinuous);
  const double learning_rate = config.Float("learning_rate");
  const int buffer_size = static_cast<int>(config.Int("buffer_size"));
  const double gamma = config.Float("gamma");
  const double tau = config.Float("tau");
  const int batch_size = static_cast<int>(config.Int("batch_size"));
  const double exploration_noise = config.Float("exploration_noise");
  const int64_t learning_starts = config.Int("learning_starts");
  const int64_t policy_frequency = config.Int("policy_frequency");
  const int64_t total = config.total_timesteps;

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng sample_rng = root.Child("minibatch");
  VecEnv envs(config.env_id, 1, config.seed);
  const int obs_dim = envs.observation_dim();
  const ActionSpace& space = envs.action_space();
  const int act_dim = space.n;
  std::vector<float> scale(act_dim), bias(act_dim);
  for (int d = 0; d < act_dim; ++d) {
    scale[d] = static_cast<float>((space.high[d] - space.low[d]) / 2.0);
    bias[d] = static_cast<float>((space.high[d] + space.low[d]) / 2.0);
  }

  Mlp actor(StackSpecs(obs_dim, {256, 256}, act_dim, Activation::kRelu, Activation::kTanh));
  Mlp qf1(StackSpecs(obs_dim + act_dim, {256, 256}, 1, Activation::kRelu));
  InitFanInUniform(actor, init_rng);
  InitFanInUniform(qf1, init_rng);
  Mlp target_actor = actor;
  Mlp qf1_target = qf1;
  const AdamConfig adam{learning_rate, 0.9, 0.999, 1e-8};
  AdamState<float> q_opt(adam), actor_opt(adam);

  // tanh output -> action bounds.
  auto rescale = [&](Matrix m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (int d = 0; d < act_dim; ++d) m(r, d) = m(r, d) * scale[d] + bias[d];
    }
    return m;
  };

  ReplayBuffer rb(buffer_size, obs_dim, act_dim);
  std::vector<double> episode_returns;
  Matrix obs = envs.Reset();
  double actor_loss = 0.0;

  for (int64_t step = 1; step <= total; ++step) {
    MatrixD action(1, act_dim);
    if (step <= learning_starts) {
      for (int d = 0; d < act_dim; ++d) action(0, d) = action_rng.Uniform(space.low[d], space.high[d]);
    } else {
      const Matrix mu = rescale(actor.Predict(obs));
      for (int d = 0; d < act_dim; ++d) {
        const double noisy = mu(0, d) + action_rng.Normal(0.0, scale[d] * exploration_noise);
        action(0, d) = std::clamp(noisy, space.low[d], space.high[d]);
      }
    }
    const Matrix action_f = action.cast<float>();
    VecStep out = envs.StepContinuous(action_f.cast<double>());
    rb.Add({obs.row(0).data(), static_cast<size_t>(obs_dim)},
           {action_f.row(0).data(), static_cast<size_t>(act_dim)}, out.rewards[0],
           {out.final_obs.row(0).data(), static_cast<size_t>(obs_dim)}, out.terminated[0] != 0);
    obs = std::move(out.obs);
    RecordEpisodes(run, step, out.infos, episode_returns);

    if (step <= learning_starts) continue;

    const ReplayBatch batch = rb.Sample(batch_size, sample_rng);
    const Matrix next_actions = rescale(target_actor.Predict(batch.next_obs));
    const Matrix q_next = qf1_target.Predict(ConcatCols(batch.next_obs, next_actions));
    const auto q_fwd = qf1.Forward(ConcatCols(batch.obs, batch.actions));
    Matrix d_q(batch_size, 1);
    double qf1_loss = 0.0;
    for (int k = 0; k < batch_size; ++k) {
      const double y = DdpgTarget(batch.rewards[k], batch.terminateds[k], gamma, q_next(k, 0));
      const double diff = q_fwd.outputs(k, 0) - y;
      qf1_loss += diff * diff;
      d_q(k, 0) = static_cast<float>(2.0 * diff / batch_size);
    }
    qf1_loss /= batch_size;
    auto q_grads = qf1.Backward(q_fwd.cache, d_q).grads;
    AdamStep(qf1, q_grads, q_opt);

    if (step % policy_frequency == 0) {
      // Maximize Q(s, mu(s)): descend on -mean Q with the critic held fixed.
      const auto a_fwd = actor.Forward(batch.obs);
      const Matrix pi = rescale(a_fwd.outputs);
      const auto qpi_fwd = qf1.Forward(ConcatCols(batch.obs, pi));
      actor_loss = -static_cast<double>(qpi_fwd.outputs.cast<double>().mean());
      const Matrix d_qpi = Matrix::Constant(batch_size, 1, -1.0f / batch_size);
      const Matrix d_in = qf1.Backward(qpi_fwd.cache, d_qpi, false).grad_in;
      Matrix d_tanh(batch_size, act_dim);
      for (int k = 0; k < batch_size; ++k) {
        for (int d = 0; d < act_dim; ++d) d_tanh(k, d) = d_in(k, obs_dim + d) * scale[d];
      }
      auto a_grads = actor.Backward(a_fwd.cache, d_tanh).grads;
      AdamStep(actor, a_grads, actor_opt);
      PolyakUpdate(target_actor, actor, tau);
      PolyakUpdate(qf1_target, qf1, tau);
    }

    if (step % 100 == 0) {
      run.Log(step, "losses/qf1_loss", qf1_loss);
      run.Log(step, "losses/actor_loss", actor_loss);
      LogSps(run, step);
    }
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"actor", actor});
  checkpoint.networks.push_back({"qf1", qf1});
  checkpoint.tensors.push_back({"action_scale", scale});
  checkpoint.tensors.push_back({"action_bias", bias});
  return Finish(run, checkpoint, total, std::move(episode_returns));
}

}  // namespace monorl
