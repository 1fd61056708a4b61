// TD3 for continuous-action environments.
//
// DDPG with twin critics (the target takes their minimum), target policy
// smoothing with clipped Gaussian noise, and delayed actor and target
// updates every policy_frequency steps. Actions are uniform random until
// learning_starts.
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

ConfigSchema Td3Schema() {
  return {
      FloatParam("learning_rate", 3e-4, 0, kInf, true),
      IntParam("buffer_size", 100000, 1),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("tau", 0.005, 0, 1, true),
      IntParam("batch_size", 256, 1),
      FloatParam("exploration_noise", 0.1, 0, kInf),
      IntParam("learning_starts", 5000, 0),
      IntParam("policy_frequency", 2, 1),
      FloatParam("policy_noise", 0.2, 0, kInf),
      FloatParam("noise_clip", 0.5, 0, kInf),
  };
}

FinalReport TrainTd3(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kContinuous);
  const double learning_rate = config.Float("learning_rate");
  const int buffer_size = static_cast<int>(config.Int("buffer_size"));
  const double gamma = config.Float("gamma");
  const double tau = config.Float("tau");
  const int batch_size = static_cast<int>(config.Int("batch_size"));
  const double exploration_noise = config.Float("exploration_noise");
  const int64_t learning_starts = config.Int("learning_starts");
  const int64_t policy_frequency = config.Int("policy_frequency");
  const double policy_noise = config.Float("policy_noise");
  const double noise_clip = config.Float("noise_clip");
  const int64_t total = config.total_timesteps;

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng sample_rng = root.Child("minibatch");
  Rng smoothing_rng = root.Child("target_noise");
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
  Mlp qf2(StackSpecs(obs_dim + act_dim, {256, 256}, 1, Activation::kRelu));
  InitFanInUniform(actor, init_rng);
  InitFanInUniform(qf1, init_rng);
  InitFanInUniform(qf2, init_rng);
  Mlp target_actor = actor;
  Mlp qf1_target = qf1;
  Mlp qf2_target = qf2;
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
    // Smoothing in the actor's unit (tanh) space, where policy_noise and
    // noise_clip are specified; the bounds map to [-1, 1].
    const Matrix mu_next = target_actor.Predict(batch.next_obs);
    Matrix next_unit(batch_size, act_dim);
    const std::vector<double> unit_low(act_dim, -1.0), unit_high(act_dim, 1.0);
    std::vector<double> mu(act_dim), noise(act_dim);
    for (int k = 0; k < batch_size; ++k) {
      for (int d = 0; d < act_dim; ++d) {
        mu[d] = mu_next(k, d);
        noise[d] = smoothing_rng.Normal() * policy_noise;
      }
      const std::vector<double> a = Td3SmoothedAction(mu, noise, noise_clip, unit_low, unit_high);
      for (int d = 0; d < act_dim; ++d) next_unit(k, d) = static_cast<float>(a[d]);
    }
    const Matrix next_actions = rescale(next_unit);
    const Matrix next_in = ConcatCols(batch.next_obs, next_actions);
    const Matrix q1_next = qf1_target.Predict(next_in);
    const Matrix q2_next = qf2_target.Predict(next_in);
    const Matrix q_in = ConcatCols(batch.obs, batch.actions);
    const auto q1_fwd = qf1.Forward(q_in);
    const auto q2_fwd = qf2.Forward(q_in);
    Matrix d_q1(batch_size, 1), d_q2(batch_size, 1);
    double qf1_loss = 0.0, qf2_loss = 0.0;
    for (int k = 0; k < batch_size; ++k) {
      const double y =
          Td3Target(batch.rewards[k], batch.terminateds[k], gamma, q1_next(k, 0), q2_next(k, 0));
      const double diff1 = q1_fwd.outputs(k, 0) - y;
      const double diff2 = q2_fwd.outputs(k, 0) - y;
      qf1_loss += diff1 * diff1;
      qf2_loss += diff2 * diff2;
      d_q1(k, 0) = static_cast<float>(2.0 * diff1 / batch_size);
      d_q2(k, 0) = static_cast<float>(2.0 * diff2 / batch_size);
    }
    qf1_loss /= batch_size;
    qf2_loss /= batch_size;
    auto q1_grads = qf1.Backward(q1_fwd.cache, d_q1).grads;
    auto q2_grads = qf2.Backward(q2_fwd.cache, d_q2).grads;
    AdamStep(JoinBlocks({qf1.ParameterBlocks(), qf2.ParameterBlocks()}),
             AsConst(JoinBlocks({q1_grads.Blocks(), q2_grads.Blocks()})), q_opt);

    if (step % policy_frequency == 0) {
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
      PolyakUpdate(qf2_target, qf2, tau);
    }

    if (step % 100 == 0) {
      run.Log(step, "losses/qf1_loss", qf1_loss);
      run.Log(step, "losses/qf2_loss", qf2_loss);
      run.Log(step, "losses/qf_loss", (qf1_loss + qf2_loss) / 2.0);
      run.Log(step, "losses/actor_loss", actor_loss);
      LogSps(run, step);
    }
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"actor", actor});
  checkpoint.networks.push_back({"qf1", qf1});
  checkpoint.networks.push_back({"qf2", qf2});
  checkpoint.tensors.push_back({"action_scale", scale});
  checkpoint.tensors.push_back({"action_bias", bias});
  return Finish(run, checkpoint, total, std::move(episode_returns));
}

}  // namespace monorl
