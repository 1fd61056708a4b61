// Soft actor-critic for continuous-action environments.
//
// Squashed Gaussian actor (one trunk emitting mean and a raw log std mapped
// into [-5, 2] by tanh), twin critics with Polyak targets, and automatic
// entropy tuning toward target_entropy = -action_dim. Critics update every
// step; the actor and temperature update policy_frequency times every
// policy_frequency steps. Actions are uniform random until learning_starts.
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

ConfigSchema SacSchema() {
  return {
      FloatParam("q_lr", 3e-4, 0, kInf, true),
      FloatParam("policy_lr", 3e-4, 0, kInf, true),
      FloatParam("alpha_lr", 1e-3, 0, kInf, true),
      IntParam("buffer_size", 100000, 1),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("tau", 0.005, 0, 1, true),
      IntParam("batch_size", 256, 1),
      IntParam("learning_starts", 5000, 0),
      IntParam("policy_frequency", 2, 1),
      BoolParam("autotune", true),
      FloatParam("alpha", 0.2, 0, kInf),
  };
}

namespace {

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

// One policy draw per batch row, in environment units.
struct PolicyDraws {
  std::vector<SquashedSample> samples;
  std::vector<std::vector<double>> log_std;
  Matrix actions;                  // B x act_dim, rescaled to the bounds
  std::vector<double> log_probs;   // log density of the rescaled action
};

PolicyDraws DrawPolicy(const Matrix& head, const std::vector<float>& scale,
                       const std::vector<float>& bias, Rng& rng) {
  const int act_dim = static_cast<int>(scale.size());
  double log_det = 0.0;
  for (float s : scale) log_det += std::log(static_cast<double>(s));
  PolicyDraws out;
  const auto n = head.rows();
  out.samples.reserve(n);
  out.log_std.resize(n);
  out.actions.resize(n, act_dim);
  out.log_probs.resize(n);
  std::vector<double> mean(act_dim);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.log_std[k].resize(act_dim);
    for (int d = 0; d < act_dim; ++d) {
      mean[d] = head(k, d);
      const double t = std::tanh(static_cast<double>(head(k, act_dim + d)));
      out.log_std[k][d] = kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (t + 1.0);
    }
    out.samples.push_back(TanhGaussianSampleLogProb(mean, out.log_std[k], rng));
    const SquashedSample& s = out.samples.back();
    for (int d = 0; d < act_dim; ++d) {
      out.actions(k, d) = static_cast<float>(s.action[d] * scale[d] + bias[d]);
    }
    out.log_probs[k] = s.log_prob - log_det;
  }
  return out;
}

}  // namespace

FinalReport TrainSac(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kContinuous);
  const double q_lr = config.Float("q_lr");
  const double policy_lr = config.Float("policy_lr");
  const double alpha_lr = config.Float("alpha_lr");
  const int buffer_size = static_cast<int>(config.Int("buffer_size"));
  const double gamma = config.Float("gamma");
  const double tau = config.Float("tau");
  const int batch_size = static_cast<int>(config.Int("batch_size"));
  const int64_t learning_starts = config.Int("learning_starts");
  const int64_t policy_frequency = config.Int("policy_frequency");
  const bool autotune = config.Bool("autotune");
  const int64_t total = config.total_timesteps;

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng sample_rng = root.Child("minibatch");
  Rng policy_rng = root.Child("policy_noise");
  VecEnv envs(config.env_id, 1, config.seed);
  const int obs_dim = envs.observation_dim();
  const ActionSpace& space = envs.action_space();
  const int act_dim = space.n;
  std::vector<float> scale(act_dim), bias(act_dim);
  for (int d = 0; d < act_dim; ++d) {
    scale[d] = static_cast<float>((space.high[d] - space.low[d]) / 2.0);
    bias[d] = static_cast<float>((space.high[d] + space.low[d]) / 2.0);
  }

  Mlp actor(StackSpecs(obs_dim, {256, 256}, 2 * act_dim, Activation::kRelu));
  Mlp qf1(StackSpecs(obs_dim + act_dim, {256, 256}, 1, Activation::kRelu));
  Mlp qf2(StackSpecs(obs_dim + act_dim, {256, 256}, 1, Activation::kRelu));
  InitFanInUniform(actor, init_rng);
  InitFanInUniform(qf1, init_rng);
  InitFanInUniform(qf2, init_rng);
  Mlp qf1_target = qf1;
  Mlp qf2_target = qf2;
  AdamState<float> q_opt(AdamConfig{q_lr, 0.9, 0.999, 1e-8});
  AdamState<float> actor_opt(AdamConfig{policy_lr, 0.9, 0.999, 1e-8});

  const double target_entropy = -static_cast<double>(act_dim);
  std::vector<double> log_alpha{0.0};
  AdamState<double> alpha_opt(AdamConfig{alpha_lr, 0.9, 0.999, 1e-8});
  double alpha = autotune ? std::exp(log_alpha[0]) : config.Float("alpha");

  ReplayBuffer rb(buffer_size, obs_dim, act_dim);
  std::vector<double> episode_returns;
  Matrix obs = envs.Reset();
  double actor_loss = 0.0, alpha_loss = 0.0;

  for (int64_t step = 1; step <= total; ++step) {
    Matrix action(1, act_dim);
    if (step <= learning_starts) {
      for (int d = 0; d < act_dim; ++d) {
        action(0, d) = static_cast<float>(action_rng.Uniform(space.low[d], space.high[d]));
      }
    } else {
      action = DrawPolicy(actor.Predict(obs), scale, bias, action_rng).actions;
    }
    VecStep out = envs.StepContinuous(action.cast<double>());
    rb.Add({obs.row(0).data(), static_cast<size_t>(obs_dim)},
           {action.row(0).data(), static_cast<size_t>(act_dim)}, out.rewards[0],
           {out.final_obs.row(0).data(), static_cast<size_t>(obs_dim)}, out.terminated[0] != 0);
    obs = std::move(out.obs);
    RecordEpisodes(run, step, out.infos, episode_returns);

    if (step <= learning_starts) continue;

    const ReplayBatch batch = rb.Sample(batch_size, sample_rng);
    const PolicyDraws next = DrawPolicy(actor.Predict(batch.next_obs), scale, bias, policy_rng);
    const Matrix next_in = ConcatCols(batch.next_obs, next.actions);
    const Matrix q1_next = qf1_target.Predict(next_in);
    const Matrix q2_next = qf2_target.Predict(next_in);
    const Matrix q_in = ConcatCols(batch.obs, batch.actions);
    const auto q1_fwd = qf1.Forward(q_in);
    const auto q2_fwd = qf2.Forward(q_in);
    Matrix d_q1(batch_size, 1), d_q2(batch_size, 1);
    double qf1_loss = 0.0, qf2_loss = 0.0;
    for (int k = 0; k < batch_size; ++k) {
      const double y = SacTarget(batch.rewards[k], batch.terminateds[k], gamma, q1_next(k, 0),
                                 q2_next(k, 0), alpha, next.log_probs[k]);
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
      // Several updates at once to compensate for the delay.
      for (int64_t rep = 0; rep < policy_frequency; ++rep) {
        const auto a_fwd = actor.Forward(batch.obs);
        const PolicyDraws pi = DrawPolicy(a_fwd.outputs, scale, bias, policy_rng);
        const Matrix pi_in = ConcatCols(batch.obs, pi.actions);
        const auto qpi1 = qf1.Forward(pi_in);
        const auto qpi2 = qf2.Forward(pi_in);
        // mean(alpha log_pi - min(q1, q2)); the gradient flows through
        // whichever critic is smaller (q1 on ties).
        Matrix d_min1 = Matrix::Zero(batch_size, 1), d_min2 = Matrix::Zero(batch_size, 1);
        actor_loss = 0.0;
        for (int k = 0; k < batch_size; ++k) {
          const double q1 = qpi1.outputs(k, 0), q2 = qpi2.outputs(k, 0);
          actor_loss += alpha * pi.log_probs[k] - std::min(q1, q2);
          (q1 <= q2 ? d_min1 : d_min2)(k, 0) = -1.0f / batch_size;
        }
        actor_loss /= batch_size;
        const Matrix d_in1 = qf1.Backward(qpi1.cache, d_min1, false).grad_in;
        const Matrix d_in2 = qf2.Backward(qpi2.cache, d_min2, false).grad_in;

        Matrix d_head(batch_size, 2 * act_dim);
        std::vector<double> g_action(act_dim), g_mean(act_dim), g_log_std(act_dim);
        for (int k = 0; k < batch_size; ++k) {
          for (int d = 0; d < act_dim; ++d) {
            g_action[d] = (d_in1(k, obs_dim + d) + d_in2(k, obs_dim + d)) * scale[d];
          }
          TanhGaussianBackward(pi.samples[k], pi.log_std[k], g_action, alpha / batch_size, g_mean,
                               g_log_std);
          for (int d = 0; d < act_dim; ++d) {
            const double t = std::tanh(static_cast<double>(a_fwd.outputs(k, act_dim + d)));
            d_head(k, d) = static_cast<float>(g_mean[d]);
            d_head(k, act_dim + d) = static_cast<float>(
                g_log_std[d] * 0.5 * (kLogStdMax - kLogStdMin) * (1.0 - t * t));
          }
        }
        auto a_grads = actor.Backward(a_fwd.cache, d_head).grads;
        AdamStep(actor, a_grads, actor_opt);

        if (autotune) {
          const PolicyDraws fresh = DrawPolicy(actor.Predict(batch.obs), scale, bias, policy_rng);
          const AlphaLoss al = SacAlphaLoss(log_alpha[0], fresh.log_probs, target_entropy);
          alpha_loss = al.loss;
          const std::vector<double> g{al.d_log_alpha};
          AdamStep<double>({std::span<double>(log_alpha)}, {std::span<const double>(g)}, alpha_opt);
          alpha = std::exp(log_alpha[0]);
        }
      }
    }

    PolyakUpdate(qf1_target, qf1, tau);
    PolyakUpdate(qf2_target, qf2, tau);

    if (step % 100 == 0) {
      run.Log(step, "losses/qf1_loss", qf1_loss);
      run.Log(step, "losses/qf2_loss", qf2_loss);
      run.Log(step, "losses/qf_loss", (qf1_loss + qf2_loss) / 2.0);
      run.Log(step, "losses/actor_loss", actor_loss);
      run.Log(step, "losses/alpha", alpha);
      if (autotune) run.Log(step, "losses/alpha_loss", alpha_loss);
      LogSps(run, step);
    }
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"actor", actor});
  checkpoint.networks.push_back({"qf1", qf1});
  checkpoint.networks.push_back({"qf2", qf2});
  checkpoint.tensors.push_back({"action_scale", scale});
  checkpoint.tensors.push_back({"action_bias", bias});
  checkpoint.tensors.push_back({"log_alpha", {static_cast<float>(log_alpha[0])}});
  return Finish(run, checkpoint, total, std::move(episode_returns));
}

}  // namespace monorl
