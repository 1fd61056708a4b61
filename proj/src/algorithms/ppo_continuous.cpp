// PPO with a diagonal Gaussian policy for continuous actions.
//
// Actor mean and critic are separate 64-64 tanh MLPs; the log standard
// deviation is a state-independent parameter vector initialized to 0.
// Observations are normalized with running statistics (clipped to +-10) and
// rewards are scaled by the running std of the discounted return. Sampled
// actions are stored unclipped; the environment applies its own bounds.
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

ConfigSchema PpoContinuousSchema() {
  return {
      FloatParam("learning_rate", 3e-4, 0, kInf, true),
      IntParam("num_envs", 1, 1, 4096),
      IntParam("num_steps", 2048, 1),
      BoolParam("anneal_lr", true),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("gae_lambda", 0.95, 0, 1),
      IntParam("num_minibatches", 32, 1),
      IntParam("update_epochs", 10, 1),
      BoolParam("norm_adv", true),
      FloatParam("clip_coef", 0.2, 0, kInf, true),
      BoolParam("clip_vloss", true),
      FloatParam("ent_coef", 0.0, 0, kInf),
      FloatParam("vf_coef", 0.5, 0, kInf),
      FloatParam("max_grad_norm", 0.5, 0, kInf, true),
      BoolParam("norm_obs", true),
      BoolParam("norm_reward", true),
  };
}

FinalReport TrainPpoContinuous(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kContinuous);
  const int num_envs = static_cast<int>(config.Int("num_envs"));
  const int num_steps = static_cast<int>(config.Int("num_steps"));
  const int num_minibatches = static_cast<int>(config.Int("num_minibatches"));
  const int update_epochs = static_cast<int>(config.Int("update_epochs"));
  const double learning_rate = config.Float("learning_rate");
  const double gamma = config.Float("gamma");
  const double gae_lambda = config.Float("gae_lambda");
  const double clip_coef = config.Float("clip_coef");
  const double ent_coef = config.Float("ent_coef");
  const double vf_coef = config.Float("vf_coef");
  const double max_grad_norm = config.Float("max_grad_norm");
  const bool anneal_lr = config.Bool("anneal_lr");
  const bool norm_adv = config.Bool("norm_adv");
  const bool clip_vloss = config.Bool("clip_vloss");
  const bool norm_obs = config.Bool("norm_obs");
  const bool norm_reward = config.Bool("norm_reward");
  const int batch_size = num_envs * num_steps;
  if (batch_size % num_minibatches != 0) {
    throw ConfigError("num_envs * num_steps (" + std::to_string(batch_size) +
                      ") must be divisible by num_minibatches");
  }
  const int64_t num_iterations = config.total_timesteps / batch_size;

  Rng root(config.seed);
  Rng init_rng = root.Child("init");
  Rng action_rng = root.Child("action");
  Rng shuffle_rng = root.Child("minibatch");
  VecEnv envs(config.env_id, num_envs, config.seed);
  const int obs_dim = envs.observation_dim();
  const int act_dim = envs.action_space().n;

  Mlp critic(StackSpecs(obs_dim, {64, 64}, 1, Activation::kTanh));
  Mlp actor_mean(StackSpecs(obs_dim, {64, 64}, act_dim, Activation::kTanh));
  InitOrthogonal(critic, std::sqrt(2.0), 1.0, init_rng);
  InitOrthogonal(actor_mean, std::sqrt(2.0), 0.01, init_rng);
  std::vector<float> log_std(act_dim, 0.0f);
  const AdamConfig adam{learning_rate, 0.9, 0.999, 1e-5};
  AdamState<float> actor_opt(adam), critic_opt(adam);

  RunningMeanVar obs_rms(obs_dim);
  RewardNormalizer reward_norm(num_envs, gamma);
  auto normalize = [&](const Matrix& raw, bool update) -> Matrix {
    if (!norm_obs) return raw;
    const MatrixD raw_d = raw.cast<double>();
    if (update) obs_rms = RmvUpdate(obs_rms, raw_d);
    return NormalizeObs(obs_rms, raw_d).cast<float>();
  };

  RolloutBuffer rb(num_steps, num_envs, obs_dim, act_dim);
  std::vector<double> episode_returns;
  int64_t global_step = 0;
  Matrix next_obs = normalize(envs.Reset(), true);
  std::vector<double> next_done(num_envs, 0.0);

  for (int64_t iteration = 1; iteration <= num_iterations; ++iteration) {
    if (anneal_lr) {
      const double frac = 1.0 - static_cast<double>(iteration - 1) / num_iterations;
      actor_opt.config.lr = critic_opt.config.lr = frac * learning_rate;
    }

    rb.Clear();
    const std::vector<double> log_std_d(log_std.begin(), log_std.end());
    for (int step = 0; step < num_steps; ++step) {
      global_step += num_envs;
      const Matrix means = actor_mean.Predict(next_obs);
      const Matrix values = critic.Predict(next_obs);
      MatrixD actions(num_envs, act_dim);
      std::vector<double> log_probs(num_envs), value_vec(num_envs);
      for (int i = 0; i < num_envs; ++i) {
        const std::vector<double> mean(means.row(i).data(), means.row(i).data() + act_dim);
        DiagGaussian dist(mean, log_std_d);
        std::vector<double> a = dist.Sample(action_rng);
        // Rounded to the stored precision so the update sees the same action.
        for (int d = 0; d < act_dim; ++d) actions(i, d) = a[d] = static_cast<float>(a[d]);
        log_probs[i] = dist.LogProb(a);
        value_vec[i] = values(i, 0);
      }

      VecStep out = envs.StepContinuous(actions);
      std::vector<uint8_t> done(num_envs);
      for (int i = 0; i < num_envs; ++i) done[i] = out.terminated[i] || out.truncated[i];
      std::vector<double> rewards =
          norm_reward ? reward_norm.Normalize(out.rewards, done) : out.rewards;
      Matrix obs_after = normalize(out.obs, true);
      bool any_truncated = false;
      for (int i = 0; i < num_envs; ++i) any_truncated |= out.truncated[i] && !out.terminated[i];
      if (any_truncated) {
        // Bootstrap through the time limit from the true final observation.
        const Matrix final_values = critic.Predict(normalize(out.final_obs, false));
        for (int i = 0; i < num_envs; ++i) {
          if (out.truncated[i] && !out.terminated[i]) rewards[i] += gamma * final_values(i, 0);
        }
      }
      rb.Add(next_obs, actions.cast<float>(), log_probs, rewards, next_done, value_vec);
      for (int i = 0; i < num_envs; ++i) next_done[i] = done[i] ? 1.0 : 0.0;
      next_obs = std::move(obs_after);
      RecordEpisodes(run, global_step, out.infos, episode_returns);
    }

    const Matrix last_values_m = critic.Predict(next_obs);
    std::vector<double> last_values(num_envs);
    for (int i = 0; i < num_envs; ++i) last_values[i] = last_values_m(i, 0);
    const GaeResult gae = ComputeGae(rb, last_values, next_done, gamma, gae_lambda);

    PpoUpdateStats stats;
    double clip_fraction_sum = 0.0;
    int minibatch_count = 0;
    for (int epoch = 0; epoch < update_epochs; ++epoch) {
      for (const auto& mb : Minibatches(rb, num_minibatches, shuffle_rng)) {
        const int n = static_cast<int>(mb.size());
        const Matrix obs = RowsOf(rb.obs(), mb);
        const auto actor_fwd = actor_mean.Forward(obs);
        const auto critic_fwd = critic.Forward(obs);
        const std::vector<double> ls(log_std.begin(), log_std.end());

        std::vector<DiagGaussian> dists;
        dists.reserve(n);
        std::vector<std::vector<double>> taken(n);
        std::vector<double> new_log_probs(n), entropy(n), new_values(n);
        std::vector<double> old_log_probs(n), advantages(n), returns(n), old_values(n);
        for (int k = 0; k < n; ++k) {
          const int idx = mb[k];
          const float* mrow = actor_fwd.outputs.row(k).data();
          dists.emplace_back(std::vector<double>(mrow, mrow + act_dim), ls);
          const float* arow = rb.actions().row(idx).data();
          taken[k].assign(arow, arow + act_dim);
          new_log_probs[k] = dists[k].LogProb(taken[k]);
          entropy[k] = dists[k].Entropy();
          new_values[k] = critic_fwd.outputs(k, 0);
          old_log_probs[k] = rb.log_probs()[idx];
          advantages[k] = gae.advantages[idx];
          returns[k] = gae.returns[idx];
          old_values[k] = rb.values()[idx];
        }
        if (norm_adv) NormalizeAdvantages(advantages);
        const PpoLossResult loss =
            PpoLoss({old_log_probs, advantages, returns, old_values}, new_log_probs, entropy,
                    new_values, clip_coef, ent_coef, vf_coef, clip_vloss);

        Matrix d_mean(n, act_dim);
        Matrix d_values(n, 1);
        std::vector<float> d_log_std(act_dim, 0.0f);
        std::vector<double> g_mean(act_dim), g_log_std(act_dim);
        for (int k = 0; k < n; ++k) {
          dists[k].LogProbGrad(taken[k], g_mean, g_log_std);
          for (int d = 0; d < act_dim; ++d) {
            d_mean(k, d) = static_cast<float>(loss.d_log_probs[k] * g_mean[d]);
            // dH/dlog_std = 1 per dimension.
            d_log_std[d] += static_cast<float>(loss.d_log_probs[k] * g_log_std[d] + loss.d_entropy[k]);
          }
          d_values(k, 0) = static_cast<float>(loss.d_values[k]);
        }
        auto actor_grads = actor_mean.Backward(actor_fwd.cache, d_mean).grads;
        auto critic_grads = critic.Backward(critic_fwd.cache, d_values).grads;
        auto actor_blocks = JoinBlocks({actor_grads.Blocks(), {std::span<float>(d_log_std)}});
        ClipGradNorm(actor_blocks, max_grad_norm);
        ClipGradNorm(critic_grads.Blocks(), max_grad_norm);
        AdamStep(JoinBlocks({actor_mean.ParameterBlocks(), {std::span<float>(log_std)}}),
                 AsConst(actor_blocks), actor_opt);
        AdamStep(critic, critic_grads, critic_opt);

        stats = loss.stats;
        clip_fraction_sum += loss.stats.clip_fraction;
        ++minibatch_count;
      }
    }

    run.Log(global_step, "losses/value_loss", stats.value_loss);
    run.Log(global_step, "losses/policy_loss", stats.policy_loss);
    run.Log(global_step, "losses/entropy", stats.entropy);
    run.Log(global_step, "losses/approx_kl", stats.approx_kl);
    run.Log(global_step, "losses/clip_fraction", clip_fraction_sum / minibatch_count);
    LogSps(run, global_step);
  }

  Checkpoint checkpoint;
  checkpoint.networks.push_back({"actor_mean", actor_mean});
  checkpoint.networks.push_back({"critic", critic});
  checkpoint.tensors.push_back({"log_std", log_std});
  std::vector<float> obs_mean(obs_dim), obs_var(obs_dim);
  for (int d = 0; d < obs_dim; ++d) {
    obs_mean[d] = static_cast<float>(obs_rms.mean[d]);
    obs_var[d] = static_cast<float>(obs_rms.var[d]);
  }
  checkpoint.tensors.push_back({"obs_mean", obs_mean});
  checkpoint.tensors.push_back({"obs_var", obs_var});
  return Finish(run, checkpoint, global_step, std::move(episode_returns));
}

}  // namespace monorl
