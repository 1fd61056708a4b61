// PPO with invalid-action masking.
//
// Same loop as ppo.cpp; the actor's logits are masked with the environment's
// legality flags (illegal entries set to -1e8) both when acting and when
// re-evaluating log-probabilities and entropy during the update. Every
// transition is appended to trajectories.csv so the masking invariant can be
// audited after the run.
#include <cmath>
#include <fstream>
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

ConfigSchema PpoMaskedSchema() {
  return {
      FloatParam("learning_rate", 2.5e-4, 0, kInf, true),
      IntParam("num_envs", 4, 1, 4096),
      IntParam("num_steps", 128, 1),
      BoolParam("anneal_lr", true),
      FloatParam("gamma", 0.99, 0, 1),
      FloatParam("gae_lambda", 0.95, 0, 1),
      IntParam("num_minibatches", 4, 1),
      IntParam("update_epochs", 4, 1),
      BoolParam("norm_adv", true),
      FloatParam("clip_coef", 0.2, 0, kInf, true),
      BoolParam("clip_vloss", true),
      FloatParam("ent_coef", 0.01, 0, kInf),
      FloatParam("vf_coef", 0.5, 0, kInf),
      FloatParam("max_grad_norm", 0.5, 0, kInf, true),
  };
}

FinalReport TrainPpoMasked(const AlgoConfig& config, RunHandle& run) {
  RequireActionSpace(config, SpaceKind::kDiscreteMasked);
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
  const int n_actions = envs.action_space().n;

  Mlp critic(StackSpecs(obs_dim, {64, 64}, 1, Activation::kTanh));
  Mlp actor(StackSpecs(obs_dim, {64, 64}, n_actions, Activation::kTanh));
  InitOrthogonal(critic, std::sqrt(2.0), 1.0, init_rng);
  InitOrthogonal(actor, std::sqrt(2.0), 0.01, init_rng);
  const AdamConfig adam{learning_rate, 0.9, 0.999, 1e-5};
  AdamState<float> actor_opt(adam), critic_opt(adam);

  RolloutBuffer rb(num_steps, num_envs, obs_dim, 1, n_actions);
  std::ofstream trajectory_log(run.dir() / kTrajectoryLog, std::ios::trunc);
  trajectory_log << "step,env,cell,mask,action\n";
  std::vector<double> episode_returns;
  int64_t global_step = 0;
  Matrix next_obs = envs.Reset();
  std::vector<uint8_t> next_masks = envs.Masks();
  std::vector<double> next_done(num_envs, 0.0);

  for (int64_t iteration = 1; iteration <= num_iterations; ++iteration) {
    if (anneal_lr) {
      const double frac = 1.0 - static_cast<double>(iteration - 1) / num_iterations;
      actor_opt.config.lr = critic_opt.config.lr = frac * learning_rate;
    }

    rb.Clear();
    for (int step = 0; step < num_steps; ++step) {
      global_step += num_envs;
      const Matrix logits = actor.Predict(next_obs);
      const Matrix values = critic.Predict(next_obs);
      std::vector<int> actions(num_envs);
      Matrix action_col(num_envs, 1);
      std::vector<double> log_probs(num_envs), value_vec(num_envs);
      for (int i = 0; i < num_envs; ++i) {
        const std::span<const uint8_t> mask(next_masks.data() + i * n_actions, n_actions);
        const std::vector<double> raw(logits.row(i).data(), logits.row(i).data() + n_actions);
        Categorical dist(ApplyActionMask(raw, mask));
        actions[i] = dist.Sample(action_rng);
        int cell = 0;
        for (int c = 1; c < obs_dim; ++c) {
          if (next_obs(i, c) > next_obs(i, cell)) cell = c;
        }
        trajectory_log << global_step << ',' << i << ',' << cell << ',';
        for (uint8_t m : mask) trajectory_log << (m ? '1' : '0');
        trajectory_log << ',' << actions[i] << '\n';
        action_col(i, 0) = static_cast<float>(actions[i]);
        log_probs[i] = dist.LogProb(actions[i]);
        value_vec[i] = values(i, 0);
      }

      VecStep out = envs.StepDiscrete(actions);
      std::vector<double> rewards = out.rewards;
      // A time-limit cut is not an MDP terminal: fold the value of the true
      // final observation into the reward, then cut the trace like a done.
      bool any_truncated = false;
      for (int i = 0; i < num_envs; ++i) any_truncated |= out.truncated[i] && !out.terminated[i];
      if (any_truncated) {
        const Matrix final_values = critic.Predict(out.final_obs);
        for (int i = 0; i < num_envs; ++i) {
          if (out.truncated[i] && !out.terminated[i]) rewards[i] += gamma * final_values(i, 0);
        }
      }
      rb.Add(next_obs, action_col, log_probs, rewards, next_done, value_vec, next_masks);
      for (int i = 0; i < num_envs; ++i) {
        next_done[i] = (out.terminated[i] || out.truncated[i]) ? 1.0 : 0.0;
      }
      next_obs = std::move(out.obs);
      next_masks = std::move(out.masks);
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
        const auto actor_fwd = actor.Forward(obs);
        const auto critic_fwd = critic.Forward(obs);

        std::vector<Categorical> dists;
        dists.reserve(n);
        std::vector<double> new_log_probs(n), entropy(n), new_values(n);
        std::vector<double> old_log_probs(n), advantages(n), returns(n), old_values(n);
        for (int k = 0; k < n; ++k) {
          const int idx = mb[k];
          const float* row = actor_fwd.outputs.row(k).data();
          const std::vector<double> raw(row, row + n_actions);
          dists.emplace_back(ApplyActionMask(
              raw, std::span<const uint8_t>(rb.masks().data() + idx * n_actions, n_actions)));
          const int action = static_cast<int>(rb.actions()(idx, 0));
          new_log_probs[k] = dists[k].LogProb(action);
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

        Matrix d_logits(n, n_actions);
        Matrix d_values(n, 1);
        for (int k = 0; k < n; ++k) {
          const int action = static_cast<int>(rb.actions()(mb[k], 0));
          const auto g_lp = dists[k].LogProbGrad(action);
          const auto g_ent = dists[k].EntropyGrad();
          const uint8_t* mask = rb.masks().data() + mb[k] * n_actions;
          for (int a = 0; a < n_actions; ++a) {
            // A masked logit is replaced by a constant, so nothing flows back.
            if (!mask[a]) {
              d_logits(k, a) = 0.0f;
              continue;
            }
            d_logits(k, a) =
                static_cast<float>(loss.d_log_probs[k] * g_lp[a] + loss.d_entropy[k] * g_ent[a]);
          }
          d_values(k, 0) = static_cast<float>(loss.d_values[k]);
        }
        auto actor_grads = actor.Backward(actor_fwd.cache, d_logits).grads;
        auto critic_grads = critic.Backward(critic_fwd.cache, d_values).grads;
        // Clipped per network: a joint norm is dominated by the critic's
        // return-scale gradients and starves the actor.
        ClipGradNorm(actor_grads.Blocks(), max_grad_norm);
        ClipGradNorm(critic_grads.Blocks(), max_grad_norm);
        AdamStep(actor, actor_grads, actor_opt);
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
  checkpoint.networks.push_back({"actor", actor});
  checkpoint.networks.push_back({"critic", critic});
  trajectory_log.close();
  if (!trajectory_log) throw std::runtime_error("failed writing " + std::string(kTrajectoryLog));
  return Finish(run, checkpoint, global_step, std::move(episode_returns));
}

}  // namespace monorl
