#ifndef MONORL_ALGORITHMS_LOSSES_HPP_
#define MONORL_ALGORITHMS_LOSSES_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "monorl/nn/mlp.hpp"

namespace monorl {

// start + (end - start) * min(t / duration, 1). duration <= 0 yields end.
double LinearAnneal(double start, double end, int64_t duration, int64_t t);

// ---- PPO ----

struct PpoUpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double explained_variance = 0.0;
};

// Per-sample quantities recorded at rollout time. Advantages are expected
// to be normalized already when the caller wants that.
struct PpoMinibatch {
  std::span<const double> old_log_probs;
  std::span<const double> advantages;
  std::span<const double> returns;
  std::span<const double> old_values;
};

struct PpoLossResult {
  double total = 0.0;
  PpoUpdateStats stats;
  // d total / d (new_log_probs, entropy, new_values), one entry per sample.
  std::vector<double> d_log_probs;
  std::vector<double> d_entropy;
  std::vector<double> d_values;
};

// Clipped surrogate + (optionally clipped) value loss - entropy bonus:
//   rho = exp(new_lp - old_lp)
//   policy = mean(max(-rho A, -clip(rho, 1 - eps, 1 + eps) A))
//   value  = mean(1/2 max((V - R)^2, (V_old + clip(V - V_old, -eps, eps) - R)^2))
//            or mean(1/2 (V - R)^2) without clip_vloss
//   total  = policy - ent_coef mean(entropy) + vf_coef value
PpoLossResult PpoLoss(const PpoMinibatch& mb, std::span<const double> new_log_probs,
                      std::span<const double> entropy, std::span<const double> new_values,
                      double clip_coef, double ent_coef, double vf_coef, bool clip_vloss);

// (x - mean) / (unbiased std + 1e-8), in place.
void NormalizeAdvantages(std::span<double> advantages);

// 1 - Var(returns - values) / Var(returns); NaN when Var(returns) == 0.
double ExplainedVariance(std::span<const double> values, std::span<const double> returns);

// ---- Action masking ----

inline constexpr double kMaskedLogit = -1e8;

// Illegal entries replaced by kMaskedLogit. Throws std::invalid_argument if
// no action is legal.
std::vector<double> ApplyActionMask(std::span<const double> logits, std::span<const uint8_t> mask);

// ---- Value-based targets ----

// r + gamma (1 - terminated) max_a q_next[a]
double DqnTarget(double reward, double terminated, double gamma, std::span<const double> q_next);

// Lowest index of the maximum.
int Argmax(std::span<const double> values);
int Argmax(std::span<const float> values);

struct C51Support {
  double v_min = -100.0;
  double v_max = 100.0;
  int n_atoms = 101;
  double delta_z = 2.0;
  std::vector<double> atoms;

  C51Support() = default;
  C51Support(double v_min, double v_max, int n_atoms);
};

// Categorical projection of r + gamma (1 - terminated) z onto the support.
// next_dist must sum to 1 within 1e-6 and be non-negative.
std::vector<double> C51Project(const C51Support& support, std::span<const double> next_dist,
                               double reward, double terminated, double gamma);

// sum_i p_i z_i
double C51Expectation(const C51Support& support, std::span<const double> probs);

// ---- Continuous control targets ----

// r + gamma (1 - terminated) q_target_next
double DdpgTarget(double reward, double terminated, double gamma, double q_target_next);

// clip(mu + clip(noise, -noise_clip, noise_clip), low, high) per dimension.
// `noise` holds the N(0, sigma) draws already scaled by sigma.
std::vector<double> Td3SmoothedAction(std::span<const double> mu, std::span<const double> noise,
                                      double noise_clip, std::span<const double> low,
                                      std::span<const double> high);

// r + gamma (1 - terminated) min(q1, q2)
double Td3Target(double reward, double terminated, double gamma, double q1_next, double q2_next);

// r + gamma (1 - terminated) (min(q1, q2) - alpha log_prob_next)
double SacTarget(double reward, double terminated, double gamma, double q1_next, double q2_next,
                 double alpha, double log_prob_next);

// mean(-log_alpha (log_prob + target_entropy)) and its derivative in log_alpha.
struct AlphaLoss {
  double loss = 0.0;
  double d_log_alpha = 0.0;
};
AlphaLoss SacAlphaLoss(double log_alpha, std::span<const double> log_probs, double target_entropy);

// ---- Target networks ----

// target <- tau online + (1 - tau) target, elementwise over every parameter.
template <typename T>
void PolyakUpdate(BasicMlp<T>& target, const BasicMlp<T>& online, double tau) {
  auto dst = target.ParameterBlocks();
  const auto src = online.ParameterBlocks();
  if (dst.size() != src.size()) {
    throw DimensionError("PolyakUpdate block count", static_cast<long>(dst.size()),
                         static_cast<long>(src.size()));
  }
  for (size_t b = 0; b < dst.size(); ++b) {
    if (dst[b].size() != src[b].size()) {
      throw DimensionError("PolyakUpdate block size", static_cast<long>(dst[b].size()),
                           static_cast<long>(src[b].size()));
    }
    if (tau == 1.0) {
      std::copy(src[b].begin(), src[b].end(), dst[b].begin());
      continue;
    }
    for (size_t i = 0; i < dst[b].size(); ++i) {
      dst[b][i] = static_cast<T>(tau * src[b][i] + (1.0 - tau) * dst[b][i]);
    }
  }
}

}  // namespace monorl

#endif  // MONORL_ALGORITHMS_LOSSES_HPP_
