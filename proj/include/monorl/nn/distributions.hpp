#ifndef MONORL_NN_DISTRIBUTIONS_HPP_
#define MONORL_NN_DISTRIBUTIONS_HPP_

#include <span>
#include <vector>

#include "monorl/nn/rng.hpp"

namespace monorl {

// Softmax distribution over logits. Internally float64, normalized with
// max-subtraction.
class Categorical {
 public:
  explicit Categorical(std::span<const double> logits);
  explicit Categorical(std::span<const float> logits);

  int size() const { return static_cast<int>(log_probs_.size()); }
  // Inverse-CDF draw from one uniform.
  int Sample(Rng& rng) const;
  // Lowest index among maximal probabilities.
  int Mode() const;
  double LogProb(int action) const;
  double Prob(int action) const { return probs_.at(action); }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  double Entropy() const;

  // d log p(action) / d logits = onehot(action) - p.
  std::vector<double> LogProbGrad(int action) const;
  // d H / d logit_k = -p_k (log p_k + H).
  std::vector<double> EntropyGrad() const;

 private:
  void Init(std::span<const double> logits);

  std::vector<double> log_probs_;
  std::vector<double> probs_;
};

// Independent normals with per-dimension mean and log standard deviation.
class DiagGaussian {
 public:
  DiagGaussian(std::span<const double> mean, std::span<const double> log_std);

  int dim() const { return static_cast<int>(mean_.size()); }
  std::vector<double> Sample(Rng& rng) const;
  double LogProb(std::span<const double> x) const;
  double Entropy() const;

  // Gradients of LogProb(x) with respect to mean and log_std.
  void LogProbGrad(std::span<const double> x, std::span<double> d_mean,
                   std::span<double> d_log_std) const;

 private:
  std::vector<double> mean_;
  std::vector<double> log_std_;
};

inline constexpr double kSquashLogStdMin = -5.0;
inline constexpr double kSquashLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

// Reparameterized draw from tanh(N(mean, exp(log_std))). log_std is clamped
// to [kSquashLogStdMin, kSquashLogStdMax]. noise holds the standard-normal
// draws so the sample can be differentiated afterwards.
struct SquashedSample {
  std::vector<double> action;    // tanh(pre_tanh), in (-1, 1)
  std::vector<double> pre_tanh;  // mean + std * noise
  std::vector<double> noise;
  std::vector<double> std;       // exp(clamped log_std)
  double log_prob = 0.0;
};

SquashedSample TanhGaussianSampleLogProb(std::span<const double> mean,
                                         std::span<const double> log_std, Rng& rng);
// Same as above with the standard-normal noise supplied by the caller.
SquashedSample TanhGaussianFromNoise(std::span<const double> mean,
                                     std::span<const double> log_std,
                                     std::span<const double> noise);
// Deterministic (evaluation) action tanh(mean).
std::vector<double> TanhGaussianMode(std::span<const double> mean);

// Pathwise gradients through a SquashedSample: given dL/d action and
// dL/d log_prob, returns dL/d mean and dL/d log_std (noise held fixed).
// Components whose log_std was clamped receive zero log_std gradient.
void TanhGaussianBackward(const SquashedSample& sample, std::span<const double> log_std,
                          std::span<const double> grad_action, double grad_log_prob,
                          std::span<double> grad_mean, std::span<double> grad_log_std);

}  // namespace monorl

#endif  // MONORL_NN_DISTRIBUTIONS_HPP_
