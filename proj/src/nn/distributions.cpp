#include "monorl/nn/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "monorl/error.hpp"

namespace monorl {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

// tanh saturates to exactly +-1 in double for |u| > ~19; keep actions open.
double SquashedTanh(double u) {
  constexpr double kEdge = 1.0 - 0x1.0p-53;
  return std::clamp(std::tanh(u), -kEdge, kEdge);
}

void CheckFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite input");
  }
}

}  // namespace

Categorical::Categorical(std::span<const double> logits) { Init(logits); }

Categorical::Categorical(std::span<const float> logits) {
  std::vector<double> widened(logits.begin(), logits.end());
  Init(widened);
}

void Categorical::Init(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("Categorical: empty logits");
  CheckFinite(logits, "Categorical");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - max_logit);
  const double log_z = max_logit + std::log(sum);
  log_probs_.resize(logits.size());
  probs_.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    log_probs_[i] = logits[i] - log_z;
    probs_[i] = std::exp(log_probs_[i]);
  }
}

int Categorical::Sample(Rng& rng) const {
  const double u = rng.Uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (int i = 0; i < size(); ++i) {
    if (probs_[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs_[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

int Categorical::Mode() const {
  return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double Categorical::LogProb(int action) const {
  if (action < 0 || action >= size()) {
    throw DimensionError("Categorical::LogProb action out of range", size(), action);
  }
  return log_probs_[action];
}

double Categorical::Entropy() const {
  double h = 0.0;
  for (size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) h -= probs_[i] * log_probs_[i];
  }
  return h;
}

std::vector<double> Categorical::LogProbGrad(int action) const {
  std::vector<double> grad(probs_.size());
  for (size_t i = 0; i < probs_.size(); ++i) grad[i] = -probs_[i];
  grad.at(action) += 1.0;
  return grad;
}

std::vector<double> Categorical::EntropyGrad() const {
  const double h = Entropy();
  std::vector<double> grad(probs_.size());
  for (size_t i = 0; i < probs_.size(); ++i) {
    grad[i] = probs_[i] > 0.0 ? -probs_[i] * (log_probs_[i] + h) : 0.0;
  }
  return grad;
}

DiagGaussian::DiagGaussian(std::span<const double> mean, std::span<const double> log_std)
    : mean_(mean.begin(), mean.end()), log_std_(log_std.begin(), log_std.end()) {
  if (mean_.size() != log_std_.size()) {
    throw DimensionError("DiagGaussian log_std size", static_cast<long>(mean_.size()),
                         static_cast<long>(log_std_.size()));
  }
  CheckFinite(mean, "DiagGaussian mean");
  CheckFinite(log_std, "DiagGaussian log_std");
}

std::vector<double> DiagGaussian::Sample(Rng& rng) const {
  std::vector<double> x(mean_.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = mean_[i] + std::exp(log_std_[i]) * rng.Normal();
  return x;
}

double DiagGaussian::LogProb(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw DimensionError("DiagGaussian::LogProb", static_cast<long>(mean_.size()),
                         static_cast<long>(x.size()));
  }
  double lp = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean_[i]) * std::exp(-log_std_[i]);
    lp += -0.5 * z * z - log_std_[i] - kHalfLog2Pi;
  }
  return lp;
}

double DiagGaussian::Entropy() const {
  double h = 0.0;
  for (double ls : log_std_) h += 0.5 + kHalfLog2Pi + ls;
  return h;
}

void DiagGaussian::LogProbGrad(std::span<const double> x, std::span<double> d_mean,
                               std::span<double> d_log_std) const {
  for (size_t i = 0; i < x.size(); ++i) {
    const double inv_var = std::exp(-2.0 * log_std_[i]);
    const double diff = x[i] - mean_[i];
    d_mean[i] = diff * inv_var;
    d_log_std[i] = diff * diff * inv_var - 1.0;
  }
}

SquashedSample TanhGaussianFromNoise(std::span<const double> mean,
                                     std::span<const double> log_std,
                                     std::span<const double> noise) {
  if (mean.size() != log_std.size() || mean.size() != noise.size()) {
    throw DimensionError("TanhGaussian sizes", static_cast<long>(mean.size()),
                         static_cast<long>(log_std.size()));
  }
  CheckFinite(mean, "TanhGaussian mean");
  CheckFinite(log_std, "TanhGaussian log_std");
  SquashedSample s;
  const size_t d = mean.size();
  s.action.resize(d);
  s.pre_tanh.resize(d);
  s.noise.assign(noise.begin(), noise.end());
  s.std.resize(d);
  for (size_t i = 0; i < d; ++i) {
    const double ls = std::clamp(log_std[i], kSquashLogStdMin, kSquashLogStdMax);
    s.std[i] = std::exp(ls);
    s.pre_tanh[i] = mean[i] + s.std[i] * noise[i];
    s.action[i] = SquashedTanh(s.pre_tanh[i]);
    const double normal_lp = -0.5 * noise[i] * noise[i] - ls - kHalfLog2Pi;
    s.log_prob += normal_lp - std::log(1.0 - s.action[i] * s.action[i] + kSquashEps);
  }
  return s;
}

SquashedSample TanhGaussianSampleLogProb(std::span<const double> mean,
                                         std::span<const double> log_std, Rng& rng) {
  std::vector<double> noise(mean.size());
  for (double& n : noise) n = rng.Normal();
  return TanhGaussianFromNoise(mean, log_std, noise);
}

std::vector<double> TanhGaussianMode(std::span<const double> mean) {
  std::vector<double> a(mean.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] = SquashedTanh(mean[i]);
  return a;
}

void TanhGaussianBackward(const SquashedSample& sample, std::span<const double> log_std,
                          std::span<const double> grad_action, double grad_log_prob,
                          std::span<double> grad_mean, std::span<double> grad_log_std) {
  // With a = tanh(u), u = mean + std * noise:
  //   d log_prob / du       = 2a(1 - a^2) / (1 - a^2 + eps)
  //   d log_prob / dlog_std = -1 + (d log_prob / du) * std * noise
  for (size_t i = 0; i < sample.action.size(); ++i) {
    const double a = sample.action[i];
    const double one_minus = 1.0 - a * a;
    const double dlp_du = 2.0 * a * one_minus / (one_minus + kSquashEps);
    const double du = grad_action[i] * one_minus + grad_log_prob * dlp_du;
    grad_mean[i] = du;
    const bool clamped = log_std[i] < kSquashLogStdMin || log_std[i] > kSquashLogStdMax;
    grad_log_std[i] =
        clamped ? 0.0 : du * sample.std[i] * sample.noise[i] - grad_log_prob;
  }
}

}  // namespace monorl
