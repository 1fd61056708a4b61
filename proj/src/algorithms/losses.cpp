#include "monorl/algorithms/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace monorl {

double LinearAnneal(double start, double end, int64_t duration, int64_t t) {
  if (duration <= 0) return end;
  const double frac = std::min(static_cast<double>(t) / static_cast<double>(duration), 1.0);
  return start + (end - start) * frac;
}

PpoLossResult PpoLoss(const PpoMinibatch& mb, std::span<const double> new_log_probs,
                      std::span<const double> entropy, std::span<const double> new_values,
                      double clip_coef, double ent_coef, double vf_coef, bool clip_vloss) {
  const size_t n = new_log_probs.size();
  if (n == 0) throw std::invalid_argument("PpoLoss: empty minibatch");
  for (auto [name, size] : {std::pair{"old_log_probs", mb.old_log_probs.size()},
                            {"advantages", mb.advantages.size()},
                            {"returns", mb.returns.size()},
                            {"old_values", mb.old_values.size()},
                            {"entropy", entropy.size()},
                            {"new_values", new_values.size()}}) {
    if (size != n) {
      throw DimensionError(std::string("PpoLoss ") + name, static_cast<long>(n),
                           static_cast<long>(size));
    }
  }
  PpoLossResult out;
  out.d_log_probs.resize(n);
  out.d_entropy.assign(n, -ent_coef / static_cast<double>(n));
  out.d_values.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double policy = 0.0, value = 0.0, ent = 0.0, kl = 0.0, clipped = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double log_ratio = new_log_probs[i] - mb.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double adv = mb.advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_coef, 1.0 + clip_coef);
    const double unclipped_term = -adv * ratio;
    const double clipped_term = -adv * clipped_ratio;
    if (unclipped_term >= clipped_term) {
      policy += unclipped_term;
      out.d_log_probs[i] = -adv * ratio * inv_n;
    } else {
      policy += clipped_term;
      const bool inside = ratio >= 1.0 - clip_coef && ratio <= 1.0 + clip_coef;
      out.d_log_probs[i] = inside ? -adv * ratio * inv_n : 0.0;
    }
    kl += (ratio - 1.0) - log_ratio;
    clipped += std::abs(ratio - 1.0) > clip_coef ? 1.0 : 0.0;
    ent += entropy[i];

    const double v = new_values[i];
    const double ret = mb.returns[i];
    const double err = v - ret;
    if (clip_vloss) {
      const double dv = v - mb.old_values[i];
      const double v_clipped = mb.old_values[i] + std::clamp(dv, -clip_coef, clip_coef);
      const double err_clipped = v_clipped - ret;
      if (err * err >= err_clipped * err_clipped) {
        value += 0.5 * err * err;
        out.d_values[i] = vf_coef * err * inv_n;
      } else {
        value += 0.5 * err_clipped * err_clipped;
        const bool inside = dv >= -clip_coef && dv <= clip_coef;
        out.d_values[i] = inside ? vf_coef * err_clipped * inv_n : 0.0;
      }
    } else {
      value += 0.5 * err * err;
      out.d_values[i] = vf_coef * err * inv_n;
    }
  }
  out.stats.policy_loss = policy * inv_n;
  out.stats.value_loss = value * inv_n;
  out.stats.entropy = ent * inv_n;
  out.stats.approx_kl = kl * inv_n;
  out.stats.clip_fraction = clipped * inv_n;
  out.stats.explained_variance = ExplainedVariance(mb.old_values, mb.returns);
  out.total = out.stats.policy_loss - ent_coef * out.stats.entropy + vf_coef * out.stats.value_loss;
  return out;
}

void NormalizeAdvantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  // The reference implementation uses torch's unbiased std here.
  const double denom = advantages.size() > 1 ? static_cast<double>(advantages.size() - 1) : 1.0;
  const double sd = std::sqrt(var / denom);
  for (double& a : advantages) a = (a - mean) / (sd + 1e-8);
}

double ExplainedVariance(std::span<const double> values, std::span<const double> returns) {
  const size_t n = returns.size();
  if (n == 0 || values.size() != n) return std::numeric_limits<double>::quiet_NaN();
  double mr = 0.0, md = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mr += returns[i];
    md += returns[i] - values[i];
  }
  mr /= n;
  md /= n;
  double vr = 0.0, vd = 0.0;
  for (size_t i = 0; i < n; ++i) {
    vr += (returns[i] - mr) * (returns[i] - mr);
    const double d = returns[i] - values[i] - md;
    vd += d * d;
  }
  if (vr == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - vd / vr;
}

std::vector<double> ApplyActionMask(std::span<const double> logits, std::span<const uint8_t> mask) {
  if (logits.size() != mask.size()) {
    throw DimensionError("ApplyActionMask mask size", static_cast<long>(logits.size()),
                         static_cast<long>(mask.size()));
  }
  std::vector<double> out(logits.begin(), logits.end());
  bool any = false;
  for (size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) {
      any = true;
    } else {
      out[i] = kMaskedLogit;
    }
  }
  if (!any) throw std::invalid_argument("ApplyActionMask: no legal action");
  return out;
}

double DqnTarget(double reward, double terminated, double gamma, std::span<const double> q_next) {
  if (q_next.empty()) throw std::invalid_argument("DqnTarget: empty q_next");
  const double best = *std::max_element(q_next.begin(), q_next.end());
  return reward + gamma * (1.0 - terminated) * best;
}

int Argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("Argmax: empty input");
  // max_element returns the first maximum.
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

int Argmax(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("Argmax: empty input");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

C51Support::C51Support(double lo, double hi, int n) : v_min(lo), v_max(hi), n_atoms(n) {
  if (n < 2) throw std::invalid_argument("C51Support: n_atoms must be >= 2");
  if (!(hi > lo)) throw std::invalid_argument("C51Support: v_max must exceed v_min");
  delta_z = (hi - lo) / (n - 1);
  atoms.resize(n);
  for (int i = 0; i < n; ++i) atoms[i] = lo + i * delta_z;
  atoms.back() = hi;
}

std::vector<double> C51Project(const C51Support& support, std::span<const double> next_dist,
                               double reward, double terminated, double gamma) {
  const int n = support.n_atoms;
  if (static_cast<int>(next_dist.size()) != n) {
    throw DimensionError("C51Project next_dist", n, static_cast<long>(next_dist.size()));
  }
  double total = 0.0;
  for (double p : next_dist) {
    if (!(p >= 0.0)) throw std::invalid_argument("C51Project: negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("C51Project: next_dist sums to " + std::to_string(total));
  }
  std::vector<double> out(n, 0.0);
  const double discount = gamma * (1.0 - terminated);
  for (int j = 0; j < n; ++j) {
    const double tz = std::clamp(reward + discount * support.atoms[j], support.v_min, support.v_max);
    const double b = std::clamp((tz - support.v_min) / support.delta_z, 0.0, n - 1.0);
    const double lf = std::floor(b), uf = std::ceil(b);
    const int l = static_cast<int>(lf), u = static_cast<int>(uf);
    if (l == u) {
      out[l] += next_dist[j];
    } else {
      out[l] += next_dist[j] * (uf - b);
      out[u] += next_dist[j] * (b - lf);
    }
  }
  return out;
}

double C51Expectation(const C51Support& support, std::span<const double> probs) {
  double e = 0.0;
  for (int i = 0; i < support.n_atoms; ++i) e += probs[i] * support.atoms[i];
  return e;
}

double DdpgTarget(double reward, double terminated, double gamma, double q_target_next) {
  return reward + gamma * (1.0 - terminated) * q_target_next;
}

std::vector<double> Td3SmoothedAction(std::span<const double> mu, std::span<const double> noise,
                                      double noise_clip, std::span<const double> low,
                                      std::span<const double> high) {
  const size_t d = mu.size();
  if (noise.size() != d || low.size() != d || high.size() != d) {
    throw DimensionError("Td3SmoothedAction dims", static_cast<long>(d),
                         static_cast<long>(noise.size()));
  }
  std::vector<double> out(d);
  for (size_t i = 0; i < d; ++i) {
    out[i] = std::clamp(mu[i] + std::clamp(noise[i], -noise_clip, noise_clip), low[i], high[i]);
  }
  return out;
}

double Td3Target(double reward, double terminated, double gamma, double q1_next, double q2_next) {
  return reward + gamma * (1.0 - terminated) * std::min(q1_next, q2_next);
}

double SacTarget(double reward, double terminated, double gamma, double q1_next, double q2_next,
                 double alpha, double log_prob_next) {
  return reward + gamma * (1.0 - terminated) * (std::min(q1_next, q2_next) - alpha * log_prob_next);
}

AlphaLoss SacAlphaLoss(double log_alpha, std::span<const double> log_probs, double target_entropy) {
  if (log_probs.empty()) throw std::invalid_argument("SacAlphaLoss: empty batch");
  double mean = 0.0;
  for (double lp : log_probs) mean += lp + target_entropy;
  mean /= static_cast<double>(log_probs.size());
  return {-log_alpha * mean, -mean};
}

}  // namespace monorl
