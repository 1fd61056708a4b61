#ifndef MONORL_NN_OPTIM_HPP_
#define MONORL_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "monorl/error.hpp"
#include "monorl/nn/mlp.hpp"

namespace monorl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments mirror the parameter blocks they were first stepped with.
template <typename T>
struct AdamState {
  AdamConfig config;
  int64_t t = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// One Adam step with bias correction over matching parameter/gradient
// blocks. Throws (without touching anything) on shape mismatch or a
// non-finite gradient.
template <typename T>
void AdamStep(const std::vector<std::span<T>>& params,
              const std::vector<std::span<const T>>& grads, AdamState<T>& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("AdamStep block count", static_cast<long>(params.size()),
                         static_cast<long>(grads.size()));
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t b = 0; b < params.size(); ++b) {
      state.m[b].assign(params[b].size(), T(0));
      state.v[b].assign(params[b].size(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("AdamStep state block count", static_cast<long>(state.m.size()),
                         static_cast<long>(params.size()));
  }
  for (size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || state.m[b].size() != params[b].size()) {
      throw DimensionError("AdamStep block " + std::to_string(b) + " size",
                           static_cast<long>(params[b].size()), static_cast<long>(grads[b].size()));
    }
    for (T g : grads[b]) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw std::domain_error("AdamStep: non-finite gradient in block " + std::to_string(b));
      }
    }
  }

  const AdamConfig& c = state.config;
  state.t += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (size_t i = 0; i < params[b].size(); ++i) {
      const double g = static_cast<double>(grads[b][i]);
      const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * g;
      const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = c.lr * (mi / bias1) / (std::sqrt(vi / bias2) + c.eps);
      params[b][i] = static_cast<T>(static_cast<double>(params[b][i]) - step);
    }
  }
}

template <typename T>
void AdamStep(BasicMlp<T>& mlp, const GradSet<T>& grads, AdamState<T>& state) {
  AdamStep(mlp.ParameterBlocks(), grads.Blocks(), state);
}

// Global L2 norm over every block passed in; when it exceeds max_norm all
// blocks are scaled by max_norm / norm. Returns the pre-clip norm.
template <typename T>
double ClipGradNorm(const std::vector<std::span<T>>& grads, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("ClipGradNorm: max_norm must be > 0");
  double sq = 0.0;
  for (const auto& block : grads) {
    for (T g : block) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& block : grads) {
      for (T& g : block) g = static_cast<T>(static_cast<double>(g) * scale);
    }
  }
  return norm;
}

template <typename T>
std::vector<std::span<const T>> AsConst(const std::vector<std::span<T>>& blocks) {
  return {blocks.begin(), blocks.end()};
}

// Concatenates block lists (e.g. the gradients of an actor and a critic that
// share one optimizer).
template <typename T>
std::vector<std::span<T>> JoinBlocks(std::initializer_list<std::vector<std::span<T>>> parts) {
  std::vector<std::span<T>> all;
  for (const auto& part : parts) all.insert(all.end(), part.begin(), part.end());
  return all;
}

}  // namespace monorl

#endif  // MONORL_NN_OPTIM_HPP_
