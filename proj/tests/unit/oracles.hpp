// Independent reference computations used as test oracles. Nothing here
// calls into the code paths it checks beyond reading network parameters.
#ifndef MONORL_TESTS_ORACLES_HPP_
#define MONORL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "monorl/nn/mlp.hpp"
#include "monorl/nn/rng.hpp"

namespace oracle {

inline double Act(monorl::Activation a, double z) {
  switch (a) {
    case monorl::Activation::kTanh:
      return std::tanh(z);
    case monorl::Activation::kRelu:
      return z > 0 ? z : 0.0;
    default:
      return z;
  }
}

// Straight-line affine + activation loop, one input row.
inline std::vector<double> ForwardOneRow(const monorl::MlpD& net, std::vector<double> x) {
  for (const auto& layer : net.layers()) {
    std::vector<double> y(layer.weight.rows());
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      double z = layer.bias[o];
      for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) z += layer.weight(o, i) * x[i];
      y[o] = Act(layer.activation, z);
    }
    x = std::move(y);
  }
  return x;
}

// L = sum_{b,j} w(b,j) * f(x_b)_j, evaluated row by row with the oracle loop.
inline double WeightedLoss(const monorl::MlpD& net, const monorl::MatrixD& x,
                           const monorl::MatrixD& w) {
  double loss = 0.0;
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    std::vector<double> row(x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) row[i] = x(b, i);
    auto y = ForwardOneRow(net, row);
    for (size_t j = 0; j < y.size(); ++j) loss += w(b, j) * y[j];
  }
  return loss;
}

inline double RelError(double a, double n) {
  const double scale = std::max(std::abs(a), std::abs(n));
  if (scale < 1e-8) return 0.0;
  return std::abs(a - n) / scale;
}

// Max relative error between Backward and central finite differences on a
// random subset of parameters plus every input entry.
inline double MaxGradRelError(const monorl::MlpD& net_in, const monorl::MatrixD& x,
                              const monorl::MatrixD& w, double h, monorl::Rng& rng,
                              int params_per_layer) {
  monorl::MlpD net = net_in;
  auto fwd = net.Forward(x);
  auto back = net.Backward(fwd.cache, w);
  double worst = 0.0;
  for (size_t k = 0; k < net.num_layers(); ++k) {
    const auto rows = net.layers()[k].weight.rows();
    const auto cols = net.layers()[k].weight.cols();
    for (int trial = 0; trial < params_per_layer; ++trial) {
      const auto r = static_cast<Eigen::Index>(rng.Below(rows));
      const auto c = static_cast<Eigen::Index>(rng.Below(cols));
      const double orig = net.layers()[k].weight(r, c);
      net.mutable_layers()[k].weight(r, c) = orig + h;
      const double up = WeightedLoss(net, x, w);
      net.mutable_layers()[k].weight(r, c) = orig - h;
      const double dn = WeightedLoss(net, x, w);
      net.mutable_layers()[k].weight(r, c) = orig;
      worst = std::max(worst, RelError(back.grads.layers[k].weight(r, c), (up - dn) / (2 * h)));

      const double borig = net.layers()[k].bias[r];
      net.mutable_layers()[k].bias[r] = borig + h;
      const double bup = WeightedLoss(net, x, w);
      net.mutable_layers()[k].bias[r] = borig - h;
      const double bdn = WeightedLoss(net, x, w);
      net.mutable_layers()[k].bias[r] = borig;
      worst = std::max(worst, RelError(back.grads.layers[k].bias[r], (bup - bdn) / (2 * h)));
    }
  }
  monorl::MatrixD xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp.data()[i];
    xp.data()[i] = orig + h;
    const double up = WeightedLoss(net, xp, w);
    xp.data()[i] = orig - h;
    const double dn = WeightedLoss(net, xp, w);
    xp.data()[i] = orig;
    worst = std::max(worst, RelError(back.grad_in.data()[i], (up - dn) / (2 * h)));
  }
  return worst;
}

struct ScalarAdam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;

  double Step(double theta, double g) {
    t += 1;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double mhat = m / (1 - std::pow(beta1, t));
    const double vhat = v / (1 - std::pow(beta2, t));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

inline double NormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// log density of a = tanh(u), u ~ N(mean, exp(log_std)) per dimension, via a
// central difference of the CDF P(tanh(u) <= a) = Phi((atanh(a) - mean) / std).
inline double SquashedLogDensityFd(const std::vector<double>& mean,
                                   const std::vector<double>& log_std,
                                   const std::vector<double>& a, double h) {
  double total = 0.0;
  for (size_t i = 0; i < mean.size(); ++i) {
    const double sd = std::exp(std::clamp(log_std[i], -5.0, 2.0));
    auto cdf = [&](double v) { return NormalCdf((std::atanh(v) - mean[i]) / sd); };
    total += std::log((cdf(a[i] + h) - cdf(a[i] - h)) / (2 * h));
  }
  return total;
}

}  // namespace oracle

#endif  // MONORL_TESTS_ORACLES_HPP_
