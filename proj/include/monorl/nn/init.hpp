#ifndef MONORL_NN_INIT_HPP_
#define MONORL_NN_INIT_HPP_

#include "monorl/nn/mlp.hpp"
#include "monorl/nn/rng.hpp"

namespace monorl {

// Orthogonal matrix scaled by gain. Draws an i.i.d. standard normal
// matrix, takes the QR factorization of its tall orientation and flips the
// column signs so that diag(R) > 0; the result is fully determined by rng.
// rows <= cols: M M^T = gain^2 I. rows > cols: M^T M = gain^2 I.
MatrixD OrthogonalInit(int rows, int cols, double gain, Rng& rng);

// Orthogonal weights, zero biases. Hidden layers use hidden_gain, the last
// layer output_gain.
template <typename T>
void InitOrthogonal(BasicMlp<T>& mlp, double hidden_gain, double output_gain, Rng& rng) {
  auto& layers = mlp.mutable_layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    const double gain = (i + 1 == layers.size()) ? output_gain : hidden_gain;
    auto& layer = layers[i];
    layer.weight = OrthogonalInit(static_cast<int>(layer.weight.rows()),
                                  static_cast<int>(layer.weight.cols()), gain, rng)
                       .template cast<T>();
    layer.bias.setZero();
  }
}

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike, the usual
// default for linear layers in the off-policy reference networks.
template <typename T>
void InitFanInUniform(BasicMlp<T>& mlp, Rng& rng) {
  for (auto& layer : mlp.mutable_layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = static_cast<T>(rng.Uniform(-bound, bound));
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] = static_cast<T>(rng.Uniform(-bound, bound));
    }
  }
}

}  // namespace monorl

#endif  // MONORL_NN_INIT_HPP_
