#ifndef MONORL_NN_MLP_HPP_
#define MONORL_NN_MLP_HPP_

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monorl/error.hpp"

namespace monorl {

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = MatrixT<float>;
using Vector = VectorT<float>;
using MatrixD = MatrixT<double>;
using VectorD = VectorT<double>;

enum class Activation { kTanh, kRelu, kIdentity };

std::string_view ActivationName(Activation activation);
Activation ParseActivation(std::string_view name);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation activation = Activation::kIdentity;

  bool operator==(const LayerSpec&) const = default;
};

// Layer specs for input -> hidden... -> output, hidden layers sharing one
// activation.
std::vector<LayerSpec> StackSpecs(int input_dim, const std::vector<int>& hidden,
                                  int output_dim, Activation hidden_activation,
                                  Activation output_activation = Activation::kIdentity);

template <typename T>
struct DenseLayer {
  MatrixT<T> weight;  // out x in
  VectorT<T> bias;    // out
  Activation activation = Activation::kIdentity;
};

template <typename T>
struct LayerGrad {
  MatrixT<T> weight;
  VectorT<T> bias;
};

// Gradients shaped exactly like an Mlp's parameters.
template <typename T>
struct GradSet {
  std::vector<LayerGrad<T>> layers;

  // Weight block then bias block per layer, in layer order.
  std::vector<std::span<T>> Blocks() {
    std::vector<std::span<T>> blocks;
    blocks.reserve(layers.size() * 2);
    for (auto& layer : layers) {
      blocks.emplace_back(layer.weight.data(), static_cast<size_t>(layer.weight.size()));
      blocks.emplace_back(layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
    return blocks;
  }
  std::vector<std::span<const T>> Blocks() const {
    std::vector<std::span<const T>> blocks;
    blocks.reserve(layers.size() * 2);
    for (const auto& layer : layers) {
      blocks.emplace_back(layer.weight.data(), static_cast<size_t>(layer.weight.size()));
      blocks.emplace_back(layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
    return blocks;
  }

  GradSet& operator+=(const GradSet& other) {
    if (other.layers.size() != layers.size()) {
      throw DimensionError("GradSet::operator+= layer count", static_cast<long>(layers.size()),
                           static_cast<long>(other.layers.size()));
    }
    for (size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }
};

// Per-layer record of a forward pass; consumed by BasicMlp::Backward.
template <typename T>
struct ForwardCache {
  uint64_t net_id = 0;
  uint64_t version = 0;
  std::vector<MatrixT<T>> inputs;   // input to layer i
  std::vector<MatrixT<T>> outputs;  // post-activation output of layer i
};

template <typename T>
struct ForwardResult {
  MatrixT<T> outputs;
  ForwardCache<T> cache;
};

template <typename T>
struct BackwardResult {
  GradSet<T> grads;
  MatrixT<T> grad_in;
};

namespace detail {
uint64_t NextNetId();
}  // namespace detail

// Multi-layer perceptron over row-major batches (B x input_dim).
//
// Every mutable access to the parameters bumps a version counter, and each
// ForwardCache records the (network id, version) that produced it, so
// Backward rejects caches from another network or from before an update.
template <typename T>
class BasicMlp {
 public:
  BasicMlp() : id_(detail::NextNetId()) {}

  // Zero-initialized parameters.
  explicit BasicMlp(const std::vector<LayerSpec>& specs) : id_(detail::NextNetId()) {
    if (specs.empty()) throw std::invalid_argument("Mlp needs at least one layer");
    for (size_t i = 0; i < specs.size(); ++i) {
      const LayerSpec& s = specs[i];
      if (s.in < 1 || s.out < 1) throw std::invalid_argument("Mlp layer dims must be positive");
      if (i > 0 && s.in != specs[i - 1].out) {
        throw DimensionError("Mlp layer " + std::to_string(i) + " input width", specs[i - 1].out,
                             s.in);
      }
      layers_.push_back({MatrixT<T>::Zero(s.out, s.in), VectorT<T>::Zero(s.out), s.activation});
    }
  }

  BasicMlp(const BasicMlp& other)
      : layers_(other.layers_), id_(detail::NextNetId()), version_(0) {}
  BasicMlp& operator=(const BasicMlp& other) {
    if (this != &other) {
      layers_ = other.layers_;
      ++version_;
    }
    return *this;
  }
  BasicMlp(BasicMlp&&) noexcept = default;
  BasicMlp& operator=(BasicMlp&&) noexcept = default;

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  size_t num_layers() const { return layers_.size(); }
  uint64_t id() const { return id_; }
  uint64_t version() const { return version_; }

  const std::vector<DenseLayer<T>>& layers() const { return layers_; }
  std::vector<DenseLayer<T>>& mutable_layers() {
    ++version_;
    return layers_;
  }

  std::vector<LayerSpec> Specs() const {
    std::vector<LayerSpec> specs;
    for (const auto& layer : layers_) {
      specs.push_back({static_cast<int>(layer.weight.cols()), static_cast<int>(layer.weight.rows()),
                       layer.activation});
    }
    return specs;
  }

  size_t ParameterCount() const {
    size_t n = 0;
    for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
  }

  // Weight block then bias block per layer, in layer order.
  std::vector<std::span<T>> ParameterBlocks() {
    ++version_;
    std::vector<std::span<T>> blocks;
    for (auto& layer : layers_) {
      blocks.emplace_back(layer.weight.data(), static_cast<size_t>(layer.weight.size()));
      blocks.emplace_back(layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
    return blocks;
  }
  std::vector<std::span<const T>> ParameterBlocks() const {
    std::vector<std::span<const T>> blocks;
    for (const auto& layer : layers_) {
      blocks.emplace_back(layer.weight.data(), static_cast<size_t>(layer.weight.size()));
      blocks.emplace_back(layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
    return blocks;
  }

  GradSet<T> ZeroGrads() const {
    GradSet<T> grads;
    for (const auto& layer : layers_) {
      grads.layers.push_back({MatrixT<T>::Zero(layer.weight.rows(), layer.weight.cols()),
                              VectorT<T>::Zero(layer.bias.size())});
    }
    return grads;
  }

  // Inference only; no cache.
  MatrixT<T> Predict(const MatrixT<T>& batch) const {
    CheckInput(batch);
    MatrixT<T> x = batch;
    MatrixT<T> z;
    for (const auto& layer : layers_) {
      Affine(layer, x, z);
      Activate(layer.activation, z);
      x.swap(z);
    }
    return x;
  }

  ForwardResult<T> Forward(const MatrixT<T>& batch) const {
    CheckInput(batch);
    ForwardResult<T> result;
    result.cache.net_id = id_;
    result.cache.version = version_;
    result.cache.inputs.reserve(layers_.size());
    result.cache.outputs.reserve(layers_.size());
    const MatrixT<T>* x = &batch;
    for (const auto& layer : layers_) {
      result.cache.inputs.push_back(*x);
      MatrixT<T> z;
      Affine(layer, *x, z);
      Activate(layer.activation, z);
      result.cache.outputs.push_back(std::move(z));
      x = &result.cache.outputs.back();
    }
    result.outputs = result.cache.outputs.back();
    return result;
  }

  // Reverse-mode pass. Parameter gradients are summed over the batch.
  // With want_param_grads = false only grad_in is produced (used when a
  // network is differentiated through but not trained, e.g. a critic inside
  // an actor loss).
  BackwardResult<T> Backward(const ForwardCache<T>& cache, const MatrixT<T>& grad_out,
                             bool want_param_grads = true) const {
    if (cache.net_id != id_) {
      throw std::invalid_argument("Mlp::Backward: cache was produced by a different network");
    }
    if (cache.version != version_) {
      throw std::invalid_argument("Mlp::Backward: stale cache (parameters changed since forward)");
    }
    if (cache.outputs.size() != layers_.size()) {
      throw DimensionError("Mlp::Backward cache layers", static_cast<long>(layers_.size()),
                           static_cast<long>(cache.outputs.size()));
    }
    const auto batch = cache.inputs.front().rows();
    if (grad_out.rows() != batch) {
      throw DimensionError("Mlp::Backward grad_out rows", static_cast<long>(batch),
                           static_cast<long>(grad_out.rows()));
    }
    if (grad_out.cols() != output_dim()) {
      throw DimensionError("Mlp::Backward grad_out cols", output_dim(),
                           static_cast<long>(grad_out.cols()));
    }
    BackwardResult<T> result;
    if (want_param_grads) result.grads.layers.resize(layers_.size());
    MatrixT<T> delta = grad_out;
    for (size_t k = layers_.size(); k-- > 0;) {
      const auto& layer = layers_[k];
      const MatrixT<T>& y = cache.outputs[k];
      switch (layer.activation) {
        case Activation::kTanh:
          delta.array() *= (T(1) - y.array().square());
          break;
        case Activation::kRelu:
          delta.array() *= (y.array() > T(0)).template cast<T>();
          break;
        case Activation::kIdentity:
          break;
      }
      if (want_param_grads) {
        result.grads.layers[k].weight.noalias() = delta.transpose() * cache.inputs[k];
        result.grads.layers[k].bias = delta.colwise().sum().transpose();
      }
      MatrixT<T> next(delta.rows(), layer.weight.cols());
      next.noalias() = delta * layer.weight;
      delta.swap(next);
    }
    result.grad_in = std::move(delta);
    return result;
  }

  template <typename U>
  BasicMlp<U> Cast() const {
    BasicMlp<U> out(Specs());
    auto& dst = out.mutable_layers();
    for (size_t i = 0; i < layers_.size(); ++i) {
      dst[i].weight = layers_[i].weight.template cast<U>();
      dst[i].bias = layers_[i].bias.template cast<U>();
    }
    return out;
  }

 private:
  void CheckInput(const MatrixT<T>& batch) const {
    if (batch.cols() != input_dim()) {
      throw DimensionError("Mlp input columns", input_dim(), static_cast<long>(batch.cols()));
    }
  }

  static void Affine(const DenseLayer<T>& layer, const MatrixT<T>& x, MatrixT<T>& z) {
    z.resize(x.rows(), layer.weight.rows());
    z.noalias() = x * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
  }

  static void Activate(Activation activation, MatrixT<T>& z) {
    switch (activation) {
      case Activation::kTanh:
        z = z.array().tanh();
        break;
      case Activation::kRelu:
        z = z.cwiseMax(T(0));
        break;
      case Activation::kIdentity:
        break;
    }
  }

  std::vector<DenseLayer<T>> layers_;
  uint64_t id_;
  uint64_t version_ = 0;
};

using Mlp = BasicMlp<float>;
using MlpD = BasicMlp<double>;

}  // namespace monorl

#endif  // MONORL_NN_MLP_HPP_
