#include "monorl/nn/mlp.hpp"

#include <Eigen/QR>

#include "monorl/nn/init.hpp"

namespace monorl {

namespace detail {
uint64_t NextNetId() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

std::string_view ActivationName(Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::vector<LayerSpec> StackSpecs(int input_dim, const std::vector<int>& hidden, int output_dim,
                                  Activation hidden_activation, Activation output_activation) {
  std::vector<LayerSpec> specs;
  int in = input_dim;
  for (int width : hidden) {
    specs.push_back({in, width, hidden_activation});
    in = width;
  }
  specs.push_back({in, output_dim, output_activation});
  return specs;
}

MatrixD OrthogonalInit(int rows, int cols, double gain, Rng& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("OrthogonalInit: dims must be positive");
  const bool tall = rows >= cols;
  const int m = tall ? rows : cols;
  const int n = tall ? cols : rows;
  MatrixD sample(m, n);
  for (Eigen::Index i = 0; i < sample.size(); ++i) sample.data()[i] = rng.Normal();

  Eigen::HouseholderQR<MatrixD> qr(sample);
  MatrixD q = qr.householderQ() * MatrixD::Identity(m, n);
  const VectorD diag = qr.matrixQR().diagonal();
  for (int j = 0; j < n; ++j) {
    if (diag[j] < 0) q.col(j) *= -1.0;
  }
  q *= gain;
  if (tall) return q;
  return q.transpose();
}

}  // namespace monorl
