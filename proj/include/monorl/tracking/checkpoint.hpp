#ifndef MONORL_TRACKING_CHECKPOINT_HPP_
#define MONORL_TRACKING_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "monorl/nn/mlp.hpp"

namespace monorl {

struct NamedNetwork {
  std::string name;
  Mlp net;
};

// Free parameter vectors that live outside any network (e.g. a
// state-independent log-std, SAC's log alpha).
struct NamedTensor {
  std::string name;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<NamedNetwork> networks;
  std::vector<NamedTensor> tensors;
};

// Writes <model_dir>/arch.json and <model_dir>/params.f32.
//
// arch.json lists networks in order with their layer specs
// {in, out, activation}, then the free tensors {name, size}.
// params.f32 holds, per network in order, every layer's weight matrix
// (layer order, row-major) followed by every layer's bias vector (layer
// order); then each free tensor. Little-endian IEEE-754 float32.
void SaveCheckpoint(const std::filesystem::path& model_dir, const Checkpoint& checkpoint);
// Bit-exact inverse of SaveCheckpoint. Throws std::runtime_error on a size
// mismatch between arch.json and params.f32.
Checkpoint LoadCheckpoint(const std::filesystem::path& model_dir);

}  // namespace monorl

#endif  // MONORL_TRACKING_CHECKPOINT_HPP_
