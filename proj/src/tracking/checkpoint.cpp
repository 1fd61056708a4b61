#include "monorl/tracking/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace monorl {

namespace {

using Json = nlohmann::ordered_json;

void AppendLe(std::string& out, const float* data, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits = std::bit_cast<uint32_t>(data[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.append(bytes, 4);
  }
}

void ReadLe(const std::string& in, size_t& offset, float* data, size_t count) {
  if (offset + 4 * count > in.size()) throw std::runtime_error("params.f32 is too short");
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, in.data() + offset, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    data[i] = std::bit_cast<float>(bits);
    offset += 4;
  }
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& model_dir, const Checkpoint& checkpoint) {
  std::filesystem::create_directories(model_dir);
  Json arch;
  arch["format"] = "monorl-mlp";
  arch["dtype"] = "float32";
  arch["byte_order"] = "little";
  arch["networks"] = Json::array();
  std::string blob;
  for (const auto& [name, net] : checkpoint.networks) {
    Json entry;
    entry["name"] = name;
    entry["input_dim"] = net.input_dim();
    entry["output_dim"] = net.output_dim();
    entry["layers"] = Json::array();
    for (const auto& spec : net.Specs()) {
      entry["layers"].push_back(
          {{"in", spec.in}, {"out", spec.out}, {"activation", ActivationName(spec.activation)}});
    }
    arch["networks"].push_back(entry);
    for (const auto& layer : net.layers()) {
      AppendLe(blob, layer.weight.data(), static_cast<size_t>(layer.weight.size()));
    }
    for (const auto& layer : net.layers()) {
      AppendLe(blob, layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
  }
  arch["tensors"] = Json::array();
  for (const auto& tensor : checkpoint.tensors) {
    arch["tensors"].push_back({{"name", tensor.name}, {"size", tensor.values.size()}});
    AppendLe(blob, tensor.values.data(), tensor.values.size());
  }
  std::ofstream(model_dir / "arch.json", std::ios::binary | std::ios::trunc) << arch.dump(2) << "\n";
  std::ofstream params(model_dir / "params.f32", std::ios::binary | std::ios::trunc);
  params.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!params) throw std::runtime_error("failed writing " + (model_dir / "params.f32").string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& model_dir) {
  std::ifstream arch_in(model_dir / "arch.json");
  if (!arch_in) throw std::runtime_error("missing " + (model_dir / "arch.json").string());
  const Json arch = Json::parse(arch_in);
  std::ifstream params_in(model_dir / "params.f32", std::ios::binary);
  if (!params_in) throw std::runtime_error("missing " + (model_dir / "params.f32").string());
  const std::string blob((std::istreambuf_iterator<char>(params_in)), std::istreambuf_iterator<char>());

  Checkpoint out;
  size_t offset = 0;
  for (const auto& entry : arch.at("networks")) {
    std::vector<LayerSpec> specs;
    for (const auto& l : entry.at("layers")) {
      specs.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                       ParseActivation(l.at("activation").get<std::string>())});
    }
    Mlp net(specs);
    auto& layers = net.mutable_layers();
    for (auto& layer : layers) {
      ReadLe(blob, offset, layer.weight.data(), static_cast<size_t>(layer.weight.size()));
    }
    for (auto& layer : layers) {
      ReadLe(blob, offset, layer.bias.data(), static_cast<size_t>(layer.bias.size()));
    }
    out.networks.push_back({entry.at("name").get<std::string>(), std::move(net)});
  }
  for (const auto& entry : arch.at("tensors")) {
    NamedTensor tensor{entry.at("name").get<std::string>(), {}};
    tensor.values.resize(entry.at("size").get<size_t>());
    ReadLe(blob, offset, tensor.values.data(), tensor.values.size());
    out.tensors.push_back(std::move(tensor));
  }
  if (offset != blob.size()) {
    throw std::runtime_error("params.f32 has " + std::to_string(blob.size() - offset) +
                             " trailing bytes");
  }
  return out;
}

}  // namespace monorl
