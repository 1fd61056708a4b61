#ifndef MONORL_ALGORITHMS_CONFIG_HPP_
#define MONORL_ALGORITHMS_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "monorl/error.hpp"

namespace monorl {

enum class ParamType { kFloat, kInt, kBool };

// One hyperparameter of an algorithm's schema. Numeric bounds are inclusive
// unless the matching *_open flag is set.
struct ParamSpec {
  std::string name;
  ParamType type = ParamType::kFloat;
  nlohmann::ordered_json default_value;
  double min = -1e300;
  double max = 1e300;
  bool min_open = false;
  bool max_open = false;
  std::string help;

  // "[0, 1]", "(0, inf)", ...
  std::string DescribeBounds() const;
};

using ConfigSchema = std::vector<ParamSpec>;

// Hyperparameter record of one run. `params` holds every schema field in
// schema order, so the manifest snapshot is complete and stable.
struct AlgoConfig {
  std::string algo_id;
  std::string env_id;
  uint64_t seed = 1;
  int64_t total_timesteps = 0;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();

  double Float(std::string_view name) const;
  int64_t Int(std::string_view name) const;
  bool Bool(std::string_view name) const;

  // {"algo_id", "env_id", "seed", "total_timesteps", <params...>}
  nlohmann::ordered_json ToJson() const;
};

// Parses "key=value" into (key, value). Throws ConfigError without '='.
std::pair<std::string, std::string> SplitAssignment(std::string_view text);

// Defaults from the schema, then `overrides` applied in order. Unknown keys,
// unparseable values and out-of-bounds values throw ConfigError naming the
// field (and bound). total_timesteps must be >= 0.
AlgoConfig BuildConfig(const ConfigSchema& schema, std::string algo_id, std::string env_id,
                       uint64_t seed, int64_t total_timesteps,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Same with already-typed JSON overrides (bench specs).
AlgoConfig BuildConfigJson(const ConfigSchema& schema, std::string algo_id, std::string env_id,
                           uint64_t seed, int64_t total_timesteps,
                           const nlohmann::ordered_json& overrides);

// Re-checks a config against its schema (every field present, typed and in
// bounds, nothing extra).
void ValidateConfig(const ConfigSchema& schema, const AlgoConfig& config);

}  // namespace monorl

#endif  // MONORL_ALGORITHMS_CONFIG_HPP_
