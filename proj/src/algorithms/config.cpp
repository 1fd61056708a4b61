#include "monorl/algorithms/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace monorl {

namespace {

using Json = nlohmann::ordered_json;

std::string FormatBound(double v) {
  if (v <= -1e300) return "-inf";
  if (v >= 1e300) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

const ParamSpec& Find(const ConfigSchema& schema, std::string_view name) {
  for (const auto& spec : schema) {
    if (spec.name == name) return spec;
  }
  std::string known;
  for (const auto& spec : schema) known += (known.empty() ? "" : ", ") + spec.name;
  throw ConfigError("unknown config key '" + std::string(name) + "' (known: " + known + ")");
}

void CheckBounds(const ParamSpec& spec, double v) {
  if (spec.type == ParamType::kBool) return;
  const bool low_ok = spec.min_open ? v > spec.min : v >= spec.min;
  const bool high_ok = spec.max_open ? v < spec.max : v <= spec.max;
  if (!std::isfinite(v) || !low_ok || !high_ok) {
    throw ConfigError("config value " + spec.name + "=" + FormatBound(v) + " is outside " +
                      spec.DescribeBounds());
  }
}

Json Coerce(const ParamSpec& spec, const Json& value) {
  switch (spec.type) {
    case ParamType::kBool:
      if (value.is_boolean()) return value;
      break;
    case ParamType::kInt:
      if (value.is_number_integer()) {
        CheckBounds(spec, value.get<double>());
        return value.get<int64_t>();
      }
      if (value.is_number_float()) {
        const double v = value.get<double>();
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) {
          CheckBounds(spec, v);
          return static_cast<int64_t>(v);
        }
      }
      break;
    case ParamType::kFloat:
      if (value.is_number()) {
        CheckBounds(spec, value.get<double>());
        return value.get<double>();
      }
      break;
  }
  const char* expected = spec.type == ParamType::kBool  ? "a boolean"
                         : spec.type == ParamType::kInt ? "an integer"
                                                        : "a number";
  throw ConfigError("config value " + spec.name + "=" + value.dump() + " is not " + expected);
}

Json ParseText(const ParamSpec& spec, const std::string& text) {
  if (spec.type == ParamType::kBool) {
    if (text == "true" || text == "1" || text == "True") return true;
    if (text == "false" || text == "0" || text == "False") return false;
    throw ConfigError("config value " + spec.name + "=" + text + " is not a boolean");
  }
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config value " + spec.name + "=" + text + " is not a number");
  }
  if (spec.type == ParamType::kInt) {
    int64_t i = 0;
    auto [iptr, iec] = std::from_chars(text.data(), end, i);
    if (iec == std::errc() && iptr == end) return Coerce(spec, Json(i));
  }
  return Coerce(spec, Json(v));
}

AlgoConfig Defaults(const ConfigSchema& schema, std::string algo_id, std::string env_id,
                    uint64_t seed, int64_t total_timesteps) {
  if (total_timesteps < 0) {
    throw ConfigError("config value total_timesteps=" + std::to_string(total_timesteps) +
                      " is outside [0, inf)");
  }
  AlgoConfig config;
  config.algo_id = std::move(algo_id);
  config.env_id = std::move(env_id);
  config.seed = seed;
  config.total_timesteps = total_timesteps;
  for (const auto& spec : schema) config.params[spec.name] = spec.default_value;
  return config;
}

const Json& Lookup(const AlgoConfig& config, std::string_view name) {
  auto it = config.params.find(std::string(name));
  if (it == config.params.end()) {
    throw ConfigError("config for " + config.algo_id + " has no field '" + std::string(name) + "'");
  }
  return *it;
}

}  // namespace

std::string ParamSpec::DescribeBounds() const {
  return std::string(min_open ? "(" : "[") + FormatBound(min) + ", " + FormatBound(max) +
         (max_open ? ")" : "]");
}

double AlgoConfig::Float(std::string_view name) const { return Lookup(*this, name).get<double>(); }
int64_t AlgoConfig::Int(std::string_view name) const { return Lookup(*this, name).get<int64_t>(); }
bool AlgoConfig::Bool(std::string_view name) const { return Lookup(*this, name).get<bool>(); }

Json AlgoConfig::ToJson() const {
  Json j;
  j["algo_id"] = algo_id;
  j["env_id"] = env_id;
  j["seed"] = seed;
  j["total_timesteps"] = total_timesteps;
  for (const auto& [key, value] : params.items()) j[key] = value;
  return j;
}

std::pair<std::string, std::string> SplitAssignment(std::string_view text) {
  const size_t eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("expected key=value, got '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

AlgoConfig BuildConfig(const ConfigSchema& schema, std::string algo_id, std::string env_id,
                       uint64_t seed, int64_t total_timesteps,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  AlgoConfig config = Defaults(schema, std::move(algo_id), std::move(env_id), seed, total_timesteps);
  for (const auto& [key, text] : overrides) {
    config.params[key] = ParseText(Find(schema, key), text);
  }
  return config;
}

AlgoConfig BuildConfigJson(const ConfigSchema& schema, std::string algo_id, std::string env_id,
                           uint64_t seed, int64_t total_timesteps, const Json& overrides) {
  AlgoConfig config = Defaults(schema, std::move(algo_id), std::move(env_id), seed, total_timesteps);
  if (overrides.is_null()) return config;
  if (!overrides.is_object()) throw ConfigError("config overrides must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    config.params[key] = Coerce(Find(schema, key), value);
  }
  return config;
}

void ValidateConfig(const ConfigSchema& schema, const AlgoConfig& config) {
  for (const auto& [key, value] : config.params.items()) Coerce(Find(schema, key), value);
  for (const auto& spec : schema) {
    if (!config.params.contains(spec.name)) {
      throw ConfigError("config for " + config.algo_id + " is missing '" + spec.name + "'");
    }
  }
  if (config.total_timesteps < 0) throw ConfigError("total_timesteps must be >= 0");
}

}  // namespace monorl
