#include "monorl/envs/env.hpp"

#include <sstream>
#include <stdexcept>

#include "monorl/envs/classic.hpp"

namespace monorl {

std::string ActionSpace::Describe() const {
  std::ostringstream out;
  switch (kind) {
    case SpaceKind::kDiscrete:
      out << "{\"discrete\": " << n << "}";
      break;
    case SpaceKind::kDiscreteMasked:
      out << "{\"discrete_masked\": " << n << "}";
      break;
    case SpaceKind::kContinuous: {
      out << "{\"continuous\": " << n << ", \"low\": [";
      for (size_t i = 0; i < low.size(); ++i) out << (i ? ", " : "") << low[i];
      out << "], \"high\": [";
      for (size_t i = 0; i < high.size(); ++i) out << (i ? ", " : "") << high[i];
      out << "]}";
      break;
    }
  }
  return out.str();
}

EnvStep Env::StepDiscrete(int) {
  throw std::logic_error(std::string(id()) + " does not take discrete actions");
}

EnvStep Env::StepContinuous(std::span<const double>) {
  throw std::logic_error(std::string(id()) + " does not take continuous actions");
}

std::vector<uint8_t> Env::ActionMask() const {
  const ActionSpace space = action_space();
  return std::vector<uint8_t>(space.discrete() ? space.n : 0, 1);
}

std::unique_ptr<Env> MakeEnv(std::string_view id) {
  if (id == "cartpole-v1") return std::make_unique<CartPoleEnv>();
  if (id == "pendulum-v1") return std::make_unique<PendulumEnv>();
  if (id == "maskedgrid-v0") return std::make_unique<MaskedGridEnv>();
  throw std::invalid_argument("unknown env id '" + std::string(id) +
                              "' (known: cartpole-v1, pendulum-v1, maskedgrid-v0)");
}

std::vector<EnvDescriptor> ListEnvs() {
  std::vector<EnvDescriptor> out;
  for (const char* id : {"cartpole-v1", "pendulum-v1", "maskedgrid-v0"}) {
    out.push_back(DescribeEnv(id));
  }
  return out;
}

EnvDescriptor DescribeEnv(std::string_view id) {
  auto env = MakeEnv(id);
  return {std::string(env->id()), env->observation_dim(), env->action_space()};
}

}  // namespace monorl
