#include "loadsynth/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "loadsynth/errors.hpp"

namespace loadsynth {

using nlohmann::json;

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
  if (steps < 2) fail("steps must be at least 2");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) fail("need 0 < beta_start < beta_end < 1");
  estimator().validate();
  if (epochs < 0) fail("epochs must be non-negative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
  if (synthetic) {
    if (!input.empty()) fail("set either input or synthetic, not both");
    if (synthetic_customers < 2) fail("synthetic_customers must be at least 2");
    if (synthetic_days < 20) fail("synthetic_days must be at least 20");
  }
  const double total = split_train + split_validation + split_test;
  if (split_train <= 0.0 || split_validation < 0.0 || split_test < 0.0 || std::abs(total - 1.0) > 1e-9) {
    fail("split ratios must be non-negative, train positive, and sum to 1");
  }
  if (augmentation_factor < 1) fail("augmentation_factor must be at least 1");
  if (forecaster_epochs < 1) fail("forecaster_epochs must be positive");
}

nn::EstimatorConfig RunConfig::estimator() const {
  nn::EstimatorConfig c;
  c.d_model = d_model;
  c.n_layers = n_layers;
  c.n_heads = n_heads;
  c.channels = d_model;
  c.use_attention = use_attention;
  c.use_skip_connections = use_skip_connections;
  return c;
}

ad::AdamOptions RunConfig::adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }

data::SplitRatios RunConfig::split() const { return {split_train, split_validation, split_test}; }

eval::ForecasterOptions RunConfig::forecaster() const {
  eval::ForecasterOptions f;
  f.epochs = forecaster_epochs;
  f.seed = derive_seed(seed, "forecaster");
  return f;
}

#define LOADSYNTH_CONFIG_FIELDS(X) \
  X(steps)                         \
  X(beta_start)                    \
  X(beta_end)                      \
  X(d_model)                       \
  X(n_layers)                      \
  X(n_heads)                       \
  X(use_attention)                 \
  X(use_skip_connections)          \
  X(epochs)                        \
  X(batch_size)                    \
  X(learning_rate)                 \
  X(adam_beta1)                    \
  X(adam_beta2)                    \
  X(adam_epsilon)                  \
  X(seed)                          \
  X(input)                         \
  X(synthetic)                     \
  X(synthetic_customers)           \
  X(synthetic_days)                \
  X(customers)                     \
  X(split_train)                   \
  X(split_validation)              \
  X(split_test)                    \
  X(augmentation_factor)           \
  X(forecaster_epochs)

std::string config_to_json(const RunConfig& c) {
  json j;
#define X(name) j[#name] = c.name;
  LOADSYNTH_CONFIG_FIELDS(X)
#undef X
  return j.dump();
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ValidationError("expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ValidationError("expected an integer");
      if (std::is_unsigned_v<T> && j.is_number_integer() && !j.is_number_unsigned()) {
        throw ValidationError("expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ValidationError("expected a number");
    }
    out = j.get<T>();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  } catch (const json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig config_from_json(const std::string& text, RunConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(name)                               \
  if (key == #name) {                         \
    read_field(value, #name, c.name);         \
    known = true;                             \
  }
    LOADSYNTH_CONFIG_FIELDS(X)
#undef X
    if (!known) throw ValidationError("unknown config key '" + key + "'");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace loadsynth
