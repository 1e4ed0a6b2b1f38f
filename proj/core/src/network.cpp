// Network configuration validation, activation resolution, input-variance
// resolution, and the per-layer variance schedule.

#include "djs/network.hpp"

#include <cmath>

#include "djs/errors.hpp"
#include "djs/measure.hpp"
#include "json.hpp"

namespace djs {

void NetworkConfig::validate() const {
  if (layers == 0) throw ConfigError("network: layers must be >= 1");
  if (widths.size() != layers + 1)
    throw ConfigError("network: widths needs layers + 1 entries, got " +
                      std::to_string(widths.size()));
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("network: widths must be positive");
  if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2))
    throw ConfigError("network: sigma_b2 must be finite and >= 0");
  if (activation.empty()) throw ConfigError("network: activation is empty");
  if (activation == "custom" && custom_knots_json.empty())
    throw ConfigError("network: custom activation needs knots");
  if (q_recurrence == QRecurrence::without_bias && sigma_b2 != 0.0)
    throw ConfigError("network: without-bias recurrence requires sigma_b2 = 0");
  switch (input_mode) {
    case InputMode::iid_unit:
    case InputMode::q1_target:
      if (!x0.empty())
        throw ConfigError("network: x0 is only valid with explicit input");
      break;
    case InputMode::explicit_vector:
      if (x0.size() != n0())
        throw ConfigError("network: x0 must have n_0 = " +
                          std::to_string(n0()) + " entries");
      for (double v : x0)
        if (!std::isfinite(v))
          throw ConfigError("network: x0 entries must be finite");
      break;
  }
  if (input_mode == InputMode::q1_target && !q1_fixed_point) {
    if (!std::isfinite(q1) || q1 < sigma_b2)
      throw ConfigError("network: q1 must be finite and >= sigma_b2");
  }
}

Activation resolve_activation(const NetworkConfig& config) {
  if (config.activation == "custom")
    return activation_from_knots_json(config.custom_knots_json);
  return activation_by_name(config.activation, config.unsafe_unbounded);
}

double resolve_q1(const NetworkConfig& config, const Activation& act) {
  switch (config.input_mode) {
    case InputMode::iid_unit:
      return 1.0 + config.sigma_b2;
    case InputMode::q1_target:
      if (config.q1_fixed_point) {
        const double bias = config.q_recurrence == QRecurrence::with_bias
                                ? config.sigma_b2
                                : 0.0;
        return q_fixed_point(act, bias);
      }
      return config.q1;
    case InputMode::explicit_vector: {
      double sum = 0.0;
      for (double v : config.x0) sum += v * v;
      return sum / static_cast<double>(config.n0()) + config.sigma_b2;
    }
  }
  throw ConfigError("network: unknown input mode");
}

QSchedule schedule_for(const NetworkConfig& config, const Activation& act,
                       std::optional<double> source_q1) {
  const double q1v = source_q1 ? *source_q1 : resolve_q1(config, act);
  if (!(q1v >= config.sigma_b2))
    throw ConfigError("network: schedule seed q1 = " + format_double(q1v) +
                      " below sigma_b2");
  if (q1v > config.sigma_b2)
    return q_schedule(q1v, static_cast<int>(config.layers), act,
                      config.sigma_b2, config.q_recurrence);
  // Degenerate zero-signal seed: run the recurrence directly from q^1.
  QSchedule schedule;
  schedule.sigma_b2 = config.sigma_b2;
  schedule.source_q1 = q1v;
  schedule.recurrence = config.q_recurrence;
  schedule.q.push_back(q1v);
  for (std::size_t l = 1; l < config.layers; ++l) {
    const double prev = schedule.q.back();
    const double expect = gauss_expect(
        [&act](double x) {
          const double p = act.phi(x);
          return p * p;
        },
        prev, 201, act.breakpoints);
    const double bias =
        config.q_recurrence == QRecurrence::with_bias ? config.sigma_b2 : 0.0;
    schedule.q.push_back(expect + bias);
  }
  return schedule;
}

std::string input_mode_name(InputMode mode) {
  switch (mode) {
    case InputMode::iid_unit:
      return "iid-unit";
    case InputMode::q1_target:
      return "q1-target";
    case InputMode::explicit_vector:
      return "explicit";
  }
  throw ConfigError("network: unknown input mode");
}

InputMode input_mode_from_name(const std::string& name) {
  if (name == "iid-unit") return InputMode::iid_unit;
  if (name == "q1-target") return InputMode::q1_target;
  if (name == "explicit") return InputMode::explicit_vector;
  throw ConfigError("network: unknown input mode \"" + name +
                    "\" (expected iid-unit, q1-target, or explicit)");
}

namespace {

std::string recurrence_name(QRecurrence rec) {
  return rec == QRecurrence::with_bias ? "with-bias" : "without-bias";
}

QRecurrence recurrence_from_name(const std::string& name) {
  if (name == "with-bias") return QRecurrence::with_bias;
  if (name == "without-bias") return QRecurrence::without_bias;
  throw ConfigError("network: unknown q_recurrence \"" + name + "\"");
}

}  // namespace

std::string to_json_string(const NetworkConfig& config) {
  nlohmann::json j{
      {"layers", config.layers},
      {"widths", config.widths},
      {"sigma_b2", config.sigma_b2},
      {"activation", config.activation},
      {"unsafe_unbounded", config.unsafe_unbounded},
      {"input_mode", input_mode_name(config.input_mode)},
      {"q1", config.q1},
      {"q1_fixed_point", config.q1_fixed_point},
      {"seed", config.seed},
      {"q_recurrence", recurrence_name(config.q_recurrence)},
  };
  if (!config.custom_knots_json.empty())
    j["custom_knots"] = nlohmann::json::parse(config.custom_knots_json);
  if (!config.x0.empty()) j["x0"] = config.x0;
  return j.dump();
}

NetworkConfig network_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("network: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("network: expected a JSON object");
  static const std::vector<std::string> known = {
      "layers", "widths",         "sigma_b2",       "activation",
      "custom_knots", "unsafe_unbounded", "input_mode", "q1",
      "q1_fixed_point", "x0",     "seed",           "q_recurrence"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("network: unknown key \"" + key + "\" (valid keys: " +
                        list + ")");
    }
  }
  NetworkConfig config;
  try {
    if (j.contains("layers")) config.layers = j["layers"].get<std::size_t>();
    if (j.contains("widths"))
      config.widths = j["widths"].get<std::vector<std::size_t>>();
    if (j.contains("sigma_b2")) config.sigma_b2 = j["sigma_b2"].get<double>();
    if (j.contains("activation"))
      config.activation = j["activation"].get<std::string>();
    if (j.contains("custom_knots")) {
      // Accept either the bare knot array or the {"knots": ...} wrapper.
      if (j["custom_knots"].is_array())
        config.custom_knots_json =
            nlohmann::json{{"knots", j["custom_knots"]}}.dump();
      else
        config.custom_knots_json = j["custom_knots"].dump();
    }
    if (j.contains("unsafe_unbounded"))
      config.unsafe_unbounded = j["unsafe_unbounded"].get<bool>();
    if (j.contains("input_mode"))
      config.input_mode =
          input_mode_from_name(j["input_mode"].get<std::string>());
    if (j.contains("q1")) config.q1 = j["q1"].get<double>();
    if (j.contains("q1_fixed_point"))
      config.q1_fixed_point = j["q1_fixed_point"].get<bool>();
    if (j.contains("x0")) config.x0 = j["x0"].get<std::vector<double>>();
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("q_recurrence"))
      config.q_recurrence =
          recurrence_from_name(j["q_recurrence"].get<std::string>());
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("network: bad field type: ") + e.what());
  }
  if (config.widths.empty())
    config.widths.assign(config.layers + 1, std::size_t{256});
  return config;
}

}  // namespace djs
