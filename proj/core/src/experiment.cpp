// Experiment spec validation and strict JSON round-tripping.

#include "djs/experiment.hpp"

#include "djs/errors.hpp"
#include "json.hpp"

namespace djs {

void ExperimentSpec::validate() const {
  network.validate();
  solver.validate();
  if (reps == 0) throw ConfigError("experiment: reps must be >= 1");
  if (output_dir.empty())
    throw ConfigError("experiment: output_dir must not be empty");
  if (formats.empty())
    throw ConfigError("experiment: formats must not be empty");
  for (const std::string& f : formats)
    if (f != "csv" && f != "json")
      throw ConfigError("experiment: unknown format \"" + f +
                        "\" (valid formats: csv, json)");
}

bool ExperimentSpec::wants_format(const std::string& format) const {
  for (const std::string& f : formats)
    if (f == format) return true;
  return false;
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::theory:
      return "theory";
    case RunMode::simulate:
      return "simulate";
    case RunMode::compare:
      return "compare";
    case RunMode::validate:
      return "validate";
  }
  throw ConfigError("experiment: unknown run mode");
}

RunMode run_mode_from_name(const std::string& name) {
  if (name == "theory") return RunMode::theory;
  if (name == "simulate") return RunMode::simulate;
  if (name == "compare") return RunMode::compare;
  if (name == "validate") return RunMode::validate;
  throw ConfigError("experiment: unknown mode \"" + name +
                    "\" (expected theory, simulate, compare, or validate)");
}

std::string to_json_string(const ExperimentSpec& spec) {
  nlohmann::json j{
      {"mode", run_mode_name(spec.mode)},
      {"network", nlohmann::json::parse(to_json_string(spec.network))},
      {"solver", nlohmann::json::parse(to_json_string(spec.solver))},
      {"reps", spec.reps},
      {"output_dir", spec.output_dir},
      {"formats", spec.formats},
  };
  return j.dump();
}

ExperimentSpec experiment_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("experiment: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment: expected a JSON object");
  static const std::vector<std::string> known = {
      "mode", "network", "solver", "reps", "output_dir", "formats"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("experiment: unknown key \"" + key +
                        "\" (valid keys: " + list + ")");
    }
  }
  ExperimentSpec spec;
  try {
    if (j.contains("mode"))
      spec.mode = run_mode_from_name(j["mode"].get<std::string>());
    if (j.contains("network"))
      spec.network = network_from_json(j["network"].dump());
    if (j.contains("solver"))
      spec.solver = solver_config_from_json(j["solver"].dump());
    if (j.contains("reps")) spec.reps = j["reps"].get<std::size_t>();
    if (j.contains("output_dir"))
      spec.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("formats"))
      spec.formats = j["formats"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("experiment: bad field type: ") + e.what());
  }
  return spec;
}

}  // namespace djs
