#pragma once
// Network architecture description: layer widths, bias variance, activation
// selection, input conventions, and the variance schedule they induce.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "djs/activation.hpp"

namespace djs {

// How the input vector x^0 is produced.
//  - iid_unit: independent standard normal entries, so q^1 -> 1 + sigma_b2.
//  - q1_target: constant entries sized so the realized q^1 equals q1 exactly.
//  - explicit_vector: caller-supplied x0.
enum class InputMode { iid_unit, q1_target, explicit_vector };

struct NetworkConfig {
  std::size_t layers = 1;
  std::vector<std::size_t> widths;  // n_0..n_L, layers + 1 entries
  double sigma_b2 = 0.0;
  std::string activation = "tanh";
  std::string custom_knots_json;  // knot list when activation == "custom"
  bool unsafe_unbounded = false;
  InputMode input_mode = InputMode::q1_target;
  double q1 = 1.0;
  bool q1_fixed_point = false;  // replace q1 by the variance-map fixed point
  std::vector<double> x0;       // explicit_vector mode only
  std::uint64_t seed = 1;
  QRecurrence q_recurrence = QRecurrence::with_bias;

  void validate() const;
  std::size_t n0() const { return widths.front(); }
  std::size_t nL() const { return widths.back(); }
};

Activation resolve_activation(const NetworkConfig& config);

// Input variance q^1 implied by the config: the target value, the variance
// map's fixed point, or the explicit vector's mean square plus sigma_b2.
double resolve_q1(const NetworkConfig& config, const Activation& act);

// Variance schedule q^1..q^L seeded at source_q1 (defaults to resolve_q1).
// The degenerate seed q^1 == sigma_b2 (zero input signal) is propagated
// directly through the recurrence instead of rejected.
QSchedule schedule_for(const NetworkConfig& config, const Activation& act,
                       std::optional<double> source_q1 = std::nullopt);

std::string input_mode_name(InputMode mode);
InputMode input_mode_from_name(const std::string& name);

std::string to_json_string(const NetworkConfig& config);
NetworkConfig network_from_json(const std::string& text);

}  // namespace djs
