#pragma once
// Activation functions with the metadata the Gaussian layer statistics need
// (bounds, derivative breakpoints), Gaussian expectations with
// breakpoint-aware quadrature, the layer variance schedule and its fixed
// point, and the law of the squared derivative under a centered Gaussian.

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "djs/measure.hpp"

namespace djs {

struct Activation {
  std::string name;
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  double phi_bound = 0;   // sup |phi|; +infinity marks an unbounded activation
  double dphi_bound = 0;  // sup |phi'|
  std::vector<double> breakpoints;  // ascending; jump points of phi'

  bool bounded() const noexcept;
  // Sampled sanity checks of the declared bounds; throws ConfigError.
  void validate() const;
};

Activation make_tanh();
Activation make_hard_tanh();
// erf(x * sqrt(pi)/2), normalized so phi'(0) = 1.
Activation make_erf_unit_slope();
Activation make_scaled_shifted_tanh(double scale = 1.2, double rate = 0.75,
                                    double shift = 0.2);
// Unbounded; only reachable with unsafe_unbounded = true.
Activation make_relu();
// Piecewise-linear interpolation through the knots, constant beyond the
// first/last knot. Knot x values must be strictly increasing.
Activation make_piecewise_linear(std::string name,
                                 std::vector<std::pair<double, double>> knots);
// Parses {"knots": [[x, y], ...]}.
Activation activation_from_knots_json(std::string_view json,
                                      std::string name = "custom");

// Lookup by name: tanh, hard-tanh, erf, scaled-shifted-tanh, relu.
Activation activation_by_name(const std::string& name,
                              bool unsafe_unbounded = false);
std::vector<std::string> builtin_activation_names();

// Which variance recurrence to use: with the additive bias term (default)
// or without it.
enum class QRecurrence { with_bias, without_bias };

// Per-layer Gaussian variances q^1..q^L.
struct QSchedule {
  std::vector<double> q;
  double sigma_b2 = 0;
  double source_q1 = 0;
  QRecurrence recurrence = QRecurrence::with_bias;
};
std::string to_json_string(const QSchedule& schedule);
QSchedule q_schedule_from_json(std::string_view json);

// E f(sqrt(q) Z), Z standard normal. Smooth integrands use a Gauss-Hermite
// rule of the given order. When breakpoints (in the argument of f) are
// supplied, the domain is split at each breakpoint mapped back to Z-space,
// with piecewise Gauss-Legendre panels in between and the Hermite rule's
// own tail nodes beyond the panel range.
double gauss_expect(const std::function<double(double)>& f, double q,
                    int order = 201, std::span<const double> breakpoints = {});

// q^1 = q1; q^l = E phi(sqrt(q^{l-1}) Z)^2 (+ sigma_b2 when with_bias).
QSchedule q_schedule(double q1, int layers, const Activation& act,
                     double sigma_b2,
                     QRecurrence recurrence = QRecurrence::with_bias,
                     int order = 201);

// Damped fixed point of the variance map; returns q* with
// |q* - map(q*)| < tol.
double q_fixed_point(const Activation& act, double sigma_b2, double tol = 1e-12,
                     double damping = 0.5, int max_iter = 10000,
                     int order = 201);

// Law of phi'(sqrt(q) Z)^2 discretized on the quadrature nodes.
SpectralMeasure dphi_squared_law(const Activation& act, double q,
                                 int order = 201);

}  // namespace djs
