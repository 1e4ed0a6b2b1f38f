#include "djs/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "djs/errors.hpp"
#include "quadrature.hpp"

namespace djs {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Standard normal mass beyond 12 is ~2e-33; panels never extend past this.
constexpr double kTailCut = 12.0;

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

struct WeightedNode {
  double x;
  double w;
};

// Node/weight pairs approximating E f(Z). Without breakpoints this is the
// Gauss-Hermite rule. With breakpoints (already mapped to Z-space) the range
// between the outermost cut points is covered by Gauss-Legendre panels split
// at every breakpoint (long panels subdivided so the Gaussian factor stays
// well resolved), and the Hermite rule contributes only its nodes beyond the
// panel range.
std::vector<WeightedNode> expectation_nodes(int order,
                                            std::span<const double> z_breaks) {
  if (order < 2) throw ConfigError("quadrature order must be at least 2");
  const auto& hermite = detail::gauss_hermite_normal(order);

  std::vector<double> inner;
  for (double b : z_breaks) {
    if (std::abs(b) < kTailCut) inner.push_back(b);
  }
  std::sort(inner.begin(), inner.end());
  inner.erase(std::unique(inner.begin(), inner.end()), inner.end());

  std::vector<WeightedNode> nodes;
  if (inner.empty()) {
    nodes.reserve(hermite.nodes.size());
    for (std::size_t i = 0; i < hermite.nodes.size(); ++i) {
      nodes.push_back({hermite.nodes[i], hermite.weights[i]});
    }
    return nodes;
  }

  std::vector<double> edges;
  edges.push_back(-kTailCut);
  edges.insert(edges.end(), inner.begin(), inner.end());
  edges.push_back(kTailCut);

  const int panel_order = std::min(order, 64);
  const auto& legendre = detail::gauss_legendre01(panel_order);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double lo = edges[p];
    const double hi = edges[p + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / 3.0)));
    const double step = (hi - lo) / pieces;
    for (int piece = 0; piece < pieces; ++piece) {
      const double a = lo + piece * step;
      for (std::size_t i = 0; i < legendre.nodes.size(); ++i) {
        const double x = a + step * legendre.nodes[i];
        nodes.push_back({x, step * legendre.weights[i] * normal_pdf(x)});
      }
    }
  }
  for (std::size_t i = 0; i < hermite.nodes.size(); ++i) {
    if (std::abs(hermite.nodes[i]) > kTailCut) {
      nodes.push_back({hermite.nodes[i], hermite.weights[i]});
    }
  }
  return nodes;
}

double guarded_eval(const std::function<double(double)>& f, double x,
                    const char* op) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw NumericalError(op, "integrand not finite at " + format_double(x));
  }
  return v;
}

}  // namespace

bool Activation::bounded() const noexcept { return std::isfinite(phi_bound); }

void Activation::validate() const {
  if (name.empty()) throw ConfigError("activation needs a name");
  if (!phi || !dphi) throw ConfigError("activation needs phi and dphi");
  if (!(dphi_bound > 0) || !std::isfinite(dphi_bound)) {
    throw ConfigError("dphi bound must be positive and finite");
  }
  if (!(phi_bound > 0)) throw ConfigError("phi bound must be positive");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) {
    throw ConfigError("breakpoints must be ascending");
  }
  double max_dphi = 0;
  constexpr int kSamples = 2001;
  for (int i = 0; i < kSamples; ++i) {
    const double x = -50.0 + 100.0 * i / (kSamples - 1);
    const double p = phi(x);
    const double d = dphi(x);
    if (!std::isfinite(p) || !std::isfinite(d)) {
      throw ConfigError("activation not finite at " + format_double(x));
    }
    if (std::abs(p) > phi_bound * (1 + 1e-12) + 1e-12) {
      throw ConfigError("phi exceeds its declared bound at " + format_double(x));
    }
    if (std::abs(d) > dphi_bound * (1 + 1e-12) + 1e-12) {
      throw ConfigError("dphi exceeds its declared bound at " + format_double(x));
    }
    max_dphi = std::max(max_dphi, std::abs(d));
  }
  if (!(max_dphi > 0)) throw ConfigError("dphi vanishes on the sampled range");
}

Activation make_tanh() {
  Activation act;
  act.name = "tanh";
  act.phi = [](double x) { return std::tanh(x); };
  act.dphi = [](double x) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  };
  act.phi_bound = 1.0;
  act.dphi_bound = 1.0;
  act.validate();
  return act;
}

Activation make_hard_tanh() {
  Activation act;
  act.name = "hard-tanh";
  act.phi = [](double x) { return std::clamp(x, -1.0, 1.0); };
  act.dphi = [](double x) { return std::abs(x) < 1.0 ? 1.0 : 0.0; };
  act.phi_bound = 1.0;
  act.dphi_bound = 1.0;
  act.breakpoints = {-1.0, 1.0};
  act.validate();
  return act;
}

Activation make_erf_unit_slope() {
  const double a = std::sqrt(std::numbers::pi) / 2.0;
  Activation act;
  act.name = "erf";
  act.phi = [a](double x) { return std::erf(a * x); };
  act.dphi = [](double x) {
    return std::exp(-std::numbers::pi * x * x / 4.0);
  };
  act.phi_bound = 1.0;
  act.dphi_bound = 1.0;
  act.validate();
  return act;
}

Activation make_scaled_shifted_tanh(double scale, double rate, double shift) {
  if (!(scale != 0) || !(rate > 0)) {
    throw ConfigError("scaled-shifted-tanh needs scale != 0 and rate > 0");
  }
  Activation act;
  act.name = "scaled-shifted-tanh";
  act.phi = [=](double x) { return scale * std::tanh(rate * x) + shift; };
  act.dphi = [=](double x) {
    const double t = std::tanh(rate * x);
    return scale * rate * (1.0 - t * t);
  };
  act.phi_bound = std::abs(scale) + std::abs(shift);
  act.dphi_bound = std::abs(scale * rate);
  act.validate();
  return act;
}

Activation make_relu() {
  Activation act;
  act.name = "relu";
  act.phi = [](double x) { return x > 0 ? x : 0.0; };
  act.dphi = [](double x) { return x > 0 ? 1.0 : 0.0; };
  act.phi_bound = kInf;
  act.dphi_bound = 1.0;
  act.breakpoints = {0.0};
  act.validate();
  return act;
}

Activation make_piecewise_linear(std::string name,
                                 std::vector<std::pair<double, double>> knots) {
  if (knots.size() < 2) throw ConfigError("need at least two knots");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (!(knots[i].first < knots[i + 1].first)) {
      throw ConfigError("knot x values must be strictly increasing");
    }
  }
  for (const auto& [x, y] : knots) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw ConfigError("knots must be finite");
    }
  }

  std::vector<double> xs, ys, slopes;
  for (const auto& [x, y] : knots) {
    xs.push_back(x);
    ys.push_back(y);
  }
  double max_y = 0, max_slope = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    slopes.push_back((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
    max_slope = std::max(max_slope, std::abs(slopes.back()));
  }
  for (double y : ys) max_y = std::max(max_y, std::abs(y));
  if (!(max_slope > 0)) throw ConfigError("piecewise-linear activation is flat");

  Activation act;
  act.name = std::move(name);
  act.phi = [xs, ys, slopes](double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    return ys[i] + slopes[i] * (x - xs[i]);
  };
  act.dphi = [xs, slopes](double x) {
    if (x <= xs.front() || x >= xs.back()) return 0.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    return slopes[i];
  };
  act.phi_bound = max_y;
  act.dphi_bound = max_slope;
  act.breakpoints = xs;
  act.validate();
  return act;
}

Activation activation_from_knots_json(std::string_view text, std::string name) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid knots JSON: ") + e.what());
  }
  if (!parsed.contains("knots") || !parsed["knots"].is_array()) {
    throw ConfigError("knots JSON must contain a 'knots' array");
  }
  std::vector<std::pair<double, double>> knots;
  for (const auto& entry : parsed["knots"]) {
    if (!entry.is_array() || entry.size() != 2) {
      throw ConfigError("each knot must be an [x, y] pair");
    }
    knots.emplace_back(entry[0].get<double>(), entry[1].get<double>());
  }
  return make_piecewise_linear(std::move(name), std::move(knots));
}

Activation activation_by_name(const std::string& name, bool unsafe_unbounded) {
  if (name == "tanh") return make_tanh();
  if (name == "hard-tanh") return make_hard_tanh();
  if (name == "erf") return make_erf_unit_slope();
  if (name == "scaled-shifted-tanh") return make_scaled_shifted_tanh();
  if (name == "relu") {
    if (!unsafe_unbounded) {
      throw ConfigError(
          "relu is unbounded and requires the unsafe-unbounded flag");
    }
    return make_relu();
  }
  throw ConfigError("unknown activation '" + name + "'; built-ins: tanh, " +
                    "hard-tanh, erf, scaled-shifted-tanh, relu");
}

std::vector<std::string> builtin_activation_names() {
  return {"tanh", "hard-tanh", "erf", "scaled-shifted-tanh", "relu"};
}

double gauss_expect(const std::function<double(double)>& f, double q, int order,
                    std::span<const double> breakpoints) {
  if (!(q >= 0)) throw ConfigError("gauss_expect requires q >= 0");
  if (!f) throw ConfigError("gauss_expect requires a function");
  // Zero variance collapses the expectation to the value at the origin.
  if (q == 0) return guarded_eval(f, 0.0, "gauss_expect");
  const double root_q = std::sqrt(q);
  std::vector<double> z_breaks;
  z_breaks.reserve(breakpoints.size());
  for (double b : breakpoints) z_breaks.push_back(b / root_q);
  const auto nodes = expectation_nodes(order, z_breaks);
  double sum = 0;
  for (const auto& node : nodes) {
    sum += node.w * guarded_eval(f, root_q * node.x, "gauss_expect");
  }
  return sum;
}

namespace {

// One step of the variance map: E phi(sqrt(q) Z)^2 (+ bias term).
double variance_step(const Activation& act, double q, double sigma_b2,
                     QRecurrence recurrence, int order) {
  const double expect = gauss_expect(
      [&act](double x) {
        const double p = act.phi(x);
        return p * p;
      },
      q, order, act.breakpoints);
  return expect + (recurrence == QRecurrence::with_bias ? sigma_b2 : 0.0);
}

}  // namespace

QSchedule q_schedule(double q1, int layers, const Activation& act,
                     double sigma_b2, QRecurrence recurrence, int order) {
  if (layers < 1) throw ConfigError("need at least one layer");
  if (!(sigma_b2 >= 0)) throw ConfigError("sigma_b2 must be nonnegative");
  if (!(q1 > sigma_b2)) {
    throw ConfigError("q1 must exceed sigma_b2 (got q1 = " + format_double(q1) +
                      ", sigma_b2 = " + format_double(sigma_b2) + ")");
  }
  const double lower = recurrence == QRecurrence::with_bias ? sigma_b2 : 0.0;
  const double upper =
      act.bounded() ? act.phi_bound * act.phi_bound + sigma_b2 : kInf;

  QSchedule schedule;
  schedule.sigma_b2 = sigma_b2;
  schedule.source_q1 = q1;
  schedule.recurrence = recurrence;
  schedule.q.reserve(static_cast<std::size_t>(layers));
  schedule.q.push_back(q1);
  for (int l = 1; l < layers; ++l) {
    const double next =
        variance_step(act, schedule.q.back(), sigma_b2, recurrence, order);
    if (!std::isfinite(next) || !(next > lower) || next > upper * (1 + 1e-12)) {
      throw NumericalError(
          "q_schedule", "variance left (" + format_double(lower) + ", " +
                            format_double(upper) + "] at layer " +
                            std::to_string(l + 1) + ": " + format_double(next));
    }
    schedule.q.push_back(next);
  }
  return schedule;
}

double q_fixed_point(const Activation& act, double sigma_b2, double tol,
                     double damping, int max_iter, int order) {
  if (!(sigma_b2 >= 0)) throw ConfigError("sigma_b2 must be nonnegative");
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  if (!(damping > 0) || damping > 1) throw ConfigError("damping must be in (0,1]");
  double q = act.bounded() ? act.phi_bound * act.phi_bound + sigma_b2
                           : 1.0 + sigma_b2;
  double residual = kInf;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mapped =
        variance_step(act, q, sigma_b2, QRecurrence::with_bias, order);
    residual = std::abs(mapped - q);
    if (residual < tol) return q;
    q = (1.0 - damping) * q + damping * mapped;
    if (!(q > 0)) q = std::numeric_limits<double>::min();
  }
  throw NumericalError("q_fixed_point",
                       "no convergence within " + std::to_string(max_iter) +
                           " iterations; final residual " +
                           format_double(residual));
}

SpectralMeasure dphi_squared_law(const Activation& act, double q, int order) {
  if (!(q >= 0)) throw ConfigError("dphi_squared_law requires q >= 0");
  if (q == 0) {
    const double d = guarded_eval(act.dphi, 0.0, "dphi_squared_law");
    if (d == 0) throw ConfigError("dphi vanishes at every quadrature node");
    return SpectralMeasure::point_mass(d * d);
  }
  const double root_q = std::sqrt(q);
  std::vector<double> z_breaks;
  z_breaks.reserve(act.breakpoints.size());
  for (double b : act.breakpoints) z_breaks.push_back(b / root_q);
  const auto nodes = expectation_nodes(order, z_breaks);

  std::vector<Atom> atoms;
  atoms.reserve(nodes.size());
  double positive_mass = 0;
  for (const auto& node : nodes) {
    const double d = guarded_eval(act.dphi, root_q * node.x, "dphi_squared_law");
    const double loc = d * d;
    if (loc > 0) positive_mass += node.w;
    atoms.push_back(Atom{loc, node.w});
  }
  if (!(positive_mass > 0)) {
    throw ConfigError("dphi vanishes at every quadrature node");
  }
  return SpectralMeasure::from_atoms(std::move(atoms));
}

std::string to_json_string(const QSchedule& schedule) {
  nlohmann::json j{
      {"q", schedule.q},
      {"sigma_b2", schedule.sigma_b2},
      {"source_q1", schedule.source_q1},
      {"recurrence", schedule.recurrence == QRecurrence::with_bias
                         ? "with-bias"
                         : "without-bias"}};
  return j.dump();
}

QSchedule q_schedule_from_json(std::string_view text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid schedule JSON: ") + e.what());
  }
  QSchedule schedule;
  try {
    schedule.q = parsed.at("q").get<std::vector<double>>();
    schedule.sigma_b2 = parsed.at("sigma_b2").get<double>();
    schedule.source_q1 = parsed.at("source_q1").get<double>();
    const auto rec = parsed.at("recurrence").get<std::string>();
    if (rec == "with-bias") {
      schedule.recurrence = QRecurrence::with_bias;
    } else if (rec == "without-bias") {
      schedule.recurrence = QRecurrence::without_bias;
    } else {
      throw ConfigError("unknown recurrence '" + rec + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid schedule JSON: ") + e.what());
  }
  return schedule;
}

}  // namespace djs
