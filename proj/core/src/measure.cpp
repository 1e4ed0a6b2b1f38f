#include "djs/measure.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "djs/errors.hpp"
#include "json.hpp"
#include "quadrature.hpp"

namespace djs {

namespace {

using nlohmann::json;

double parse_double(std::string_view text) {
  try {
    return std::stod(std::string(text));
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number: '" + std::string(text) + "'");
  }
}

// Splits one CSV line at the first comma; trims nothing (numbers only).
std::pair<std::string_view, std::string_view> split2(std::string_view line) {
  const auto pos = line.find(',');
  if (pos == std::string_view::npos) {
    throw ConfigError("expected two comma-separated fields: '" + std::string(line) + "'");
  }
  return {line.substr(0, pos), line.substr(pos + 1)};
}

bool is_header(std::string_view line) {
  return !line.empty() && !(std::isdigit(static_cast<unsigned char>(line[0])) ||
                            line[0] == '-' || line[0] == '+' || line[0] == '.');
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

SpectralMeasure SpectralMeasure::from_atoms(std::vector<Atom> atoms) {
  if (atoms.empty()) throw ConfigError("measure needs at least one atom");
  for (auto& a : atoms) {
    if (!std::isfinite(a.location) || !std::isfinite(a.weight)) {
      throw ConfigError("measure atoms must be finite");
    }
    if (a.location < kLocationClamp) {
      throw ConfigError("atom location " + format_double(a.location) +
                        " below the negative clamp " + format_double(kLocationClamp));
    }
    if (a.location < 0) a.location = 0;
    if (a.weight < 0) throw ConfigError("atom weights must be nonnegative");
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& x, const Atom& y) { return x.location < y.location; });

  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (a.weight == 0) continue;
    if (!merged.empty()) {
      Atom& last = merged.back();
      const double scale = std::max(std::abs(last.location), std::abs(a.location));
      if (a.location - last.location <= kMergeTol * scale) {
        const double w = last.weight + a.weight;
        last.location = (last.location * last.weight + a.location * a.weight) / w;
        last.weight = w;
        continue;
      }
    }
    merged.push_back(a);
  }
  if (merged.empty()) throw ConfigError("measure has zero total mass");

  double total = 0;
  for (const auto& a : merged) total += a.weight;
  if (!(total > 0)) throw ConfigError("measure has zero total mass");
  for (auto& a : merged) a.weight /= total;
  return SpectralMeasure(std::move(merged));
}

SpectralMeasure SpectralMeasure::point_mass(double location) {
  return from_atoms({Atom{location, 1.0}});
}

double SpectralMeasure::origin_mass() const noexcept {
  return atoms_.front().location == 0.0 ? atoms_.front().weight : 0.0;
}

SpectralMeasure SpectralMeasure::scaled(double s) const {
  if (!(s > 0)) throw ConfigError("scale factor must be positive");
  std::vector<Atom> atoms = atoms_;
  for (auto& a : atoms) a.location *= s;
  return from_atoms(std::move(atoms));
}

SpectralMeasure ncm_from_eigenvalues(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) throw ConfigError("empty eigenvalue list");
  std::vector<Atom> atoms;
  atoms.reserve(eigenvalues.size());
  const double w = 1.0 / static_cast<double>(eigenvalues.size());
  for (double ev : eigenvalues) {
    if (!std::isfinite(ev)) throw ConfigError("eigenvalues must be finite");
    if (ev < SpectralMeasure::kLocationClamp) {
      throw ConfigError("eigenvalue " + format_double(ev) +
                        " below the negative clamp");
    }
    atoms.push_back(Atom{std::max(ev, 0.0), w});
  }
  return SpectralMeasure::from_atoms(std::move(atoms));
}

double moment(const SpectralMeasure& mu, int k) {
  if (k < 1) throw ConfigError("moment order must be >= 1");
  double sum = 0;
  for (const auto& a : mu.atoms()) sum += a.weight * std::pow(a.location, k);
  return sum;
}

std::complex<double> stieltjes(const SpectralMeasure& mu, std::complex<double> z) {
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& a : mu.atoms()) dist = std::min(dist, std::abs(z - a.location));
  if (dist < 1e-12) throw ConfigError("stieltjes evaluation point on the support");
  std::complex<double> sum = 0;
  for (const auto& a : mu.atoms()) sum += a.weight / (a.location - z);
  return sum;
}

double ks_distance(const SpectralMeasure& a, const SpectralMeasure& b) {
  const auto& xs = a.atoms();
  const auto& ys = b.atoms();
  std::size_t i = 0, j = 0;
  double fa = 0, fb = 0, ks = 0;
  while (i < xs.size() || j < ys.size()) {
    double x;
    if (j >= ys.size() || (i < xs.size() && xs[i].location < ys[j].location)) {
      x = xs[i].location;
    } else {
      x = ys[j].location;
    }
    while (i < xs.size() && xs[i].location == x) fa += xs[i++].weight;
    while (j < ys.size() && ys[j].location == x) fb += ys[j++].weight;
    ks = std::max(ks, std::abs(fa - fb));
  }
  return ks;
}

double mp_density(double c, double lambda) {
  if (!(c > 0)) throw ConfigError("aspect ratio must be positive");
  const double lo = (1.0 - std::sqrt(c)) * (1.0 - std::sqrt(c));
  const double hi = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
  if (lambda <= lo || lambda >= hi) return 0.0;
  return std::sqrt((hi - lambda) * (lambda - lo)) /
         (2.0 * std::numbers::pi * c * lambda);
}

SpectralMeasure mp_reference(double c, std::size_t atom_count) {
  if (!(c > 0)) throw ConfigError("aspect ratio must be positive");
  if (atom_count < 16) throw ConfigError("atom_count too small");
  const double lo = (1.0 - std::sqrt(c)) * (1.0 - std::sqrt(c));
  const double hi = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));

  // Substituting lambda = lo + (hi-lo) sin^2(theta) turns the square-root
  // edge factors into a smooth integrand on [0, pi/2], so a Gauss-Legendre
  // rule converges fast even though the density itself is singular at the
  // lower edge when c = 1.
  const auto& rule = detail::gauss_legendre01(static_cast<int>(atom_count));
  std::vector<Atom> atoms;
  atoms.reserve(atom_count + 1);
  const double span = hi - lo;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double theta = rule.nodes[i] * std::numbers::pi / 2.0;
    const double s = std::sin(theta);
    const double cth = std::cos(theta);
    const double lambda = lo + span * s * s;
    const double mass = span * span * s * s * cth * cth /
                        (std::numbers::pi * c * lambda) *
                        (rule.weights[i] * std::numbers::pi / 2.0);
    atoms.push_back(Atom{lambda, mass});
  }
  if (c > 1.0) atoms.push_back(Atom{0.0, (1.0 - 1.0 / c)});
  return SpectralMeasure::from_atoms(std::move(atoms));
}

std::string to_csv(const SpectralMeasure& mu) {
  std::string out = "location,weight\n";
  for (const auto& a : mu.atoms()) {
    out += format_double(a.location);
    out += ',';
    out += format_double(a.weight);
    out += '\n';
  }
  return out;
}

SpectralMeasure measure_from_csv(std::string_view csv) {
  std::vector<Atom> atoms;
  std::size_t start = 0;
  bool first = true;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    const auto line = csv.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    if (first && is_header(line)) {
      first = false;
      continue;
    }
    first = false;
    const auto [lhs, rhs] = split2(line);
    atoms.push_back(Atom{parse_double(lhs), parse_double(rhs)});
  }
  return SpectralMeasure::from_atoms(std::move(atoms));
}

std::string to_json_string(const SpectralMeasure& mu) {
  json atoms = json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({a.location, a.weight});
  return json{{"atoms", std::move(atoms)}}.dump();
}

SpectralMeasure measure_from_json(std::string_view text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid measure JSON: ") + e.what());
  }
  if (!parsed.contains("atoms") || !parsed["atoms"].is_array()) {
    throw ConfigError("measure JSON must contain an 'atoms' array");
  }
  std::vector<Atom> atoms;
  for (const auto& entry : parsed["atoms"]) {
    if (!entry.is_array() || entry.size() != 2) {
      throw ConfigError("each atom must be a [location, weight] pair");
    }
    atoms.push_back(Atom{entry[0].get<double>(), entry[1].get<double>()});
  }
  return SpectralMeasure::from_atoms(std::move(atoms));
}

std::string to_csv(const DensityGrid& grid) {
  std::string out = "lambda,density\n";
  for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
    out += format_double(grid.lambdas[i]);
    out += ',';
    out += format_double(grid.densities[i]);
    out += '\n';
  }
  return out;
}

DensityGrid density_grid_from_csv(std::string_view csv) {
  DensityGrid grid;
  std::size_t start = 0;
  bool first = true;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    const auto line = csv.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    if (first && is_header(line)) {
      first = false;
      continue;
    }
    first = false;
    const auto [lhs, rhs] = split2(line);
    grid.lambdas.push_back(parse_double(lhs));
    grid.densities.push_back(parse_double(rhs));
  }
  for (std::size_t i = 0; i + 1 < grid.lambdas.size(); ++i) {
    grid.mass_estimate += 0.5 * (grid.densities[i] + grid.densities[i + 1]) *
                          (grid.lambdas[i + 1] - grid.lambdas[i]);
  }
  return grid;
}

std::string to_csv(const EmpiricalSpectrum& spectrum) {
  std::string out = "eigenvalue\n";
  for (double ev : spectrum.eigenvalues) {
    out += format_double(ev);
    out += '\n';
  }
  return out;
}

std::string to_json_string(const EmpiricalSpectrum& spectrum) {
  json j{{"n", spectrum.n},
         {"seed", spectrum.seed},
         {"label", spectrum.label},
         {"eigenvalues", spectrum.eigenvalues}};
  return j.dump();
}

EmpiricalSpectrum spectrum_from_json(std::string_view text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid spectrum JSON: ") + e.what());
  }
  EmpiricalSpectrum s;
  try {
    s.n = parsed.at("n").get<std::size_t>();
    s.seed = parsed.at("seed").get<std::uint64_t>();
    s.label = parsed.at("label").get<std::string>();
    s.eigenvalues = parsed.at("eigenvalues").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid spectrum JSON: ") + e.what());
  }
  return s;
}

}  // namespace djs
