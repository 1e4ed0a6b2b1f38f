#pragma once
// Spectral measures on the nonnegative half-line and their basic transforms:
// atomic measures with canonical merge/normalize construction, normalized
// counting measures of eigenvalue lists, Kolmogorov-Smirnov distance,
// Stieltjes evaluation, moments, density grids produced by the solver, and
// the Marchenko-Pastur reference family used as ground truth in tests and
// validation runs.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace djs {

struct Atom {
  double location = 0;
  double weight = 0;
};

// Finitely supported probability measure on [0, inf). Construction sorts
// atoms, merges locations that coincide to relative tolerance 1e-12
// (weight-averaged location, summed weight), drops zero weights, and
// normalizes total mass to 1.
class SpectralMeasure {
 public:
  static constexpr double kMergeTol = 1e-12;
  static constexpr double kLocationClamp = -1e-10;

  // Default-constructed measures are the unit mass at the origin.
  SpectralMeasure() : atoms_{Atom{0.0, 1.0}} {}

  static SpectralMeasure from_atoms(std::vector<Atom> atoms);
  static SpectralMeasure point_mass(double location);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double min_location() const noexcept { return atoms_.front().location; }
  double max_location() const noexcept { return atoms_.back().location; }

  // Weight of the atom at exactly zero (0 when absent).
  double origin_mass() const noexcept;

  // Pushforward under x -> s*x, s > 0.
  SpectralMeasure scaled(double s) const;

 private:
  explicit SpectralMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}
  std::vector<Atom> atoms_;
};

// Pointwise density estimate on a strictly increasing grid. mass_estimate is
// the trapezoid integral of the densities over the grid.
struct DensityGrid {
  std::vector<double> lambdas;
  std::vector<double> densities;
  double mass_estimate = 0;
};

// Sorted eigenvalue sample of one matrix draw.
struct EmpiricalSpectrum {
  std::vector<double> eigenvalues;  // ascending, >= 0
  std::size_t n = 0;                // == eigenvalues.size()
  std::uint64_t seed = 0;
  std::string label;
};

// Normalized counting measure. Eigenvalues in [-1e-10, 0) are clamped to 0;
// anything below that is rejected.
SpectralMeasure ncm_from_eigenvalues(std::span<const double> eigenvalues);

// k-th raw moment, k >= 1.
double moment(const SpectralMeasure& mu, int k);

// sum w_i / (loc_i - z); requires dist(z, support) >= 1e-12.
std::complex<double> stieltjes(const SpectralMeasure& mu, std::complex<double> z);

// sup_x |F_a(x) - F_b(x)| over the union of atom locations.
double ks_distance(const SpectralMeasure& a, const SpectralMeasure& b);

// Marchenko-Pastur law with ratio c > 0, discretized to atom_count atoms on
// the continuous bulk (plus the origin atom of mass 1 - 1/c when c > 1).
SpectralMeasure mp_reference(double c, std::size_t atom_count = 2000);

// Closed-form Marchenko-Pastur bulk density at ratio c (0 off the bulk).
double mp_density(double c, double lambda);

// Text serialization; doubles are written with 17 significant digits so a
// write/read round trip is bit-exact.
std::string to_csv(const SpectralMeasure& mu);
SpectralMeasure measure_from_csv(std::string_view csv);
std::string to_json_string(const SpectralMeasure& mu);
SpectralMeasure measure_from_json(std::string_view json);

std::string to_csv(const DensityGrid& grid);
DensityGrid density_grid_from_csv(std::string_view csv);

std::string to_csv(const EmpiricalSpectrum& spectrum);
std::string to_json_string(const EmpiricalSpectrum& spectrum);
EmpiricalSpectrum spectrum_from_json(std::string_view json);

// 17-significant-digit formatting used by all serializers.
std::string format_double(double value);

}  // namespace djs
