#pragma once
// Self-consistent resolvent solver for the spectra of products
// (1/n) S X* K X S with Gaussian X: the coupled (h, k) system at one point,
// density recovery on a grid via an epsilon ladder with Richardson
// extrapolation, the induced multiplicative convolution on measures, its
// iteration across layers, and the full theory spectrum of a configured
// network.

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "djs/activation.hpp"
#include "djs/measure.hpp"
#include "djs/network.hpp"

namespace djs {

struct SolverConfig {
  double damping = 0.5;
  double tol = 1e-11;
  int max_iter = 20000;
  // Imaginary offsets for density recovery, strictly decreasing; the last
  // two rungs feed the Richardson extrapolation.
  std::vector<double> eps_ladder = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int grid_points = 2000;
  double lambda_max = 0.0;  // 0 picks a support bound automatically
  double aspect_c = 1.0;    // m/n column-to-row ratio of the X factor

  void validate() const;
};

std::string to_json_string(const SolverConfig& config);
SolverConfig solver_config_from_json(const std::string& text);

// One solve of h = sum_R w l / (l k/c - z), k = sum_K w l / (h l + 1),
// f = (h k / c - 1) / z. valid reports convergence plus the half-plane and
// real-axis sign constraints that pick the physical branch.
struct HKSolution {
  std::complex<double> z;
  std::complex<double> h;
  std::complex<double> k;
  std::complex<double> f;
  double residual = 0;
  int iterations = 0;
  bool valid = false;
};

std::string to_json_string(const HKSolution& solution);

HKSolution solve_hk(
    const SpectralMeasure& nu_r, const SpectralMeasure& nu_k,
    std::complex<double> z, const SolverConfig& config = {},
    const std::optional<std::pair<std::complex<double>, std::complex<double>>>&
        init = std::nullopt);

// Continuous density at sqrt-spaced grid points via the epsilon ladder and
// two-point Richardson extrapolation; densities below 1e-8 are truncated
// to 0. Throws NumericalError when any grid solve fails validity.
DensityGrid resolve_density(const SpectralMeasure& nu_r,
                            const SpectralMeasure& nu_k,
                            const SolverConfig& config = {});

// Multiplicative layer convolution: the spectral law of the product with
// factor law nu_k applied to input law nu_r, re-atomized from the density
// grid with origin-atom recovery and power-profile edge completion.
SpectralMeasure diamond(const SpectralMeasure& nu_k,
                        const SpectralMeasure& nu_r,
                        const SolverConfig& config = {});

// Left fold of diamond over layer factor laws, starting from a unit point
// mass. config.aspect_c applies to every layer.
SpectralMeasure propagate_layers(const std::vector<SpectralMeasure>& layer_laws,
                                 const SolverConfig& config = {});

struct TheorySpectrum {
  SpectralMeasure spectrum;  // output-side law of J J^T
  QSchedule schedule;
  bool extrapolated = false;  // multi-layer non-square width profile
};

// End-to-end theory prediction for a configured network: variance schedule,
// per-layer squared-derivative laws, layer-by-layer convolution with the
// width-ratio and normalization adjustments between sides.
TheorySpectrum theory_spectrum(const NetworkConfig& network,
                               const SolverConfig& config = {});

}  // namespace djs
