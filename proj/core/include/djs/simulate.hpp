#pragma once
// Finite-size simulation of the layered Gaussian matrix model: forward
// passes, exact jacobian spectra, frozen-diagonal surrogate spectra, norm
// checks, window-mass fluctuation studies, and theory-vs-simulation
// comparison reports. All draws come from counter-based streams keyed by
// (seed, replica, layer, role), so every result is reproducible and
// independent of thread count.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "djs/measure.hpp"
#include "djs/network.hpp"
#include "djs/solver.hpp"

namespace djs {

struct ForwardPassData {
  std::vector<std::vector<double>> activations;  // x^0..x^L
  std::vector<std::vector<double>> diagonals;    // phi'(y^l), l = 1..L
  std::vector<double> layer_q;  // q_n^l = |x^{l-1}|^2/n_{l-1} + sigma_b2
};

ForwardPassData forward_pass(const NetworkConfig& config,
                             std::uint64_t replica = 0);

// Squared singular values of the depth-L input-output jacobian: the
// n_L x n_0 product has min(n_0, n_L) of them, reported ascending.
EmpiricalSpectrum jacobian_spectrum(const NetworkConfig& config,
                                    std::uint64_t replica = 0);

// Same matrix product with the jacobian's diagonals replaced by diagonals
// of phi' evaluated on independent Gaussians at the schedule variances
// (seeded by the realized q_n^1); the weight matrices are identical draws.
EmpiricalSpectrum surrogate_spectrum(const NetworkConfig& config,
                                     std::uint64_t replica = 0);

// n^{-1/2} times the largest singular value of an n x n standard Gaussian
// matrix, via Lanczos iteration on X^T X.
double norm_check(std::size_t n, std::uint64_t seed,
                  std::uint64_t replica = 0);

struct RunRecord {
  NetworkConfig config;
  std::uint64_t replica = 0;
  std::vector<double> layer_q;
  std::vector<double> layer_norms;  // |X^l| / sqrt(n_{l-1})
  EmpiricalSpectrum spectrum;
  std::optional<EmpiricalSpectrum> surrogate;
  double wall_seconds = 0.0;
};

RunRecord run_simulation(const NetworkConfig& config, std::uint64_t replica = 0,
                         bool with_surrogate = false);
std::string to_json_string(const RunRecord& record);

struct FluctuationRow {
  std::size_t n = 0;
  double mean_mass = 0.0;
  double fourth_central_moment = 0.0;
  std::vector<double> masses;  // per replica, in replica order
};

// Spectral mass inside a window across replicas, for a ladder of widths;
// the base config's width profile is replaced by all-equal widths n.
std::vector<FluctuationRow> fluctuation_study(
    const NetworkConfig& base, std::pair<double, double> window,
    std::size_t reps, const std::vector<std::size_t>& sizes);

std::string to_csv(const std::vector<FluctuationRow>& rows);

struct ComparisonReport {
  NetworkConfig config;
  std::size_t reps = 0;
  double ks = 0.0;  // pooled empirical NCM vs theory law
  std::vector<double> empirical_moments;  // k = 1..4
  std::vector<double> theory_moments;
  std::vector<double> moment_gaps;  // relative
  std::vector<double> schedule_q;
  std::vector<double> mean_layer_q;
  std::vector<double> q_gaps;  // absolute
  std::vector<double> mean_layer_norms;
  bool extrapolated = false;
  double wall_seconds = 0.0;
};

ComparisonReport compare(const NetworkConfig& config,
                         const SolverConfig& solver_config,
                         std::size_t reps);
std::string to_json_string(const ComparisonReport& report);

}  // namespace djs
