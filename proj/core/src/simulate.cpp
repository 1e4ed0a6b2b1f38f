// Finite-size simulation: forward passes, jacobian and surrogate spectra,
// Lanczos norm checks, fluctuation studies, and comparison reports.

#include "djs/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "djs/errors.hpp"
#include "djs/rng.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace djs {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd layer_matrix(const NetworkConfig& config, std::uint64_t replica,
                      std::size_t layer) {
  const std::size_t rows = config.widths[layer];
  const std::size_t cols = config.widths[layer - 1];
  MatrixXd x(rows, cols);
  GaussianStream stream(config.seed, replica, static_cast<std::uint32_t>(layer),
                        StreamRole::weights);
  stream.fill(x.data(), rows * cols);
  return x;
}

VectorXd input_vector(const NetworkConfig& config, const Activation& act,
                      std::uint64_t replica) {
  const std::size_t n0 = config.n0();
  VectorXd x(n0);
  switch (config.input_mode) {
    case InputMode::iid_unit: {
      GaussianStream stream(config.seed, replica, 0, StreamRole::input);
      stream.fill(x.data(), n0);
      break;
    }
    case InputMode::q1_target: {
      const double q1v = resolve_q1(config, act);
      x.setConstant(std::sqrt(std::max(q1v - config.sigma_b2, 0.0)));
      break;
    }
    case InputMode::explicit_vector:
      for (std::size_t i = 0; i < n0; ++i)
        x[static_cast<Eigen::Index>(i)] = config.x0[i];
      break;
  }
  return x;
}

// Largest singular value via Lanczos on X^T X with full reorthogonalization
// and a deterministic Gaussian start vector.
double lanczos_largest_singular(const MatrixXd& x, GaussianStream start) {
  const Eigen::Index n = x.cols();
  VectorXd v(n);
  start.fill(v.data(), static_cast<std::size_t>(n));
  v.normalize();

  constexpr int kMaxSteps = 80;
  std::vector<VectorXd> basis;
  basis.reserve(kMaxSteps);
  std::vector<double> alpha, beta;
  double top_prev = -std::numeric_limits<double>::infinity();
  int stable = 0;
  double top = 0.0;

  for (int j = 0; j < kMaxSteps; ++j) {
    basis.push_back(v);
    VectorXd w = x.transpose() * (x * v);
    const double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (j > 0) w -= beta[static_cast<std::size_t>(j - 1)] * basis[static_cast<std::size_t>(j - 1)];
    for (const VectorXd& u : basis) w -= u.dot(w) * u;

    Eigen::Map<const VectorXd> diag(alpha.data(),
                                    static_cast<Eigen::Index>(alpha.size()));
    VectorXd offdiag(std::max<std::size_t>(beta.size(), 1));
    for (std::size_t i = 0; i < beta.size(); ++i)
      offdiag[static_cast<Eigen::Index>(i)] = beta[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es;
    es.computeFromTridiagonal(diag,
                              offdiag.head(static_cast<Eigen::Index>(
                                  std::max<std::size_t>(alpha.size(), 1) - 1)),
                              Eigen::EigenvaluesOnly);
    top = es.eigenvalues().maxCoeff();
    if (std::abs(top - top_prev) <= 1e-12 * std::max(1.0, std::abs(top))) {
      if (++stable >= 3) break;
    } else {
      stable = 0;
    }
    top_prev = top;

    const double b = w.norm();
    if (b < 1e-13 * std::max(1.0, std::abs(a))) break;
    beta.push_back(b);
    v = w / b;
  }
  return std::sqrt(std::max(top, 0.0));
}

// Shared spectrum assembly: squared singular values of the accumulated
// n_L x n_0 product, min(n_0, n_L) values sorted ascending.
EmpiricalSpectrum spectrum_from_product(const MatrixXd& product,
                                        const NetworkConfig& config,
                                        std::string label) {
  Eigen::BDCSVD<MatrixXd> svd(product);
  const VectorXd sv = svd.singularValues();
  EmpiricalSpectrum spectrum;
  spectrum.n = std::min(config.n0(), config.nL());
  spectrum.seed = config.seed;
  spectrum.label = std::move(label);
  spectrum.eigenvalues.assign(spectrum.n, 0.0);
  const std::size_t count =
      std::min(static_cast<std::size_t>(sv.size()), spectrum.n);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = sv[static_cast<Eigen::Index>(i)];
    spectrum.eigenvalues[spectrum.n - 1 - i] = s * s;
  }
  std::sort(spectrum.eigenvalues.begin(), spectrum.eigenvalues.end());
  return spectrum;
}

MatrixXd accumulate_product(const NetworkConfig& config, std::uint64_t replica,
                            const std::vector<std::vector<double>>& diagonals) {
  MatrixXd product;
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const double scale =
        1.0 / std::sqrt(static_cast<double>(config.widths[l - 1]));
    const MatrixXd x = layer_matrix(config, replica, l);
    Eigen::Map<const VectorXd> d(
        diagonals[l - 1].data(),
        static_cast<Eigen::Index>(diagonals[l - 1].size()));
    if (l == 1)
      product = scale * (d.asDiagonal() * x);
    else
      product = scale * (d.asDiagonal() * (x * product));
  }
  return product;
}

}  // namespace

ForwardPassData forward_pass(const NetworkConfig& config,
                             std::uint64_t replica) {
  config.validate();
  const Activation act = resolve_activation(config);
  ForwardPassData data;
  VectorXd x = input_vector(config, act, replica);
  data.activations.push_back(
      std::vector<double>(x.data(), x.data() + x.size()));

  const double sigma_b = std::sqrt(config.sigma_b2);
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const std::size_t m = config.widths[l - 1];
    const std::size_t n = config.widths[l];
    data.layer_q.push_back(x.squaredNorm() / static_cast<double>(m) +
                           config.sigma_b2);
    const MatrixXd w = layer_matrix(config, replica, l);
    VectorXd y = w * x / std::sqrt(static_cast<double>(m));
    if (config.sigma_b2 > 0.0) {
      GaussianStream biases(config.seed, replica,
                            static_cast<std::uint32_t>(l), StreamRole::biases);
      for (std::size_t i = 0; i < n; ++i)
        y[static_cast<Eigen::Index>(i)] += sigma_b * biases.next();
    }
    std::vector<double> diag(n);
    VectorXd x_next(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y[static_cast<Eigen::Index>(i)];
      diag[i] = act.dphi(yi);
      x_next[static_cast<Eigen::Index>(i)] = act.phi(yi);
    }
    data.diagonals.push_back(std::move(diag));
    data.activations.push_back(
        std::vector<double>(x_next.data(), x_next.data() + x_next.size()));
    x = std::move(x_next);
  }
  return data;
}

EmpiricalSpectrum jacobian_spectrum(const NetworkConfig& config,
                                    std::uint64_t replica) {
  const ForwardPassData data = forward_pass(config, replica);
  const MatrixXd product = accumulate_product(config, replica, data.diagonals);
  return spectrum_from_product(product, config, "jacobian");
}

EmpiricalSpectrum surrogate_spectrum(const NetworkConfig& config,
                                     std::uint64_t replica) {
  config.validate();
  const Activation act = resolve_activation(config);
  // The schedule is seeded by the realized q_n^1 of the same replica, so the
  // surrogate freezes exactly the variance the jacobian pass saw.
  const VectorXd x0 = input_vector(config, act, replica);
  const double q1_realized =
      x0.squaredNorm() / static_cast<double>(config.n0()) + config.sigma_b2;
  const QSchedule schedule = schedule_for(config, act, q1_realized);

  std::vector<std::vector<double>> diagonals;
  diagonals.reserve(config.layers);
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const std::size_t n = config.widths[l];
    const double root_q = std::sqrt(schedule.q[l - 1]);
    GaussianStream gamma(config.seed, replica, static_cast<std::uint32_t>(l),
                         StreamRole::gamma);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = act.dphi(root_q * gamma.next());
    diagonals.push_back(std::move(diag));
  }
  const MatrixXd product = accumulate_product(config, replica, diagonals);
  return spectrum_from_product(product, config, "surrogate");
}

double norm_check(std::size_t n, std::uint64_t seed, std::uint64_t replica) {
  if (n == 0) throw ConfigError("norm_check: n must be positive");
  MatrixXd x(n, n);
  GaussianStream stream(seed, replica, 1, StreamRole::weights);
  stream.fill(x.data(), n * n);
  GaussianStream start(seed, replica, 1, StreamRole::input);
  return lanczos_largest_singular(x, std::move(start)) /
         std::sqrt(static_cast<double>(n));
}

RunRecord run_simulation(const NetworkConfig& config, std::uint64_t replica,
                         bool with_surrogate) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = config;
  record.replica = replica;

  const ForwardPassData data = forward_pass(config, replica);
  record.layer_q = data.layer_q;
  const MatrixXd product = accumulate_product(config, replica, data.diagonals);
  record.spectrum = spectrum_from_product(product, config, "jacobian");
  if (with_surrogate) record.surrogate = surrogate_spectrum(config, replica);

  for (std::size_t l = 1; l <= config.layers; ++l) {
    const MatrixXd x = layer_matrix(config, replica, l);
    GaussianStream start(config.seed, replica, static_cast<std::uint32_t>(l),
                         StreamRole::input);
    record.layer_norms.push_back(
        lanczos_largest_singular(x, std::move(start)) /
        std::sqrt(static_cast<double>(config.widths[l - 1])));
  }

  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return record;
}

std::string to_json_string(const RunRecord& record) {
  nlohmann::json j{
      {"config", nlohmann::json::parse(to_json_string(record.config))},
      {"replica", record.replica},
      {"layer_q", record.layer_q},
      {"layer_norms", record.layer_norms},
      {"spectrum", nlohmann::json::parse(to_json_string(record.spectrum))},
      {"wall_seconds", record.wall_seconds},
  };
  if (record.surrogate)
    j["surrogate"] = nlohmann::json::parse(to_json_string(*record.surrogate));
  return j.dump();
}

std::vector<FluctuationRow> fluctuation_study(
    const NetworkConfig& base, std::pair<double, double> window,
    std::size_t reps, const std::vector<std::size_t>& sizes) {
  if (!(window.first <= window.second))
    throw ConfigError("fluctuation_study: window must be ordered");
  if (reps == 0) throw ConfigError("fluctuation_study: reps must be >= 1");
  if (sizes.empty()) throw ConfigError("fluctuation_study: sizes is empty");
  if (base.input_mode == InputMode::explicit_vector)
    throw ConfigError(
        "fluctuation_study: explicit input vectors cannot be resized");

  std::vector<FluctuationRow> rows;
  for (const std::size_t n : sizes) {
    NetworkConfig config = base;
    config.widths.assign(base.layers + 1, n);
    config.validate();

    FluctuationRow row;
    row.n = n;
    row.masses.assign(reps, 0.0);
    detail::parallel_for_blocks(reps, [&](std::size_t rep) {
      const EmpiricalSpectrum spec = jacobian_spectrum(config, rep);
      std::size_t inside = 0;
      for (double v : spec.eigenvalues)
        if (v >= window.first && v <= window.second) ++inside;
      row.masses[rep] =
          static_cast<double>(inside) / static_cast<double>(spec.n);
    });

    double mean = 0.0;
    for (double m : row.masses) mean += m;
    mean /= static_cast<double>(reps);
    double m4 = 0.0;
    for (double m : row.masses) {
      const double d = m - mean;
      m4 += d * d * d * d;
    }
    row.mean_mass = mean;
    row.fourth_central_moment = m4 / static_cast<double>(reps);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(const std::vector<FluctuationRow>& rows) {
  std::string out = "n,reps,mean_mass,fourth_central_moment\n";
  for (const FluctuationRow& row : rows) {
    out += std::to_string(row.n);
    out += ",";
    out += std::to_string(row.masses.size());
    out += ",";
    out += format_double(row.mean_mass);
    out += ",";
    out += format_double(row.fourth_central_moment);
    out += "\n";
  }
  return out;
}

ComparisonReport compare(const NetworkConfig& config,
                         const SolverConfig& solver_config, std::size_t reps) {
  if (reps == 0) throw ConfigError("compare: reps must be >= 1");
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  struct ReplicaResult {
    std::vector<double> eigenvalues;
    std::vector<double> layer_q;
    std::vector<double> layer_norms;
  };
  std::vector<ReplicaResult> results(reps);
  detail::parallel_for_blocks(reps, [&](std::size_t rep) {
    const RunRecord record = run_simulation(config, rep);
    results[rep] = {record.spectrum.eigenvalues, record.layer_q,
                    record.layer_norms};
  });

  std::vector<double> pooled;
  pooled.reserve(reps * std::min(config.n0(), config.nL()));
  for (const ReplicaResult& r : results)
    pooled.insert(pooled.end(), r.eigenvalues.begin(), r.eigenvalues.end());

  const TheorySpectrum theory = theory_spectrum(config, solver_config);
  const SpectralMeasure empirical = ncm_from_eigenvalues(pooled);

  ComparisonReport report;
  report.config = config;
  report.reps = reps;
  report.ks = ks_distance(empirical, theory.spectrum);
  report.extrapolated = theory.extrapolated;
  report.schedule_q = theory.schedule.q;

  for (int k = 1; k <= 4; ++k) {
    const double emp = moment(empirical, k);
    const double th = moment(theory.spectrum, k);
    report.empirical_moments.push_back(emp);
    report.theory_moments.push_back(th);
    report.moment_gaps.push_back(std::abs(emp - th) /
                                 std::max(std::abs(th), 1e-300));
  }

  report.mean_layer_q.assign(config.layers, 0.0);
  report.mean_layer_norms.assign(config.layers, 0.0);
  for (const ReplicaResult& r : results) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      report.mean_layer_q[l] += r.layer_q[l];
      report.mean_layer_norms[l] += r.layer_norms[l];
    }
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    report.mean_layer_q[l] /= static_cast<double>(reps);
    report.mean_layer_norms[l] /= static_cast<double>(reps);
    report.q_gaps.push_back(
        std::abs(report.mean_layer_q[l] - report.schedule_q[l]));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::string to_json_string(const ComparisonReport& report) {
  nlohmann::json j{
      {"config", nlohmann::json::parse(to_json_string(report.config))},
      {"reps", report.reps},
      {"ks", report.ks},
      {"empirical_moments", report.empirical_moments},
      {"theory_moments", report.theory_moments},
      {"moment_gaps", report.moment_gaps},
      {"schedule_q", report.schedule_q},
      {"mean_layer_q", report.mean_layer_q},
      {"q_gaps", report.q_gaps},
      {"mean_layer_norms", report.mean_layer_norms},
      {"extrapolated", report.extrapolated},
      {"wall_seconds", report.wall_seconds},
  };
  return j.dump();
}

}  // namespace djs
