// Tests for the finite-size simulation path: forward passes, jacobian and
// surrogate spectra, norm checks, fluctuation studies, and comparison
// reports. The trace-identity test rebuilds the jacobian from the raw
// streams so the spectrum pipeline is checked against an independent
// construction.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "djs/errors.hpp"
#include "djs/rng.hpp"
#include "djs/simulate.hpp"

using djs::ConfigError;
using djs::GaussianStream;
using djs::NetworkConfig;
using djs::StreamRole;

namespace {

NetworkConfig small_net() {
  NetworkConfig config;
  config.layers = 2;
  config.widths = {48, 32, 40};
  config.activation = "tanh";
  config.sigma_b2 = 0.1;
  config.input_mode = djs::InputMode::q1_target;
  config.q1 = 0.9;
  config.seed = 7;
  return config;
}

}  // namespace

TEST_CASE("forward pass shapes and ranges", "[simulate]") {
  const auto config = small_net();
  const auto data = djs::forward_pass(config, 3);
  SECTION("shapes follow the width profile") {
    REQUIRE(data.activations.size() == 3);
    CHECK(data.activations[0].size() == 48);
    CHECK(data.activations[1].size() == 32);
    CHECK(data.activations[2].size() == 40);
    REQUIRE(data.diagonals.size() == 2);
    CHECK(data.diagonals[0].size() == 32);
    CHECK(data.diagonals[1].size() == 40);
    REQUIRE(data.layer_q.size() == 2);
  }
  SECTION("diagonals respect the derivative bound") {
    for (const auto& diag : data.diagonals)
      for (double d : diag) {
        CHECK(d <= 1.0 + 1e-12);
        CHECK(d >= -1.0 - 1e-12);
      }
  }
  SECTION("realized variances stay in the admissible band") {
    CHECK(data.layer_q[0] == Catch::Approx(0.9));  // q1-target input
    for (double q : data.layer_q) {
      CHECK(q > config.sigma_b2);
      CHECK(q <= 1.0 + config.sigma_b2 + 1e-12);
    }
  }
}

TEST_CASE("zero input through an odd activation stays zero", "[simulate]") {
  NetworkConfig config;
  config.layers = 2;
  config.widths = {16, 16, 16};
  config.activation = "hard-tanh";
  config.sigma_b2 = 0.0;
  config.input_mode = djs::InputMode::explicit_vector;
  config.x0.assign(16, 0.0);
  const auto data = djs::forward_pass(config);
  for (std::size_t l = 1; l < data.activations.size(); ++l)
    for (double x : data.activations[l]) CHECK(x == 0.0);
  // phi'(0) = 1, so every diagonal is exactly the identity.
  for (const auto& diag : data.diagonals)
    for (double d : diag) CHECK(d == 1.0);
  for (double q : data.layer_q) CHECK(q == 0.0);
}

TEST_CASE("jacobian spectrum counts and ordering", "[simulate]") {
  SECTION("rectangular profiles report min(n_0, n_L) values") {
    auto config = small_net();
    const auto narrow = djs::jacobian_spectrum(config);  // 48 -> 40
    CHECK(narrow.n == 40);
    CHECK(narrow.eigenvalues.size() == 40);
    CHECK(narrow.label == "jacobian");
    CHECK(narrow.seed == config.seed);
    config.widths = {40, 32, 48};
    const auto wide = djs::jacobian_spectrum(config);  // 40 -> 48
    CHECK(wide.n == 40);
  }
  SECTION("values are ascending and nonnegative") {
    const auto spec = djs::jacobian_spectrum(small_net(), 1);
    for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i) {
      CHECK(spec.eigenvalues[i] >= 0.0);
      if (i > 0) CHECK(spec.eigenvalues[i] >= spec.eigenvalues[i - 1]);
    }
  }
}

TEST_CASE("spectrum sum equals the frobenius norm of a rebuilt jacobian",
          "[simulate]") {
  const auto config = small_net();
  const std::uint64_t replica = 3;
  const auto data = djs::forward_pass(config, replica);

  // Rebuild J = prod_l D^l X^l / sqrt(n_{l-1}) from the same streams the
  // library uses: layer l weights are a widths[l] x widths[l-1] matrix
  // filled in column-major order from (seed, replica, l, weights).
  Eigen::MatrixXd jac;
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(config.widths[l]);
    const auto cols = static_cast<Eigen::Index>(config.widths[l - 1]);
    Eigen::MatrixXd x(rows, cols);
    GaussianStream stream(config.seed, replica, static_cast<std::uint32_t>(l),
                          StreamRole::weights);
    stream.fill(x.data(), static_cast<std::size_t>(rows * cols));
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(
        data.diagonals[l - 1].data(), rows);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    if (l == 1)
      jac = scale * (d.asDiagonal() * x);
    else
      jac = scale * (d.asDiagonal() * (x * jac));
  }

  const auto spec = djs::jacobian_spectrum(config, replica);
  const double sum = std::accumulate(spec.eigenvalues.begin(),
                                     spec.eigenvalues.end(), 0.0);
  CHECK(sum == Catch::Approx(jac.squaredNorm()).epsilon(1e-8));
}

TEST_CASE("surrogate spectrum relations", "[simulate]") {
  SECTION("identity diagonals make jacobian and surrogate coincide") {
    NetworkConfig config;
    config.layers = 2;
    config.widths = {40, 40, 40};
    config.activation = "hard-tanh";
    config.input_mode = djs::InputMode::q1_target;
    config.q1 = 1e-8;  // every preactivation far inside the linear region
    const auto jac = djs::jacobian_spectrum(config, 2);
    const auto sur = djs::surrogate_spectrum(config, 2);
    REQUIRE(jac.eigenvalues.size() == sur.eigenvalues.size());
    for (std::size_t i = 0; i < jac.eigenvalues.size(); ++i)
      CHECK(jac.eigenvalues[i] == sur.eigenvalues[i]);
  }
  SECTION("saturated activation annihilates the jacobian but not the weights") {
    NetworkConfig config;
    config.layers = 1;
    config.widths = {32, 32};
    config.activation = "hard-tanh";
    config.input_mode = djs::InputMode::q1_target;
    config.q1 = 1e10;  // |preactivation| > 1 almost surely
    const auto spec = djs::jacobian_spectrum(config);
    for (double v : spec.eigenvalues) CHECK(v == 0.0);
  }
  SECTION("generic diagonals differ") {
    NetworkConfig config;
    config.layers = 1;
    config.widths = {64, 64};
    config.activation = "tanh";
    config.input_mode = djs::InputMode::q1_target;
    config.q1 = 1.0;
    const auto jac = djs::jacobian_spectrum(config);
    const auto sur = djs::surrogate_spectrum(config);
    CHECK(sur.label == "surrogate");
    bool differ = false;
    for (std::size_t i = 0; i < jac.eigenvalues.size(); ++i)
      differ |= jac.eigenvalues[i] != sur.eigenvalues[i];
    CHECK(differ);
  }
}

TEST_CASE("wide square gaussian matrices have norm near two", "[simulate]") {
  const double norm = djs::norm_check(1024, 5);
  CHECK(norm > 1.85);
  CHECK(norm < 2.15);
  SECTION("deterministic per address, varying across replicas") {
    CHECK(djs::norm_check(1024, 5) == norm);
    CHECK(djs::norm_check(1024, 5, 1) != norm);
  }
}

TEST_CASE("single linear layer has mean eigenvalue one", "[simulate]") {
  NetworkConfig config;
  config.layers = 1;
  config.widths = {512, 512};
  config.activation = "hard-tanh";
  config.input_mode = djs::InputMode::q1_target;
  config.q1 = 1e-8;
  const auto spec = djs::jacobian_spectrum(config);
  const double mean = std::accumulate(spec.eigenvalues.begin(),
                                      spec.eigenvalues.end(), 0.0) /
                      static_cast<double>(spec.n);
  CHECK(mean == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("run records carry the full replica context", "[simulate]") {
  auto config = small_net();
  SECTION("fields are populated") {
    const auto record = djs::run_simulation(config, 2);
    CHECK(record.replica == 2);
    CHECK(record.layer_q.size() == 2);
    CHECK(record.layer_norms.size() == 2);
    for (double n : record.layer_norms) CHECK(n > 0.0);
    CHECK(record.spectrum.n == 40);
    CHECK_FALSE(record.surrogate.has_value());
    CHECK(record.wall_seconds >= 0.0);
    const auto text = djs::to_json_string(record);
    CHECK(text.find("\"surrogate\"") == std::string::npos);
    CHECK(text.find("\"spectrum\"") != std::string::npos);
  }
  SECTION("surrogate is attached on request") {
    const auto record = djs::run_simulation(config, 2, true);
    REQUIRE(record.surrogate.has_value());
    CHECK(record.surrogate->n == 40);
    const auto text = djs::to_json_string(record);
    CHECK(text.find("\"surrogate\"") != std::string::npos);
  }
  SECTION("records are reproducible") {
    const auto a = djs::run_simulation(config, 4);
    const auto b = djs::run_simulation(config, 4);
    CHECK(a.spectrum.eigenvalues == b.spectrum.eigenvalues);
    CHECK(a.layer_q == b.layer_q);
    const auto c = djs::run_simulation(config, 5);
    CHECK(a.spectrum.eigenvalues != c.spectrum.eigenvalues);
  }
}

TEST_CASE("fluctuation studies across widths", "[simulate]") {
  NetworkConfig base;
  base.layers = 1;
  base.widths = {32, 32};
  base.activation = "tanh";
  base.input_mode = djs::InputMode::q1_target;
  base.q1 = 1.0;
  SECTION("whole-support window has zero fluctuation") {
    const auto rows =
        djs::fluctuation_study(base, {0.0, 1e9}, 6, {24, 48});
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
      CHECK(row.masses.size() == 6);
      CHECK(row.mean_mass == 1.0);
      CHECK(row.fourth_central_moment == 0.0);
    }
    CHECK(rows[0].n == 24);
    CHECK(rows[1].n == 48);
  }
  SECTION("partial window fluctuates and serializes") {
    const auto rows = djs::fluctuation_study(base, {0.4, 1.2}, 4, {32});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_mass > 0.0);
    CHECK(rows[0].mean_mass < 1.0);
    const auto csv = djs::to_csv(rows);
    CHECK(csv.find("fourth_central_moment") != std::string::npos);
  }
  SECTION("explicit input vectors cannot be resized across widths") {
    NetworkConfig bad = base;
    bad.input_mode = djs::InputMode::explicit_vector;
    bad.x0.assign(32, 0.5);
    CHECK_THROWS_AS(djs::fluctuation_study(bad, {0.0, 1.0}, 2, {16}),
                    ConfigError);
  }
}

TEST_CASE("comparison reports line up theory and simulation", "[simulate]") {
  NetworkConfig config;
  config.layers = 1;
  config.widths = {256, 256};
  config.activation = "tanh";
  config.input_mode = djs::InputMode::q1_target;
  config.q1 = 1.0;
  config.seed = 11;
  const auto report = djs::compare(config, {}, 4);
  SECTION("report is fully populated") {
    CHECK(report.reps == 4);
    REQUIRE(report.empirical_moments.size() == 4);
    REQUIRE(report.theory_moments.size() == 4);
    REQUIRE(report.moment_gaps.size() == 4);
    CHECK(report.schedule_q.size() == 1);
    CHECK(report.mean_layer_q.size() == 1);
    CHECK(report.q_gaps.size() == 1);
    CHECK(report.mean_layer_norms.size() == 1);
    CHECK_FALSE(report.extrapolated);
  }
  SECTION("finite-size agreement is already close") {
    CHECK(report.ks < 0.08);
    CHECK(report.moment_gaps[0] < 0.02);
    CHECK(report.q_gaps[0] < 0.05);
  }
  SECTION("report serializes to json with the key fields") {
    const auto text = djs::to_json_string(report);
    CHECK(text.find("\"ks\"") != std::string::npos);
    CHECK(text.find("moment_gaps") != std::string::npos);
    CHECK(text.find("schedule_q") != std::string::npos);
  }
}

TEST_CASE("thread count does not change results", "[simulate]") {
  NetworkConfig base;
  base.layers = 1;
  base.widths = {48, 48};
  base.activation = "tanh";
  base.input_mode = djs::InputMode::q1_target;
  base.q1 = 1.0;
  setenv("DJS_THREADS", "1", 1);
  const auto serial = djs::fluctuation_study(base, {0.4, 1.2}, 8, {32, 48});
  setenv("DJS_THREADS", "3", 1);
  const auto parallel = djs::fluctuation_study(base, {0.4, 1.2}, 8, {32, 48});
  unsetenv("DJS_THREADS");
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t r = 0; r < serial.size(); ++r) {
    REQUIRE(serial[r].masses.size() == parallel[r].masses.size());
    for (std::size_t i = 0; i < serial[r].masses.size(); ++i)
      CHECK(serial[r].masses[i] == parallel[r].masses[i]);
    CHECK(serial[r].fourth_central_moment == parallel[r].fourth_central_moment);
  }
}
