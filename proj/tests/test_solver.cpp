// Tests for the coupled (h, k) solver, density recovery, the multiplicative
// layer convolution, and full theory spectra. Closed-form anchors: at
// nu_r = nu_k = delta_1 and aspect one the resolved law is the ratio-1
// Marchenko-Pastur law, where f(-1) = (sqrt(5) - 1) / 2 solves f^2 + f = 1.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <random>
#include <vector>

#include "djs/errors.hpp"
#include "djs/measure.hpp"
#include "djs/network.hpp"
#include "djs/solver.hpp"
#include "djs/stransform.hpp"
#include "oracles.hpp"

using djs::ConfigError;
using djs::NumericalError;
using djs::SolverConfig;
using djs::SpectralMeasure;

namespace {

oracle::AtomList atom_list(const SpectralMeasure& mu) {
  oracle::AtomList out;
  for (const auto& a : mu.atoms()) {
    out.locations.push_back(a.location);
    out.weights.push_back(a.weight);
  }
  return out;
}

double cdf_at(const SpectralMeasure& mu, double x) {
  double acc = 0.0;
  for (const auto& a : mu.atoms())
    if (a.location <= x) acc += a.weight;
  return acc;
}

}  // namespace

TEST_CASE("solver config validation and serialization", "[solver]") {
  SECTION("defaults validate") { CHECK_NOTHROW(SolverConfig{}.validate()); }
  SECTION("bad values are rejected") {
    SolverConfig c;
    c.damping = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.eps_ladder = {1e-3, 1e-2};  // must strictly decrease
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.eps_ladder = {1e-2};  // richardson needs two rungs
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.grid_points = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.aspect_c = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SECTION("json round trip") {
    SolverConfig c;
    c.tol = 3e-10;
    c.grid_points = 777;
    c.aspect_c = 0.5;
    c.eps_ladder = {1e-2, 1e-3};
    const auto back = djs::solver_config_from_json(djs::to_json_string(c));
    CHECK(back.tol == c.tol);
    CHECK(back.grid_points == 777);
    CHECK(back.aspect_c == 0.5);
    CHECK(back.eps_ladder == c.eps_ladder);
  }
  SECTION("unknown json keys are rejected") {
    CHECK_THROWS_AS(djs::solver_config_from_json(R"({"tols": 1e-9})"),
                    ConfigError);
  }
}

TEST_CASE("point solve reproduces the square-case closed form", "[solver]") {
  const auto delta = SpectralMeasure::point_mass(1.0);
  SECTION("golden-ratio value at z = -1") {
    const auto sol = djs::solve_hk(delta, delta, {-1.0, 0.0});
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    REQUIRE(sol.valid);
    CHECK(sol.f.real() == Catch::Approx(golden).epsilon(1e-9));
    CHECK(std::abs(sol.f.imag()) < 1e-10);
    CHECK(sol.h.real() == Catch::Approx(golden).epsilon(1e-9));
    CHECK(sol.k.real() == Catch::Approx(golden).epsilon(1e-9));
  }
  SECTION("matches the stieltjes branch along the negative axis") {
    for (double z : {-0.25, -1.0, -4.0, -20.0}) {
      const auto sol = djs::solve_hk(delta, delta, {z, 0.0});
      REQUIRE(sol.valid);
      CHECK(sol.f.real() ==
            Catch::Approx(oracle::mp1_stieltjes_neg(z)).epsilon(1e-9));
    }
  }
}

TEST_CASE("point solves satisfy the defining equations and constraints",
          "[solver]") {
  const auto nu_r = SpectralMeasure::from_atoms(
      {{0.4, 0.25}, {1.0, 0.35}, {2.2, 0.4}});
  const auto nu_k = SpectralMeasure::from_atoms(
      {{0.0, 0.2}, {0.7, 0.4}, {1.5, 0.4}});
  const auto lr = atom_list(nu_r);
  const auto lk = atom_list(nu_k);
  SECTION("residuals vanish at random points in both half planes") {
    std::mt19937 gen(12345);
    std::uniform_real_distribution<double> re(-3.0, 4.0);
    std::uniform_real_distribution<double> im(0.05, 2.0);
    for (int i = 0; i < 30; ++i) {
      const double sign = i % 2 == 0 ? 1.0 : -1.0;
      const std::complex<double> z(re(gen), sign * im(gen));
      const auto sol = djs::solve_hk(nu_r, nu_k, z);
      REQUIRE(sol.valid);
      CHECK(oracle::hk_residual(lr, lk, 1.0, z, sol.h, sol.k, sol.f) < 1e-8);
      // Physical branch: h in the z half plane, k in the conjugate one.
      CHECK(sol.h.imag() * z.imag() > 0.0);
      CHECK(sol.k.imag() * z.imag() < 0.0);
    }
  }
  SECTION("aspect ratio enters the residual equations") {
    for (double c : {0.5, 2.0}) {
      SolverConfig cfg;
      cfg.aspect_c = c;
      const std::complex<double> z(0.8, 0.3);
      const auto sol = djs::solve_hk(nu_r, nu_k, z, cfg);
      REQUIRE(sol.valid);
      CHECK(oracle::hk_residual(lr, lk, c, z, sol.h, sol.k, sol.f) < 1e-8);
    }
  }
  SECTION("real negative axis keeps h positive and k in its band") {
    const double kappa2 = std::sqrt(djs::moment(nu_k, 2));
    for (double xi : {1e-6, 1e-3, 0.5, 10.0}) {
      const auto sol = djs::solve_hk(nu_r, nu_k, {-xi, 0.0});
      REQUIRE(sol.valid);
      CHECK(sol.h.real() > 0.0);
      CHECK(sol.k.real() > 0.0);
      CHECK(sol.k.real() <= kappa2 + 1e-9);
    }
  }
  SECTION("solution is unique under restarts") {
    const std::complex<double> z(1.2, 0.4);
    const auto base = djs::solve_hk(nu_r, nu_k, z);
    std::mt19937 gen(99);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int r = 0; r < 10; ++r) {
      const std::pair<std::complex<double>, std::complex<double>> init{
          {u(gen), u(gen)}, {u(gen), -u(gen)}};
      const auto sol = djs::solve_hk(nu_r, nu_k, z, {}, init);
      REQUIRE(sol.valid);
      CHECK(std::abs(sol.f - base.f) < 1e-9);
    }
  }
  SECTION("solution serializes to json") {
    const auto sol = djs::solve_hk(nu_r, nu_k, {0.5, 0.5});
    const auto text = djs::to_json_string(sol);
    CHECK(text.find("\"f\"") != std::string::npos);
    CHECK(text.find("residual") != std::string::npos);
  }
}

TEST_CASE("density recovery matches the reference bulk", "[solver]") {
  const auto delta = SpectralMeasure::point_mass(1.0);
  SECTION("square case against the closed-form density") {
    // The hard edge at zero loses mass like sqrt(eps_floor) under the
    // linear-in-eps extrapolation, so the mass check runs the ladder deeper
    // than the default floor of 1e-3.
    SolverConfig cfg;
    cfg.eps_ladder = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5};
    const auto grid = djs::resolve_density(delta, delta, cfg);
    REQUIRE(grid.lambdas.size() == grid.densities.size());
    CHECK(grid.mass_estimate == Catch::Approx(1.0).margin(5e-3));
    int checked = 0;
    for (std::size_t i = 0; i < grid.lambdas.size(); i += 37) {
      const double l = grid.lambdas[i];
      if (l < 0.3 || l > 3.7) continue;  // stay clear of the edges
      CHECK(grid.densities[i] ==
            Catch::Approx(oracle::mp_density(1.0, l)).margin(1e-3));
      ++checked;
    }
    CHECK(checked > 20);
    for (double d : grid.densities) CHECK(d >= 0.0);
  }
  SECTION("finer epsilon ladder reduces the error") {
    SolverConfig coarse;
    coarse.eps_ladder = {1e-1, 3e-2};
    coarse.grid_points = 400;
    SolverConfig fine;
    fine.grid_points = 400;
    const auto gc = djs::resolve_density(delta, delta, coarse);
    const auto gf = djs::resolve_density(delta, delta, fine);
    double ec = 0.0, ef = 0.0;
    for (std::size_t i = 0; i < gc.lambdas.size(); ++i) {
      if (gc.lambdas[i] < 0.3 || gc.lambdas[i] > 3.7) continue;
      ec = std::max(ec, std::abs(gc.densities[i] -
                                 oracle::mp_density(1.0, gc.lambdas[i])));
      ef = std::max(ef, std::abs(gf.densities[i] -
                                 oracle::mp_density(1.0, gf.lambdas[i])));
    }
    CHECK(ef < ec);
  }
  SECTION("unreachable tolerance raises a numerical error") {
    SolverConfig cfg;
    cfg.max_iter = 10;      // smallest the config accepts
    cfg.damping = 1e-9;     // steps far too small to converge in ten moves
    cfg.grid_points = 50;
    try {
      djs::resolve_density(delta, delta, cfg);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.operation() == "resolve_density");
    }
  }
}

TEST_CASE("layer convolution of point masses dilates the square-case law",
          "[solver]") {
  const double a = 0.8, b = 1.6;
  const auto got = djs::diamond(SpectralMeasure::point_mass(a),
                                SpectralMeasure::point_mass(b));
  const auto ref = djs::mp_reference(1.0, 4000).scaled(a * b);
  CHECK(djs::moment(got, 1) == Catch::Approx(a * b).epsilon(1e-3));
  CHECK(djs::moment(got, 2) ==
        Catch::Approx(2.0 * a * a * b * b).epsilon(5e-3));
  CHECK(djs::ks_distance(got, ref) < 5e-3);
  CHECK(got.origin_mass() == 0.0);
}

TEST_CASE("layer convolution moment and symmetry laws", "[solver]") {
  const auto nu_a = SpectralMeasure::from_atoms({{0.5, 0.5}, {1.4, 0.5}});
  const auto nu_b = SpectralMeasure::from_atoms(
      {{0.3, 0.3}, {0.9, 0.4}, {1.8, 0.3}});
  const auto ab = djs::diamond(nu_a, nu_b);
  SECTION("first moments multiply") {
    CHECK(djs::moment(ab, 1) ==
          Catch::Approx(djs::moment(nu_a, 1) * djs::moment(nu_b, 1))
              .epsilon(1e-3));
  }
  SECTION("composition is commutative") {
    const auto ba = djs::diamond(nu_b, nu_a);
    CHECK(djs::ks_distance(ab, ba) < 1e-3);
  }
}

TEST_CASE("factor law origin mass thins the spectrum", "[solver]") {
  // nu_k = bernoulli(p) at one: a fraction 1 - p of the directions is
  // annihilated, so the composed law keeps that much mass at the origin and
  // the mean equals p.
  const double p = 0.7;
  const auto thin =
      SpectralMeasure::from_atoms({{0.0, 1.0 - p}, {1.0, p}});
  const auto got = djs::diamond(thin, SpectralMeasure::point_mass(1.0));
  CHECK(got.origin_mass() == Catch::Approx(1.0 - p).margin(5e-3));
  CHECK(djs::moment(got, 1) == Catch::Approx(p).epsilon(2e-3));
}

TEST_CASE("aspect ratio controls the composed law", "[solver]") {
  const auto delta = SpectralMeasure::point_mass(1.0);
  SECTION("explicit unit aspect matches the default exactly") {
    SolverConfig unit;
    unit.aspect_c = 1.0;
    const auto a = djs::diamond(delta, delta);
    const auto b = djs::diamond(delta, delta, unit);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.atoms()[i].location == b.atoms()[i].location);
      CHECK(a.atoms()[i].weight == b.atoms()[i].weight);
    }
  }
  SECTION("wide case reproduces the dilated reference with origin mass") {
    SolverConfig cfg;
    cfg.aspect_c = 2.0;
    const auto got = djs::diamond(delta, delta, cfg).scaled(2.0);
    const auto ref = djs::mp_reference(2.0, 4000);
    CHECK(got.origin_mass() == Catch::Approx(0.5).margin(5e-3));
    CHECK(djs::ks_distance(got, ref) < 5e-3);
  }
  SECTION("narrow case stieltjes anchor") {
    // At c = 1/2 the value 2 f(-1) solves g^2 + 4g - 4 = 0, so
    // f(-1) = sqrt(2) - 1.
    SolverConfig cfg;
    cfg.aspect_c = 0.5;
    const auto sol = djs::solve_hk(delta, delta, {-1.0, 0.0}, cfg);
    REQUIRE(sol.valid);
    CHECK(sol.f.real() == Catch::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-9));
  }
}

TEST_CASE("multi-layer propagation matches the series solver", "[solver]") {
  const auto delta = SpectralMeasure::point_mass(1.0);
  SECTION("two flat layers give the depth-two combinatorial moments") {
    const auto got = djs::propagate_layers({delta, delta});
    const auto want = djs::deep_moment_series(delta, 2, 3);
    for (std::size_t k = 1; k <= 3; ++k)
      CHECK(djs::moment(got, static_cast<int>(k)) ==
            Catch::Approx(want[k - 1]).epsilon(1e-2));
  }
  SECTION("nontrivial factor laws") {
    const auto nu = SpectralMeasure::from_atoms({{0.6, 0.5}, {1.4, 0.5}});
    const auto got = djs::propagate_layers({nu, nu});
    const auto want = djs::deep_moment_series(nu, 2, 2);
    CHECK(djs::moment(got, 1) == Catch::Approx(want[0]).epsilon(1e-2));
    CHECK(djs::moment(got, 2) == Catch::Approx(want[1]).epsilon(1e-2));
  }
}

TEST_CASE("theory spectrum end to end", "[solver]") {
  djs::NetworkConfig net;
  net.layers = 1;
  net.widths = {256, 256};
  net.activation = "hard-tanh";
  net.input_mode = djs::InputMode::q1_target;
  net.q1 = 2.0;
  net.sigma_b2 = 0.0;
  SECTION("single layer hard-tanh keeps the thinned origin mass") {
    const auto out = djs::theory_spectrum(net);
    const double inside = std::erf(1.0 / std::sqrt(2.0 * 2.0));
    REQUIRE(out.schedule.q.size() == 1);
    CHECK(out.schedule.q[0] == 2.0);
    CHECK_FALSE(out.extrapolated);
    CHECK(out.spectrum.origin_mass() ==
          Catch::Approx(1.0 - inside).margin(5e-3));
    CHECK(djs::moment(out.spectrum, 1) == Catch::Approx(inside).epsilon(2e-3));
  }
  SECTION("shrinking width profile matches the aspect-corrected reference") {
    djs::NetworkConfig rect = net;
    rect.widths = {512, 256};
    rect.activation = "tanh";
    rect.q1 = 1.0;
    const auto out = djs::theory_spectrum(rect);
    // One tanh layer at q = 1: nu_k is nearly delta at E phi'(Z)^2 only in
    // the zero-variance limit, so anchor on moments instead: the first
    // moment is E phi'^2 regardless of aspect, and mass is conserved.
    const auto law = djs::dphi_squared_law(djs::make_tanh(), 1.0);
    CHECK(djs::moment(out.spectrum, 1) ==
          Catch::Approx(djs::moment(law, 1)).epsilon(5e-3));
    double total = 0.0;
    for (const auto& atom : out.spectrum.atoms()) total += atom.weight;
    CHECK(total == Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("expanding width profile gains origin mass") {
    djs::NetworkConfig rect = net;
    rect.widths = {256, 512};
    rect.q1 = 0.25;  // narrow gaussian, nu_k close to delta_1
    const auto out = djs::theory_spectrum(rect);
    // Half the output directions see a rank-deficient product.
    CHECK(out.spectrum.origin_mass() > 0.45);
    CHECK(cdf_at(out.spectrum, 1e-9) ==
          Catch::Approx(out.spectrum.origin_mass()));
  }
  SECTION("deterministic identity diagonal gives exactly the square case") {
    // hard-tanh at tiny q has phi' = 1 almost surely. The hard edge smears
    // like sqrt of the eps floor, so the comparison runs the ladder deeper
    // than the default.
    djs::NetworkConfig id = net;
    id.q1 = 1e-6;
    SolverConfig deep;
    deep.eps_ladder = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    const auto out = djs::theory_spectrum(id, deep);
    const auto ref = djs::mp_reference(1.0, 4000);
    CHECK(djs::ks_distance(out.spectrum, ref) < 5e-3);
  }
}

TEST_CASE("parallel and serial grid solves agree bitwise", "[solver]") {
  const auto delta = SpectralMeasure::point_mass(1.0);
  SolverConfig cfg;
  cfg.grid_points = 300;
  setenv("DJS_THREADS", "1", 1);
  const auto serial = djs::resolve_density(delta, delta, cfg);
  setenv("DJS_THREADS", "3", 1);
  const auto parallel = djs::resolve_density(delta, delta, cfg);
  unsetenv("DJS_THREADS");
  REQUIRE(serial.lambdas.size() == parallel.lambdas.size());
  for (std::size_t i = 0; i < serial.lambdas.size(); ++i) {
    CHECK(serial.lambdas[i] == parallel.lambdas[i]);
    CHECK(serial.densities[i] == parallel.densities[i]);
  }
}
