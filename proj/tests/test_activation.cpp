// Tests for activation functions, Gaussian expectations, the layer variance
// schedule, and the squared-derivative law. Frozen reference values below
// were computed with the independent Simpson quadrature in oracles.hpp.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "djs/activation.hpp"
#include "djs/errors.hpp"
#include "oracles.hpp"

using djs::Activation;
using djs::ConfigError;
using djs::QRecurrence;

namespace {

// Central finite difference for derivative checks away from breakpoints.
double fd(const std::function<double(double)>& f, double x) {
  const double h = 1e-6;
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("builtin activations evaluate and differentiate correctly",
          "[activation]") {
  SECTION("tanh") {
    const auto act = djs::make_tanh();
    CHECK(act.phi(0.7) == Catch::Approx(std::tanh(0.7)));
    CHECK(act.dphi(0.7) == Catch::Approx(fd(act.phi, 0.7)).margin(1e-8));
    CHECK(act.phi_bound == 1.0);
    CHECK(act.dphi_bound == 1.0);
    CHECK(act.bounded());
    CHECK(act.breakpoints.empty());
    CHECK_NOTHROW(act.validate());
  }
  SECTION("hard-tanh clips at the unit interval") {
    const auto act = djs::make_hard_tanh();
    CHECK(act.phi(0.3) == 0.3);
    CHECK(act.phi(2.0) == 1.0);
    CHECK(act.phi(-2.0) == -1.0);
    CHECK(act.dphi(0.3) == 1.0);
    CHECK(act.dphi(2.0) == 0.0);
    REQUIRE(act.breakpoints.size() == 2);
    CHECK(act.breakpoints[0] == -1.0);
    CHECK(act.breakpoints[1] == 1.0);
    CHECK_NOTHROW(act.validate());
  }
  SECTION("erf variant has unit slope at zero") {
    const auto act = djs::make_erf_unit_slope();
    CHECK(act.phi(0.4) == Catch::Approx(std::erf(0.4 * std::sqrt(M_PI) / 2.0)));
    CHECK(act.dphi(0.0) == Catch::Approx(1.0));
    CHECK(act.dphi(0.9) == Catch::Approx(fd(act.phi, 0.9)).margin(1e-8));
    CHECK(act.phi_bound == 1.0);
  }
  SECTION("scaled shifted tanh") {
    const auto act = djs::make_scaled_shifted_tanh();
    CHECK(act.phi(0.5) == Catch::Approx(1.2 * std::tanh(0.75 * 0.5) + 0.2));
    CHECK(act.dphi(0.5) == Catch::Approx(fd(act.phi, 0.5)).margin(1e-8));
    CHECK(act.phi_bound == Catch::Approx(1.4));
  }
  SECTION("relu is unbounded and gated") {
    CHECK_THROWS_AS(djs::activation_by_name("relu"), ConfigError);
    const auto act = djs::activation_by_name("relu", true);
    CHECK_FALSE(act.bounded());
    CHECK(act.phi(2.0) == 2.0);
    CHECK(act.phi(-2.0) == 0.0);
    CHECK(act.dphi(2.0) == 1.0);
    CHECK(act.dphi(-2.0) == 0.0);
  }
  SECTION("unknown names are rejected") {
    CHECK_THROWS_AS(djs::activation_by_name("swish"), ConfigError);
  }
  SECTION("builtin name list covers the lookups") {
    const auto names = djs::builtin_activation_names();
    for (const auto& n : names)
      CHECK_NOTHROW(djs::activation_by_name(n, true));
  }
}

TEST_CASE("piecewise linear activations", "[activation]") {
  SECTION("interpolates exactly and is constant beyond the knots") {
    const auto act = djs::make_piecewise_linear(
        "ramp", {{-1.0, -0.5}, {0.0, 0.0}, {2.0, 1.0}});
    CHECK(act.phi(-1.0) == -0.5);
    CHECK(act.phi(1.0) == Catch::Approx(0.5));
    CHECK(act.phi(-5.0) == -0.5);
    CHECK(act.phi(5.0) == 1.0);
    CHECK(act.dphi(1.0) == Catch::Approx(0.5));
    CHECK(act.dphi(5.0) == 0.0);
    CHECK(act.bounded());
  }
  SECTION("knot x values must strictly increase") {
    CHECK_THROWS_AS(
        djs::make_piecewise_linear("bad", {{0.0, 0.0}, {0.0, 1.0}}),
        ConfigError);
  }
  SECTION("json knot parsing matches the direct constructor") {
    const auto a = djs::activation_from_knots_json(
        R"({"knots": [[-1.0, -1.0], [1.0, 1.0]]})");
    const auto b = djs::make_piecewise_linear("custom",
                                              {{-1.0, -1.0}, {1.0, 1.0}});
    CHECK(a.phi(0.25) == b.phi(0.25));
    CHECK(a.phi(3.0) == b.phi(3.0));
    CHECK_THROWS_AS(djs::activation_from_knots_json(R"({"nope": 1})"),
                    ConfigError);
  }
}

TEST_CASE("gaussian expectations match independent quadrature",
          "[activation]") {
  SECTION("smooth integrand, frozen value") {
    auto tanh_sq = [](double x) { return std::tanh(x) * std::tanh(x); };
    CHECK(djs::gauss_expect(tanh_sq, 1.0) ==
          Catch::Approx(0.3942944903978412).epsilon(1e-12));
  }
  SECTION("kinked integrand uses breakpoint panels") {
    const auto act = djs::make_hard_tanh();
    auto sq = [&](double x) { return act.phi(x) * act.phi(x); };
    const double got = djs::gauss_expect(sq, 0.8, 201, act.breakpoints);
    CHECK(got == Catch::Approx(0.4707213662297493).epsilon(1e-10));
    const double ora = oracle::gauss_mean(sq, 0.8, {-1.0, 1.0});
    CHECK(got == Catch::Approx(ora).epsilon(1e-9));
  }
  SECTION("erf derivative second moment, frozen value") {
    const auto act = djs::make_erf_unit_slope();
    auto dsq = [&](double x) { return act.dphi(x) * act.dphi(x); };
    CHECK(djs::gauss_expect(dsq, 1.0) ==
          Catch::Approx(0.4913786798439915).epsilon(1e-10));
  }
  SECTION("relu squared has the closed form q over two") {
    const auto act = djs::activation_by_name("relu", true);
    auto sq = [&](double x) { return act.phi(x) * act.phi(x); };
    for (double q : {0.25, 1.0, 3.0})
      CHECK(djs::gauss_expect(sq, q, 201, act.breakpoints) ==
            Catch::Approx(q / 2.0).epsilon(1e-9));
  }
  SECTION("zero variance evaluates the integrand at zero") {
    auto f = [](double x) { return 3.0 + x; };
    CHECK(djs::gauss_expect(f, 0.0) == Catch::Approx(3.0));
  }
  SECTION("negative variance is rejected") {
    CHECK_THROWS_AS(djs::gauss_expect([](double) { return 1.0; }, -0.1),
                    ConfigError);
  }
}

TEST_CASE("variance schedule and fixed point", "[activation]") {
  SECTION("schedule satisfies the recursion bounds") {
    const auto act = djs::make_tanh();
    const auto sched = djs::q_schedule(1.5, 5, act, 0.1);
    REQUIRE(sched.q.size() == 5);
    CHECK(sched.q[0] == 1.5);
    CHECK(sched.source_q1 == 1.5);
    CHECK(sched.sigma_b2 == 0.1);
    for (std::size_t l = 1; l < sched.q.size(); ++l) {
      CHECK(sched.q[l] > 0.1);
      CHECK(sched.q[l] <= 1.0 + 0.1);
    }
  }
  SECTION("schedule steps match the oracle map") {
    const auto act = djs::make_tanh();
    const auto sched = djs::q_schedule(0.7, 3, act, 0.05);
    auto sq = [](double x) { return std::tanh(x) * std::tanh(x); };
    double q = 0.7;
    for (std::size_t l = 1; l < 3; ++l) {
      q = oracle::gauss_mean(sq, q) + 0.05;
      CHECK(sched.q[l] == Catch::Approx(q).epsilon(1e-8));
    }
  }
  SECTION("recurrence without bias drops the additive term") {
    const auto act = djs::make_tanh();
    const auto with = djs::q_schedule(1.0, 2, act, 0.3, QRecurrence::with_bias);
    const auto without =
        djs::q_schedule(1.0, 2, act, 0.3, QRecurrence::without_bias);
    CHECK(with.q[1] - without.q[1] == Catch::Approx(0.3).epsilon(1e-10));
  }
  SECTION("fixed point values are frozen against the oracle iteration") {
    const auto tanh_act = djs::make_tanh();
    CHECK(djs::q_fixed_point(tanh_act, 0.25) ==
          Catch::Approx(0.5346486560242917).epsilon(1e-9));
    CHECK(djs::q_fixed_point(tanh_act, 0.2) ==
          Catch::Approx(0.4604563935642996).epsilon(1e-9));
    const auto ht = djs::make_hard_tanh();
    CHECK(djs::q_fixed_point(ht, 0.05) ==
          Catch::Approx(0.3402028468486878).epsilon(1e-9));
  }
  SECTION("fixed point is a genuine fixed point and restart-stable") {
    const auto act = djs::make_tanh();
    const double qs = djs::q_fixed_point(act, 0.15);
    auto sq = [](double x) { return std::tanh(x) * std::tanh(x); };
    CHECK(oracle::gauss_mean(sq, qs) + 0.15 == Catch::Approx(qs).margin(1e-8));
    const double again = djs::q_fixed_point(act, 0.15, 1e-12, 0.8);
    CHECK(again == Catch::Approx(qs).margin(1e-10));
  }
}

TEST_CASE("law of the squared derivative", "[activation]") {
  SECTION("hard-tanh splits mass between zero and one") {
    const double q = 2.0;
    const auto law = djs::dphi_squared_law(djs::make_hard_tanh(), q);
    REQUIRE(law.size() == 2);
    const double inside = std::erf(1.0 / std::sqrt(2.0 * q));
    CHECK(law.atoms()[1].location == 1.0);
    CHECK(law.atoms()[1].weight == Catch::Approx(inside).epsilon(1e-10));
    CHECK(law.origin_mass() == Catch::Approx(1.0 - inside).epsilon(1e-9));
  }
  SECTION("relu splits mass evenly") {
    const auto act = djs::activation_by_name("relu", true);
    const auto law = djs::dphi_squared_law(act, 1.0);
    REQUIRE(law.size() == 2);
    CHECK(law.origin_mass() == Catch::Approx(0.5).epsilon(1e-10));
    CHECK(law.atoms()[1].location == 1.0);
  }
  SECTION("zero variance gives a point mass at the slope at zero") {
    const auto law = djs::dphi_squared_law(djs::make_tanh(), 0.0);
    CHECK(law.size() == 1);
    CHECK(law.max_location() == Catch::Approx(1.0));
  }
  SECTION("mean matches the direct expectation") {
    const auto act = djs::make_tanh();
    const double q = 0.9;
    const auto law = djs::dphi_squared_law(act, q);
    auto dsq = [&](double x) { return act.dphi(x) * act.dphi(x); };
    CHECK(djs::moment(law, 1) ==
          Catch::Approx(oracle::gauss_mean(dsq, q)).epsilon(1e-6));
  }
}
