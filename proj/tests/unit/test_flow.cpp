#include <algorithm>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

#include "doctest.h"
#include "kepreg/manifolds.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {

constexpr double kT = 2 * std::numbers::pi;

OdeSystem harmonic(double omega) {
  OdeSystem sys;
  sys.n = 2;
  sys.f = [omega](const Vec& x, Vec& dx) {
    dx.resize(2);
    dx << x[1], -omega * omega * x[0];
  };
  sys.jacobian = [omega](const Vec&) {
    Mat J(2, 2);
    J << 0, 1, -omega * omega, 0;
    return J;
  };
  return sys;
}

}  // namespace

TEST_CASE("harmonic oscillator over one period") {
  const double omega = 1.7;
  Vec x0(2);
  x0 << 0.4, -0.9;
  const auto tr = integrate(harmonic(omega), x0, 2 * std::numbers::pi / omega);
  CHECK((tr.state(tr.size() - 1) - x0).norm() < 1e-10);
  const double s = 0.77;
  const Vec e = tr.eval(s);
  CHECK(e[0] == Approx(x0[0] * std::cos(omega * s) + x0[1] / omega * std::sin(omega * s)).epsilon(1e-10));
  CHECK_THROWS_AS(tr.eval(-1.0), DomainError);
  CHECK_THROWS_AS(tr.eval(10.0), DomainError);
}

TEST_CASE("integrator config validation") {
  IntegratorConfig c;
  c.rel_tol = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("step exhaustion raises IntegrationError") {
  IntegratorConfig c;
  c.max_steps = 3;
  Vec x0(2);
  x0 << 1, 0;
  CHECK_THROWS_AS(integrate(harmonic(1.0), x0, 100.0, c), IntegrationError);
}

TEST_CASE("unperturbed flow from manifold seeds closes and matches the closed form") {
  std::mt19937_64 rng(59);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.0, nullptr);
    for (int k = 1; k <= 3; ++k) {
      const ManifoldSpec spec{k, kT, dim};
      const Vec x0 = seed_state(spec, random_seed_params(rng, dim));
      const double S = constants(spec).S;
      const auto tr = integrate(make_system(m), x0, S);
      Vec end = tr.state(tr.size() - 1);
      CHECK(end[m.layout().t()] - x0[m.layout().t()] == Approx(kT).epsilon(1e-12));
      end[m.layout().t()] -= kT;
      CHECK((end - x0).norm() < 1e-8);
      for (int j = 1; j < 10; ++j) {
        const double s = S * j / 10.0;
        CHECK((tr.eval(s) - closed_form_flow(spec, x0, s)).norm() < 1e-9);
      }
      const auto inv = invariant_report(tr, m);
      CHECK(inv.max_K_drift < 1e-10);
      CHECK(inv.max_tau_drift == 0.0);
    }
  }
}

TEST_CASE("variational integration") {
  const ManifoldSpec spec{2, kT, Dim::Planar};
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  SeedParams sp;
  sp.alpha = 0.4;
  sp.phase_w = 1.1;
  const Vec x0 = seed_state(spec, sp);
  const double S = constants(spec).S;
  const auto var = integrate_with_variational(make_system(m), x0, S);
  const Vec xe = var.trajectory.state(var.trajectory.size() - 1);
  CHECK((var.M * m.field(x0) - m.field(xe)).norm() < 1e-7);
  CHECK(var.M.determinant() == Approx(1.0).epsilon(1e-6));
  const Vec ystar = special_tangent(spec, x0);
  const Vec y_num = var.M * ystar;
  const Vec y_cf = closed_form_variation(spec, x0, S);
  CHECK((y_num - y_cf).norm() <= 1e-6 * y_cf.norm());

  // Tangent columns against finite differences of the flow map.
  const Vec fd = testing::fd_jacobian(
                     [&](const Vec& y) {
                       const auto t = integrate(make_system(m), y, 1.3);
                       return Vec(t.state(t.size() - 1));
                     },
                     x0, 1e-6)
                     .col(0);
  const auto short_var = integrate_with_variational(make_system(m), x0, 1.3);
  CHECK((short_var.M.col(0) - fd).norm() < 1e-6);
}

TEST_CASE("perturbed first integrals") {
  const auto U = make_perturbation({"forced_kepler", {{"cos1", "0.3,0,0"}, {"sin1", "0,0.3,0"}}}, Dim::Spatial, kT);
  const RegularizedKepler m(Dim::Spatial, 0.01, U);
  std::mt19937_64 rng(61);
  const ManifoldSpec spec{1, kT, Dim::Spatial};
  const Vec x0 = seed_state(spec, random_seed_params(rng, Dim::Spatial));
  const auto tr = integrate(make_system(m), x0, 2 * constants(spec).S);
  const auto inv = invariant_report(tr, m);
  CHECK(inv.max_K_drift < 1e-9);
  REQUIRE(inv.max_BL_drift.has_value());
  CHECK(*inv.max_BL_drift < 1e-9);
}

TEST_CASE("collision events on a rectilinear orbit") {
  const ManifoldSpec spec{1, kT, Dim::Planar};
  SeedParams sp;
  sp.preset = SeedPreset::Rectilinear;
  const Vec x0 = seed_state(spec, sp);
  CHECK(x0.segment(2, 2).norm() == 0.0);
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  const auto c = constants(spec);
  const auto tr = integrate(make_system(m), x0, c.S);
  const auto ev = detect_events(tr, {collision_event(Dim::Planar)});
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].s == Approx(0.5 * std::numbers::pi / c.omega).epsilon(1e-9));
  CHECK(ev[1].s == Approx(1.5 * std::numbers::pi / c.omega).epsilon(1e-9));
  // z(s) stays on the real line.
  for (int j = 0; j <= 20; ++j) CHECK(std::abs(tr.eval(c.S * j / 20.0)[1]) < 1e-12);

  // No collisions on a circular orbit.
  sp.preset = SeedPreset::Circular;
  const auto tc = integrate(make_system(m), seed_state(spec, sp), c.S);
  CHECK(detect_events(tc, {collision_event(Dim::Planar)}).empty());
}

TEST_CASE("time crossing events") {
  const ManifoldSpec spec{1, kT, Dim::Planar};
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  SeedParams sp;
  sp.alpha = 0.9;
  const Vec x0 = seed_state(spec, sp);
  const auto tr = integrate(make_system(m), x0, constants(spec).S);
  const auto ev = detect_events(tr, {time_crossing_event(Dim::Planar, 2.0)});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].x[4] == Approx(2.0).epsilon(1e-10));
}

TEST_CASE("trajectory CSV has a header block and one row per step") {
  const ManifoldSpec spec{1, kT, Dim::Spatial};
  const RegularizedKepler m(Dim::Spatial, 0.0, nullptr);
  SeedParams sp;
  const auto tr = integrate(make_system(m), seed_state(spec, sp), 1.0);
  std::ostringstream os;
  write_trajectory_csv(os, tr, m, {"a = 1"});
  const std::string s = os.str();
  CHECK(s.rfind("# a = 1\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) == tr.size() + 2);
}
