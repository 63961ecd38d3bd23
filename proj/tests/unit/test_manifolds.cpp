#include <numbers>

#include "doctest.h"
#include "kepreg/manifolds.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {
constexpr double kT = 2 * std::numbers::pi;
}

TEST_CASE("manifold constants") {
  const auto c1 = constants({1, kT, Dim::Planar});
  CHECK(std::abs(c1.tau - std::pow(2.0, -1.0 / 3.0)) < 1e-12);
  CHECK(std::abs(c1.S - kT * std::pow(2.0, 2.0 / 3.0)) < 1e-12);
  CHECK(c1.S == Approx(9.973934966328).epsilon(1e-12));
  CHECK(c1.tau == Approx(0.7937005259).epsilon(1e-10));
  CHECK(constants({8, kT, Dim::Planar}).tau == Approx(4 * c1.tau).epsilon(1e-14));
  for (int k = 1; k <= 10; ++k) {
    const auto c = constants({k, kT, Dim::Spatial});
    CHECK(std::abs(k * std::numbers::pi / (c.omega * c.tau) - kT) < 1e-12);
    CHECK(c.S == Approx(k * c.sigma));
  }
  for (double T : {1.0, 3.5, 20.0}) {
    const auto c = constants({2, T, Dim::Planar});
    CHECK(std::abs(2 * std::numbers::pi / (c.omega * c.tau) - T) < 1e-12 * T);
  }
}

TEST_CASE("manifold spec validation") {
  CHECK_THROWS_AS(constants({0, kT, Dim::Planar}), ConfigError);
  CHECK_THROWS_AS(constants({1, -1.0, Dim::Planar}), ConfigError);
}

TEST_CASE("seed states lie on their manifolds") {
  std::mt19937_64 rng(67);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.0, nullptr);
    for (int k = 1; k <= 3; ++k) {
      const ManifoldSpec spec{k, kT, dim};
      for (int n = 0; n < 20; ++n) {
        const Vec x = seed_state(spec, random_seed_params(rng, dim));
        CHECK(std::abs(m.hamiltonian(x)) < 1e-14);
        CHECK(x[m.layout().tau()] == constants(spec).tau);
        if (dim == Dim::Spatial) CHECK(std::abs(bl_value(x)) < 1e-14);
        CHECK_NOTHROW(require_on_manifold(spec, x));
      }
      Vec off = seed_state(spec, {});
      off[0] += 1e-3;
      CHECK_THROWS_AS(require_on_manifold(spec, off), InvariantError);
      CHECK_THROWS_AS(require_on_manifold({k + 1, kT, dim}, seed_state(spec, {})), InvariantError);
    }
  }
}

TEST_CASE("3D seed in the plane spanned by 1 and j has BL = 0") {
  SeedParams sp;
  sp.plane_v1 = Quaternion::one();
  sp.plane_v2 = Quaternion::j();
  sp.alpha = 0.3;
  sp.phase_w = 0.4;
  const Vec x = seed_state({1, kT, Dim::Spatial}, sp);
  CHECK(std::abs(bl_value(x)) < 1e-15);
  sp.plane_v2 = Quaternion::i();
  CHECK_THROWS_AS(seed_state({1, kT, Dim::Spatial}, sp), ConfigError);
}

TEST_CASE("circular seed gives constant radius") {
  for (bool prograde : {true, false}) {
    const ManifoldSpec spec{1, kT, Dim::Planar};
    SeedParams sp;
    sp.preset = SeedPreset::Circular;
    sp.prograde = prograde;
    const Vec x0 = seed_state(spec, sp);
    const double r0 = z_complex(x0).norm2();
    for (int j = 0; j <= 50; ++j) {
      const Vec x = closed_form_flow(spec, x0, constants(spec).S * j / 50.0);
      CHECK(std::abs(z_complex(x).norm2() - r0) < 1e-12);
    }
  }
}

TEST_CASE("closed form flow properties") {
  std::mt19937_64 rng(71);
  const ManifoldSpec spec{2, kT, Dim::Planar};
  const auto c = constants(spec);
  const Vec x0 = seed_state(spec, random_seed_params(rng, Dim::Planar));
  Vec end = closed_form_flow(spec, x0, c.S);
  CHECK(end[4] - x0[4] == Approx(kT).epsilon(1e-14));
  end[4] = x0[4];
  CHECK((end - x0).norm() < 1e-13);
  const Vec half = closed_form_flow(spec, x0, c.sigma / 2);
  const Complex u0 = lc_position(z_complex(x0)), uh = lc_position(z_complex(half));
  CHECK((u0 - uh).abs() < 1e-13);
}

TEST_CASE("closed form variation endpoint formulas") {
  std::mt19937_64 rng(73);
  for (int k = 1; k <= 3; ++k) {
    const ManifoldSpec spec{k, kT, Dim::Planar};
    const auto c = constants(spec);
    const Vec x0 = seed_state(spec, random_seed_params(rng, Dim::Planar));
    const Vec y = closed_form_variation(spec, x0, c.S);
    const Complex z0 = z_complex(x0), w0 = w_complex(x0);
    const double a = k * std::numbers::pi / c.omega;
    const Complex y1 = z0 - w0 * (a / 2), y2 = z0 * (4 * a * c.tau);
    CHECK((Complex{y[0], y[1]} - y1).abs() < 1e-12);
    CHECK((Complex{y[2], y[3]} - y2).abs() < 1e-12);
    CHECK(y[4] == Approx(a * (-2 * z0.norm2() + 3 / c.tau)).epsilon(1e-12));
    CHECK(y[5] == Approx(-2 * c.tau));
    const Vec ys = special_tangent(spec, x0);
    CHECK((closed_form_variation(spec, x0, 0.0) - ys).norm() < 1e-15);
  }
}

TEST_CASE("principal angle") {
  Mat B(3, 1);
  B << 1, 0, 0;
  Vec v(3);
  v << 1, 1, 0;
  CHECK(principal_angle(v, B) == Approx(std::numbers::pi / 4));
  v << 0, 0, 2;
  CHECK(principal_angle(v, B) == Approx(std::numbers::pi / 2));
  v << -3, 0, 0;
  CHECK(principal_angle(v, B) == Approx(0.0));
}

TEST_CASE("nondegeneracy certificates") {
  std::mt19937_64 rng(79);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    for (int k = 1; k <= 3; ++k) {
      const ManifoldSpec spec{k, kT, dim};
      for (int n = 0; n < 3; ++n) {
        const Vec x0 = seed_state(spec, random_seed_params(rng, dim));
        const auto r = nondegeneracy_certificate(spec, x0);
        CHECK(r.certified);
        CHECK(r.principal_angle > 1e-3);
        CHECK(r.closed_form_mismatch < 1e-6);
        CHECK(r.degeneracy.dim_E == (dim == Dim::Planar ? 4 : 8));
        CHECK(r.degeneracy.multipliers.size() == state_size(dim));
        for (int i = 0; i < r.degeneracy.multipliers.size(); ++i) {
          CHECK(std::abs(r.degeneracy.multipliers[i] - 1.0) < 1e-3);
        }
        if (dim == Dim::Spatial) CHECK(r.bl_direction.size() == state_size(dim));
      }
    }
  }
  // Rectilinear seeds (w0 = 0) stay certified.
  SeedParams sp;
  sp.preset = SeedPreset::Rectilinear;
  CHECK(nondegeneracy_certificate({1, kT, Dim::Planar}, seed_state({1, kT, Dim::Planar}, sp)).certified);
}

TEST_CASE("spatial certificate: J grad BL is orthogonal to the Levi-Civita subspace of Y*") {
  std::mt19937_64 rng(83);
  const ManifoldSpec spec{1, kT, Dim::Spatial};
  const SeedParams sp = random_seed_params(rng, Dim::Spatial);
  const Vec x0 = seed_state(spec, sp);
  const Vec bl = bl_symplectic_gradient(x0);
  const Vec ys = special_tangent(spec, x0);
  CHECK(std::abs(bl.dot(ys)) < 1e-13);
  CHECK(std::abs(bl.dot(x0)) < 1e-13);
}
