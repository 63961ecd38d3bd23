#include <numbers>

#include "doctest.h"
#include "kepreg/shooting.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {

PerturbationPtr forcing(Dim dim) {
  if (dim == Dim::Planar) {
    return make_perturbation({"forced_kepler", {{"mean", "0.2,-0.1"}, {"cos1", "0.3,0"}, {"sin1", "0,0.3"}}},
                             dim, 2 * std::numbers::pi);
  }
  return make_perturbation({"forced_kepler", {{"mean", "0.2,-0.1,0.05"}, {"cos1", "0.3,0,0.1"}, {"sin2", "0,0.3,0"}}},
                           dim, 2 * std::numbers::pi);
}

Vec random_state(std::mt19937_64& rng, Dim dim) {
  Vec x = testing::random_vec(rng, state_size(dim), 1.2);
  x[StateLayout(dim).tau()] = testing::uniform(rng, 0.5, 1.5);
  return x;
}

}  // namespace

TEST_CASE("hamiltonian examples") {
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  Vec x(6);
  x << 1, 0, 0, 0, 0, 1;
  CHECK(m.hamiltonian(x) == Approx(0.0));
  const RegularizedKepler mp(Dim::Planar, 0.5, forcing(Dim::Planar));
  x << 0, 0, 1.5, -0.5, 2.0, 0.7;
  CHECK(mp.hamiltonian(x) == Approx((1.5 * 1.5 + 0.25) / 8 - 1).epsilon(1e-15));
}

TEST_CASE("unperturbed field") {
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  Vec x(6);
  x << 0.3, -0.2, 1.0, 0.5, 2.0, 0.8;
  const Vec f = m.field(x);
  CHECK(f[0] == Approx(0.25));
  CHECK(f[1] == Approx(0.125));
  CHECK(f[2] == Approx(-2 * 0.8 * 0.3));
  CHECK(f[3] == Approx(2 * 0.8 * 0.2));
  CHECK(f[4] == Approx(0.13));
  CHECK(f[5] == 0.0);
  x[0] = x[1] = 0.0;
  CHECK(m.field(x)[4] == 0.0);
}

TEST_CASE("field is the Hamiltonian vector field of K") {
  std::mt19937_64 rng(23);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.3, forcing(dim));
    const StateLayout L(dim);
    for (int n = 0; n < 20; ++n) {
      const Vec x = random_state(rng, dim);
      const Vec g = testing::fd_gradient([&](const Vec& y) { return m.hamiltonian(y); }, x);
      Vec expect(x.size());
      expect.segment(L.z(), L.zd) = g.segment(L.w(), L.zd);
      expect.segment(L.w(), L.zd) = -g.segment(L.z(), L.zd);
      expect[L.t()] = g[L.tau()];
      expect[L.tau()] = -g[L.t()];
      CHECK(testing::rel_err(m.field(x), expect) < 1e-7);
      CHECK(testing::rel_err(m.hamiltonian_gradient(x), g) < 1e-7);
    }
  }
}

TEST_CASE("potential gradient matches finite differences of |z|^2 U") {
  std::mt19937_64 rng(29);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.7, forcing(dim));
    const int zd = z_dim(dim);
    for (int n = 0; n < 20; ++n) {
      const Vec x = random_state(rng, dim);
      const Vec fd = testing::fd_gradient(
          [&](const Vec& z) {
            Vec y = x;
            y.head(zd) = z;
            return m.potential(y);
          },
          x.head(zd));
      CHECK((m.potential_gradient(x) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("jacobian matches directional differences and is linear") {
  std::mt19937_64 rng(31);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.4, forcing(dim));
    for (int n = 0; n < 10; ++n) {
      const Vec x = random_state(rng, dim);
      const Mat fd = testing::fd_jacobian([&](const Vec& y) { return m.field(y); }, x);
      const Mat J = m.jacobian(x);
      CHECK((J - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
      const Vec y1 = testing::random_vec(rng, x.size()), y2 = testing::random_vec(rng, x.size());
      const Vec lhs = m.variational(x, 2.0 * y1 - 3.0 * y2);
      const Vec rhs = 2.0 * m.variational(x, y1) - 3.0 * m.variational(x, y2);
      CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
    }
  }
}

TEST_CASE("explicit unperturbed linearization agrees with the generic jacobian") {
  std::mt19937_64 rng(37);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const RegularizedKepler m(dim, 0.0, nullptr);
    for (int n = 0; n < 10; ++n) {
      const Vec x = random_state(rng, dim);
      const Vec y = testing::random_vec(rng, x.size());
      CHECK((variational_field_unperturbed(dim, x, y) - m.variational(x, y)).norm() < 1e-10);
    }
  }
}

TEST_CASE("spatial field restricted to the default Levi-Civita plane reproduces the planar field") {
  std::mt19937_64 rng(41);
  const auto U2 = make_perturbation({"forced_kepler", {{"cos1", "0.3,0"}, {"sin1", "0,0.3"}}}, Dim::Planar,
                                    2 * std::numbers::pi);
  const auto U3 = make_perturbation({"forced_kepler", {{"cos1", "0.3,0,0"}, {"sin1", "0,0.3,0"}}}, Dim::Spatial,
                                    2 * std::numbers::pi);
  const RegularizedKepler m2(Dim::Planar, 0.5, U2), m3(Dim::Spatial, 0.5, U3);
  for (int n = 0; n < 20; ++n) {
    const Vec x2 = random_state(rng, Dim::Planar);
    const Vec x3 = embed_planar_state(x2);
    CHECK(m3.hamiltonian(x3) == Approx(m2.hamiltonian(x2)).epsilon(1e-13));
    CHECK((m3.field(x3) - embed_planar_state(m2.field(x2))).norm() < 1e-13);
    CHECK(std::abs(bl_value(x3)) < 1e-15);
  }
}

TEST_CASE("bl_value examples") {
  RegState3 s;
  s.z = Quaternion::one();
  s.w = Quaternion::i();
  CHECK(bl_value(s) == Approx(-1.0));
  std::mt19937_64 rng(43);
  const Quaternion z = testing::random_quaternion(rng);
  s.z = z;
  s.w = z * 2.5;
  CHECK(std::abs(bl_value(s)) < 1e-15);
}

TEST_CASE("bl symplectic gradient generates the S1 action and is normal to the BL level set") {
  std::mt19937_64 rng(47);
  for (int n = 0; n < 10; ++n) {
    const Vec x = random_state(rng, Dim::Spatial);
    const Vec g = testing::fd_gradient([](const Vec& y) { return bl_value(y); }, x);
    Vec expect = Vec::Zero(10);
    expect.segment(0, 4) = g.segment(4, 4);
    expect.segment(4, 4) = -g.segment(0, 4);
    // (i z, i w) equals -J grad BL for the convention z' = dK/dw, w' = -dK/dz.
    CHECK((bl_symplectic_gradient(x) + expect).norm() < 1e-8);
    const double h = 1e-6;
    const Vec fd = (group_action(Dim::Spatial, h, x) - group_action(Dim::Spatial, -h, x)) / (2 * h);
    CHECK((bl_symplectic_gradient(x) - fd).norm() < 1e-8);
  }
}

TEST_CASE("physical energy equals -tau + eps U on K = 0") {
  const ManifoldSpec spec{1, 2 * std::numbers::pi, Dim::Planar};
  SeedParams sp;
  sp.alpha = 0.6;
  const Vec x = seed_state(spec, sp);
  const RegularizedKepler m(Dim::Planar, 0.0, nullptr);
  CHECK(m.physical_energy(x) == Approx(-constants(spec).tau).epsilon(1e-13));
}

TEST_CASE("perturbation catalog") {
  const double T = 2 * std::numbers::pi;
  const auto U = make_perturbation({"forced_kepler", {{"mean", "2,0"}}}, Dim::Planar, T);
  PVec u(2);
  u << 0.7, -1.1;
  CHECK(U->value(0.3, u, 1.0) == Approx(1.4));
  CHECK(U->gradient(0.3, u, 1.0)[0] == Approx(2));
  CHECK(U->gradient(0.3, u, 1.0)[1] == Approx(0));

  const auto F = make_perturbation({"fatou", {{"k", "0.5"}, {"h", "0.25"}, {"n", "1"}, {"gamma", "0"}}},
                                   Dim::Planar, std::numbers::pi);
  PVec e1(2);
  e1 << 1, 0;
  CHECK(F->value(0.0, e1, 1.0) == Approx(0.75));
  CHECK(F->self_check().max_gradient_error < 1e-6);
  CHECK_THROWS_AS(RegularizedKepler(Dim::Planar, 0.1, F), ConfigError);

  CHECK_THROWS_AS(make_perturbation({"forced_kepler", {{"bogus", "1,0"}}}, Dim::Planar, T), ConfigError);
  CHECK_THROWS_AS(make_perturbation({"forced_kepler", {{"mean", "1,0,0"}}}, Dim::Planar, T), ConfigError);
  CHECK_THROWS_AS(make_perturbation({"nonexistent", {}}, Dim::Planar, T), ConfigError);
  CHECK_THROWS_AS(make_perturbation({"fatou", {}}, Dim::Spatial, T), ConfigError);
  CHECK_FALSE(builtin_perturbations().empty());
}

TEST_CASE("perturbations are periodic by construction") {
  const double T = 2 * std::numbers::pi;
  const auto U = forcing(Dim::Spatial);
  PVec u(3);
  u << 0.3, 0.2, -0.4;
  for (double t : {0.1, 1.7, 4.0}) {
    CHECK(U->value(t + 3 * T, u, 1.0) == Approx(U->value(t, u, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("physical field") {
  PhysState s;
  s.u = PVec(2);
  s.v = PVec(2);
  s.u << 1, 0;
  s.v << 0, 1;
  const PhysState d = physical_field(s, 0.0, nullptr);
  CHECK(d.u[1] == Approx(1));
  CHECK(d.v[0] == Approx(-1));
  CHECK(d.v[1] == Approx(0));
  CHECK(d.t == Approx(1));
  s.u << 0, 0;
  CHECK_THROWS_AS(physical_field(s, 0.0, nullptr), DomainError);
}

TEST_CASE("physical jacobian matches finite differences") {
  std::mt19937_64 rng(53);
  const PhysicalKepler m(3, 0.2, forcing(Dim::Spatial), 1.5);
  for (int n = 0; n < 10; ++n) {
    Vec x = testing::random_vec(rng, 7);
    x[0] += 2.0;
    const Mat fd = testing::fd_jacobian([&](const Vec& y) { return m.field(y); }, x);
    CHECK((m.jacobian(x) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
  }
}
