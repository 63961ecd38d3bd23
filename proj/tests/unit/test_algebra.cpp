#include "doctest.h"
#include "kepreg/algebra.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

TEST_CASE("lc_map examples") {
  auto r = lc_map({1, 1}, {2, 0});
  CHECK(r.u.x == Approx(0));
  CHECK(r.u.y == Approx(2));
  CHECK(r.v.x == Approx(0.5));
  CHECK(r.v.y == Approx(0.5));

  r = lc_map({1, 0}, {0, 0});
  CHECK(r.u.x == Approx(1));
  CHECK(r.v.norm2() == 0.0);

  r = lc_map({0, 1}, {0, 4});
  CHECK(r.u.x == Approx(-1));
  CHECK(r.u.y == Approx(0));
  CHECK(r.v.x == Approx(-2));
  CHECK(r.v.y == Approx(0));
}

TEST_CASE("lc_map inverse relations hold on random inputs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Complex z{testing::uniform(rng, -2, 2), testing::uniform(rng, -2, 2)};
    const Complex w{testing::uniform(rng, -2, 2), testing::uniform(rng, -2, 2)};
    const auto r = lc_map(z, w);
    const Complex back = 2.0 * z.conj() * r.v;
    CHECK((back - w).abs() < 1e-13);
    CHECK((r.u - z * z).abs() < 1e-14);
  }
}

TEST_CASE("lc_map rejects the collision point") { CHECK_THROWS_AS(lc_map({0, 0}, {1, 0}), DomainError); }

TEST_CASE("lc_position") {
  CHECK(lc_position({0, 0}).norm2() == 0.0);
  const Complex u = lc_position({1, 1});
  CHECK(u.x == Approx(0));
  CHECK(u.y == Approx(2));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Complex z = Complex::polar(testing::uniform(rng, 0.1, 3), testing::uniform(rng, -3, 3));
    CHECK(lc_position(z).abs() == Approx(z.norm2()).epsilon(1e-14));
  }
}

TEST_CASE("ks_map examples") {
  auto u = ks_map(Quaternion::one());
  CHECK(u.u1 == 1.0);
  CHECK(u.u2 == 0.0);
  CHECK(u.u3 == 0.0);
  u = ks_map(Quaternion::j());
  CHECK(u.u1 == -1.0);
  CHECK(u.u2 == 0.0);
  CHECK(u.u3 == 0.0);
}

TEST_CASE("ks_map agrees with the quaternion product conj(z) i z") {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 200; ++n) {
    const Quaternion z = testing::random_quaternion(rng, 2.0);
    const Quaternion p = z.conj() * Quaternion::i() * z;
    const auto u = ks_map(z);
    CHECK(std::abs(p.z0) < 1e-13);
    CHECK(std::abs(p.z1 - u.u1) < 1e-13);
    CHECK(std::abs(p.z2 - u.u2) < 1e-13);
    CHECK(std::abs(p.z3 - u.u3) < 1e-13);
  }
}

TEST_CASE("ks_map preserves |z|^2") {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const Quaternion z = testing::random_quaternion(rng, 3.0);
    CHECK(std::abs(ks_map(z).abs() - z.norm2()) <= 1e-13 * std::max(1.0, z.norm2()));
  }
}

TEST_CASE("ks_gradient_transport matches central differences") {
  std::mt19937_64 rng(13);
  const auto quat = [](const Vec& v) { return Quaternion{v[0], v[1], v[2], v[3]}; };
  for (int n = 0; n < 100; ++n) {
    const double a = testing::uniform(rng, -1, 1), b = testing::uniform(rng, -1, 1),
                 c = testing::uniform(rng, -1, 1);
    // G(u) = a u1 + b u2 + c u3 + u1 u2
    const auto G = [&](const ImaginaryQuaternion& u) { return a * u.u1 + b * u.u2 + c * u.u3 + u.u1 * u.u2; };
    const Vec x = testing::random_vec(rng, 4, 1.5);
    const Quaternion z = quat(x);
    const auto u = ks_map(z);
    const ImaginaryQuaternion grad{a + u.u2, b + u.u1, c};
    const Quaternion g = ks_gradient_transport(z, grad);
    const Vec fd = testing::fd_gradient([&](const Vec& y) { return G(ks_map(quat(y))); }, x);
    const Vec an = Vec::Map(g.components().data(), 4);
    CHECK((an - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("ks_gradient_transport special cases") {
  const Quaternion g0 = ks_gradient_transport(Quaternion{}, {1, 2, 3});
  CHECK(g0.norm2() == 0.0);
  // G = u1 at z = 1: grad_z (z0^2 + z1^2 - z2^2 - z3^2) = (2, 0, 0, 0)
  const Quaternion g1 = ks_gradient_transport(Quaternion::one(), {1, 0, 0});
  CHECK(g1.z0 == Approx(2));
  CHECK(g1.z1 == Approx(0));
  CHECK(g1.z2 == Approx(0));
  CHECK(g1.z3 == Approx(0));
  // G = |u|^2: grad_z |z|^4 = 4 |z|^2 z
  std::mt19937_64 rng(17);
  for (int n = 0; n < 50; ++n) {
    const Quaternion z = testing::random_quaternion(rng);
    const auto u = ks_map(z);
    const Quaternion g = ks_gradient_transport(z, {2 * u.u1, 2 * u.u2, 2 * u.u3});
    const Quaternion e = z * (4 * z.norm2());
    CHECK((g - e).abs() < 1e-13);
  }
}

TEST_CASE("imaginary_part") {
  const auto u = imaginary_part({0, 1, 2, 3});
  CHECK(u.u1 == 1);
  CHECK(u.u3 == 3);
  CHECK_THROWS_AS(imaginary_part({1e-6, 1, 2, 3}), DomainError);
}

TEST_CASE("lc_plane_check") {
  CHECK_FALSE(lc_plane_check(Quaternion::one(), Quaternion::i()));
  CHECK(lc_plane_check(Quaternion::one(), Quaternion::j()));
  CHECK(lc_plane_check(Quaternion::one(), -Quaternion::k()));
  CHECK_THROWS_AS(lc_plane_check(Quaternion::j(), Quaternion::j() * 2.0), DomainError);
  // Invariance under a common unit complex factor e^{i phi}.
  std::mt19937_64 rng(19);
  for (int n = 0; n < 20; ++n) {
    const double phi = testing::uniform(rng, -3, 3);
    const Quaternion r{std::cos(phi), std::sin(phi), 0, 0};
    CHECK(lc_plane_check(r * Quaternion::one(), r * Quaternion::j()));
    CHECK_FALSE(lc_plane_check(r * Quaternion::one(), r * Quaternion::i()));
  }
}
