#include <numbers>
#include <sstream>

#include "doctest.h"
#include "kepreg/averaging.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {

constexpr double kT = 2 * std::numbers::pi;

PVec pv(std::initializer_list<double> v) {
  PVec p(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

}  // namespace

TEST_CASE("mean force") {
  CHECK((mean_force(FourierForcing(kT, pv({2, 0}))) - pv({2, 0})).norm() == 0.0);
  CHECK(mean_force(FourierForcing(kT, pv({0, 0}), {pv({1, 0})}, {pv({0, 1})})).norm() == 0.0);
  CHECK((mean_force(FourierForcing(kT, pv({1, 0}), {pv({1, 0})})) - pv({1, 0})).norm() == 0.0);
}

TEST_CASE("averaged equilibrium") {
  auto x = averaged_equilibrium(pv({2, 0}));
  CHECK(x[0] == Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(x[1] == 0.0);
  x = averaged_equilibrium(pv({1, 0}));
  CHECK(x[0] == Approx(1.0));
  x = averaged_equilibrium(pv({0, 0, 4}));
  CHECK(x[2] == Approx(0.5));
  std::mt19937_64 rng(103);
  for (int n = 0; n < 50; ++n) {
    const PVec p = testing::random_vec(rng, 3, 5.0);
    const PVec y = averaged_equilibrium(p);
    CHECK((y / std::pow(y.norm(), 3) - p).norm() <= 1e-12 * std::max(1.0, p.norm()));
  }
  CHECK_THROWS_AS(averaged_equilibrium(pv({0, 0})), DomainError);
}

TEST_CASE("averaged jacobian determinant magnitude") {
  auto d = averaged_jacobian_det(pv({1, 0}));
  CHECK(d.formula == Approx(2.0));
  CHECK(std::abs(d.assembled) == Approx(2.0).epsilon(1e-14));
  d = averaged_jacobian_det(pv({0, 0, 1}));
  CHECK(d.formula == Approx(2.0));
  CHECK(std::abs(d.assembled) == Approx(2.0).epsilon(1e-14));
  std::mt19937_64 rng(107);
  for (int n = 0; n < 50; ++n) {
    const int N = n % 2 ? 2 : 3;
    const PVec x = testing::random_vec(rng, N, 2.0);
    d = averaged_jacobian_det(x);
    CHECK(d.magnitude_error < 1e-10);
    // The assembled block matrix has det = -2|x|^{-3N} in both dimensions.
    CHECK(d.assembled < 0.0);
    CHECK_FALSE(d.sign_agrees);
  }
  CHECK_THROWS_AS(averaged_jacobian(pv({0, 0})), DomainError);
}

TEST_CASE("averaged jacobian matches finite differences of the averaged field") {
  const PVec pbar = pv({1, 0.5, -0.2});
  const auto sigma = [&](const Vec& y) {
    const Vec x = y.head(3);
    Vec out(6);
    out.head(3) = y.tail(3);
    out.tail(3) = -x / std::pow(x.norm(), 3) + Vec(pbar);
    return out;
  };
  Vec y(6);
  y << 0.9, -0.4, 0.3, 0.1, 0.2, -0.1;
  const Mat fd = testing::fd_jacobian(sigma, y);
  CHECK((averaged_jacobian(PVec(y.head(3))) - fd).norm() < 1e-7);
}

TEST_CASE("loglog slope") {
  const std::vector<double> x{1e-2, 1e-3, 1e-4};
  std::vector<double> y;
  for (double e : x) y.push_back(3.0 * std::pow(e, -0.5));
  CHECK(loglog_slope(x, y) == Approx(-0.5).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), DomainError);
  CHECK_THROWS_AS(loglog_slope({1.0, -1.0}, {1.0, 1.0}), DomainError);
}

TEST_CASE("bifurcation from infinity") {
  const FourierForcing p(kT, pv({1, 0}), {pv({1, 0})});
  const auto fam = bifurcation_from_infinity(p, {1e-2, 1e-3}, {}, 2);
  CHECK(fam.complete);
  CHECK((fam.xstar - pv({1, 0})).norm() < 1e-15);
  REQUIRE(fam.members.size() == 2);
  for (const auto& m : fam.members) {
    CHECK(m.converged);
    CHECK(m.endpoint_defect < 1e-9);
    CHECK(m.min_abs_u > 0.0);
  }
  CHECK(fam.members[1].sup_deviation < fam.members[0].sup_deviation);
  CHECK(fam.slope == Approx(-0.5).epsilon(0.05));
  std::ostringstream os;
  write_family_csv(os, fam, {"h = 1"});
  CHECK(os.str().find("# slope") != std::string::npos);

  CHECK_THROWS_AS(bifurcation_from_infinity(p, {1e-3, 1e-2}), ConfigError);
  CHECK_THROWS_AS(bifurcation_from_infinity(FourierForcing(kT, pv({0, 0}), {pv({1, 0})}), {1e-2}), DomainError);
}

TEST_CASE("force balance on a zero-mean forced orbit") {
  const auto U = make_perturbation({"forced_kepler", {{"cos1", "0.3,0"}, {"sin1", "0,0.3"}}}, Dim::Planar, kT);
  const ManifoldSpec spec{1, kT, Dim::Planar};
  SeedParams sp;
  sp.preset = SeedPreset::Circular;
  sp.prograde = false;
  ShootingProblem prob;
  prob.spec = spec;
  prob.eps = 1e-3;
  prob.U = U;
  prob.x_ref = seed_state(spec, sp);
  const auto r = solve(prob, prob.x_ref);
  REQUIRE(r.converged());
  const GeneralizedSolution g(r.orbit, U);
  const auto fb = force_balance(g);
  CHECK(fb.forcing.norm() < 1e-12);
  CHECK(fb.defect < 1e-8);
}
