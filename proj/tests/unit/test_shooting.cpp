#include <numbers>

#include "doctest.h"
#include "kepreg/shooting.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {

constexpr double kT = 2 * std::numbers::pi;

PerturbationPtr rotating(Dim dim) {
  if (dim == Dim::Planar) {
    return make_perturbation({"forced_kepler", {{"cos1", "0.3,0"}, {"sin1", "0,0.3"}}}, dim, kT);
  }
  return make_perturbation({"forced_kepler", {{"cos1", "0.3,0,0"}, {"sin1", "0,0.3,0"}}}, dim, kT);
}

ShootingProblem problem(Dim dim, int k, double eps, const Vec& seed) {
  ShootingProblem p;
  p.spec = {k, kT, dim};
  p.eps = eps;
  p.U = rotating(dim);
  p.x_ref = seed;
  return p;
}

Vec retrograde(const ManifoldSpec& spec) {
  SeedParams sp;
  sp.preset = SeedPreset::Circular;
  sp.prograde = false;
  return seed_state(spec, sp);
}

}  // namespace

TEST_CASE("residual vanishes on unperturbed manifold orbits") {
  std::mt19937_64 rng(89);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const ManifoldSpec spec{2, kT, dim};
    const Vec seed = seed_state(spec, random_seed_params(rng, dim));
    const ShootingProblem p = problem(dim, 2, 0.0, seed);
    const auto u = initial_unknowns(p, seed, constants(spec).S);
    CHECK(static_cast<int>(u.nodes.size()) == p.segment_count());
    CHECK(residual(p, u).norm() < 1e-8);
    CHECK(residual(p, u).size() == p.residual_count());
    CHECK(u.pack().size() == p.unknown_count());
    const auto back = ShootingUnknowns::unpack(p, u.pack());
    CHECK(back.S == u.S);
  }
}

TEST_CASE("residual jacobian matches finite differences") {
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const ManifoldSpec spec{1, kT, dim};
    const Vec seed = retrograde(spec);
    ShootingProblem p = problem(dim, 1, 1e-2, seed);
    p.options.segments = 2;
    auto u = initial_unknowns(p, seed, constants(spec).S * 1.001, 0.01);
    const Vec v = u.pack();
    const auto rj = residual_and_jacobian(p, u);
    const Mat fd = testing::fd_jacobian([&](const Vec& y) { return residual(p, ShootingUnknowns::unpack(p, y)); },
                                        v, 1e-7);
    CHECK((rj.J - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("solve at eps = 0 returns the seed") {
  const ManifoldSpec spec{1, kT, Dim::Planar};
  SeedParams sp;
  sp.alpha = 0.5;
  const Vec seed = seed_state(spec, sp);
  const auto r = solve(problem(Dim::Planar, 1, 0.0, seed), seed);
  CHECK(r.converged());
  CHECK((r.orbit.x0 - seed).norm() < 1e-10);
  CHECK(r.orbit.S == Approx(constants(spec).S).epsilon(1e-10));
  CHECK(r.orbit.eta == 1);
}

TEST_CASE("perturbed solve converges with index 1") {
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    const ManifoldSpec spec{1, kT, dim};
    const Vec seed = retrograde(spec);
    const auto r = solve(problem(dim, 1, 1e-3, seed), seed);
    REQUIRE(r.converged());
    CHECK(r.orbit.residual_norm < 1e-9);
    CHECK(r.orbit.eta == 1);
    CHECK(r.orbit.S == Approx(constants(spec).S).epsilon(1e-2));
    CHECK(r.orbit.max_K_drift < 1e-9);
    if (dim == Dim::Spatial) {
      CHECK(std::abs(bl_value(r.orbit.x0)) < 1e-11);
      CHECK(*r.orbit.max_BL_drift < 1e-9);
    }
    CHECK(closure_defect(r.orbit, rotating(dim), {}) < 1e-8);
    CHECK(index_of(r.orbit, rotating(dim)) == 1);
    CHECK(index_of(r.orbit, rotating(dim), 2) == 2);
  }
}

TEST_CASE("continuation in eps") {
  const ManifoldSpec spec{1, kT, Dim::Planar};
  const Vec seed = retrograde(spec);
  const ShootingProblem p = problem(Dim::Planar, 1, 0.0, seed);
  const auto c = continue_in_epsilon(p, seed, {1e-4, 5e-4, 1e-3});
  REQUIRE(c.complete);
  REQUIRE(c.family.size() == 3);
  const double tau = constants(spec).tau;
  for (std::size_t i = 0; i < c.family.size(); ++i) {
    CHECK(c.family[i].eta == 1);
    CHECK(std::abs(c.family[i].tau_min - tau) < 0.01);
    CHECK(std::abs(c.family[i].tau_max - tau) < 0.01);
    if (i) CHECK((c.family[i].x0 - c.family[i - 1].x0).norm() < 1e-2);
  }
  // Band width shrinks with eps.
  const auto width = [](const PeriodicOrbit& o) { return o.energy_max - o.energy_min; };
  CHECK(width(c.family[0]) < width(c.family[2]));
  CHECK_THROWS_AS(continue_in_epsilon(p, seed, {1e-3, 1e-4}), ConfigError);
}

TEST_CASE("candidate continuation picks the retrograde circular seed first") {
  const ManifoldSpec spec{2, kT, Dim::Planar};
  SeedParams base;
  const auto cc = continue_from_candidates(problem(Dim::Planar, 2, 0.0, retrograde(spec)), base, {1e-3});
  CHECK(cc.continuation.complete);
  CHECK(cc.seed_label == "circular-retrograde");
  CHECK(cc.attempts >= 1);
}

TEST_CASE("unperturbed orbits and distinctness") {
  std::vector<PeriodicOrbit> orbits;
  for (int k = 1; k <= 3; ++k) {
    const ManifoldSpec spec{k, kT, Dim::Planar};
    const auto o = unperturbed_orbit(spec, retrograde(spec));
    CHECK(o.energy_min == Approx(-constants(spec).tau).epsilon(1e-12));
    CHECK(o.energy_max == Approx(-constants(spec).tau).epsilon(1e-12));
    CHECK(o.eta == 1);
    orbits.push_back(o);
  }
  const auto sep = distinctness(orbits);
  REQUIRE(sep.size() == 3);
  for (const auto& s : sep) CHECK(s.disjoint);
  CHECK_THROWS_AS(unperturbed_orbit({1, kT, Dim::Planar}, retrograde({2, kT, Dim::Planar})), InvariantError);
}

TEST_CASE("group action") {
  std::mt19937_64 rng(97);
  const Vec x = testing::random_vec(rng, 10);
  CHECK((group_action(Dim::Spatial, 0.0, x) - x).norm() == 0.0);
  const Vec y = group_action(Dim::Spatial, 0.7, group_action(Dim::Spatial, -0.7, x));
  CHECK((y - x).norm() < 1e-14);
  CHECK(bl_value(group_action(Dim::Spatial, 1.1, x)) == Approx(bl_value(x)).epsilon(1e-13));
  const Vec x2 = testing::random_vec(rng, 6);
  CHECK((group_action(Dim::Planar, 0.9, x2) - x2).norm() == 0.0);
}

TEST_CASE("status strings") {
  CHECK(to_string(SolveStatus::Converged) == "converged");
  CHECK_FALSE(to_string(SolveStatus::Singular).empty());
}
