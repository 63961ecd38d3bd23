#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kepreg/averaging.hpp"
#include "kepreg/cli.hpp"
#include "kepreg/io.hpp"

namespace py = pybind11;
using namespace kepreg;

namespace {

using Params = std::map<std::string, std::string>;

constexpr double kT = 2 * std::numbers::pi;

Dim to_dim(int n) {
  if (n == 2) return Dim::Planar;
  if (n == 3) return Dim::Spatial;
  throw ConfigError("dim must be 2 or 3");
}

PerturbationPtr perturbation(int dim, double T, const std::optional<Params>& forcing) {
  if (!forcing) return nullptr;
  return make_perturbation({"forced_kepler", *forcing}, to_dim(dim), T);
}

SeedPreset to_preset(const std::string& name) {
  if (name == "general") return SeedPreset::General;
  if (name == "circular") return SeedPreset::Circular;
  if (name == "rectilinear") return SeedPreset::Rectilinear;
  throw ConfigError("unknown seed preset '" + name + "'");
}

Vec to_vec(const PVec& p) { return Vec(p); }

PVec to_pvec(const Vec& v) {
  if (v.size() < 2 || v.size() > 3) throw ConfigError("physical vectors have 2 or 3 components");
  return PVec(v);
}

std::string orbit_json(const PeriodicOrbit& o) { return to_json(o).dump(); }

PeriodicOrbit parse_orbit(const std::string& text) { return orbit_from_json(Json::parse(text)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regularized forced Kepler problem: periodic manifolds, shooting and reconstruction";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());
  py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
  py::register_exception<IntegrationError>(m, "IntegrationError", base.ptr());

  m.def(
      "constants",
      [](int k, double T, int dim) {
        const auto c = constants({k, T, to_dim(dim)});
        return py::dict(py::arg("tau") = c.tau, py::arg("omega") = c.omega, py::arg("sigma") = c.sigma,
                        py::arg("S") = c.S);
      },
      py::arg("k"), py::arg("T"), py::arg("dim") = 2);

  m.def(
      "seed_state",
      [](int k, double T, int dim, const std::string& preset, double alpha, double phase_z, double phase_w,
         bool prograde, double t0) {
        SeedParams sp;
        sp.preset = to_preset(preset);
        sp.alpha = alpha;
        sp.phase_z = phase_z;
        sp.phase_w = phase_w;
        sp.prograde = prograde;
        sp.t0 = t0;
        return seed_state({k, T, to_dim(dim)}, sp);
      },
      py::arg("k"), py::arg("T"), py::arg("dim") = 2, py::arg("preset") = "general", py::arg("alpha") = 0.7853981633974483,
      py::arg("phase_z") = 0.0, py::arg("phase_w") = 1.5707963267948966, py::arg("prograde") = true,
      py::arg("t0") = 0.0);

  m.def(
      "random_seed_state",
      [](int k, double T, int dim, unsigned long long seed) {
        std::mt19937_64 rng(seed);
        return seed_state({k, T, to_dim(dim)}, random_seed_params(rng, to_dim(dim)));
      },
      py::arg("k"), py::arg("T"), py::arg("dim") = 2, py::arg("seed") = 0);

  m.def(
      "integrate",
      [](const Vec& x0, double s_end, int dim, double eps, double T, const std::optional<Params>& forcing,
         double rel_tol) {
        const RegularizedKepler model(to_dim(dim), eps, perturbation(dim, T, forcing));
        IntegratorConfig cfg;
        cfg.rel_tol = rel_tol;
        const auto tr = integrate(make_system(model), x0, s_end, cfg);
        Vec s(tr.size());
        Mat x(tr.size(), model.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
          s[i] = tr.s(i);
          x.row(i) = tr.state(i).transpose();
        }
        return py::make_tuple(s, x);
      },
      py::arg("x0"), py::arg("s_end"), py::arg("dim") = 2, py::arg("eps") = 0.0, py::arg("T") = kT,
      py::arg("forcing") = py::none(), py::arg("rel_tol") = 1e-12,
      "Integrates the regularized field; returns (s nodes, states as rows).");

  m.def(
      "hamiltonian",
      [](const Vec& x, int dim, double eps, double T, const std::optional<Params>& forcing) {
        return RegularizedKepler(to_dim(dim), eps, perturbation(dim, T, forcing)).hamiltonian(x);
      },
      py::arg("x"), py::arg("dim") = 2, py::arg("eps") = 0.0, py::arg("T") = kT,
      py::arg("forcing") = py::none());

  m.def(
      "bl_value", [](const Vec& x) { return bl_value(x); }, py::arg("x"));

  m.def(
      "ks_map",
      [](const Vec& z) {
        if (z.size() != 4) throw ConfigError("ks_map expects 4 components");
        const auto u = ks_map({z[0], z[1], z[2], z[3]});
        Vec out(3);
        out << u.u1, u.u2, u.u3;
        return out;
      },
      py::arg("z"));

  m.def(
      "certificate",
      [](int k, double T, int dim, const Vec& x0) {
        return to_json(nondegeneracy_certificate({k, T, to_dim(dim)}, x0)).dump();
      },
      py::arg("k"), py::arg("T"), py::arg("dim"), py::arg("x0"), "Non-degeneracy certificate as a JSON string.");

  m.def(
      "find_orbit",
      [](int k, double T, int dim, const std::vector<double>& eps_targets, const std::optional<Params>& forcing,
         const std::optional<Vec>& seed) {
        const ManifoldSpec spec{k, T, to_dim(dim)};
        ShootingProblem p;
        p.spec = spec;
        p.U = perturbation(dim, T, forcing);
        SeedParams sp;
        sp.preset = SeedPreset::Circular;
        sp.prograde = false;
        p.x_ref = seed ? *seed : seed_state(spec, sp);
        ContinuationResult c;
        if (eps_targets.empty() || eps_targets.back() == 0.0) {
          c.family.push_back(unperturbed_orbit(spec, p.x_ref));
          c.complete = true;
        } else if (seed) {
          c = continue_in_epsilon(p, p.x_ref, eps_targets);
        } else {
          c = continue_from_candidates(p, SeedParams{}, eps_targets).continuation;
        }
        if (!c.complete || c.family.empty()) throw InvariantError("continuation failed: " + c.diagnostic);
        return orbit_json(c.family.back());
      },
      py::arg("k"), py::arg("T"), py::arg("dim"), py::arg("eps_targets"), py::arg("forcing") = py::none(),
      py::arg("seed") = py::none(),
      "Closed orbit on the k-th manifold continued to the last eps target, as a JSON string.");

  m.def(
      "reconstruct",
      [](const std::string& orbit, const std::optional<Params>& forcing) {
        const PeriodicOrbit o = parse_orbit(orbit);
        const GeneralizedSolution g(o, perturbation(physical_dim(o.spec.dim), o.spec.T, forcing));
        py::list collisions;
        for (const auto& ev : g.collisions()) {
          const auto lc = check_collision_limits(g, ev);
          collisions.append(py::dict(py::arg("t0") = ev.t0, py::arg("s0") = ev.s0,
                                     py::arg("direction") = to_vec(ev.direction), py::arg("energy") = ev.energy,
                                     py::arg("speed_sq") = ev.speed_sq, py::arg("direction_error") = lc.direction_error,
                                     py::arg("energy_error") = lc.energy_error,
                                     py::arg("reflection_error") = lc.reflection_error));
        }
        const auto& samples = g.samples();
        Vec t(samples.size());
        Mat u(samples.size(), physical_dim(g.dim()));
        double residual = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          t[i] = samples[i].t;
          u.row(i) = to_vec(samples[i].u).transpose();
          if (!samples[i].in_window && samples[i].u.norm() > 1e-2) residual = std::max(residual, g.ode_residual(t[i]));
        }
        py::dict out(py::arg("period") = g.period(), py::arg("t") = t, py::arg("u") = u,
                     py::arg("collisions") = collisions, py::arg("max_ode_residual") = residual);
        if (g.dim() == Dim::Planar) {
          const auto lift = sundman_lift(g);
          out["lift_distance"] = compare_lift(lift, g).state_distance;
          out["winding"] = lift.winding;
        }
        return out;
      },
      py::arg("orbit"), py::arg("forcing") = py::none());

  m.def(
      "averaged_equilibrium", [](const Vec& pbar) { return to_vec(averaged_equilibrium(to_pvec(pbar))); },
      py::arg("pbar"));

  m.def(
      "averaged_jacobian_det",
      [](const Vec& x) {
        const auto d = averaged_jacobian_det(to_pvec(x));
        return py::dict(py::arg("formula") = d.formula, py::arg("assembled") = d.assembled,
                        py::arg("magnitude_error") = d.magnitude_error, py::arg("sign_agrees") = d.sign_agrees);
      },
      py::arg("x"));

  m.def(
      "bifurcation_family",
      [](const Vec& mean, const std::vector<Vec>& cos_coeffs, const std::vector<Vec>& sin_coeffs, double T,
         const std::vector<double>& eps_list, int jobs) {
        std::vector<PVec> c, s;
        for (const auto& v : cos_coeffs) c.push_back(to_pvec(v));
        for (const auto& v : sin_coeffs) s.push_back(to_pvec(v));
        const auto fam = bifurcation_from_infinity(FourierForcing(T, to_pvec(mean), c, s), eps_list, {}, jobs);
        py::list members;
        for (const auto& mb : fam.members) {
          members.append(py::dict(py::arg("eps") = mb.eps, py::arg("converged") = mb.converged,
                                  py::arg("min_abs_u") = mb.min_abs_u, py::arg("sup_deviation") = mb.sup_deviation,
                                  py::arg("endpoint_defect") = mb.endpoint_defect));
        }
        return py::dict(py::arg("xstar") = to_vec(fam.xstar), py::arg("slope") = fam.slope,
                        py::arg("complete") = fam.complete, py::arg("members") = members);
      },
      py::arg("mean"), py::arg("cos_coeffs") = std::vector<Vec>{}, py::arg("sin_coeffs") = std::vector<Vec>{},
      py::arg("T") = kT, py::arg("eps_list") = std::vector<double>{1e-2, 1e-3, 1e-4}, py::arg("jobs") = 1);

  m.def("command_names", &command_names);

  m.def(
      "run_cli",
      [](const std::string& command, const std::string& config, const std::string& out, int jobs) {
        std::ostringstream log;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(command, config, out, jobs, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config") = "", py::arg("out") = "", py::arg("jobs") = 0,
      "Runs a CLI subcommand; returns (exit code, log text).");
}
