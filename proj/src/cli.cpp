#include "kepreg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "kepreg/io.hpp"
#include "kepreg/parallel.hpp"

namespace kepreg {

namespace {

namespace fs = std::filesystem;

struct Context {
  const RunConfig& cfg;
  std::string command;
  fs::path dir;
  std::ostream& log;

  std::vector<std::string> header() const {
    std::vector<std::string> h{"command = " + command};
    const auto lines = cfg.header_lines();
    h.insert(h.end(), lines.begin(), lines.end());
    return h;
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    out << std::setprecision(17);
    return out;
  }

  /// Opens a CSV file and writes the config header block.
  std::ofstream csv(const std::string& name) const {
    auto out = open(name);
    for (const auto& h : header()) out << "# " << h << '\n';
    return out;
  }

  void json(const std::string& name, Json body) const {
    Json j;
    j["command"] = command;
    j["config"] = to_json(cfg);
    for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
    open(name) << j.dump(2) << '\n';
  }
};

std::string kname(const std::string& stem, int k, const std::string& ext) {
  return stem + "_k" + std::to_string(k) + ext;
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

bool unperturbed_run(const RunConfig& c) {
  const auto t = c.eps_targets();
  return std::all_of(t.begin(), t.end(), [](double e) { return e == 0.0; });
}

struct Acquired {
  bool ok = false;
  PeriodicOrbit orbit;
  std::string seed_label;
  std::string diagnostic;
};

ShootingProblem make_problem(const RunConfig& c, int k, const PerturbationPtr& U, const Vec& seed) {
  ShootingProblem p;
  p.spec = c.manifold(k);
  p.U = U;
  p.x_ref = seed;
  p.options = c.shooting;
  p.options.integrator = c.integrator;
  return p;
}

/// Periodic orbit on (or continued from) Lambda_k for the configured eps.
/// With `candidates` the seed sequence of continue_from_candidates is used,
/// otherwise the configured seed alone.
Acquired acquire(const RunConfig& c, int k, const PerturbationPtr& U, bool candidates) {
  Acquired a;
  const ManifoldSpec spec = c.manifold(k);
  const SeedParams sp = c.seed_params();
  const Vec seed = seed_state(spec, sp);
  try {
    if (unperturbed_run(c)) {
      a.orbit = unperturbed_orbit(spec, seed, c.integrator);
      a.seed_label = c.seed.preset;
      a.ok = true;
      return a;
    }
    const ShootingProblem p = make_problem(c, k, U, seed);
    ContinuationResult cont;
    if (candidates) {
      auto cc = continue_from_candidates(p, sp, c.eps_targets(), c.scan_size);
      cont = std::move(cc.continuation);
      a.seed_label = cc.seed_label;
    } else {
      cont = continue_in_epsilon(p, seed, c.eps_targets());
      a.seed_label = c.seed.preset;
    }
    a.ok = cont.complete && !cont.family.empty();
    if (!cont.family.empty()) a.orbit = cont.family.back();
    a.diagnostic = cont.diagnostic;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    a.ok = false;
    a.diagnostic = e.what();
  }
  return a;
}

std::vector<int> demo_ks(const RunConfig& c) {
  const int l = c.l > 0 ? c.l : *std::max_element(c.k_list.begin(), c.k_list.end());
  std::vector<int> ks;
  for (int k = 1; k <= l; ++k) ks.push_back(k);
  return ks;
}

std::vector<Acquired> acquire_all(const RunConfig& c, const std::vector<int>& ks, const PerturbationPtr& U,
                                  bool candidates) {
  std::vector<Acquired> out(ks.size());
  parallel_for(static_cast<int>(ks.size()), c.jobs,
               [&](int i) { out[i] = acquire(c, ks[i], U, candidates); });
  return out;
}

void write_orbit_summary(const Context& ctx, const std::vector<int>& ks, const std::vector<Acquired>& res) {
  auto out = ctx.csv("summary.csv");
  out << "k,converged,S,eta,energy_min,energy_max,energy_center,minus_tau_k,residual,max_K_drift,max_BL_drift,"
         "seed\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& a = res[i];
    const auto& o = a.orbit;
    out << ks[i] << ',' << (a.ok ? 1 : 0) << ',' << o.S << ',' << o.eta << ',' << o.energy_min << ','
        << o.energy_max << ',' << 0.5 * (o.energy_min + o.energy_max) << ','
        << -constants(ctx.cfg.manifold(ks[i])).tau << ',' << o.residual_norm << ',' << o.max_K_drift << ',';
    if (o.max_BL_drift) out << *o.max_BL_drift;
    out << ',' << a.seed_label << '\n';
  }
}

int cmd_seed(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  auto cons = ctx.csv("constants.csv");
  cons << "k,T,tau,omega,sigma,S\n";
  std::vector<SeedRecord> seeds;
  std::mt19937_64 rng(c.random_seed);
  for (int k : c.k_list) {
    const ManifoldSpec spec = c.manifold(k);
    const auto mc = constants(spec);
    cons << k << ',' << spec.T << ',' << mc.tau << ',' << mc.omega << ',' << mc.sigma << ',' << mc.S << '\n';
    for (int i = 0; i < c.seed.count; ++i) {
      SeedParams sp = c.seed.preset == "random" ? random_seed_params(rng, c.dim) : c.seed_params();
      if (c.seed.preset == "random") sp.t0 = c.seed.t0;
      seeds.push_back({k, seed_state(spec, sp)});
    }
  }
  {
    auto out = ctx.csv("seeds.csv");
    write_seed_csv(out, c.dim, seeds);
  }
  std::ifstream back(ctx.dir / "seeds.csv");
  const auto loaded = read_seed_csv(back, c.dim, c.T);
  ctx.log << "seed: " << loaded.size() << " seeds validated on their manifolds\n";
  return kExitSuccess;
}

int cmd_flow(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const auto U = c.make_U();
  const RegularizedKepler model(c.dim, c.eps, U);
  struct Row {
    Trajectory traj;
    InvariantReport inv;
    double closure = 0.0;
    double time_gain = 0.0;
  };
  std::vector<Row> rows(c.k_list.size());
  parallel_for(static_cast<int>(c.k_list.size()), c.jobs, [&](int i) {
    const ManifoldSpec spec = c.manifold(c.k_list[i]);
    const Vec x0 = seed_state(spec, c.seed_params());
    const double S = c.flow_periods * constants(spec).S;
    rows[i].traj = integrate(make_system(model), x0, S, c.integrator);
    rows[i].inv = invariant_report(rows[i].traj, model);
    const Vec end = rows[i].traj.state(rows[i].traj.size() - 1);
    const int it = model.layout().t();
    Vec d = end - x0;
    rows[i].time_gain = d[it];
    d[it] -= c.flow_periods * c.T;
    rows[i].closure = d.norm();
  });
  auto sum = ctx.csv("summary.csv");
  sum << "k,steps,K0,max_K_drift,max_tau_drift,max_BL_drift,time_gain,closure_defect\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int k = c.k_list[i];
    auto out = ctx.open(kname("trajectory", k, ".csv"));
    write_trajectory_csv(out, rows[i].traj, model, ctx.header());
    const auto& r = rows[i];
    sum << k << ',' << r.traj.size() << ',' << r.inv.K0 << ',' << r.inv.max_K_drift << ',' << r.inv.max_tau_drift
        << ',';
    if (r.inv.max_BL_drift) sum << *r.inv.max_BL_drift;
    sum << ',' << r.time_gain << ',' << r.closure << '\n';
  }
  ctx.log << "flow: integrated " << rows.size() << " trajectories\n";
  return kExitSuccess;
}

int write_orbits(const Context& ctx, const std::vector<int>& ks, const std::vector<Acquired>& res,
                 const PerturbationPtr& U) {
  const RunConfig& c = ctx.cfg;
  std::vector<PeriodicOrbit> good;
  const RegularizedKepler model(c.dim, 0.0, nullptr);
  bool all = true;
  Json failures = Json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!res[i].ok) {
      all = false;
      failures.push_back({{"k", ks[i]}, {"diagnostic", res[i].diagnostic}});
      ctx.log << "k = " << ks[i] << ": no converged orbit (" << res[i].diagnostic << ")\n";
      continue;
    }
    good.push_back(res[i].orbit);
    auto out = ctx.open(kname("orbit", ks[i], ".csv"));
    const RegularizedKepler m(c.dim, res[i].orbit.eps, U);
    IntegratorConfig ic = c.integrator;
    ic.dense = false;
    const Trajectory tr = integrate(make_system(m), res[i].orbit.x0, res[i].orbit.S, ic);
    write_trajectory_csv(out, tr, m, ctx.header());
  }
  {
    Json arch = orbit_archive(c, good);
    arch["command"] = ctx.command;
    arch["failures"] = failures;
    ctx.open("orbits.json") << arch.dump(2) << '\n';
  }
  write_orbit_summary(ctx, ks, res);
  return all ? kExitSuccess : kExitPartial;
}

int cmd_shoot(const Context& ctx) {
  const auto U = ctx.cfg.make_U();
  const auto& ks = ctx.cfg.k_list;
  const auto res = acquire_all(ctx.cfg, ks, U, false);
  const int code = write_orbits(ctx, ks, res, U);
  ctx.log << "shoot: " << std::count_if(res.begin(), res.end(), [](const Acquired& a) { return a.ok; }) << " of "
          << ks.size() << " orbits converged\n";
  return code;
}

struct Reconstructed {
  std::optional<GeneralizedSolution> g;
  double max_ode_residual = 0.0;
  double speed_sq_error = 0.0;
  double direction_error = 0.0;
  double energy_error = 0.0;
  double reflection_error = 0.0;
  double lift_distance = std::numeric_limits<double>::quiet_NaN();
  int winding = 0;
  bool anti_periodic = false;
  std::string diagnostic;
};

Reconstructed reconstruct_one(const RunConfig& c, const PeriodicOrbit& o, const PerturbationPtr& U) {
  Reconstructed r;
  ReconstructOptions opt;
  opt.samples = c.samples;
  opt.window = c.window;
  opt.integrator = c.integrator;
  try {
    r.g.emplace(o, U, opt);
    const auto& g = *r.g;
    for (const auto& s : g.samples()) {
      if (!s.in_window) r.max_ode_residual = std::max(r.max_ode_residual, g.ode_residual(s.t));
    }
    for (const auto& ev : g.collisions()) {
      r.speed_sq_error = std::max(r.speed_sq_error, std::abs(ev.speed_sq - 0.5));
      const auto lc = check_collision_limits(g, ev);
      r.direction_error = std::max(r.direction_error, lc.direction_error);
      r.energy_error = std::max(r.energy_error, lc.energy_error);
      r.reflection_error = std::max(r.reflection_error, lc.reflection_error);
    }
    if (c.dim == Dim::Planar) {
      const auto lift = sundman_lift(g);
      r.lift_distance = compare_lift(lift, g).state_distance;
      r.winding = lift.winding;
      r.anti_periodic = lift.anti_periodic;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.diagnostic = e.what();
  }
  return r;
}

std::vector<Reconstructed> reconstruct_all(const Context& ctx, const std::vector<int>& ks,
                                           const std::vector<Acquired>& res, const PerturbationPtr& U) {
  std::vector<Reconstructed> rec(ks.size());
  parallel_for(static_cast<int>(ks.size()), ctx.cfg.jobs, [&](int i) {
    if (res[i].ok) rec[i] = reconstruct_one(ctx.cfg, res[i].orbit, U);
  });
  auto out = ctx.csv("reconstruction.csv");
  out << "k,collisions,max_ode_residual,max_speed_sq_error,direction_error,energy_error,reflection_error,"
         "lift_distance,winding,anti_periodic\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& r = rec[i];
    if (!r.g) continue;
    auto gen = ctx.open(kname("generalized", ks[i], ".csv"));
    write_generalized_csv(gen, *r.g, ctx.header());
    out << ks[i] << ',' << r.g->collisions().size() << ',' << r.max_ode_residual << ',' << r.speed_sq_error << ','
        << r.direction_error << ',' << r.energy_error << ',' << r.reflection_error << ',';
    if (std::isfinite(r.lift_distance)) out << r.lift_distance << ',' << r.winding << ',' << (r.anti_periodic ? 1 : 0);
    else out << ",,";
    out << '\n';
  }
  return rec;
}

int cmd_reconstruct(const Context& ctx) {
  const auto U = ctx.cfg.make_U();
  const auto& ks = ctx.cfg.k_list;
  const auto res = acquire_all(ctx.cfg, ks, U, false);
  int code = write_orbits(ctx, ks, res, U);
  const auto rec = reconstruct_all(ctx, ks, res, U);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (res[i].ok && !rec[i].g) {
      ctx.log << "k = " << ks[i] << ": reconstruction failed (" << rec[i].diagnostic << ")\n";
      code = kExitPartial;
    }
  }
  ctx.log << "reconstruct: done\n";
  return code;
}

int cmd_theorem_demo(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const auto U = c.make_U();
  const auto ks = demo_ks(c);
  const auto res = acquire_all(c, ks, U, true);
  int code = write_orbits(ctx, ks, res, U);
  const auto rec = reconstruct_all(ctx, ks, res, U);

  std::vector<PeriodicOrbit> good;
  for (const auto& a : res) {
    if (a.ok) good.push_back(a.orbit);
  }
  const auto sep = distinctness(good);
  bool disjoint = true;
  Json pairs = Json::array();
  for (const auto& s : sep) {
    disjoint = disjoint && s.disjoint;
    pairs.push_back({{"k_i", good[s.i].spec.k}, {"k_j", good[s.j].spec.k}, {"separation", s.separation},
                     {"disjoint", s.disjoint}});
  }
  Json rows = Json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    Json r{{"k", ks[i]}, {"converged", res[i].ok}, {"seed", res[i].seed_label}};
    if (res[i].ok) {
      const auto& o = res[i].orbit;
      r["S"] = o.S;
      r["eta"] = o.eta;
      r["energy_band"] = {o.energy_min, o.energy_max};
      r["residual"] = o.residual_norm;
      r["max_K_drift"] = o.max_K_drift;
      if (o.max_BL_drift) r["max_BL_drift"] = *o.max_BL_drift;
      if (rec[i].g) {
        r["collisions"] = rec[i].g->collisions().size();
        r["max_ode_residual"] = rec[i].max_ode_residual;
        r["lift_distance"] = nullable(rec[i].lift_distance);
      }
    } else {
      r["diagnostic"] = res[i].diagnostic;
    }
    if (res[i].ok && (res[i].orbit.eta != 1 || !rec[i].g)) code = kExitPartial;
    rows.push_back(r);
  }
  if (!disjoint) code = kExitPartial;
  ctx.json("summary.json", {{"orbits", rows}, {"band_separation", pairs}, {"all_disjoint", disjoint}});
  ctx.log << "theorem-demo: " << good.size() << " of " << ks.size() << " orbits, bands "
          << (disjoint ? "disjoint" : "overlapping") << '\n';
  return code;
}

int cmd_certify(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  std::mt19937_64 rng(c.random_seed);
  std::vector<ManifoldSpec> specs;
  std::vector<Vec> seeds;
  for (int i = 0; i < c.certify_count; ++i) {
    const ManifoldSpec spec = c.manifold(c.k_list[i % c.k_list.size()]);
    seeds.push_back(seed_state(spec, random_seed_params(rng, c.dim)));
    specs.push_back(spec);
  }
  std::vector<CertificateReport> reps(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), c.jobs, [&](int i) {
    reps[i] = nondegeneracy_certificate(specs[i], seeds[i], c.integrator, c.certify_min_angle);
  });
  auto out = ctx.csv("certificates.csv");
  out << "index,k,principal_angle,closed_form_mismatch,dim_E,det_M,certified\n";
  double min_angle = std::numeric_limits<double>::infinity();
  int certified = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    out << i << ',' << r.spec.k << ',' << r.principal_angle << ',' << r.closed_form_mismatch << ','
        << r.degeneracy.dim_E << ',' << r.degeneracy.det_M << ',' << (r.certified ? 1 : 0) << '\n';
    min_angle = std::min(min_angle, r.principal_angle);
    certified += r.certified ? 1 : 0;
  }
  out << "# min_principal_angle " << min_angle << '\n';
  Json list = Json::array();
  for (const auto& r : reps) list.push_back(to_json(r));
  ctx.json("certificates.json", {{"certificates", list}, {"min_principal_angle", min_angle}});
  ctx.log << "certify: " << certified << " of " << reps.size() << " certified, min angle " << min_angle << '\n';
  return certified == static_cast<int>(reps.size()) ? kExitSuccess : kExitPartial;
}

int cmd_average(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const FourierForcing p = c.forcing();
  PhysicalShootingOptions opt;
  opt.integrator = c.integrator;
  const auto fam = bifurcation_from_infinity(p, c.average_eps, opt, c.jobs);
  {
    auto out = ctx.open("family.csv");
    write_family_csv(out, fam, ctx.header());
  }
  const auto det = averaged_jacobian_det(fam.xstar);
  Json members = Json::array();
  for (const auto& m : fam.members) {
    members.push_back({{"eps", m.eps},
                       {"converged", m.converged},
                       {"min_abs_u", m.min_abs_u},
                       {"sup_deviation", m.sup_deviation},
                       {"endpoint_defect", m.endpoint_defect},
                       {"iterations", m.iterations},
                       {"diagnostic", m.diagnostic}});
  }
  ctx.json("summary.json", {{"pbar", to_json(Vec(fam.pbar))},
                            {"xstar", to_json(Vec(fam.xstar))},
                            {"slope", nullable(fam.slope)},
                            {"complete", fam.complete},
                            {"members", members},
                            {"jacobian_det_formula", det.formula},
                            {"jacobian_det_assembled", det.assembled},
                            {"jacobian_det_magnitude_error", det.magnitude_error},
                            {"jacobian_det_sign_agrees", det.sign_agrees}});
  ctx.log << "average: slope " << fam.slope << (fam.complete ? "" : " (partial family)") << '\n';
  return fam.complete ? kExitSuccess : kExitPartial;
}

int cmd_remove_collisions(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  if (c.dim != Dim::Planar) throw ConfigError("remove-collisions needs run.dim = 2");
  const auto U = c.make_U();
  const int k = c.k_list.front();
  const auto a = acquire(c, k, U, false);
  if (!a.ok) {
    ctx.log << "remove-collisions: no source orbit (" << a.diagnostic << ")\n";
    return kExitFailure;
  }
  struct Row {
    std::optional<CollisionRemoval> cr;
    std::string diagnostic;
  };
  RemovalOptions opt;
  opt.samples = c.samples;
  opt.integrator = c.integrator;
  std::vector<Row> rows(c.mu_list.size());
  parallel_for(static_cast<int>(rows.size()), c.jobs, [&](int i) {
    try {
      rows[i].cr.emplace(a.orbit, U, c.mu_list[i], opt);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      rows[i].diagnostic = e.what();
    }
  });
  auto out = ctx.csv("removal.csv");
  out << "mu,T_mu,period_shift,min_abs_u_mu,forcing_l1_distance,sup_distance,max_residual,es1_constant\n";
  int code = kExitSuccess;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].cr) {
      ctx.log << "mu = " << c.mu_list[i] << ": " << rows[i].diagnostic << '\n';
      code = kExitPartial;
      continue;
    }
    const auto& r = *rows[i].cr;
    out << r.mu() << ',' << r.T_mu() << ',' << r.period_shift() << ',' << r.min_abs_u() << ','
        << r.forcing_l1_distance() << ',' << r.sup_distance() << ',' << r.max_residual() << ','
        << r.es1_constant() << '\n';
  }
  ctx.log << "remove-collisions: " << rows.size() << " values of mu\n";
  return code;
}

using Handler = int (*)(const Context&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"seed", cmd_seed},
      {"flow", cmd_flow},
      {"shoot", cmd_shoot},
      {"theorem-demo", cmd_theorem_demo},
      {"certify", cmd_certify},
      {"reconstruct", cmd_reconstruct},
      {"average", cmd_average},
      {"remove-collisions", cmd_remove_collisions},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"seed",    "flow",        "shoot",   "theorem-demo",
                                              "certify", "reconstruct", "average", "remove-collisions"};
  return names;
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& log) {
  const auto it = handlers().find(name);
  if (it == handlers().end()) {
    log << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  }
  try {
    config.validate();
    const fs::path dir(config.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + config.output + "': " + ec.message());
    const Context ctx{config, name, dir, log};
    return it->second(ctx);
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Json::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(const std::string& name, const std::string& config_path, const std::string& out_dir, int jobs,
            std::ostream& log) {
  RunConfig c;
  try {
    if (!config_path.empty()) c = load_config(config_path);
    if (!out_dir.empty()) c.output = out_dir;
    if (jobs > 0) c.jobs = jobs;
    c.validate();
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  return run_command(name, c, log);
}

}  // namespace kepreg
