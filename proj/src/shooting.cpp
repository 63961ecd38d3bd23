#include "kepreg/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

namespace kepreg {

namespace {

bool spatial(const ShootingProblem& p) { return p.spec.dim == Dim::Spatial; }

IntegratorConfig endpoint_config(IntegratorConfig cfg) {
  cfg.dense = false;
  return cfg;
}

Vec time_direction(Dim dim) {
  const StateLayout L(dim);
  Vec e = Vec::Zero(L.size());
  e[L.t()] = 1.0;
  return e;
}

// (i z, i w, 0, 0) for a spatial state; the generator of the group action.
Vec group_generator(const Vec& x) { return bl_symplectic_gradient(x); }

}  // namespace

int ShootingProblem::unknown_count() const {
  return segment_count() * state_size(spec.dim) + 1 + (spec.dim == Dim::Spatial ? 1 : 0);
}

int ShootingProblem::residual_count() const {
  return segment_count() * state_size(spec.dim) + (spec.dim == Dim::Spatial ? 4 : 2);
}

Vec ShootingUnknowns::pack() const {
  const int n = nodes.empty() ? 0 : static_cast<int>(nodes.front().size());
  const int m = static_cast<int>(nodes.size());
  const bool sp = n == state_size(Dim::Spatial);
  Vec v(m * n + 1 + (sp ? 1 : 0));
  for (int j = 0; j < m; ++j) v.segment(j * n, n) = nodes[j];
  v[m * n] = S;
  if (sp) v[m * n + 1] = theta;
  return v;
}

ShootingUnknowns ShootingUnknowns::unpack(const ShootingProblem& p, const Vec& v) {
  const int n = state_size(p.spec.dim);
  const int m = p.segment_count();
  if (v.size() != p.unknown_count()) throw DomainError("unknown vector has the wrong size");
  ShootingUnknowns u;
  u.nodes.resize(m);
  for (int j = 0; j < m; ++j) u.nodes[j] = v.segment(j * n, n);
  u.S = v[m * n];
  u.theta = spatial(p) ? v[m * n + 1] : 0.0;
  return u;
}

Vec group_action(Dim dim, double theta, const Vec& x) {
  if (dim == Dim::Planar) return x;
  const Quaternion g = unit_complex(theta);
  RegState3 s = RegState3::from_vector(x);
  s.z = g * s.z;
  s.w = g * s.w;
  return s.to_vector();
}

ShootingUnknowns initial_unknowns(const ShootingProblem& p, const Vec& x0, double S, double theta) {
  const RegularizedKepler model(p.spec.dim, p.eps, p.U);
  const int m = p.segment_count();
  ShootingUnknowns u;
  u.S = S;
  u.theta = theta;
  u.nodes.push_back(x0);
  const auto sys = make_system(model);
  const auto cfg = endpoint_config(p.options.integrator);
  for (int j = 1; j < m; ++j) {
    const auto tr = integrate(sys, u.nodes.back(), S / m, cfg);
    u.nodes.push_back(tr.state(tr.size() - 1));
  }
  return u;
}

namespace {

// Rows shared by residual() and residual_and_jacobian(); `ends[j]` is the
// flow of node j over S/m.
Vec assemble_residual(const ShootingProblem& p, const ShootingUnknowns& u, const std::vector<Vec>& ends,
                      const RegularizedKepler& model) {
  const int n = model.size();
  const int m = p.segment_count();
  Vec r(p.residual_count());
  for (int j = 0; j + 1 < m; ++j) r.segment(j * n, n) = ends[j] - u.nodes[j + 1];
  r.segment((m - 1) * n, n) = ends[m - 1] - group_action(p.spec.dim, u.theta, u.nodes[0]) -
                              p.options.eta * p.spec.T * time_direction(p.spec.dim);
  int row = m * n;
  const Vec& x0 = u.nodes[0];
  r[row++] = model.hamiltonian(x0);
  if (spatial(p)) r[row++] = bl_value(x0);
  r[row++] = model.field(p.x_ref).dot(x0 - p.x_ref);
  if (spatial(p)) r[row++] = group_generator(p.x_ref).dot(x0 - p.x_ref);
  return r;
}

void check_problem(const ShootingProblem& p) {
  p.spec.validate();
  if (p.x_ref.size() != state_size(p.spec.dim)) throw ConfigError("phase anchor has the wrong dimension");
  if (p.segment_count() < 1) throw ConfigError("segment count must be >= 1");
}

}  // namespace

Vec residual(const ShootingProblem& p, const ShootingUnknowns& u) {
  check_problem(p);
  const RegularizedKepler model(p.spec.dim, p.eps, p.U);
  const auto sys = make_system(model);
  const auto cfg = endpoint_config(p.options.integrator);
  const int m = p.segment_count();
  if (!(u.S > 0.0)) throw DomainError("shooting period must be positive");
  std::vector<Vec> ends(m);
  for (int j = 0; j < m; ++j) {
    const auto tr = integrate(sys, u.nodes[j], u.S / m, cfg);
    ends[j] = tr.state(tr.size() - 1);
  }
  return assemble_residual(p, u, ends, model);
}

ResidualJacobian residual_and_jacobian(const ShootingProblem& p, const ShootingUnknowns& u) {
  check_problem(p);
  const RegularizedKepler model(p.spec.dim, p.eps, p.U);
  const auto sys = make_system(model);
  const auto cfg = endpoint_config(p.options.integrator);
  const int n = model.size();
  const int m = p.segment_count();
  if (!(u.S > 0.0)) throw DomainError("shooting period must be positive");

  ResidualJacobian out;
  std::vector<Vec> ends(m);
  for (int j = 0; j < m; ++j) {
    auto var = integrate_with_variational(sys, u.nodes[j], u.S / m, cfg);
    ends[j] = var.trajectory.state(var.trajectory.size() - 1);
    out.segment_monodromy.push_back(std::move(var.M));
  }
  out.r = assemble_residual(p, u, ends, model);

  const int cols = p.unknown_count();
  Mat& J = out.J;
  J = Mat::Zero(p.residual_count(), cols);
  const int col_S = m * n;
  for (int j = 0; j < m; ++j) {
    J.block(j * n, j * n, n, n) = out.segment_monodromy[j];
    J.block(j * n, col_S, n, 1) = model.field(ends[j]) / m;
    if (j + 1 < m) {
      J.block(j * n, (j + 1) * n, n, n) -= Mat::Identity(n, n);
    }
  }
  // Closure row block: -R_theta on X_0 and -d/dtheta (R_theta X_0).
  const int cr = (m - 1) * n;
  if (spatial(p)) {
    Mat R(n, n);
    for (int c = 0; c < n; ++c) R.col(c) = group_action(p.spec.dim, u.theta, Vec::Unit(n, c));
    J.block(cr, 0, n, n) -= R;
    J.block(cr, col_S + 1, n, 1) = -group_generator(group_action(p.spec.dim, u.theta, u.nodes[0]));
  } else {
    J.block(cr, 0, n, n) -= Mat::Identity(n, n);
  }
  int row = m * n;
  J.block(row++, 0, 1, n) = model.hamiltonian_gradient(u.nodes[0]).transpose();
  if (spatial(p)) {
    // d/dz BL = i w, d/dw BL = -i z.
    const Vec g = group_generator(u.nodes[0]);
    const int zd = z_dim(p.spec.dim);
    Vec grad = Vec::Zero(n);
    grad.head(zd) = g.segment(zd, zd);
    grad.segment(zd, zd) = -g.head(zd);
    J.block(row++, 0, 1, n) = grad.transpose();
  }
  J.block(row++, 0, 1, n) = model.field(p.x_ref).transpose();
  if (spatial(p)) J.block(row++, 0, 1, n) = group_generator(p.x_ref).transpose();
  return out;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::Singular: return "singular";
    case SolveStatus::IntegrationFailure: return "integration-failure";
  }
  return "unknown";
}

void analyze_orbit(PeriodicOrbit& orbit, const PerturbationPtr& U, const IntegratorConfig& cfg) {
  const RegularizedKepler model(orbit.spec.dim, orbit.eps, U);
  const auto var = integrate_with_variational(make_system(model), orbit.x0, orbit.S, cfg);
  const auto& tr = var.trajectory;
  const StateLayout& L = model.layout();
  orbit.energy_min = std::numeric_limits<double>::infinity();
  orbit.energy_max = -std::numeric_limits<double>::infinity();
  orbit.tau_min = orbit.energy_min;
  orbit.tau_max = orbit.energy_max;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Vec x = tr.state(i);
    const double E = model.physical_energy(x);
    orbit.energy_min = std::min(orbit.energy_min, E);
    orbit.energy_max = std::max(orbit.energy_max, E);
    orbit.tau_min = std::min(orbit.tau_min, x[L.tau()]);
    orbit.tau_max = std::max(orbit.tau_max, x[L.tau()]);
  }
  const auto inv = invariant_report(tr, model);
  orbit.max_K_drift = std::max(inv.max_K_drift, std::abs(inv.K0));
  orbit.max_BL_drift.reset();
  if (inv.max_BL_drift) orbit.max_BL_drift = std::max(*inv.max_BL_drift, std::abs(*inv.BL0));

  Mat M = var.M;
  if (orbit.spec.dim == Dim::Spatial) {
    const int n = model.size();
    Mat Rinv(n, n);
    for (int c = 0; c < n; ++c) Rinv.col(c) = group_action(orbit.spec.dim, -orbit.theta, Vec::Unit(n, c));
    M = Rinv * M;
  }
  orbit.monodromy.M = M;
  orbit.monodromy.multipliers = M.eigenvalues();
  orbit.monodromy.degeneracy = degeneracy_index(M, orbit.x0, model);
}

PeriodicOrbit unperturbed_orbit(const ManifoldSpec& spec, const Vec& x0, const IntegratorConfig& cfg) {
  require_on_manifold(spec, x0);
  PeriodicOrbit o;
  o.spec = spec;
  o.eps = 0.0;
  o.x0 = x0;
  o.S = constants(spec).S;
  o.eta = 1;
  analyze_orbit(o, nullptr, cfg);
  o.residual_norm = closure_defect(o, nullptr, cfg);
  return o;
}

double closure_defect(const PeriodicOrbit& orbit, const PerturbationPtr& U, const IntegratorConfig& cfg) {
  const RegularizedKepler model(orbit.spec.dim, orbit.eps, U);
  const auto tr = integrate(make_system(model), orbit.x0, orbit.S, endpoint_config(cfg));
  const Vec end = tr.state(tr.size() - 1);
  return (end - group_action(orbit.spec.dim, orbit.theta, orbit.x0) - orbit.eta * orbit.spec.T * time_direction(orbit.spec.dim))
      .norm();
}

SolveResult solve(const ShootingProblem& p, const ShootingUnknowns& initial) {
  check_problem(p);
  const auto& opt = p.options;
  SolveResult out;
  Vec x = initial.pack();
  Vec best_x = x;
  double best_norm = std::numeric_limits<double>::infinity();
  int applied = 0;
  double last_step = std::numeric_limits<double>::infinity();

  auto finish = [&](SolveStatus status, const Vec& xv, double rnorm, std::string diag) {
    out.status = status;
    out.diagnostic = std::move(diag);
    const auto u = ShootingUnknowns::unpack(p, xv);
    PeriodicOrbit& o = out.orbit;
    o.spec = p.spec;
    o.eps = p.eps;
    o.x0 = u.nodes[0];
    o.S = u.S;
    o.theta = u.theta;
    o.eta = opt.eta;
    o.residual_norm = rnorm;
    o.iterations = applied;
    if (status == SolveStatus::Converged) analyze_orbit(o, p.U, opt.integrator);
    return out;
  };

  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    ResidualJacobian rj;
    try {
      rj = residual_and_jacobian(p, ShootingUnknowns::unpack(p, x));
    } catch (const IntegrationError& e) {
      return finish(SolveStatus::IntegrationFailure, best_x, best_norm, e.what());
    }
    const double rnorm = rj.r.norm();
    out.history.push_back(rnorm);
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best_x = x;
    }
    if (!std::isfinite(rnorm)) return finish(SolveStatus::Diverged, best_x, best_norm, "non-finite residual");

    Eigen::JacobiSVD<Mat> svd(rj.J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    const double cutoff = opt.rank_threshold * sv[0];
    Vec coeff = svd.matrixU().transpose() * rj.r;
    for (int i = 0; i < sv.size(); ++i) coeff[i] = sv[i] > cutoff ? coeff[i] / sv[i] : 0.0;
    const Vec delta = -(svd.matrixV() * coeff);
    const double step = delta.norm();

    if (rnorm < opt.residual_tol && (step < opt.step_tol || last_step < opt.step_tol)) {
      return finish(SolveStatus::Converged, x, rnorm, "");
    }
    if (iter == opt.max_iterations) break;

    // Armijo backtracking on 1/2 |r|^2; the Gauss-Newton slope is -|J delta|^2.
    const double phi0 = 0.5 * rnorm * rnorm;
    const double slope = -(rj.J * delta).squaredNorm();
    double lambda = 1.0;
    bool accepted = false;
    Vec trial;
    double trial_norm = 0.0;
    for (int b = 0; b <= opt.max_backtracks; ++b) {
      trial = x + lambda * delta;
      try {
        const auto u = ShootingUnknowns::unpack(p, trial);
        if (u.S > 0.0) {
          trial_norm = residual(p, u).norm();
          if (std::isfinite(trial_norm) && 0.5 * trial_norm * trial_norm <= phi0 + 1e-4 * lambda * slope) {
            accepted = true;
            break;
          }
        }
      } catch (const IntegrationError&) {
      } catch (const DomainError&) {
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      if (rnorm < opt.residual_tol) return finish(SolveStatus::Converged, x, rnorm, "");
      std::ostringstream os;
      os << "line search failed after " << opt.max_backtracks << " backtracks at iteration " << iter
         << " (residual " << rnorm << ", smallest kept singular value ratio "
         << (sv[sv.size() - 1] / sv[0]) << ")";
      return finish(SolveStatus::Singular, best_x, best_norm, os.str());
    }
    x = trial;
    ++applied;
    last_step = lambda * step;
    if (trial_norm < best_norm) {
      best_norm = trial_norm;
      best_x = x;
    }
  }
  std::ostringstream os;
  os << "no convergence in " << opt.max_iterations << " iterations (best residual " << best_norm << ")";
  return finish(SolveStatus::Diverged, best_x, best_norm, os.str());
}

SolveResult solve(const ShootingProblem& p, const Vec& seed) {
  check_problem(p);
  const auto c = constants(p.spec);
  return solve(p, initial_unknowns(p, seed, p.options.eta * c.S));
}

ContinuationResult continue_in_epsilon(const ShootingProblem& p, const Vec& seed, const std::vector<double>& targets,
                                       double step_floor) {
  ContinuationResult out;
  if (targets.empty()) {
    out.complete = true;
    return out;
  }
  for (std::size_t i = 1; i < targets.size(); ++i) {
    if (!(targets[i] > targets[i - 1])) throw ConfigError("eps targets must be strictly increasing");
  }
  const auto c = constants(p.spec);

  std::optional<PeriodicOrbit> prev;
  double eps_prev = 0.0;

  auto attempt = [&](double eps) -> std::optional<PeriodicOrbit> {
    ShootingProblem q = p;
    q.eps = eps;
    q.x_ref = prev ? prev->x0 : seed;
    const ShootingUnknowns init = prev ? initial_unknowns(q, prev->x0, prev->S, prev->theta)
                                       : initial_unknowns(q, seed, p.options.eta * c.S);
    SolveResult r;
    try {
      r = solve(q, init);
    } catch (const IntegrationError&) {
      return std::nullopt;
    }
    if (!r.converged()) return std::nullopt;
    return r.orbit;
  };

  for (const double target : targets) {
    double step = prev ? target - eps_prev : target;
    double eps = prev ? eps_prev + step : target;
    while (true) {
      auto orbit = attempt(eps);
      if (orbit) {
        out.family.push_back(*orbit);
        prev = orbit;
        eps_prev = eps;
        if (eps >= target) break;
        eps = std::min(target, eps_prev + step);
        continue;
      }
      step *= 0.5;
      if (step < step_floor || !prev) {
        std::ostringstream os;
        os << "continuation stalled at eps = " << eps_prev << " while targeting " << target
           << " (step floor " << step_floor << ")";
        out.diagnostic = os.str();
        return out;
      }
      eps = eps_prev + step;
    }
  }
  out.complete = true;
  return out;
}

double reduced_residual(const ShootingProblem& p, const Vec& seed) {
  ShootingProblem q = p;
  q.x_ref = seed;
  q.options.segments = 4;
  q.options.rank_threshold = 1e-3;
  q.options.max_iterations = 3;
  try {
    return solve(q, seed).orbit.residual_norm;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

CandidateContinuation continue_from_candidates(const ShootingProblem& p, const SeedParams& base,
                                               const std::vector<double>& targets, int scan_size, int keep) {
  CandidateContinuation out;
  auto run = [&](const SeedParams& sp, const std::string& label) {
    const Vec seed = seed_state(p.spec, sp);
    ShootingProblem q = p;
    q.x_ref = seed;
    ++out.attempts;
    auto c = continue_in_epsilon(q, seed, targets);
    const bool ok = c.complete;
    if (ok || out.continuation.family.size() <= c.family.size()) {
      out.continuation = std::move(c);
      out.seed = seed;
      out.seed_label = label;
    }
    return ok;
  };
  for (bool prograde : {false, true}) {
    SeedParams sp = base;
    sp.preset = SeedPreset::Circular;
    sp.prograde = prograde;
    if (run(sp, prograde ? "circular-prograde" : "circular-retrograde")) return out;
  }
  struct Ranked {
    double r;
    SeedParams sp;
  };
  std::vector<Ranked> ranked;
  for (int i = 0; i < scan_size; ++i) {
    for (int j = 0; j < scan_size; ++j) {
      SeedParams sp = base;
      sp.preset = SeedPreset::General;
      sp.alpha = 0.5 * std::numbers::pi * (i + 0.5) / scan_size;
      sp.phase_w = 2.0 * std::numbers::pi * j / scan_size;
      ShootingProblem q = p;
      q.eps = targets.empty() ? p.eps : targets.front();
      ranked.push_back({reduced_residual(q, seed_state(p.spec, sp)), sp});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.r < b.r; });
  for (int i = 0; i < keep && i < static_cast<int>(ranked.size()); ++i) {
    std::ostringstream label;
    label << "scan(alpha=" << ranked[i].sp.alpha << ",phase_w=" << ranked[i].sp.phase_w << ")";
    if (run(ranked[i].sp, label.str())) return out;
  }
  return out;
}

int index_of(const PeriodicOrbit& orbit, const PerturbationPtr& U, int periods, const IntegratorConfig& cfg) {
  if (periods < 1) throw ConfigError("periods must be >= 1");
  const RegularizedKepler model(orbit.spec.dim, orbit.eps, U);
  const auto tr = integrate(make_system(model), orbit.x0, periods * orbit.S, endpoint_config(cfg));
  const int it = model.layout().t();
  const double winding = (tr.state(tr.size() - 1)[it] - orbit.x0[it]) / orbit.spec.T;
  const double eta = std::round(winding);
  if (std::abs(winding - eta) > 1e-6) {
    throw InvariantError("time winding " + std::to_string(winding) + " is not an integer");
  }
  return static_cast<int>(eta);
}

std::vector<BandSeparation> distinctness(const std::vector<PeriodicOrbit>& orbits) {
  std::vector<BandSeparation> out;
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    for (std::size_t j = i + 1; j < orbits.size(); ++j) {
      const auto& a = orbits[i];
      const auto& b = orbits[j];
      BandSeparation s;
      s.i = i;
      s.j = j;
      s.separation = std::max(b.energy_min - a.energy_max, a.energy_min - b.energy_max);
      s.disjoint = s.separation > 0.0;
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace kepreg
