#include "kepreg/averaging.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "kepreg/parallel.hpp"

namespace kepreg {

PVec mean_force(const FourierForcing& p) { return p.mean(); }

PVec averaged_equilibrium(const PVec& pbar) {
  const double n = pbar.norm();
  if (n == 0.0) throw DomainError("forcing has zero mean: no bifurcation from infinity");
  const PVec x = pbar / std::pow(n, 1.5);
  const double r = x.norm();
  const PVec back = x / (r * r * r);
  if ((back - pbar).norm() > 1e-12 * std::max(1.0, n)) {
    throw InvariantError("averaged equilibrium fails x/|x|^3 = pbar");
  }
  return x;
}

Mat averaged_jacobian(const PVec& x) {
  const int N = static_cast<int>(x.size());
  const double r = x.norm();
  if (r == 0.0) throw DomainError("averaged Jacobian is singular at x = 0");
  const Mat S = (-r * r * Mat::Identity(N, N) + 3.0 * x * x.transpose()) / std::pow(r, 5);
  Mat A = Mat::Zero(2 * N, 2 * N);
  A.topRightCorner(N, N) = Mat::Identity(N, N);
  A.bottomLeftCorner(N, N) = S;
  return A;
}

JacobianDeterminant averaged_jacobian_det(const PVec& x) {
  const int N = static_cast<int>(x.size());
  JacobianDeterminant d;
  d.formula = 2.0 * std::pow(x.norm(), -3.0 * N);
  d.assembled = averaged_jacobian(x).determinant();
  d.magnitude_error = std::abs(std::abs(d.assembled) - d.formula) / d.formula;
  d.sign_agrees = (d.assembled > 0) == (d.formula > 0);
  return d;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("slope fit needs positive data");
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

struct Shot {
  Vec F;
  Mat J;
  Trajectory traj;
};

Shot shoot(const PhysicalKepler& model, const Vec& y, double T, const IntegratorConfig& cfg, bool dense) {
  const int n2 = 2 * model.dim();
  Vec x0(n2 + 1);
  x0.head(n2) = y;
  x0[n2] = 0.0;
  IntegratorConfig c = cfg;
  c.dense = dense;
  auto var = integrate_with_variational(make_system(model), x0, T, c);
  const Vec end = var.trajectory.state(var.trajectory.size() - 1);
  Shot s;
  s.F = end.head(n2) - y;
  s.J = var.M.topLeftCorner(n2, n2) - Mat::Identity(n2, n2);
  s.traj = std::move(var.trajectory);
  return s;
}

ScaledOrbit solve_member(const FourierForcing& p, const PVec& xstar, double eps, const PhysicalShootingOptions& opt) {
  ScaledOrbit o;
  o.eps = eps;
  const int N = p.dim();
  const double T = p.period();
  const double scale = std::pow(eps, 1.5);
  auto U = std::make_shared<ForcedKepler>(p);
  const PhysicalKepler model(N, scale, U, scale);

  Vec y = Vec::Zero(2 * N);
  y.head(N) = xstar;
  try {
    Shot s = shoot(model, y, T, opt.integrator, false);
    double f = s.F.norm();
    for (o.iterations = 0; o.iterations < opt.max_iterations && (f >= opt.defect_tol || o.iterations == 0);
         ++o.iterations) {
      const Vec step = s.J.fullPivLu().solve(-s.F);
      double lambda = 1.0;
      bool accepted = false;
      for (int b = 0; b <= opt.max_backtracks; ++b, lambda *= 0.5) {
        const Vec yt = y + lambda * step;
        Shot st = shoot(model, yt, T, opt.integrator, false);
        if (st.F.norm() < (1.0 - 1e-4 * lambda) * f) {
          y = yt;
          s = std::move(st);
          f = s.F.norm();
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (f >= opt.defect_tol) o.diagnostic = "line search failed";
        break;
      }
    }
    o.y0 = y;
    o.endpoint_defect = f;
    o.converged = f < opt.defect_tol;
    if (!o.converged && o.diagnostic.empty()) o.diagnostic = "iteration limit reached";

    Shot fin = shoot(model, y, T, opt.integrator, true);
    const Trajectory& tr = fin.traj;
    double rmin = std::numeric_limits<double>::infinity();
    double dev = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const int sub = i + 1 < tr.size() ? 4 : 1;
      for (int j = 0; j < sub; ++j) {
        const double s = j == 0 ? tr.s(i) : tr.s(i) + (tr.s(i + 1) - tr.s(i)) * j / sub;
        const Vec x = tr.eval(s);
        rmin = std::min(rmin, x.head(N).norm());
        dev = std::max(dev, (x.head(N) - xstar).norm());
      }
    }
    o.min_abs_u = rmin / std::sqrt(eps);
    o.sup_deviation = dev;
  } catch (const Error& e) {
    o.converged = false;
    o.diagnostic = e.what();
  }
  return o;
}

}  // namespace

BifurcationFamily bifurcation_from_infinity(const FourierForcing& p, const std::vector<double>& eps_list,
                                            const PhysicalShootingOptions& opt, int jobs) {
  if (eps_list.empty()) throw ConfigError("eps list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0)) throw ConfigError("eps values must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps list must be decreasing");
  }
  opt.integrator.validate();
  BifurcationFamily f;
  f.pbar = mean_force(p);
  f.xstar = averaged_equilibrium(f.pbar);
  f.period = p.period();
  f.members.resize(eps_list.size());
  parallel_for(static_cast<int>(eps_list.size()), jobs,
               [&](int i) { f.members[i] = solve_member(p, f.xstar, eps_list[i], opt); });
  std::vector<double> xs, ys;
  f.complete = true;
  for (const auto& m : f.members) {
    if (!m.converged) {
      f.complete = false;
      continue;
    }
    xs.push_back(m.eps);
    ys.push_back(m.min_abs_u);
  }
  f.slope = xs.size() >= 2 ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
  return f;
}

ForceBalance force_balance(const GeneralizedSolution& g) {
  if (!g.collisions().empty()) throw DomainError("force balance needs a collision-free solution");
  const int N = physical_dim(g.dim());
  const Trajectory& tr = g.time_map().trajectory();
  const RegularizedKepler& model = g.model();
  const StateLayout& L = model.layout();
  const double eps = model.eps();
  const auto& U = model.perturbation();
  ForceBalance fb;
  fb.kepler = PVec::Zero(N);
  fb.forcing = PVec::Zero(N);
  using boost::math::quadrature::gauss;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    for (int c = 0; c < N; ++c) {
      const auto kep = [&](double s) {
        const PVec u = position_from_state(g.dim(), tr.eval(s));
        return u[c] / u.squaredNorm();
      };
      fb.kepler[c] += gauss<double, 20>::integrate(kep, tr.s(i), tr.s(i + 1));
      if (U && eps != 0.0) {
        const auto frc = [&](double s) {
          const Vec x = tr.eval(s);
          const PVec u = position_from_state(g.dim(), x);
          return eps * U->gradient(x[L.t()], u, eps)[c] * x.head(L.zd).squaredNorm();
        };
        fb.forcing[c] += gauss<double, 20>::integrate(frc, tr.s(i), tr.s(i + 1));
      }
    }
  }
  fb.defect = (fb.kepler - fb.forcing).norm();
  return fb;
}

void write_family_csv(std::ostream& os, const BifurcationFamily& f, const std::vector<std::string>& header) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << std::setprecision(17);
  os << "eps,min_abs_u,sup_deviation,endpoint_defect,converged\n";
  for (const auto& m : f.members) {
    os << m.eps << ',' << m.min_abs_u << ',' << m.sup_deviation << ',' << m.endpoint_defect << ','
       << (m.converged ? 1 : 0) << '\n';
  }
  os << "# slope " << f.slope << '\n';
}

}  // namespace kepreg
