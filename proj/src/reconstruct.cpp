#include "kepreg/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>
#include <boost/math/differentiation/autodiff.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

namespace kepreg {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

// Classical constant in |u| ~ c |t - t0|^{2/3} at a Kepler collision.
const double kCollisionConstant = std::cbrt(4.5);

double root_in(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) return std::abs(fa) < std::abs(fb) ? a : b;
  boost::uintmax_t iters = 200;
  const auto tol = [](double x, double y) { return std::abs(x - y) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)); };
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  return 0.5 * (r.first + r.second);
}

PVec vector_part(const Quaternion& q) {
  PVec v(3);
  v << q.z1, q.z2, q.z3;
  return v;
}

PVec from_complex(const Complex& c) {
  PVec v(2);
  v << c.x, c.y;
  return v;
}

Complex to_complex(const PVec& v) { return {v[0], v[1]}; }

double perturbation_at_origin(const RegularizedKepler& model, double t) {
  if (!model.perturbation() || model.eps() == 0.0) return 0.0;
  return model.perturbation()->value(t, PVec::Zero(physical_dim(model.dim())), model.eps());
}

PVec eps_gradient(const RegularizedKepler& model, double t, const PVec& u) {
  if (!model.perturbation() || model.eps() == 0.0) return PVec::Zero(u.size());
  return model.eps() * model.perturbation()->gradient(t, u, model.eps());
}

}  // namespace

// ---------------------------------------------------------------------------
// time map

PhysicalTimeMap::PhysicalTimeMap(Trajectory traj, Dim dim) : traj_(std::move(traj)) {
  if (traj_.empty()) throw DomainError("time map needs a non-empty trajectory");
  if (!traj_.has_dense()) throw DomainError("time map needs dense output");
  it_ = StateLayout(dim).t();
  t_nodes_.reserve(traj_.size());
  for (std::size_t i = 0; i < traj_.size(); ++i) {
    const double t = traj_.full(i)[it_];
    if (!t_nodes_.empty() && !(t > t_nodes_.back())) {
      throw InvariantError("physical time is not strictly increasing along the trajectory (s = " +
                           std::to_string(traj_.s(i)) + ")");
    }
    t_nodes_.push_back(t);
  }
}

double PhysicalTimeMap::t(double s) const { return traj_.eval(s)[it_]; }

double PhysicalTimeMap::s(double t) const {
  if (t < t_nodes_.front() || t > t_nodes_.back()) throw DomainError("time outside the range of the time map");
  auto hi = std::upper_bound(t_nodes_.begin(), t_nodes_.end(), t);
  if (hi == t_nodes_.end()) return traj_.s_end();
  const std::size_t i = static_cast<std::size_t>(hi - t_nodes_.begin()) - 1;
  return root_in([&](double s) { return this->t(s) - t; }, traj_.s(i), traj_.s(i + 1));
}

// ---------------------------------------------------------------------------
// pointwise physical quantities

PVec position_from_state(Dim dim, const Vec& x) {
  if (dim == Dim::Planar) return from_complex(lc_position(z_complex(x)));
  const auto u = ks_map(z_quat(x));
  PVec v(3);
  v << u.u1, u.u2, u.u3;
  return v;
}

PVec velocity_from_state(Dim dim, const Vec& x) {
  const StateLayout L(dim);
  const double r = x.head(L.zd).squaredNorm();
  if (r == 0.0) throw DomainError("velocity is undefined at a collision");
  if (dim == Dim::Planar) return from_complex(z_complex(x) * w_complex(x) / (2.0 * r));
  return vector_part(z_quat(x).conj() * Quaternion::i() * w_quat(x)) / (2.0 * r);
}

PVec acceleration_from_state(const RegularizedKepler& model, const Vec& x) {
  const StateLayout& L = model.layout();
  const Vec f = model.field(x);
  const Vec z = x.head(L.zd);
  const Vec z1 = f.head(L.zd);
  const Vec z2 = f.segment(L.zd, L.zd) / 4.0;
  const double ts = z.squaredNorm();
  if (ts == 0.0) throw DomainError("acceleration is undefined at a collision");
  const double tss = 2.0 * z.dot(z1);
  PVec us, uss;
  if (model.dim() == Dim::Planar) {
    const Complex a{z[0], z[1]}, b{z1[0], z1[1]}, c{z2[0], z2[1]};
    us = from_complex(2.0 * a * b);
    uss = from_complex(2.0 * (b * b + a * c));
  } else {
    const Quaternion a{z[0], z[1], z[2], z[3]}, b{z1[0], z1[1], z1[2], z1[3]}, c{z2[0], z2[1], z2[2], z2[3]};
    const Quaternion I = Quaternion::i();
    us = vector_part(b.conj() * I * a + a.conj() * I * b);
    uss = vector_part(c.conj() * I * a + (b.conj() * I * b) * 2.0 + a.conj() * I * c);
  }
  return (uss * ts - us * tss) / (ts * ts * ts);
}

CollisionEvent collision_limits(const RegularizedKepler& model, const Vec& x, double s0, double tol) {
  const StateLayout& L = model.layout();
  const Vec zp = x.segment(L.zd, L.zd) / 4.0;
  CollisionEvent ev;
  ev.s0 = s0;
  ev.t0 = x[L.t()];
  ev.speed_sq = zp.squaredNorm();
  if (std::abs(ev.speed_sq - 0.5) > tol) {
    throw InvariantError("|z'|^2 = " + std::to_string(ev.speed_sq) + " at a collision; zero energy requires 1/2");
  }
  const Vec d = zp / std::sqrt(ev.speed_sq);
  if (model.dim() == Dim::Planar) {
    const Complex c{d[0], d[1]};
    ev.direction = from_complex(c * c);
  } else {
    const Quaternion q{d[0], d[1], d[2], d[3]};
    ev.direction = vector_part(q.conj() * Quaternion::i() * q);
  }
  ev.energy = -x[L.tau()] + model.eps() * perturbation_at_origin(model, ev.t0);
  return ev;
}

// ---------------------------------------------------------------------------
// generalized solution

GeneralizedSolution::GeneralizedSolution(const PeriodicOrbit& orbit, PerturbationPtr U, const ReconstructOptions& opt)
    : orbit_(orbit), model_(orbit.spec.dim, orbit.eps, std::move(U)) {
  if (opt.samples < 2) throw ConfigError("reconstruction needs at least 2 samples");
  if (!(opt.window >= 0.0)) throw ConfigError("excision window must be non-negative");
  if (orbit.eta < 1) throw DomainError("orbit index must be positive");
  IntegratorConfig cfg = opt.integrator;
  cfg.dense = true;
  Trajectory traj = integrate(make_system(model_), orbit.x0, orbit.S, cfg);
  const Dim dim = orbit.spec.dim;
  if (dim == Dim::Spatial) {
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (std::abs(bl_value(traj.state(i))) > 1e-9) {
        throw InvariantError("BL does not vanish along the orbit; KS projection is not a physical solution");
      }
    }
  }
  for (const Event& e : detect_events(traj, {collision_event(dim)})) {
    if (e.s > orbit.S - 1e-9) continue;
    collisions_.push_back(collision_limits(model_, e.x, e.s));
  }
  map_ = PhysicalTimeMap(std::move(traj), dim);
  period_ = orbit.eta * orbit.spec.T;

  const double window = opt.window * orbit.spec.T;
  samples_.reserve(opt.samples);
  for (int i = 0; i < opt.samples; ++i) {
    PhysicalSample p;
    p.t = t_begin() + period_ * i / opt.samples;
    const Vec x = state_at(p.t);
    p.u = position_from_state(dim, x);
    for (const auto& c : collisions_) {
      if (std::abs(p.t - c.t0) <= window) p.in_window = true;
    }
    if (x.head(z_dim(dim)).squaredNorm() == 0.0) p.in_window = true;
    if (p.in_window) {
      p.E = -x[model_.layout().tau()] + eps() * perturbation_at_origin(model_, p.t);
    } else {
      p.v = velocity_from_state(dim, x);
      p.E = 0.5 * p.v.squaredNorm() - 1.0 / p.u.norm();
    }
    if (dim == Dim::Spatial) {
      const Quaternion z = z_quat(x);
      max_real_part_ = std::max(max_real_part_, std::abs((z.conj() * Quaternion::i() * z).re()));
    }
    samples_.push_back(std::move(p));
  }
}

double GeneralizedSolution::wrap(double t) const {
  double r = std::fmod(t - t_begin(), period_);
  if (r < 0) r += period_;
  return std::min(t_begin() + r, map_.t_end());
}

Vec GeneralizedSolution::state_at(double t) const {
  const double tw = wrap(t);
  return map_.trajectory().eval(map_.s(tw));
}

double GeneralizedSolution::energy(double t) const {
  const Vec x = state_at(t);
  const PVec u = position_from_state(dim(), x);
  const PVec v = velocity_from_state(dim(), x);
  return 0.5 * v.squaredNorm() - 1.0 / u.norm();
}

double GeneralizedSolution::ode_residual(double t) const {
  const Vec x = state_at(t);
  const PVec u = position_from_state(dim(), x);
  const PVec a = acceleration_from_state(model_, x);
  const double r = u.norm();
  return (a + u / (r * r * r) - eps_gradient(model_, wrap(t), u)).norm();
}

// ---------------------------------------------------------------------------
// Richardson limits

double richardson(const std::array<double, 3>& f, double p1, double p2) {
  Eigen::Matrix3d A;
  A << 1.0, 1.0, 1.0, 1.0, std::pow(0.5, p1), std::pow(0.5, p2), 1.0, std::pow(0.25, p1), std::pow(0.25, p2);
  const Eigen::Vector3d b{f[0], f[1], f[2]};
  return A.partialPivLu().solve(b)[0];
}

namespace {

PVec richardson_vec(const std::array<PVec, 3>& f, double p1, double p2) {
  PVec out(f[0].size());
  for (int i = 0; i < f[0].size(); ++i) out[i] = richardson({f[0][i], f[1][i], f[2][i]}, p1, p2);
  return out;
}

}  // namespace

LimitCheck check_collision_limits(const GeneralizedSolution& g, const CollisionEvent& ev, double h) {
  if (h <= 0.0) h = 1e-3 * g.source().spec.T;
  LimitCheck out;
  for (int side : {-1, 1}) {
    std::array<PVec, 3> dir, vdir;
    std::array<double, 3> E{};
    for (int j = 0; j < 3; ++j) {
      const double t = ev.t0 + side * h / std::pow(2.0, j);
      const Vec x = g.state_at(t);
      const PVec u = position_from_state(g.dim(), x);
      const PVec v = velocity_from_state(g.dim(), x);
      dir[j] = u.normalized();
      vdir[j] = v.normalized();
      E[j] = 0.5 * v.squaredNorm() - 1.0 / u.norm();
    }
    const PVec d = richardson_vec(dir, 2.0 / 3.0, 4.0 / 3.0);
    const PVec vd = richardson_vec(vdir, 2.0 / 3.0, 4.0 / 3.0);
    const double e = richardson(E, 2.0 / 3.0, 1.0);
    if (side < 0) {
      out.direction_minus = d;
      out.velocity_dir_minus = vd;
      out.energy_minus = e;
    } else {
      out.direction_plus = d;
      out.velocity_dir_plus = vd;
      out.energy_plus = e;
    }
  }
  out.direction_error = std::max((out.direction_minus - ev.direction).norm(), (out.direction_plus - ev.direction).norm());
  out.energy_error = std::max(std::abs(out.energy_minus - ev.energy), std::abs(out.energy_plus - ev.energy));
  out.reflection_error = (out.velocity_dir_plus + out.velocity_dir_minus).norm();
  return out;
}

// ---------------------------------------------------------------------------
// Sundman lift

namespace {

// int_a^b dt / |u(t)| where a collision may sit at either end; next to a
// collision t = t0 + r^3 turns the |t - t0|^{-2/3} singularity into a
// bounded smooth integrand.
double sundman_piece(const GeneralizedSolution& g, double a, double b, bool col_a, bool col_b) {
  const auto inv_u = [&](double t) { return 1.0 / g.position(t).norm(); };
  const double tol = 1e-12;
  if (!col_a && !col_b) return gauss_kronrod<double, 31>::integrate(inv_u, a, b, 15, tol);
  if (col_a && col_b) {
    const double m = 0.5 * (a + b);
    return sundman_piece(g, a, m, true, false) + sundman_piece(g, m, b, false, true);
  }
  const double t0 = col_a ? a : b;
  const double sgn = col_a ? 1.0 : -1.0;
  const double R = std::cbrt(b - a);
  const auto f = [&](double r) {
    if (r == 0.0) return 3.0 / kCollisionConstant;
    return 3.0 * r * r * inv_u(t0 + sgn * r * r * r);
  };
  // Fixed nodes: very close to t0 the sampled u(t) is limited by the
  // resolution of t itself, which an adaptive rule would chase.
  return gauss<double, 20>::integrate(f, 0.0, 0.5 * R) + gauss<double, 20>::integrate(f, 0.5 * R, R);
}

}  // namespace

LiftedOrbit sundman_lift(const GeneralizedSolution& g, int samples) {
  if (g.dim() != Dim::Planar) throw UnsupportedError("the Sundman lift is implemented for planar solutions only");
  if (samples < 4) throw ConfigError("sundman_lift needs at least 4 samples");
  const double t0 = g.t_begin();
  const double P = g.period();
  const double eps = g.eps();
  const auto& U = g.model().perturbation();

  std::vector<double> col;
  for (const auto& c : g.collisions()) col.push_back(c.t0);
  std::sort(col.begin(), col.end());

  // Sample grid shifted off the collision times.
  std::vector<double> grid;
  for (int i = 0; i <= samples; ++i) grid.push_back(t0 + P * (i + 0.5) / (samples + 1));
  for (double tc : col) {
    for (double& t : grid) {
      if (std::abs(t - tc) < 1e-6 * P) t = tc + 1e-6 * P;
    }
  }

  // Breakpoints: start, collisions, samples, end.
  struct Node {
    double t;
    bool collision;
  };
  std::vector<Node> nodes{{t0, false}};
  for (double tc : col) nodes.push_back({tc, true});
  for (double t : grid) nodes.push_back({t, false});
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.t < b.t; });
  if (!col.empty() && std::abs(col.front() - t0) < 1e-12) {
    nodes.erase(nodes.begin());
    nodes.front().collision = true;
  }

  LiftedOrbit out;
  out.collisions = static_cast<int>(col.size());
  double s = 0.0;
  double theta = std::arg(std::complex<double>(g.position(t0)[0], g.position(t0)[1]));
  PVec u_prev = g.position(nodes.front().t);
  int sign = 1;
  int flips = 0;
  const double theta_start = theta;

  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const Node& a = nodes[i];
    const Node& b = nodes[i + 1];
    if (b.t > a.t) s += sundman_piece(g, a.t, b.t, a.collision, b.collision);
    if (b.collision) {
      ++flips;
      sign = -sign;
      continue;
    }
    const PVec u = g.position(b.t);
    if (!a.collision) {
      const double du = std::arg(std::complex<double>(u[0], u[1]) / std::complex<double>(u_prev[0], u_prev[1]));
      theta += du;
    } else {
      // Ingoing and outgoing rays coincide, so the argument is continuous.
      const double du = std::remainder(std::arg(std::complex<double>(u[0], u[1])) - theta, 2.0 * std::numbers::pi);
      theta += du;
    }
    u_prev = u;
    const bool is_sample = std::binary_search(grid.begin(), grid.end(), b.t);
    if (!is_sample) continue;
    const double r = u.norm();
    const Complex z = Complex::polar(std::sqrt(r), 0.5 * theta) * static_cast<double>(sign);
    const PVec v = g.velocity(b.t);
    const Complex w = 2.0 * z.conj() * to_complex(v);
    const double E = 0.5 * v.squaredNorm() - 1.0 / r;
    const double Uv = (U && eps != 0.0) ? U->value(b.t, u, eps) : 0.0;
    Vec x(6);
    x << z.x, z.y, w.x, w.y, b.t, -E + eps * Uv;
    out.t.push_back(b.t);
    out.s.push_back(s);
    out.x.push_back(std::move(x));
  }
  // Close the integral and the argument at the end of the period.
  s += sundman_piece(g, nodes.back().t, t0 + P, nodes.back().collision, false);
  const PVec u_end = g.position(t0 + P);
  theta += std::arg(std::complex<double>(u_end[0], u_end[1]) / std::complex<double>(u_prev[0], u_prev[1]));
  out.S = s;
  out.winding = static_cast<int>(std::lround((theta - theta_start) / (2.0 * std::numbers::pi)));
  out.anti_periodic = ((out.winding + flips) % 2) != 0;
  return out;
}

RoundTrip compare_lift(const LiftedOrbit& lift, const GeneralizedSolution& g) {
  if (lift.t.empty()) throw DomainError("empty lift");
  const auto& map = g.time_map();
  const double s_ref = map.s(g.t_begin());
  RoundTrip best;
  best.state_distance = std::numeric_limits<double>::infinity();
  for (int sign : {1, -1}) {
    double dist = 0.0, ds = 0.0;
    double offset = 0.0;
    for (std::size_t i = 0; i < lift.t.size(); ++i) {
      Vec x = g.state_at(lift.t[i]);
      x.head(4) *= sign;
      dist = std::max(dist, (x - lift.x[i]).norm());
      const double s_src = map.s(lift.t[i]) - s_ref;
      if (i == 0) offset = lift.s[i] - s_src;
      ds = std::max(ds, std::abs(lift.s[i] - s_src - offset));
    }
    if (dist < best.state_distance) {
      best.state_distance = dist;
      best.s_distance = ds;
      best.sign = sign;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// collision removal

namespace {

template <typename X>
X smooth_step_exp(const X& x) {
  using std::exp;
  return exp(-1.0 / x);
}

template <typename X>
X plateau(const X& a) {
  // g(a) = f(a) / (f(a) + f(1 - a)) for a in (0, 1)
  const X fa = smooth_step_exp(a);
  const X fb = smooth_step_exp(1.0 - a);
  return fa / (fa + fb);
}

}  // namespace

double bump(double xi, int derivative) {
  if (derivative < 0 || derivative > 2) throw DomainError("bump derivative order must be 0, 1 or 2");
  const double ax = std::abs(xi);
  if (ax <= 1.0) return derivative == 0 ? 1.0 : 0.0;
  if (ax >= 2.0) return 0.0;
  using namespace boost::math::differentiation;
  const auto x = make_fvar<double, 2>(xi);
  const auto a = xi > 0 ? 2.0 - x : 2.0 + x;
  const auto y = plateau(a);
  return y.derivative(derivative);
}

CollisionRemoval::CollisionRemoval(const PeriodicOrbit& orbit2d, PerturbationPtr U, double mu, const RemovalOptions& opt)
    : orbit_(orbit2d), U_(U), model_(orbit2d.spec.dim, orbit2d.eps, U), mu_(mu), samples_(opt.samples) {
  if (orbit2d.spec.dim != Dim::Planar) throw UnsupportedError("collision removal is implemented for planar orbits");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  S_ = orbit2d.S;
  if (mu >= S_ / 4.0) throw ConfigError("mu must be smaller than S/4");
  if (samples_ < 8) throw ConfigError("collision removal needs at least 8 samples");
  T_ = orbit2d.eta * orbit2d.spec.T;

  IntegratorConfig cfg = opt.integrator;
  cfg.dense = true;
  traj_ = integrate(make_system(model_), orbit2d.x0, S_, cfg);
  const Vec xe = traj_.state(traj_.size() - 1);
  const Complex z0 = z_complex(orbit2d.x0), zS = z_complex(xe);
  if ((zS + z0).abs() < (zS - z0).abs()) {
    throw UnsupportedError("anti-periodic regularized orbit; only the periodic case is supported");
  }
  for (const Event& e : detect_events(traj_, {collision_event(Dim::Planar)})) {
    if (e.s > S_ - 1e-9) continue;
    s_col_.push_back(e.s);
    const Complex zp = w_complex(e.x) / 4.0;
    v_col_.push_back(Complex{0.0, 1.0} * zp / zp.abs());
  }
  if (s_col_.empty()) throw DomainError("orbit has no collisions to remove");
  for (std::size_t i = 0; i < s_col_.size(); ++i) {
    for (std::size_t j = i + 1; j < s_col_.size(); ++j) {
      if (std::abs(wrap_offset(s_col_[i], s_col_[j])) < 4.0 * mu_) {
        throw DomainError("collision windows overlap; decrease mu");
      }
    }
  }
  map_ = PhysicalTimeMap(traj_, Dim::Planar);

  // Quadrature table for t_mu(s): integrator nodes (polynomial pieces of the
  // dense output) refined inside the windows.
  std::vector<double> br(traj_.nodes());
  for (double sj : s_col_) {
    for (int d = -16; d <= 16; ++d) {
      double s = sj + d * mu_ / 8.0;
      if (s < 0.0) s += S_;
      if (s > S_) s -= S_;
      br.push_back(s);
    }
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end(), [](double a, double b) { return std::abs(a - b) < 1e-13; }), br.end());
  s_table_ = br;
  t_table_.assign(br.size(), orbit2d.x0[4]);
  const auto r2 = [&](double s) { return z_mu(s)[0].norm2(); };
  for (std::size_t i = 1; i < br.size(); ++i) {
    t_table_[i] = t_table_[i - 1] + gauss<double, 20>::integrate(r2, br[i - 1], br[i]);
  }
  T_mu_ = t_table_.back() - t_table_.front();
}

double CollisionRemoval::wrap_offset(double s, double sj) const { return std::remainder(s - sj, S_); }

std::array<Complex, 3> CollisionRemoval::z_mu(double s) const {
  double sr = std::fmod(s, S_);
  if (sr < 0) sr += S_;
  const Vec x = traj_.eval(std::min(sr, traj_.s_end()));
  const Vec f = model_.field(x);
  std::array<Complex, 3> out{z_complex(x), Complex{f[0], f[1]}, Complex{f[2], f[3]} / 4.0};
  for (std::size_t j = 0; j < s_col_.size(); ++j) {
    const double xi = wrap_offset(sr, s_col_[j]) / mu_;
    if (std::abs(xi) >= 2.0) continue;
    const double m3 = mu_ * mu_ * mu_;
    out[0] += v_col_[j] * (m3 * bump(xi, 0));
    out[1] += v_col_[j] * (mu_ * mu_ * bump(xi, 1));
    out[2] += v_col_[j] * (mu_ * bump(xi, 2));
  }
  return out;
}

double CollisionRemoval::t_mu(double s) const {
  const double cycles = std::floor(s / S_);
  const double sr = s - cycles * S_;
  auto hi = std::upper_bound(s_table_.begin(), s_table_.end(), sr);
  std::size_t i = hi == s_table_.begin() ? 0 : static_cast<std::size_t>(hi - s_table_.begin()) - 1;
  if (i + 1 >= s_table_.size()) i = s_table_.size() - 2;
  const auto r2 = [&](double q) { return z_mu(q)[0].norm2(); };
  const double part = sr > s_table_[i] ? gauss<double, 20>::integrate(r2, s_table_[i], sr) : 0.0;
  return t_table_[i] + part + cycles * T_mu_;
}

double CollisionRemoval::s_mu(double t) const {
  const double t0 = t_table_.front();
  const double cycles = std::floor((t - t0) / T_mu_);
  const double tr = t - cycles * T_mu_;
  auto hi = std::upper_bound(t_table_.begin(), t_table_.end(), tr);
  std::size_t i = hi == t_table_.begin() ? 0 : static_cast<std::size_t>(hi - t_table_.begin()) - 1;
  if (i + 1 >= t_table_.size()) return S_ * (cycles + 1);
  const double s = root_in([&](double q) { return t_mu(q) - tr; }, s_table_[i], s_table_[i + 1]);
  return s + cycles * S_;
}

Complex CollisionRemoval::u_mu(double t) const {
  const Complex z = z_mu(s_mu(t))[0];
  return z * z;
}

Complex CollisionRemoval::forcing_at_s(double s) const {
  const auto [z, z1, z2] = z_mu(s);
  const double r2 = z.norm2();
  return 2.0 * z * z2 / (r2 * r2) + z * z * ((1.0 - 2.0 * z1.norm2()) / (r2 * r2 * r2));
}

double CollisionRemoval::residual_at_s(double s) const {
  const auto [z, z1, z2] = z_mu(s);
  const double ts = z.norm2();
  const double tss = 2.0 * dot(z, z1);
  const Complex us = 2.0 * z * z1;
  const Complex uss = 2.0 * (z1 * z1 + z * z2);
  const Complex acc = (uss * ts - us * tss) / (ts * ts * ts);
  const Complex u = z * z;
  const Complex kepler = u / (ts * ts * ts);
  const Complex p = forcing_at_s(s);
  const double scale = acc.abs() + kepler.abs() + p.abs();
  return (acc + kepler - p).abs() / scale;
}

Complex CollisionRemoval::original_forcing(double t) const {
  if (!U_ || orbit_.eps == 0.0) return {};
  const double t0 = t_table_.front();
  double tr = std::fmod(t - t0, T_);
  if (tr < 0) tr += T_;
  const double tq = std::min(t0 + tr, map_.t_end());
  const Vec x = traj_.eval(map_.s(tq));
  const PVec u = position_from_state(Dim::Planar, x);
  return to_complex(orbit_.eps * U_->gradient(t, u, orbit_.eps));
}

double CollisionRemoval::period_shift() const {
  const auto f = [&](double s) {
    double sr = std::fmod(s, S_);
    if (sr < 0) sr += S_;
    return z_mu(s)[0].norm2() - traj_.eval(std::min(sr, traj_.s_end())).head(2).squaredNorm();
  };
  double total = 0.0;
  for (std::size_t i = 1; i < s_table_.size(); ++i) {
    const double a = s_table_[i - 1], b = s_table_[i];
    bool window = false;
    for (double sj : s_col_) window = window || std::abs(wrap_offset(0.5 * (a + b), sj)) < 2.0 * mu_;
    if (window) total += gauss<double, 20>::integrate(f, a, b);
  }
  return total;
}

double CollisionRemoval::min_abs_u() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj_.size(); ++i) best = std::min(best, z_mu(traj_.s(i))[0].norm2());
  for (double sj : s_col_) {
    const int n = 2000;
    double bs = sj, bv = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double s = sj - 2.0 * mu_ + 4.0 * mu_ * i / n;
      const double v = z_mu(s)[0].norm2();
      if (v < bv) {
        bv = v;
        bs = s;
      }
    }
    const double h = 4.0 * mu_ / n;
    const auto r = boost::math::tools::brent_find_minima([&](double s) { return z_mu(s)[0].norm2(); }, bs - h, bs + h,
                                                         std::numeric_limits<double>::digits);
    best = std::min({best, bv, r.second});
  }
  return best;
}

double CollisionRemoval::forcing_l1_distance() const {
  double total = 0.0;
  const auto f = [&](double s) {
    const Complex d = forcing_at_s(s) - original_forcing(t_mu(s));
    return d.abs() * z_mu(s)[0].norm2();
  };
  for (std::size_t i = 1; i < s_table_.size(); ++i) {
    const double a = s_table_[i - 1], b = s_table_[i];
    bool window = false;
    for (double sj : s_col_) window = window || std::abs(wrap_offset(0.5 * (a + b), sj)) < 2.0 * mu_;
    total += window ? gauss_kronrod<double, 31>::integrate(f, a, b, 6, 1e-10) : gauss<double, 20>::integrate(f, a, b);
  }
  return total;
}

double CollisionRemoval::sup_distance() const {
  const double t0 = t_table_.front();
  const double span = std::min(T_, T_mu_);
  std::vector<double> ts;
  for (int i = 0; i < samples_; ++i) ts.push_back(t0 + span * i / samples_);
  for (double sj : s_col_) {
    for (int i = -20; i <= 20; ++i) {
      const double s = sj + 0.1 * mu_ * i;
      const double t = map_.t(std::clamp(s, 0.0, S_));
      if (t >= t0 && t <= t0 + span) ts.push_back(t);
    }
  }
  double best = 0.0;
  for (double t : ts) {
    const Vec x = traj_.eval(map_.s(t));
    const Complex u = lc_position(z_complex(x));
    best = std::max(best, (u_mu(t) - u).abs());
  }
  return best;
}

double CollisionRemoval::max_residual() const {
  double worst = 0.0;
  for (int i = 0; i < samples_; ++i) worst = std::max(worst, residual_at_s(S_ * (i + 0.5) / samples_));
  for (double sj : s_col_) {
    for (int i = -200; i <= 200; ++i) worst = std::max(worst, residual_at_s(sj + 0.01 * mu_ * i + 1e-3 * mu_));
  }
  return worst;
}

double CollisionRemoval::es1_constant() const {
  double c = std::numeric_limits<double>::infinity();
  const double m3 = mu_ * mu_ * mu_;
  for (double sj : s_col_) {
    for (int i = -400; i <= 400; ++i) {
      const double d = 2.0 * mu_ * i / 400;
      c = std::min(c, z_mu(sj + d)[0].abs() / (std::abs(d) + m3));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// CSV

void write_generalized_csv(std::ostream& os, const GeneralizedSolution& g, const std::vector<std::string>& header) {
  for (const auto& h : header) os << "# " << h << '\n';
  const int N = physical_dim(g.dim());
  os << "t";
  for (int i = 1; i <= N; ++i) os << ",u" << i;
  os << ",abs_u,E,collision_flag\n";
  os << std::setprecision(17);
  for (const auto& p : g.samples()) {
    os << p.t;
    for (int i = 0; i < N; ++i) os << ',' << p.u[i];
    os << ',' << p.u.norm() << ',' << p.E << ',' << (p.in_window ? 1 : 0) << '\n';
  }
  os << "# collisions " << g.collisions().size() << '\n';
  os << "# index,t0,s0";
  for (int i = 1; i <= N; ++i) os << ",direction" << i;
  os << ",energy,zprime_sq\n";
  int idx = 0;
  for (const auto& c : g.collisions()) {
    os << "# " << idx++ << ',' << c.t0 << ',' << c.s0;
    for (int i = 0; i < N; ++i) os << ',' << c.direction[i];
    os << ',' << c.energy << ',' << c.speed_sq << '\n';
  }
}

}  // namespace kepreg
