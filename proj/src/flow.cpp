#include "kepreg/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <boost/math/tools/roots.hpp>

namespace kepreg {

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("integrator tolerances must be positive");
  if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
  if (initial_step < 0.0) throw ConfigError("initial_step must be non-negative");
  if (max_steps < 1) throw ConfigError("max_steps must be positive");
}

OdeSystem make_system(const RegularizedKepler& model) {
  return {model.size(), [&model](const Vec& x, Vec& dx) { model.field(x, dx); },
          [&model](const Vec& x) { return model.jacobian(x); }};
}

OdeSystem make_system(const PhysicalKepler& model) {
  return {model.size(), [&model](const Vec& x, Vec& dx) { model.field(x, dx); },
          [&model](const Vec& x) { return model.jacobian(x); }};
}

std::size_t Trajectory::locate(double s) const {
  if (s_.empty()) throw DomainError("empty trajectory");
  const double span = std::max(1.0, std::abs(s_.back()));
  if (s < s_.front() - 1e-14 * span || s > s_.back() + 1e-14 * span) {
    throw DomainError("trajectory evaluated outside its interval");
  }
  auto it = std::upper_bound(s_.begin(), s_.end(), s);
  std::size_t i = it == s_.begin() ? 0 : static_cast<std::size_t>(it - s_.begin()) - 1;
  if (i + 1 >= s_.size()) i = s_.size() >= 2 ? s_.size() - 2 : 0;
  return i;
}

Vec Trajectory::eval_full(double s) const {
  if (s_.size() == 1) return x_.front();
  const std::size_t i = locate(s);
  if (dense_.empty()) {
    // Linear fallback without dense output.
    const double th = (s - s_[i]) / (s_[i + 1] - s_[i]);
    return (1.0 - th) * x_[i] + th * x_[i + 1];
  }
  const Dense& d = dense_[i];
  const double th = (s - s_[i]) / (s_[i + 1] - s_[i]);
  const double th1 = 1.0 - th;
  return d.r1 + th * (d.r2 + th1 * (d.r3 + th * (d.r4 + th1 * d.r5)));
}

// Dormand-Prince 5(4) tableau with Hairer's dense output coefficients.
class Dopri5 {
 public:
  Dopri5(std::function<void(const Vec&, Vec&)> f, int full, int controlled, const IntegratorConfig& cfg)
      : f_(std::move(f)), full_(full), nc_(controlled), cfg_(cfg) {
    for (auto* k : {&k1, &k2, &k3, &k4, &k5, &k6, &k7}) k->resize(full_);
  }

  Trajectory run(const Vec& x0, double s0, double s_end, int state_size) {
    cfg_.validate();
    if (!(s_end > s0)) throw ConfigError("integration interval must have s_end > s0");
    if (x0.size() != full_) throw DomainError("initial state has the wrong size");
    if (!x0.allFinite()) throw DomainError("initial state is not finite");

    Trajectory tr(state_size, full_);
    tr.s_.push_back(s0);
    tr.x_.push_back(x0);

    Vec y = x0;
    double s = s0;
    eval(y, k1);
    double h = cfg_.initial_step > 0.0 ? cfg_.initial_step : initial_step(y, s_end - s0);
    h = std::min({h, cfg_.max_step, s_end - s0});
    double err_old = 1e-4;
    bool last_rejected = false;
    Vec ynew(full_), yerr(full_);

    while (s < s_end) {
      if (tr.stats_.steps + tr.stats_.rejections >= cfg_.max_steps) {
        throw IntegrationError("integrator exceeded max_steps", s, y.head(state_size));
      }
      bool last = false;
      if (s + h >= s_end || s + 1.01 * h >= s_end) {
        h = s_end - s;
        last = true;
      }
      if (h <= 1e-14 * std::max(1.0, std::abs(s))) {
        throw IntegrationError("step size underflow", s, y.head(state_size));
      }
      step(y, h, ynew, yerr);
      tr.stats_.evaluations += 6;

      const double err = error_norm(y, ynew, yerr);
      if (!std::isfinite(err)) {
        tr.stats_.rejections++;
        h *= 0.25;
        last_rejected = true;
        continue;
      }
      if (err <= 1.0) {
        // PI step control (Gustafsson).
        double fac = 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_old, 0.4 / 5.0);
        if (err == 0.0) fac = 10.0;
        fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
        err_old = std::max(err, 1e-4);

        if (cfg_.dense) tr.dense_.push_back(dense(y, ynew, h));
        const double s_next = last ? s_end : s + h;
        if (!(s_next > s)) throw IntegrationError("step size underflow", s, y.head(state_size));
        s = s_next;
        y = ynew;
        k1 = k7;  // FSAL
        tr.s_.push_back(s);
        tr.x_.push_back(y);
        tr.stats_.steps++;
        last_rejected = false;
        h = std::min(h * fac, cfg_.max_step);
      } else {
        tr.stats_.rejections++;
        const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
        h *= fac;
        last_rejected = true;
      }
    }
    return tr;
  }

 private:
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  void eval(const Vec& y, Vec& k) {
    f_(y, k);
  }

  void step(const Vec& y, double h, Vec& ynew, Vec& yerr) {
    Vec tmp(full_);
    tmp = y + h * a21 * k1;
    eval(tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    eval(tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval(tmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    eval(ynew, k7);
    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  }

  double error_norm(const Vec& y, const Vec& ynew, const Vec& yerr) const {
    double acc = 0.0;
    for (int i = 0; i < nc_; ++i) {
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double r = yerr[i] / sc;
      acc += r * r;
    }
    return std::sqrt(acc / nc_);
  }

  Trajectory::Dense dense(const Vec& y, const Vec& ynew, double h) const {
    Trajectory::Dense d;
    d.r1 = y;
    d.r2 = ynew - y;
    d.r3 = h * k1 - d.r2;
    d.r4 = d.r2 - h * k7 - d.r3;
    d.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    return d;
  }

  double initial_step(const Vec& y, double span) {
    auto norm = [&](const Vec& v) {
      double acc = 0.0;
      for (int i = 0; i < nc_; ++i) {
        const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y[i]);
        acc += (v[i] / sc) * (v[i] / sc);
      }
      return std::sqrt(acc / nc_);
    };
    const double dnf = norm(k1);
    const double dny = norm(y);
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min({h, cfg_.max_step, span});
    Vec y1 = y + h * k1;
    Vec f1(full_);
    eval(y1, f1);
    const double der2 = norm(f1 - k1) / h;
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h, h1, cfg_.max_step, span});
  }

  std::function<void(const Vec&, Vec&)> f_;
  int full_;
  int nc_;
  IntegratorConfig cfg_;
  Vec k1, k2, k3, k4, k5, k6, k7;
};

Trajectory integrate(const OdeSystem& sys, const Vec& x0, double s_end, const IntegratorConfig& cfg, double s0) {
  Dopri5 solver(sys.f, sys.n, sys.n, cfg);
  return solver.run(x0, s0, s_end, sys.n);
}

VariationalResult integrate_with_variational(const OdeSystem& sys, const Vec& x0, double s_end,
                                             const IntegratorConfig& cfg, const std::optional<Mat>& Y0,
                                             double s0) {
  const int n = sys.n;
  const Mat Yinit = Y0 ? *Y0 : Mat::Identity(n, n);
  if (Yinit.rows() != n) throw DomainError("tangent matrix has the wrong number of rows");
  const int p = static_cast<int>(Yinit.cols());
  auto aug = [&sys, n, p](const Vec& x, Vec& dx) {
    Vec fx(n);
    sys.f(x.head(n), fx);
    dx.resize(n + n * p);
    dx.head(n) = fx;
    const Mat J = sys.jacobian(x.head(n));
    Eigen::Map<const Mat> Y(x.data() + n, n, p);
    Eigen::Map<Mat> dY(dx.data() + n, n, p);
    dY.noalias() = J * Y;
  };
  Vec xa(n + n * p);
  xa.head(n) = x0;
  Eigen::Map<Mat>(xa.data() + n, n, p) = Yinit;
  Dopri5 solver(aug, n + n * p, n, cfg);
  VariationalResult out;
  out.trajectory = solver.run(xa, s0, s_end, n);
  const Vec& last = out.trajectory.full(out.trajectory.size() - 1);
  out.M = Eigen::Map<const Mat>(last.data() + n, n, p);
  return out;
}

std::vector<Event> detect_events(const Trajectory& traj, const std::vector<EventSpec>& specs) {
  std::vector<Event> events;
  if (traj.size() < 2) return events;
  constexpr int kSub = 4;
  for (const auto& spec : specs) {
    double prev_s = traj.s(0);
    double prev_g = spec.g(prev_s, traj.state(0));
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
      const double a = traj.s(i), b = traj.s(i + 1);
      for (int j = 1; j <= kSub; ++j) {
        const double s = j == kSub ? b : a + (b - a) * j / kSub;
        const Vec x = j == kSub ? traj.state(i + 1) : traj.eval(s);
        const double g = spec.g(s, x);
        const bool rising = prev_g < 0.0 && g >= 0.0;
        const bool falling = prev_g > 0.0 && g <= 0.0;
        if ((rising && spec.direction >= 0) || (falling && spec.direction <= 0)) {
          auto fn = [&](double si) { return spec.g(si, traj.eval(si)); };
          double root = s;
          if (g != 0.0) {
            boost::uintmax_t iters = 200;
            auto tol = [](double lo, double hi) { return std::abs(hi - lo) < 1e-12; };
            const auto br = boost::math::tools::toms748_solve(fn, prev_s, s, prev_g, g, tol, iters);
            root = 0.5 * (br.first + br.second);
          }
          const Vec xr = traj.eval(root);
          if (!spec.accept || spec.accept(root, xr)) {
            const bool duplicate = !events.empty() && events.back().name == spec.name &&
                                   std::abs(events.back().s - root) < 1e-10;
            if (!duplicate) events.push_back({spec.name, root, xr});
          }
        }
        prev_s = s;
        prev_g = g;
      }
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& l, const Event& r) { return l.s < r.s; });
  return events;
}

EventSpec collision_event(Dim dim, double threshold) {
  const int zd = z_dim(dim);
  EventSpec spec;
  spec.name = "collision";
  spec.direction = +1;
  spec.g = [zd](double, const Vec& x) { return x.head(zd).dot(x.segment(zd, zd)); };
  spec.accept = [zd, threshold](double, const Vec& x) { return x.head(zd).squaredNorm() < threshold; };
  return spec;
}

EventSpec time_crossing_event(Dim dim, double t_target) {
  const int it = StateLayout(dim).t();
  EventSpec spec;
  spec.name = "time_crossing";
  spec.direction = +1;
  spec.g = [it, t_target](double, const Vec& x) { return x[it] - t_target; };
  return spec;
}

InvariantReport invariant_report(const Trajectory& traj, const RegularizedKepler& model) {
  InvariantReport r;
  if (traj.empty()) return r;
  const int itau = model.layout().tau();
  const Vec x0 = traj.state(0);
  r.K0 = model.hamiltonian(x0);
  const bool spatial = model.dim() == Dim::Spatial;
  if (spatial) {
    r.BL0 = bl_value(x0);
    r.max_BL_drift = 0.0;
  }
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec x = traj.state(i);
    r.max_K_drift = std::max(r.max_K_drift, std::abs(model.hamiltonian(x) - r.K0));
    r.max_tau_drift = std::max(r.max_tau_drift, std::abs(x[itau] - x0[itau]));
    if (spatial) r.max_BL_drift = std::max(*r.max_BL_drift, std::abs(bl_value(x) - *r.BL0));
  }
  return r;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const RegularizedKepler& model,
                          const std::vector<std::string>& header) {
  for (const auto& line : header) os << "# " << line << '\n';
  const bool spatial = model.dim() == Dim::Spatial;
  const int zd = model.layout().zd;
  os << "s";
  for (int i = 0; i < zd; ++i) os << ",z" << i;
  for (int i = 0; i < zd; ++i) os << ",w" << i;
  os << ",t,tau,K";
  if (spatial) os << ",BL";
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec x = traj.state(i);
    os << traj.s(i);
    for (int j = 0; j < x.size(); ++j) os << ',' << x[j];
    os << ',' << model.hamiltonian(x);
    if (spatial) os << ',' << bl_value(x);
    os << '\n';
  }
}

}  // namespace kepreg
