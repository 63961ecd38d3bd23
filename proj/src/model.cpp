#include "kepreg/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace kepreg {

namespace {

using ZVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;
using ZMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;
using DPhi = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 4>;

// u_a(z) = 1/2 z^T A_a z for the planar squaring map and the KS map.
const std::vector<ZMat>& quadratic_forms(Dim dim) {
  static const std::vector<ZMat> planar = [] {
    ZMat a1 = ZMat::Zero(2, 2), a2 = ZMat::Zero(2, 2);
    a1(0, 0) = 2; a1(1, 1) = -2;
    a2(0, 1) = a2(1, 0) = 2;
    return std::vector<ZMat>{a1, a2};
  }();
  static const std::vector<ZMat> spatial = [] {
    ZMat a1 = ZMat::Zero(4, 4), a2 = ZMat::Zero(4, 4), a3 = ZMat::Zero(4, 4);
    a1(0, 0) = a1(1, 1) = 2; a1(2, 2) = a1(3, 3) = -2;
    a2(1, 2) = a2(2, 1) = 2; a2(0, 3) = a2(3, 0) = -2;
    a3(1, 3) = a3(3, 1) = 2; a3(0, 2) = a3(2, 0) = 2;
    return std::vector<ZMat>{a1, a2, a3};
  }();
  return dim == Dim::Planar ? planar : spatial;
}

PVec position_of(Dim dim, const ZVec& z) {
  if (dim == Dim::Planar) {
    PVec u(2);
    u << z[0] * z[0] - z[1] * z[1], 2.0 * z[0] * z[1];
    return u;
  }
  const auto ks = ks_map({z[0], z[1], z[2], z[3]});
  PVec u(3);
  u << ks.u1, ks.u2, ks.u3;
  return u;
}

// Rows are (A_a z)^T.
DPhi position_jacobian(Dim dim, const ZVec& z) {
  const auto& forms = quadratic_forms(dim);
  DPhi d(forms.size(), z.size());
  for (std::size_t a = 0; a < forms.size(); ++a) d.row(a) = (forms[a] * z).transpose();
  return d;
}

double fd_step(const PVec& u) { return 1e-6 * std::max(1.0, u.norm()); }

}  // namespace

// ---------------------------------------------------------------- Perturbation

Perturbation::Perturbation(std::string name, double period, int dim, bool smooth_at_origin)
    : name_(std::move(name)), period_(period), dim_(dim), smooth_at_origin_(smooth_at_origin) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("perturbation period must be positive");
  if (dim != 2 && dim != 3) throw ConfigError("perturbation dimension must be 2 or 3");
}

double Perturbation::reduce(double t) const {
  double r = std::fmod(t, period_);
  if (r < 0.0) r += period_;
  return r >= period_ ? 0.0 : r;
}

PMat Perturbation::eval_hessian(double t, const PVec& u, double eps) const {
  const int n = static_cast<int>(u.size());
  const double h = fd_step(u);
  PMat H(n, n);
  for (int j = 0; j < n; ++j) {
    PVec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    H.col(j) = (eval_gradient(t, up, eps) - eval_gradient(t, um, eps)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

PVec Perturbation::eval_gradient_dt(double t, const PVec& u, double eps) const {
  const double h = 1e-6 * std::max(1.0, period_);
  return (gradient(t + h, u, eps) - gradient(t - h, u, eps)) / (2.0 * h);
}

double Perturbation::eval_dtt(double t, const PVec& u, double eps) const {
  const double h = 1e-6 * std::max(1.0, period_);
  return (time_derivative(t + h, u, eps) - time_derivative(t - h, u, eps)) / (2.0 * h);
}

Perturbation::SelfCheck Perturbation::self_check(double eps, double tol, int samples) const {
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(0.5, 2.0);
  SelfCheck report;
  report.samples = samples;
  for (int s = 0; s < samples; ++s) {
    PVec dir(dim_);
    for (int i = 0; i < dim_; ++i) dir[i] = unif(rng);
    if (dir.norm() < 1e-3) dir[0] = 1.0;
    const PVec u = dir.normalized() * radius(rng);
    const double t = period_ * 0.5 * (unif(rng) + 1.0);

    const PVec g = gradient(t, u, eps);
    PVec g_fd(dim_);
    const double h = 1e-6 * std::max(1.0, u.norm());
    for (int i = 0; i < dim_; ++i) {
      PVec up = u, um = u;
      up[i] += h;
      um[i] -= h;
      g_fd[i] = (value(t, up, eps) - value(t, um, eps)) / (2.0 * h);
    }
    const double ht = 1e-6 * std::max(1.0, period_);
    const double dt = time_derivative(t, u, eps);
    const double dt_fd = (value(t + ht, u, eps) - value(t - ht, u, eps)) / (2.0 * ht);

    report.max_gradient_error =
        std::max(report.max_gradient_error, (g - g_fd).norm() / (1.0 + g.norm()));
    report.max_time_error = std::max(report.max_time_error, std::abs(dt - dt_fd) / (1.0 + std::abs(dt)));
  }
  if (report.max_gradient_error > tol || report.max_time_error > tol) {
    std::ostringstream os;
    os << "perturbation '" << name_ << "' failed derivative self-check (gradient error "
       << report.max_gradient_error << ", time-derivative error " << report.max_time_error << ")";
    throw ConfigError(os.str());
  }
  return report;
}

// -------------------------------------------------------------- FourierForcing

FourierForcing::FourierForcing(double period, PVec mean, std::vector<PVec> cos_coeffs,
                               std::vector<PVec> sin_coeffs)
    : period_(period), mean_(std::move(mean)), cos_(std::move(cos_coeffs)), sin_(std::move(sin_coeffs)) {
  if (!(period_ > 0.0)) throw ConfigError("forcing period must be positive");
  const auto n = mean_.size();
  if (n != 2 && n != 3) throw ConfigError("forcing dimension must be 2 or 3");
  const auto h = std::max(cos_.size(), sin_.size());
  cos_.resize(h, PVec::Zero(n));
  sin_.resize(h, PVec::Zero(n));
  for (std::size_t i = 0; i < h; ++i) {
    if (cos_[i].size() != n || sin_[i].size() != n) throw ConfigError("forcing coefficient dimension mismatch");
  }
}

PVec FourierForcing::operator()(double t, int derivative) const {
  double r = std::fmod(t, period_);
  if (r < 0.0) r += period_;
  PVec out = derivative == 0 ? mean_ : PVec::Zero(mean_.size());
  const double base = 2.0 * std::numbers::pi / period_;
  for (std::size_t i = 0; i < cos_.size(); ++i) {
    const double w = base * static_cast<double>(i + 1);
    const double c = std::cos(w * r), s = std::sin(w * r);
    switch (derivative) {
      case 0: out += cos_[i] * c + sin_[i] * s; break;
      case 1: out += w * (-cos_[i] * s + sin_[i] * c); break;
      case 2: out += -w * w * (cos_[i] * c + sin_[i] * s); break;
      default: throw DomainError("FourierForcing: derivative order must be 0, 1 or 2");
    }
  }
  return out;
}

// ---------------------------------------------------------------- ForcedKepler

ForcedKepler::ForcedKepler(FourierForcing p)
    : Perturbation("forced_kepler", p.period(), p.dim(), true), p_(std::move(p)) {}

double ForcedKepler::eval(double t, const PVec& u, double) const { return p_(t).dot(u); }
PVec ForcedKepler::eval_gradient(double t, const PVec&, double) const { return p_(t); }
double ForcedKepler::eval_dt(double t, const PVec& u, double) const { return p_(t, 1).dot(u); }
PMat ForcedKepler::eval_hessian(double, const PVec& u, double) const {
  return PMat::Zero(u.size(), u.size());
}
PVec ForcedKepler::eval_gradient_dt(double t, const PVec&, double) const { return p_(t, 1); }
double ForcedKepler::eval_dtt(double t, const PVec& u, double) const { return p_(t, 2).dot(u); }

// ----------------------------------------------------------------------- Fatou

Fatou::Fatou(double k, double h, double n, double gamma)
    : Perturbation("fatou", std::numbers::pi / n, 2, false), k_(k), h_(h), n_(n), gamma_(gamma) {
  if (!(n > 0.0)) throw ConfigError("fatou: rotation rate n must be positive");
}

double Fatou::eval(double t, const PVec& u, double) const {
  const double r2 = u.squaredNorm();
  const double r = std::sqrt(r2);
  const double b = 2.0 * (n_ * t + gamma_);
  const double q = (u[0] * u[0] - u[1] * u[1]) * std::cos(b) + 2.0 * u[0] * u[1] * std::sin(b);
  return k_ / (r2 * r) + h_ * q / (r2 * r2 * r);
}

PVec Fatou::eval_gradient(double t, const PVec& u, double) const {
  const double r2 = u.squaredNorm();
  const double r = std::sqrt(r2);
  const double b = 2.0 * (n_ * t + gamma_);
  const double c = std::cos(b), s = std::sin(b);
  const double q = (u[0] * u[0] - u[1] * u[1]) * c + 2.0 * u[0] * u[1] * s;
  PVec dq(2);
  dq << 2.0 * u[0] * c + 2.0 * u[1] * s, -2.0 * u[1] * c + 2.0 * u[0] * s;
  const double r5 = r2 * r2 * r;
  return PVec(-3.0 * k_ * u / r5 + h_ * (dq / r5 - 5.0 * q * u / (r5 * r2)));
}

double Fatou::eval_dt(double t, const PVec& u, double) const {
  const double r2 = u.squaredNorm();
  const double r5 = r2 * r2 * std::sqrt(r2);
  const double b = 2.0 * (n_ * t + gamma_);
  const double dq = 2.0 * n_ * (-(u[0] * u[0] - u[1] * u[1]) * std::sin(b) + 2.0 * u[0] * u[1] * std::cos(b));
  return h_ * dq / r5;
}

ZeroPerturbation::ZeroPerturbation(double period, int dim) : Perturbation("none", period, dim, true) {}

// --------------------------------------------------------------------- catalog

std::vector<CatalogEntry> builtin_perturbations() {
  return {
      {"none", "U = 0", {}},
      {"forced_kepler",
       "U = <p(t), u> with p a truncated Fourier series: mean, cosN, sinN (comma-separated vectors)",
       {"mean", "cos1", "sin1", "cos2", "sin2", "..."}},
      {"fatou", "rotating-body potential k/r^3 + h cos(2(theta - n t - gamma))/r^3 (planar, singular)",
       {"k", "h", "n", "gamma"}},
  };
}

namespace {

PVec parse_vector(const std::string& key, const std::string& text, int dim) {
  PVec v = PVec::Zero(dim);
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= dim) throw ConfigError("perturbation key '" + key + "' has more than " + std::to_string(dim) + " components");
    try {
      std::size_t pos = 0;
      v[i] = std::stod(item, &pos);
      while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("perturbation key '" + key + "': cannot parse '" + item + "' as a number");
    }
    ++i;
  }
  if (i != dim) throw ConfigError("perturbation key '" + key + "' needs " + std::to_string(dim) + " components");
  return v;
}

double parse_scalar(const std::map<std::string, std::string>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("perturbation key '" + key + "': cannot parse '" + it->second + "'");
  }
}

}  // namespace

PerturbationPtr make_perturbation(const PerturbationSpec& spec, Dim dim, double period) {
  const int n = physical_dim(dim);
  std::shared_ptr<Perturbation> out;
  if (spec.name == "none") {
    if (!spec.params.empty()) throw ConfigError("perturbation 'none' takes no parameters");
    out = std::make_shared<ZeroPerturbation>(period, n);
  } else if (spec.name == "forced_kepler") {
    PVec mean = PVec::Zero(n);
    std::vector<PVec> cs, ss;
    for (const auto& [key, value] : spec.params) {
      if (key == "mean") {
        mean = parse_vector(key, value, n);
        continue;
      }
      const bool is_cos = key.rfind("cos", 0) == 0;
      const bool is_sin = key.rfind("sin", 0) == 0;
      int order = 0;
      if (is_cos || is_sin) {
        try {
          std::size_t pos = 0;
          order = std::stoi(key.substr(3), &pos);
          if (pos != key.size() - 3) order = 0;
        } catch (const std::exception&) {
          order = 0;
        }
      }
      if (order < 1) throw ConfigError("forced_kepler: unknown key '" + key + "'");
      auto& bank = is_cos ? cs : ss;
      if (static_cast<int>(bank.size()) < order) bank.resize(order, PVec::Zero(n));
      bank[order - 1] = parse_vector(key, value, n);
    }
    out = std::make_shared<ForcedKepler>(FourierForcing(period, mean, cs, ss));
  } else if (spec.name == "fatou") {
    for (const auto& [key, value] : spec.params) {
      if (key != "k" && key != "h" && key != "n" && key != "gamma") throw ConfigError("fatou: unknown key '" + key + "'");
    }
    if (dim != Dim::Planar) throw ConfigError("fatou perturbation is planar only");
    out = std::make_shared<Fatou>(parse_scalar(spec.params, "k", 0.0), parse_scalar(spec.params, "h", 0.0),
                                  parse_scalar(spec.params, "n", 1.0), parse_scalar(spec.params, "gamma", 0.0));
  } else {
    throw ConfigError("unknown perturbation '" + spec.name + "'");
  }
  out->self_check();
  return out;
}

// ----------------------------------------------------------- RegularizedKepler

RegularizedKepler::RegularizedKepler(Dim dim, double eps, PerturbationPtr perturbation)
    : dim_(dim), eps_(eps), U_(std::move(perturbation)), layout_(dim) {
  if (!std::isfinite(eps)) throw ConfigError("eps must be finite");
  if (U_) {
    if (!U_->smooth_at_origin()) {
      throw ConfigError("perturbation '" + U_->name() + "' is not smooth at the origin; regularized runs are unsupported");
    }
    if (U_->dim() != physical_dim(dim)) throw ConfigError("perturbation dimension does not match the problem");
  }
}

double RegularizedKepler::U_value(double t, const PVec& u) const {
  return U_ ? U_->value(t, u, eps_) : 0.0;
}

PVec RegularizedKepler::position(const Vec& x) const {
  return position_of(dim_, x.head(layout_.zd));
}

double RegularizedKepler::potential(const Vec& x) const {
  if (!U_) return 0.0;
  const ZVec z = x.head(layout_.zd);
  return z.squaredNorm() * U_->value(x[layout_.t()], position_of(dim_, z), eps_);
}

Vec RegularizedKepler::potential_gradient(const Vec& x) const {
  const int zd = layout_.zd;
  if (!U_) return Vec::Zero(zd);
  const ZVec z = x.head(zd);
  const double t = x[layout_.t()];
  const PVec u = position_of(dim_, z);
  const PVec g = U_->gradient(t, u, eps_);
  return 2.0 * U_->value(t, u, eps_) * z + z.squaredNorm() * position_jacobian(dim_, z).transpose() * g;
}

double RegularizedKepler::hamiltonian(const Vec& x) const {
  const int zd = layout_.zd;
  const double r2 = x.head(zd).squaredNorm();
  return x[layout_.tau()] * r2 + x.segment(zd, zd).squaredNorm() / 8.0 - 1.0 - eps_ * potential(x);
}

void RegularizedKepler::field(const Vec& x, Vec& dx) const {
  const int zd = layout_.zd;
  dx.resize(layout_.size());
  const ZVec z = x.head(zd);
  const double t = x[layout_.t()];
  const double tau = x[layout_.tau()];
  const double r2 = z.squaredNorm();
  dx.head(zd) = x.segment(zd, zd) / 4.0;
  dx.segment(zd, zd) = -2.0 * tau * z;
  dx[layout_.t()] = r2;
  dx[layout_.tau()] = 0.0;
  if (U_ && eps_ != 0.0) {
    const PVec u = position_of(dim_, z);
    const double Uv = U_->value(t, u, eps_);
    const PVec g = U_->gradient(t, u, eps_);
    const double Ut = U_->time_derivative(t, u, eps_);
    dx.segment(zd, zd) += eps_ * (2.0 * Uv * z + r2 * position_jacobian(dim_, z).transpose() * g);
    dx[layout_.tau()] = eps_ * r2 * Ut;
  }
}

Vec RegularizedKepler::field(const Vec& x) const {
  Vec dx;
  field(x, dx);
  return dx;
}

Mat RegularizedKepler::jacobian(const Vec& x) const {
  const int zd = layout_.zd;
  const int n = layout_.size();
  const int it = layout_.t(), itau = layout_.tau();
  Mat J = Mat::Zero(n, n);
  const ZVec z = x.head(zd);
  const double t = x[it];
  const double tau = x[itau];
  const double r2 = z.squaredNorm();

  J.block(0, zd, zd, zd).diagonal().setConstant(0.25);
  J.block(zd, 0, zd, zd).diagonal().setConstant(-2.0 * tau);
  J.block(zd, itau, zd, 1) = -2.0 * z;
  J.block(it, 0, 1, zd) = 2.0 * z.transpose();

  if (U_ && eps_ != 0.0) {
    const PVec u = position_of(dim_, z);
    const DPhi D = position_jacobian(dim_, z);
    const double Uv = U_->value(t, u, eps_);
    const PVec g = U_->gradient(t, u, eps_);
    const double Ut = U_->time_derivative(t, u, eps_);
    const PMat H = U_->hessian(t, u, eps_);
    const PVec gt = U_->gradient_time_derivative(t, u, eps_);
    const double Utt = U_->time_second_derivative(t, u, eps_);

    const ZVec gradG = D.transpose() * g;
    ZMat hessG = D.transpose() * H * D;
    const auto& forms = quadratic_forms(dim_);
    for (std::size_t a = 0; a < forms.size(); ++a) hessG += g[a] * forms[a];
    ZMat hessP = 2.0 * Uv * ZMat::Identity(zd, zd) + 2.0 * z * gradG.transpose() +
                 2.0 * gradG * z.transpose() + r2 * hessG;
    const ZVec dtGradP = 2.0 * Ut * z + r2 * D.transpose() * gt;

    J.block(zd, 0, zd, zd) += eps_ * hessP;
    J.block(zd, it, zd, 1) = eps_ * dtGradP;
    J.block(itau, 0, 1, zd) = eps_ * dtGradP.transpose();
    J(itau, it) = eps_ * r2 * Utt;
  }
  return J;
}

Vec RegularizedKepler::hamiltonian_gradient(const Vec& x) const {
  const int zd = layout_.zd;
  Vec g(layout_.size());
  const ZVec z = x.head(zd);
  g.head(zd) = 2.0 * x[layout_.tau()] * z - eps_ * potential_gradient(x);
  g.segment(zd, zd) = x.segment(zd, zd) / 4.0;
  double Pt = 0.0;
  if (U_ && eps_ != 0.0) Pt = z.squaredNorm() * U_->time_derivative(x[layout_.t()], position_of(dim_, z), eps_);
  g[layout_.t()] = -eps_ * Pt;
  g[layout_.tau()] = z.squaredNorm();
  return g;
}

double RegularizedKepler::physical_energy(const Vec& x) const {
  return -x[layout_.tau()] + eps_ * U_value(x[layout_.t()], position(x));
}

Vec variational_field_unperturbed(Dim dim, const Vec& x, const Vec& y) {
  const StateLayout L(dim);
  const int zd = L.zd;
  Vec dy(L.size());
  dy.head(zd) = y.segment(zd, zd) / 4.0;
  dy.segment(zd, zd) = -2.0 * x[L.tau()] * y.head(zd) - 2.0 * x.head(zd) * y[L.tau()];
  dy[L.t()] = 2.0 * x.head(zd).dot(y.head(zd));
  dy[L.tau()] = 0.0;
  return dy;
}

double bl_value(const RegState3& x) { return (x.z.conj() * Quaternion::i() * x.w).re(); }

double bl_value(const Vec& x) {
  if (x.size() != state_size(Dim::Spatial)) throw DomainError("bl_value needs a spatial state");
  return -x[0] * x[5] + x[1] * x[4] - x[2] * x[7] + x[3] * x[6];
}

Vec bl_symplectic_gradient(const Vec& x) {
  if (x.size() != state_size(Dim::Spatial)) throw DomainError("bl_symplectic_gradient needs a spatial state");
  const Quaternion iz = Quaternion::i() * z_quat(x);
  const Quaternion iw = Quaternion::i() * w_quat(x);
  Vec v = Vec::Zero(10);
  v << iz.z0, iz.z1, iz.z2, iz.z3, iw.z0, iw.z1, iw.z2, iw.z3, 0.0, 0.0;
  return v;
}

double keps_hamiltonian_2(const RegState2& x, double eps, const Perturbation* U) {
  double P = 0.0;
  if (U != nullptr) {
    const Complex u = lc_position(x.z);
    PVec uv(2);
    uv << u.x, u.y;
    P = x.z.norm2() * U->value(x.t, uv, eps);
  }
  return x.tau * x.z.norm2() + x.w.norm2() / 8.0 - 1.0 - eps * P;
}

double keps_hamiltonian_3(const RegState3& x, double eps, const Perturbation* U) {
  double P = 0.0;
  if (U != nullptr) {
    const auto u = ks_map(x.z);
    PVec uv(3);
    uv << u.u1, u.u2, u.u3;
    P = x.z.norm2() * U->value(x.t, uv, eps);
  }
  return x.tau * x.z.norm2() + x.w.norm2() / 8.0 - 1.0 - eps * P;
}

// ---------------------------------------------------------------- typed states

Vec RegState2::to_vector() const {
  Vec v(6);
  v << z.x, z.y, w.x, w.y, t, tau;
  return v;
}

RegState2 RegState2::from_vector(const Vec& x) {
  if (x.size() != 6) throw DomainError("RegState2 needs 6 components");
  return {{x[0], x[1]}, {x[2], x[3]}, x[4], x[5]};
}

Vec RegState3::to_vector() const {
  Vec v(10);
  v << z.z0, z.z1, z.z2, z.z3, w.z0, w.z1, w.z2, w.z3, t, tau;
  return v;
}

RegState3 RegState3::from_vector(const Vec& x) {
  if (x.size() != 10) throw DomainError("RegState3 needs 10 components");
  return {z_quat(x), w_quat(x), x[8], x[9]};
}

// -------------------------------------------------------------- PhysicalKepler

PhysicalKepler::PhysicalKepler(int dim, double eps, PerturbationPtr perturbation, double kepler_scale)
    : dim_(dim), eps_(eps), U_(std::move(perturbation)), kappa_(kepler_scale) {
  if (dim != 2 && dim != 3) throw ConfigError("physical dimension must be 2 or 3");
  if (U_ && U_->dim() != dim) throw ConfigError("perturbation dimension does not match the problem");
}

void PhysicalKepler::field(const Vec& x, Vec& dx) const {
  const int n = dim_;
  dx.resize(size());
  const PVec u = x.head(n);
  const double r2 = u.squaredNorm();
  if (r2 == 0.0) throw DomainError("physical field is singular at u = 0");
  const double r3 = r2 * std::sqrt(r2);
  dx.head(n) = x.segment(n, n);
  dx.segment(n, n) = -kappa_ * u / r3;
  if (U_ && eps_ != 0.0) dx.segment(n, n) += eps_ * U_->gradient(x[2 * n], u, eps_);
  dx[2 * n] = 1.0;
}

Vec PhysicalKepler::field(const Vec& x) const {
  Vec dx;
  field(x, dx);
  return dx;
}

Mat PhysicalKepler::jacobian(const Vec& x) const {
  const int n = dim_;
  Mat J = Mat::Zero(size(), size());
  const PVec u = x.head(n);
  const double r2 = u.squaredNorm();
  if (r2 == 0.0) throw DomainError("physical field is singular at u = 0");
  const double r = std::sqrt(r2);
  J.block(0, n, n, n).setIdentity();
  J.block(n, 0, n, n) = kappa_ * (3.0 * u * u.transpose() / (r2 * r2 * r) - PMat::Identity(n, n) / (r2 * r));
  if (U_ && eps_ != 0.0) {
    J.block(n, 0, n, n) += eps_ * U_->hessian(x[2 * n], u, eps_);
    J.block(n, 2 * n, n, 1) = eps_ * U_->gradient_time_derivative(x[2 * n], u, eps_);
  }
  return J;
}

double PhysicalKepler::energy(const Vec& x) const {
  return 0.5 * x.segment(dim_, dim_).squaredNorm() - kappa_ / x.head(dim_).norm();
}

PhysState physical_field(const PhysState& s, double eps, const Perturbation* U) {
  const double r2 = s.u.squaredNorm();
  if (r2 == 0.0) throw DomainError("physical field is singular at u = 0");
  PhysState out;
  out.u = s.v;
  out.v = -s.u / (r2 * std::sqrt(r2));
  if (U != nullptr && eps != 0.0) out.v += eps * U->gradient(s.t, s.u, eps);
  out.t = 1.0;
  return out;
}

}  // namespace kepreg
