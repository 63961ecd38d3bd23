#include "kepreg/manifolds.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace kepreg {

void ManifoldSpec::validate() const {
  if (k < 1) throw ConfigError("manifold index k must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("period T must be positive");
}

ManifoldConstants constants(const ManifoldSpec& spec) {
  spec.validate();
  ManifoldConstants c;
  c.tau = std::pow(std::numbers::sqrt2 * spec.k * std::numbers::pi / spec.T, 2.0 / 3.0);
  c.omega = std::sqrt(c.tau / 2.0);
  c.sigma = 2.0 * std::numbers::pi / c.omega;
  c.S = spec.k * c.sigma;
  return c;
}

Quaternion embed_in_plane(const Complex& c, const Quaternion& v1, const Quaternion& v2) {
  return v1 * c.x + v2 * c.y;
}

Vec embed_planar_state(const Vec& x2, const Quaternion& v1, const Quaternion& v2) {
  if (x2.size() != 6) throw DomainError("embed_planar_state needs a planar state");
  const Quaternion z = embed_in_plane(z_complex(x2), v1, v2);
  const Quaternion w = embed_in_plane(w_complex(x2), v1, v2);
  return RegState3{z, w, x2[4], x2[5]}.to_vector();
}

Vec seed_state(const ManifoldSpec& spec, const SeedParams& params) {
  const auto c = constants(spec);
  double alpha = params.alpha;
  double phase_w = params.phase_w;
  switch (params.preset) {
    case SeedPreset::Circular:
      alpha = std::numbers::pi / 4.0;
      phase_w = params.prograde ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
      break;
    case SeedPreset::Rectilinear:
      alpha = 0.0;
      break;
    case SeedPreset::General:
      break;
  }
  if (!std::isfinite(alpha) || !std::isfinite(phase_w) || !std::isfinite(params.phase_z)) {
    throw ConfigError("seed angles must be finite");
  }
  const Complex z0 = Complex::polar(std::cos(alpha) / std::sqrt(c.tau), params.phase_z);
  const Complex w0 = Complex::polar(std::sqrt(8.0) * std::sin(alpha), params.phase_z + phase_w);
  Vec x(6);
  x << z0.x, z0.y, w0.x, w0.y, params.t0, c.tau;
  if (spec.dim == Dim::Planar) return x;

  const Quaternion& v1 = params.plane_v1;
  const Quaternion& v2 = params.plane_v2;
  if (std::abs(v1.norm2() - 1.0) > 1e-12 || std::abs(v2.norm2() - 1.0) > 1e-12 || std::abs(dot(v1, v2)) > 1e-12) {
    throw ConfigError("Levi-Civita plane vectors must be orthonormal");
  }
  if (!lc_plane_check(v1, v2)) throw ConfigError("seed plane is not a Levi-Civita plane");
  return embed_planar_state(x, v1, v2);
}

SeedParams random_seed_params(std::mt19937_64& rng, Dim dim) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  SeedParams p;
  const double gz = std::hypot(gauss(rng), gauss(rng));
  const double gw = std::hypot(gauss(rng), gauss(rng));
  p.alpha = std::atan2(gw, gz);
  p.phase_z = angle(rng);
  p.phase_w = angle(rng);
  if (dim == Dim::Spatial) {
    Eigen::Vector4d a, b;
    for (int i = 0; i < 4; ++i) a[i] = gauss(rng);
    for (int i = 0; i < 4; ++i) b[i] = gauss(rng);
    a.normalize();
    const Quaternion v1{a[0], a[1], a[2], a[3]};
    const Quaternion iv1 = Quaternion::i() * v1;
    const Eigen::Vector4d c{iv1.z0, iv1.z1, iv1.z2, iv1.z3};
    b -= a.dot(b) * a;
    b -= c.dot(b) * c;
    b.normalize();
    p.plane_v1 = v1;
    p.plane_v2 = {b[0], b[1], b[2], b[3]};
  }
  return p;
}

void require_on_manifold(const ManifoldSpec& spec, const Vec& x, double tol) {
  const auto c = constants(spec);
  if (x.size() != state_size(spec.dim)) throw DomainError("state size does not match the manifold dimension");
  const RegularizedKepler model(spec.dim, 0.0, nullptr);
  const double K = model.hamiltonian(x);
  const double tau = x[model.layout().tau()];
  if (std::abs(K) > tol || std::abs(tau - c.tau) > tol) {
    throw InvariantError("state is not on Lambda_" + std::to_string(spec.k) + " (K0 = " + std::to_string(K) +
                         ", tau - tau_k = " + std::to_string(tau - c.tau) + ")");
  }
}

namespace {

struct ClosedForm {
  Vec a, b;
  double omega, tau, aa, bb, ab;
};

ClosedForm closed_form_data(const ManifoldSpec& spec, const Vec& x0) {
  require_on_manifold(spec, x0);
  const auto c = constants(spec);
  const int zd = z_dim(spec.dim);
  ClosedForm f;
  f.a = x0.head(zd);
  f.b = x0.segment(zd, zd) / (4.0 * c.omega);
  f.omega = c.omega;
  f.tau = c.tau;
  f.aa = f.a.squaredNorm();
  f.bb = f.b.squaredNorm();
  f.ab = f.a.dot(f.b);
  return f;
}

// Integral of |a cos(ws) + b sin(ws)|^2 over [0, s].
double time_integral(const ClosedForm& f, double s) {
  const double w = f.omega;
  return 0.5 * (f.aa + f.bb) * s + (f.aa - f.bb) / (4.0 * w) * std::sin(2.0 * w * s) +
         f.ab / (2.0 * w) * (1.0 - std::cos(2.0 * w * s));
}

}  // namespace

Vec closed_form_flow(const ManifoldSpec& spec, const Vec& x0, double s) {
  const ClosedForm f = closed_form_data(spec, x0);
  const int zd = z_dim(spec.dim);
  const StateLayout L(spec.dim);
  const double cs = std::cos(f.omega * s), sn = std::sin(f.omega * s);
  Vec x(L.size());
  x.head(zd) = f.a * cs + f.b * sn;
  x.segment(zd, zd) = 4.0 * f.omega * (-f.a * sn + f.b * cs);
  x[L.t()] = x0[L.t()] + time_integral(f, s);
  x[L.tau()] = x0[L.tau()];
  return x;
}

Vec special_tangent(const ManifoldSpec& spec, const Vec& x0) {
  const auto c = constants(spec);
  const StateLayout L(spec.dim);
  Vec y = Vec::Zero(L.size());
  y.head(L.zd) = x0.head(L.zd);
  y[L.tau()] = -2.0 * c.tau;
  return y;
}

Vec closed_form_variation(const ManifoldSpec& spec, const Vec& x0, double s) {
  const ClosedForm f = closed_form_data(spec, x0);
  const int zd = z_dim(spec.dim);
  const StateLayout L(spec.dim);
  const double w = f.omega, tau = f.tau;
  const double cs = std::cos(w * s), sn = std::sin(w * s);
  const Vec z = f.a * cs + f.b * sn;
  const Vec dz = w * (-f.a * sn + f.b * cs);
  const Vec secular = f.a * sn - f.b * cs;

  const Vec Y1 = z + (tau * s / (2.0 * w)) * secular;
  const Vec dY1 = dz + (tau / (2.0 * w)) * secular + (tau * s / 2.0) * z;

  const double c2 = std::cos(2.0 * w * s), s2 = std::sin(2.0 * w * s);
  const double Js = -s * c2 / (2.0 * w) + s2 / (4.0 * w * w);
  const double Jc = s * s2 / (2.0 * w) + (c2 - 1.0) / (4.0 * w * w);
  const double Y3 = 2.0 * (time_integral(f, s) + (tau / (2.0 * w)) * (0.5 * (f.aa - f.bb) * Js - f.ab * Jc));

  Vec y(L.size());
  y.head(zd) = Y1;
  y.segment(zd, zd) = 4.0 * dY1;
  y[L.t()] = Y3;
  y[L.tau()] = -2.0 * tau;
  return y;
}

double principal_angle(const Vec& v, const Mat& B) {
  const double nv = v.norm();
  if (nv == 0.0) throw DomainError("principal_angle: zero vector");
  Eigen::HouseholderQR<Mat> qr(B);
  const Mat Q = qr.householderQ() * Mat::Identity(B.rows(), B.cols());
  const Vec proj = Q * (Q.transpose() * v);
  return std::atan2((v - proj).norm(), proj.norm());
}

DegeneracyReport degeneracy_index(const Mat& M, const Vec& x0, const RegularizedKepler& model) {
  const int n = model.size();
  if (M.rows() != n || M.cols() != n) throw DomainError("monodromy has the wrong size");
  const Vec g = model.hamiltonian_gradient(x0);
  const Vec f = model.field(x0);
  if (f.norm() < 1e-14 || g.norm() < 1e-14) throw DomainError("degeneracy_index: field direction vanishes");

  Mat B(n, n);
  B.col(0) = g.normalized();
  Vec v2 = f - B.col(0).dot(f) * B.col(0);
  B.col(1) = v2.normalized();
  Eigen::HouseholderQR<Mat> qr(B.leftCols(2));
  const Mat Q = qr.householderQ();
  B.rightCols(n - 2) = Q.rightCols(n - 2);

  const Mat C = B.transpose() * M * B;
  const int m = n - 2;
  const Mat Gamma = C.bottomRightCorner(m, m);
  const Mat A = Mat::Identity(m, m) - Gamma;
  Eigen::JacobiSVD<Mat> svd(A);
  DegeneracyReport r;
  r.gamma_size = m;
  r.singular_values = svd.singularValues();
  const double threshold = 1e-8 * std::max(r.singular_values.size() ? r.singular_values[0] : 0.0, 1e-300);
  r.rank = 0;
  for (int i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values[i] > threshold) ++r.rank;
  }
  r.dim_E = 1 + (m - r.rank);
  r.multipliers = M.eigenvalues();
  r.det_M = M.determinant();
  return r;
}

CertificateReport nondegeneracy_certificate(const ManifoldSpec& spec, const Vec& x0, const IntegratorConfig& cfg,
                                            double min_angle) {
  require_on_manifold(spec, x0);
  if (spec.dim == Dim::Spatial && std::abs(bl_value(x0)) > 1e-10) {
    throw InvariantError("spatial certificate needs BL(x0) = 0");
  }
  const auto c = constants(spec);
  const RegularizedKepler model(spec.dim, 0.0, nullptr);
  const auto var = integrate_with_variational(make_system(model), x0, c.S, cfg);

  CertificateReport r;
  r.spec = spec;
  r.x0 = x0;
  const Vec ystar = special_tangent(spec, x0);
  r.defect_numeric = ystar - var.M * ystar;
  r.defect_closed_form = ystar - closed_form_variation(spec, x0, c.S);
  r.closed_form_mismatch = (var.M * ystar - closed_form_variation(spec, x0, c.S)).norm() /
                           closed_form_variation(spec, x0, c.S).norm();
  r.field_direction = -model.field(x0);
  Mat forbidden;
  if (spec.dim == Dim::Spatial) {
    r.bl_direction = bl_symplectic_gradient(x0);
    forbidden.resize(model.size(), 2);
    forbidden.col(0) = r.field_direction;
    forbidden.col(1) = r.bl_direction;
  } else {
    forbidden = r.field_direction;
  }
  r.principal_angle = principal_angle(r.defect_numeric, forbidden);
  r.certified = r.principal_angle > min_angle;
  r.degeneracy = degeneracy_index(var.M, x0, model);
  return r;
}

}  // namespace kepreg
