#pragma once

// Perturbation interface, built-in perturbations and the regularized
// (Levi-Civita / Kustaanheimo-Stiefel) Hamiltonian systems.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kepreg/types.hpp"

namespace kepreg {

/// A T-periodic force function U(t, u, eps) with analytic first derivatives.
///
/// Public evaluators reduce t modulo the period before calling the virtual
/// implementation, so periodicity holds by construction. Second derivatives
/// default to central differences of the analytic first derivatives.
class Perturbation {
 public:
  Perturbation(std::string name, double period, int dim, bool smooth_at_origin);
  virtual ~Perturbation() = default;

  const std::string& name() const { return name_; }
  double period() const { return period_; }
  int dim() const { return dim_; }
  bool smooth_at_origin() const { return smooth_at_origin_; }

  /// t reduced into [0, T).
  double reduce(double t) const;

  double value(double t, const PVec& u, double eps) const { return eval(reduce(t), u, eps); }
  PVec gradient(double t, const PVec& u, double eps) const { return eval_gradient(reduce(t), u, eps); }
  double time_derivative(double t, const PVec& u, double eps) const { return eval_dt(reduce(t), u, eps); }

  PMat hessian(double t, const PVec& u, double eps) const { return eval_hessian(reduce(t), u, eps); }
  /// d/dt of grad_u U.
  PVec gradient_time_derivative(double t, const PVec& u, double eps) const {
    return eval_gradient_dt(reduce(t), u, eps);
  }
  double time_second_derivative(double t, const PVec& u, double eps) const {
    return eval_dtt(reduce(t), u, eps);
  }

  struct SelfCheck {
    double max_gradient_error = 0.0;  // relative, against central differences
    double max_time_error = 0.0;
    int samples = 0;
  };
  /// Compares analytic derivatives against central differences of value() at
  /// deterministic sample points with |u| in [0.5, 2]. Throws ConfigError when
  /// either relative error exceeds `tol`.
  SelfCheck self_check(double eps = 1.0, double tol = 1e-5, int samples = 32) const;

 protected:
  virtual double eval(double t, const PVec& u, double eps) const = 0;
  virtual PVec eval_gradient(double t, const PVec& u, double eps) const = 0;
  virtual double eval_dt(double t, const PVec& u, double eps) const = 0;
  virtual PMat eval_hessian(double t, const PVec& u, double eps) const;
  virtual PVec eval_gradient_dt(double t, const PVec& u, double eps) const;
  virtual double eval_dtt(double t, const PVec& u, double eps) const;

 private:
  std::string name_;
  double period_;
  int dim_;
  bool smooth_at_origin_;
};

using PerturbationPtr = std::shared_ptr<const Perturbation>;

/// Vector-valued truncated Fourier series
///   p(t) = mean + sum_n cos_n cos(2 pi n t / T) + sin_n sin(2 pi n t / T).
class FourierForcing {
 public:
  FourierForcing(double period, PVec mean, std::vector<PVec> cos_coeffs = {},
                 std::vector<PVec> sin_coeffs = {});

  double period() const { return period_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  int harmonics() const { return static_cast<int>(cos_.size()); }
  const PVec& mean() const { return mean_; }
  const std::vector<PVec>& cos_coeffs() const { return cos_; }
  const std::vector<PVec>& sin_coeffs() const { return sin_; }

  /// Derivative order 0, 1 or 2 of p at t.
  PVec operator()(double t, int derivative = 0) const;

 private:
  double period_;
  PVec mean_;
  std::vector<PVec> cos_;
  std::vector<PVec> sin_;
};

/// U(t, u) = <p(t), u>.
class ForcedKepler final : public Perturbation {
 public:
  explicit ForcedKepler(FourierForcing p);
  const FourierForcing& forcing() const { return p_; }

 protected:
  double eval(double t, const PVec& u, double eps) const override;
  PVec eval_gradient(double t, const PVec& u, double eps) const override;
  double eval_dt(double t, const PVec& u, double eps) const override;
  PMat eval_hessian(double t, const PVec& u, double eps) const override;
  PVec eval_gradient_dt(double t, const PVec& u, double eps) const override;
  double eval_dtt(double t, const PVec& u, double eps) const override;

 private:
  FourierForcing p_;
};

/// Planar potential of a rotating oblate body,
///   U = k/|u|^3 + h/|u|^5 [(u1^2 - u2^2) cos 2b + 2 u1 u2 sin 2b],  b = n t + gamma.
/// Singular at the origin, so unusable for regularized runs.
class Fatou final : public Perturbation {
 public:
  Fatou(double k, double h, double n, double gamma);

 protected:
  double eval(double t, const PVec& u, double eps) const override;
  PVec eval_gradient(double t, const PVec& u, double eps) const override;
  double eval_dt(double t, const PVec& u, double eps) const override;

 private:
  double k_, h_, n_, gamma_;
};

/// U = 0; useful for unperturbed runs that still need a period.
class ZeroPerturbation final : public Perturbation {
 public:
  ZeroPerturbation(double period, int dim);

 protected:
  double eval(double, const PVec&, double) const override { return 0.0; }
  PVec eval_gradient(double, const PVec& u, double) const override { return PVec::Zero(u.size()); }
  double eval_dt(double, const PVec&, double) const override { return 0.0; }
  PMat eval_hessian(double, const PVec& u, double) const override {
    return PMat::Zero(u.size(), u.size());
  }
  PVec eval_gradient_dt(double, const PVec& u, double) const override { return PVec::Zero(u.size()); }
  double eval_dtt(double, const PVec&, double) const override { return 0.0; }
};

/// Perturbation selected by catalog name plus string parameters.
struct PerturbationSpec {
  std::string name;
  std::map<std::string, std::string> params;
};

struct CatalogEntry {
  std::string name;
  std::string description;
  std::vector<std::string> keys;
};
std::vector<CatalogEntry> builtin_perturbations();

/// Builds a catalog perturbation. Unknown names or keys raise ConfigError;
/// the result has passed self_check().
PerturbationPtr make_perturbation(const PerturbationSpec& spec, Dim dim, double period);

/// Regularized extended Hamiltonian K_eps and its vector field on the packed
/// state [z | w | t | tau]:
///   K = tau |z|^2 + |w|^2 / 8 - 1 - eps P,   P = |z|^2 U(t, u(z), eps),
/// with u(z) = z^2 (planar) or conj(z) i z (spatial). The same -eps P sign is
/// used in both dimensions.
class RegularizedKepler {
 public:
  /// `perturbation` may be null, meaning U = 0. Throws ConfigError for a
  /// perturbation that is not smooth at the origin or has the wrong dimension.
  RegularizedKepler(Dim dim, double eps, PerturbationPtr perturbation);

  Dim dim() const { return dim_; }
  double eps() const { return eps_; }
  const PerturbationPtr& perturbation() const { return U_; }
  int size() const { return layout_.size(); }
  const StateLayout& layout() const { return layout_; }

  /// Physical position u(z).
  PVec position(const Vec& x) const;
  /// P(t, z, eps).
  double potential(const Vec& x) const;
  /// Gradient of P with respect to the real components of z.
  Vec potential_gradient(const Vec& x) const;

  double hamiltonian(const Vec& x) const;
  void field(const Vec& x, Vec& dx) const;
  Vec field(const Vec& x) const;
  /// Exact Jacobian DF(x); second derivatives of U come from the perturbation.
  Mat jacobian(const Vec& x) const;
  /// DF(x) Y.
  Vec variational(const Vec& x, const Vec& y) const { return jacobian(x) * y; }
  /// Gradient of K (used for tangent-space bookkeeping).
  Vec hamiltonian_gradient(const Vec& x) const;

  /// Physical energy E = 1/2 |v|^2 - 1/|u| = -tau + eps U(t, u, eps) on K = 0.
  double physical_energy(const Vec& x) const;

 private:
  double U_value(double t, const PVec& u) const;

  Dim dim_;
  double eps_;
  PerturbationPtr U_;
  StateLayout layout_;
};

/// Explicit linearization at eps = 0 along x(s) on a manifold with tau = tau_k:
/// (Y2/4, -2 tau_k Y1 - 2 z Y4, 2 <z, Y1>, 0).
Vec variational_field_unperturbed(Dim dim, const Vec& x, const Vec& y);

/// BL = Re(conj(z) i w) for a spatial state.
double bl_value(const RegState3& x);
double bl_value(const Vec& x);
/// J grad BL = (i z, i w, 0, 0).
Vec bl_symplectic_gradient(const Vec& x);

double keps_hamiltonian_2(const RegState2& x, double eps, const Perturbation* U);
double keps_hamiltonian_3(const RegState3& x, double eps, const Perturbation* U);

/// Physical equation u'' = -kappa u / |u|^3 + eps grad U on the state [u | v | t].
class PhysicalKepler {
 public:
  PhysicalKepler(int dim, double eps, PerturbationPtr perturbation, double kepler_scale = 1.0);

  int dim() const { return dim_; }
  int size() const { return 2 * dim_ + 1; }
  double eps() const { return eps_; }
  double kepler_scale() const { return kappa_; }
  const PerturbationPtr& perturbation() const { return U_; }

  /// Throws DomainError at u = 0.
  void field(const Vec& x, Vec& dx) const;
  Vec field(const Vec& x) const;
  Mat jacobian(const Vec& x) const;
  /// 1/2 |v|^2 - kappa/|u|.
  double energy(const Vec& x) const;

 private:
  int dim_;
  double eps_;
  PerturbationPtr U_;
  double kappa_;
};

/// Typed wrapper around PhysicalKepler::field for a PhysState.
PhysState physical_field(const PhysState& s, double eps, const Perturbation* U);

}  // namespace kepreg
