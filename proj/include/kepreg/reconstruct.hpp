#pragma once

// Physical-time reconstruction of regularized closed orbits: generalized
// solutions with collision limits, the planar Sundman lift, and collision
// removal by a local bump deformation.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "kepreg/shooting.hpp"

namespace kepreg {

/// Monotone map t(s) read from a regularized trajectory and its inverse.
class PhysicalTimeMap {
 public:
  PhysicalTimeMap() = default;
  /// Throws InvariantError unless t is strictly increasing across nodes.
  PhysicalTimeMap(Trajectory traj, Dim dim);

  double t(double s) const;
  /// Inverse by bracketing on the nodes and toms748 on the dense output.
  double s(double t) const;
  double s_begin() const { return traj_.s_begin(); }
  double s_end() const { return traj_.s_end(); }
  double t_begin() const { return t_nodes_.front(); }
  double t_end() const { return t_nodes_.back(); }
  const Trajectory& trajectory() const { return traj_; }

 private:
  Trajectory traj_;
  int it_ = 0;
  std::vector<double> t_nodes_;
};

/// Physical position u(z): z^2 or conj(z) i z.
PVec position_from_state(Dim dim, const Vec& x);
/// du/dt = z w / (2|z|^2) (2D) or conj(z) i w / (2|z|^2) (3D); throws at z = 0.
PVec velocity_from_state(Dim dim, const Vec& x);
/// d^2u/dt^2 by the chain rule with z'' taken from the regularized field.
PVec acceleration_from_state(const RegularizedKepler& model, const Vec& x);

struct CollisionEvent {
  double s0 = 0.0;
  double t0 = 0.0;
  PVec direction;  // lim u/|u|
  double energy = 0.0;  // lim 1/2|du/dt|^2 - 1/|u|
  double speed_sq = 0.0;  // |z'(s0)|^2, equal to 1/2 on K = 0
};

/// Limits at a zero of z from the regularized state there. Throws
/// InvariantError when |z'|^2 deviates from 1/2 by more than `tol`.
CollisionEvent collision_limits(const RegularizedKepler& model, const Vec& x_collision, double s0,
                                double tol = 1e-6);

struct PhysicalSample {
  double t = 0.0;
  PVec u;
  PVec v;  // empty inside collision-excision windows
  double E = 0.0;
  bool in_window = false;
};

struct ReconstructOptions {
  int samples = 400;
  double window = 1e-6;  // excision half-width in t, relative to T
  IntegratorConfig integrator;
};

/// Generalized solution over one period eta T of a closed regularized orbit.
class GeneralizedSolution {
 public:
  GeneralizedSolution(const PeriodicOrbit& orbit, PerturbationPtr U, const ReconstructOptions& opt = {});

  Dim dim() const { return model_.dim(); }
  double period() const { return period_; }
  double t_begin() const { return map_.t_begin(); }
  double eps() const { return model_.eps(); }
  const RegularizedKepler& model() const { return model_; }
  const PhysicalTimeMap& time_map() const { return map_; }
  const std::vector<CollisionEvent>& collisions() const { return collisions_; }
  const std::vector<PhysicalSample>& samples() const { return samples_; }
  const PeriodicOrbit& source() const { return orbit_; }

  /// Regularized state at physical time t, with t taken modulo the period.
  Vec state_at(double t) const;
  PVec position(double t) const { return position_from_state(dim(), state_at(t)); }
  PVec velocity(double t) const { return velocity_from_state(dim(), state_at(t)); }
  double energy(double t) const;
  /// |u'' + u/|u|^3 - eps grad U(t, u)| at time t.
  double ode_residual(double t) const;
  /// Largest |Re(conj(z) i z)| over the samples (3D; 0 in 2D).
  double max_real_part() const { return max_real_part_; }

 private:
  double wrap(double t) const;

  PeriodicOrbit orbit_;
  RegularizedKepler model_;
  PhysicalTimeMap map_;
  double period_ = 0.0;
  std::vector<CollisionEvent> collisions_;
  std::vector<PhysicalSample> samples_;
  double max_real_part_ = 0.0;
};

/// Limit L of f(h) = L + a h^p1 + b h^p2 from samples at h, h/2, h/4.
double richardson(const std::array<double, 3>& f, double p1, double p2);

struct LimitCheck {
  PVec direction_minus, direction_plus;  // extrapolated u/|u|
  double energy_minus = 0.0, energy_plus = 0.0;
  PVec velocity_dir_minus, velocity_dir_plus;
  double direction_error = 0.0;   // vs the formula, both sides
  double energy_error = 0.0;
  double reflection_error = 0.0;  // |lim+ v/|v| + lim- v/|v||
};

/// Two-sided Richardson extrapolation at |t - t0| = h, h/2, h/4
/// (h = 1e-3 T by default).
LimitCheck check_collision_limits(const GeneralizedSolution& g, const CollisionEvent& ev, double h = 0.0);

struct LiftedOrbit {
  std::vector<double> t;
  std::vector<double> s;
  std::vector<Vec> x;  // planar regularized states
  double S = 0.0;       // total s over one physical period
  int winding = 0;      // winding number m of u around the origin
  int collisions = 0;
  bool anti_periodic = false;
};

/// Planar converse construction: s(t) = int dt/|u| by tanh-sinh quadrature
/// split at collisions, continuous argument, z = |u|^{1/2} e^{i theta/2}
/// (sign flipped across each collision), w = 2 conj(z) du/dt,
/// tau = -E + eps U.
LiftedOrbit sundman_lift(const GeneralizedSolution& g, int samples = 200);

struct RoundTrip {
  double state_distance = 0.0;  // max over samples, best overall sign
  double s_distance = 0.0;      // max |s_lift - s_source| after removing the offset
  int sign = 1;
};
RoundTrip compare_lift(const LiftedOrbit& lift, const GeneralizedSolution& g);

/// Smooth plateau: 1 on [-1, 1], 0 off (-2, 2); derivatives 0..2.
double bump(double xi, int derivative = 0);

struct RemovalOptions {
  int samples = 400;
  IntegratorConfig integrator;
};

/// z_mu = z + mu^3 sum_j Psi((s - s_j)/mu) v_j for a planar periodic
/// collision orbit, with the forcing p_mu that u_mu = z_mu^2 solves.
class CollisionRemoval {
 public:
  CollisionRemoval(const PeriodicOrbit& orbit2d, PerturbationPtr U, double mu, const RemovalOptions& opt = {});

  double mu() const { return mu_; }
  double S() const { return S_; }
  double T_mu() const { return T_mu_; }
  /// int (|z_mu|^2 - |z|^2) ds over the windows: the mu-dependent part of T_mu.
  double period_shift() const;
  double T() const { return T_; }
  const std::vector<double>& collision_s() const { return s_col_; }

  /// z_mu and its first two s-derivatives.
  std::array<Complex, 3> z_mu(double s) const;
  double t_mu(double s) const;
  double s_mu(double t) const;
  Complex u_mu(double t) const;
  /// Forcing p_mu at s (regularized time).
  Complex forcing_at_s(double s) const;
  Complex forcing(double t) const { return forcing_at_s(s_mu(t)); }
  /// Relative residual of u'' = -u/|u|^3 + p_mu with u'' from the chain rule.
  double residual_at_s(double s) const;
  /// Original forcing eps grad U along the source orbit at time t.
  Complex original_forcing(double t) const;

  double min_abs_u() const;
  double forcing_l1_distance() const;
  double sup_distance() const;
  double max_residual() const;
  /// min over windows of |z_mu(s)| / (|s - s_j| + mu^3).
  double es1_constant() const;

 private:
  double wrap_offset(double s, double sj) const;

  PeriodicOrbit orbit_;
  PerturbationPtr U_;
  RegularizedKepler model_;
  Trajectory traj_;
  PhysicalTimeMap map_;
  double mu_ = 0.0;
  double S_ = 0.0;
  double T_ = 0.0;
  double T_mu_ = 0.0;
  int samples_ = 400;
  std::vector<double> s_col_;
  std::vector<Complex> v_col_;
  std::vector<double> s_table_;
  std::vector<double> t_table_;
};

/// CSV with columns t, u components, |u|, E, collision_flag and a footer
/// block listing collision events.
void write_generalized_csv(std::ostream& os, const GeneralizedSolution& g, const std::vector<std::string>& header = {});

}  // namespace kepreg
