#pragma once

// Multiple-shooting Gauss-Newton for closed orbits of the perturbed
// regularized system, natural-parameter continuation in eps, and the
// energy-band distinctness test.

#include <optional>
#include <string>
#include <vector>

#include "kepreg/manifolds.hpp"

namespace kepreg {

struct ShootingOptions {
  int segments = 0;            // 0 selects 4 k
  int max_iterations = 50;
  int max_backtracks = 20;
  double residual_tol = 1e-9;
  double step_tol = 1e-11;
  double rank_threshold = 1e-8;  // relative singular-value cutoff
  int eta = 1;                   // index of the sought orbit
  IntegratorConfig integrator;
};

struct ShootingProblem {
  ManifoldSpec spec;
  double eps = 0.0;
  PerturbationPtr U;
  Vec x_ref;  // phase anchor (usually the seed)
  ShootingOptions options;

  int segment_count() const { return options.segments > 0 ? options.segments : 4 * spec.k; }
  /// Number of unknowns: m states, S, and (3D) theta.
  int unknown_count() const;
  int residual_count() const;
};

/// Packed unknowns [X_0 .. X_{m-1} | S | theta(3D)].
struct ShootingUnknowns {
  std::vector<Vec> nodes;
  double S = 0.0;
  double theta = 0.0;

  Vec pack() const;
  static ShootingUnknowns unpack(const ShootingProblem& p, const Vec& v);
};

/// Nodes obtained by integrating x0 with the perturbed field over [0, S].
ShootingUnknowns initial_unknowns(const ShootingProblem& p, const Vec& x0, double S, double theta = 0.0);

/// R_theta: left multiplication of z and w by cos(theta) + i sin(theta)
/// (identity in 2D).
Vec group_action(Dim dim, double theta, const Vec& x);

/// Matching defects, closure Phi(X_{m-1}) - R_theta X_0 - eta T e_t, K(X_0),
/// BL(X_0) (3D), time phase, group phase (3D).
Vec residual(const ShootingProblem& p, const ShootingUnknowns& u);

struct ResidualJacobian {
  Vec r;
  Mat J;
  std::vector<Mat> segment_monodromy;
};
ResidualJacobian residual_and_jacobian(const ShootingProblem& p, const ShootingUnknowns& u);

struct MonodromyData {
  Mat M;                          // fundamental matrix over the period (group-corrected in 3D)
  Eigen::VectorXcd multipliers;
  DegeneracyReport degeneracy;
};

struct PeriodicOrbit {
  ManifoldSpec spec;
  double eps = 0.0;
  Vec x0;
  double S = 0.0;
  double theta = 0.0;
  int eta = 0;
  double residual_norm = 0.0;
  int iterations = 0;
  double energy_min = 0.0;
  double energy_max = 0.0;
  double max_K_drift = 0.0;
  std::optional<double> max_BL_drift;
  double tau_min = 0.0;
  double tau_max = 0.0;
  MonodromyData monodromy;
};

enum class SolveStatus { Converged, Diverged, Singular, IntegrationFailure };
std::string to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::Diverged;
  PeriodicOrbit orbit;  // converged orbit or best iterate
  std::vector<double> history;  // residual norm per iteration
  std::string diagnostic;
  bool converged() const { return status == SolveStatus::Converged; }
};

/// Damped Gauss-Newton on the overdetermined residual with truncated-SVD
/// least-squares steps and Armijo backtracking.
SolveResult solve(const ShootingProblem& p, const ShootingUnknowns& initial);
SolveResult solve(const ShootingProblem& p, const Vec& seed);

/// Fills energy band, invariant drifts and monodromy from a full-period
/// re-integration.
void analyze_orbit(PeriodicOrbit& orbit, const PerturbationPtr& U, const IntegratorConfig& cfg);

/// Closed unperturbed orbit on Lambda_k through x0 (S = S_k, eta = 1),
/// analyzed like a solver result.
PeriodicOrbit unperturbed_orbit(const ManifoldSpec& spec, const Vec& x0, const IntegratorConfig& cfg = {});

/// Closure |Phi_S(X0) - R_theta X0 - eta T e_t| under the given tolerances.
double closure_defect(const PeriodicOrbit& orbit, const PerturbationPtr& U, const IntegratorConfig& cfg);

struct ContinuationResult {
  std::vector<PeriodicOrbit> family;
  bool complete = false;
  std::string diagnostic;
};

/// Natural-parameter continuation through increasing eps targets, halving
/// the eps step on failure down to `step_floor`.
ContinuationResult continue_in_epsilon(const ShootingProblem& p, const Vec& seed, const std::vector<double>& targets,
                                       double step_floor = 1e-8);

/// Residual norm after a cheap, heavily regularized solve (4 segments,
/// rank cutoff 1e-3, 3 iterations); ranks seeds on the manifold.
double reduced_residual(const ShootingProblem& p, const Vec& seed);

struct CandidateContinuation {
  ContinuationResult continuation;
  Vec seed;
  std::string seed_label;
  int attempts = 0;
};

/// Continuation from a sequence of seeds on Lambda_k: retrograde circular,
/// prograde circular, then the best `keep` points of a scan_size x scan_size
/// (alpha, phase_w) grid ranked by reduced_residual. `base` supplies phase_z,
/// t0 and the 3D plane. Stops at the first complete family.
CandidateContinuation continue_from_candidates(const ShootingProblem& p, const SeedParams& base,
                                               const std::vector<double>& targets, int scan_size = 6, int keep = 3);

/// eta = round((t(S) - t(0)) / T) from integrating the orbit `periods` times;
/// throws InvariantError unless within 1e-6 of an integer.
int index_of(const PeriodicOrbit& orbit, const PerturbationPtr& U, int periods = 1,
             const IntegratorConfig& cfg = {});

struct BandSeparation {
  std::size_t i = 0, j = 0;
  double separation = 0.0;  // > 0 iff the bands are disjoint
  bool disjoint = false;
};
std::vector<BandSeparation> distinctness(const std::vector<PeriodicOrbit>& orbits);

}  // namespace kepreg
