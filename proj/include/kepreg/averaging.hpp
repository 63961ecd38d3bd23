#pragma once

// Periodic solutions of the forced Kepler problem u'' = -u/|u|^3 + eps p(t)
// bifurcating from infinity: averaged equilibrium, its Jacobian, and the
// scaled shooting family x = eps^{1/2} u.

#include <iosfwd>
#include <string>
#include <vector>

#include "kepreg/reconstruct.hpp"

namespace kepreg {

/// Mean of the forcing, read off its constant Fourier coefficient.
PVec mean_force(const FourierForcing& p);

/// x* = pbar / |pbar|^{3/2}, the unique solution of x/|x|^3 = pbar.
/// Throws DomainError for pbar = 0 (no bifurcation from infinity) and
/// InvariantError if the defining relation fails to 1e-12.
PVec averaged_equilibrium(const PVec& pbar);

/// Jacobian of sigma(x, y) = (y, -x/|x|^3 + pbar): [[0, Id], [S, 0]] with
/// S = |x|^{-5} (-|x|^2 Id + 3 x x^T).
Mat averaged_jacobian(const PVec& x);

struct JacobianDeterminant {
  double formula = 0.0;    // 2 |x|^{-3N}
  double assembled = 0.0;  // det of averaged_jacobian(x)
  double magnitude_error = 0.0;  // ||assembled| - formula| / formula
  bool sign_agrees = false;
};
JacobianDeterminant averaged_jacobian_det(const PVec& x);

struct PhysicalShootingOptions {
  int max_iterations = 30;
  int max_backtracks = 20;
  double defect_tol = 1e-10;  // endpoint defect in (x, x')
  IntegratorConfig integrator;
};

struct ScaledOrbit {
  double eps = 0.0;
  bool converged = false;
  Vec y0;  // (x(0), x'(0)) of the scaled problem
  double endpoint_defect = 0.0;
  int iterations = 0;
  double min_abs_u = 0.0;        // min_t |u_eps| = eps^{-1/2} min_t |x|
  double sup_deviation = 0.0;    // max_t |x(t) - x*|
  std::string diagnostic;
};

struct BifurcationFamily {
  PVec pbar;
  PVec xstar;
  double period = 0.0;
  std::vector<ScaledOrbit> members;
  double slope = 0.0;  // least-squares log-log slope of min|u_eps| vs eps
  bool complete = false;
};

/// Solves the T-periodic problem for x'' = eps^{3/2}(-x/|x|^3 + p(t)) by
/// Newton on Phi_T(y) - y seeded at (x*, 0), independently for each eps.
/// Members that fail are kept with converged = false (partial family).
BifurcationFamily bifurcation_from_infinity(const FourierForcing& p, const std::vector<double>& eps_list,
                                            const PhysicalShootingOptions& opt = {}, int jobs = 1);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ForceBalance {
  PVec kepler;   // int u/|u|^3 dt over one period
  PVec forcing;  // eps int grad U dt over one period
  double defect = 0.0;
};

/// Integral identity obtained by integrating the equation of motion over a
/// period; evaluated in regularized time on a collision-free solution.
ForceBalance force_balance(const GeneralizedSolution& g);

/// Columns eps, min_abs_u, sup_deviation, endpoint_defect, converged; the
/// fitted slope goes into a trailing comment line.
void write_family_csv(std::ostream& os, const BifurcationFamily& f, const std::vector<std::string>& header = {});

}  // namespace kepreg
