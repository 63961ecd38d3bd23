#pragma once

// Periodic manifolds of the unperturbed regularized problem: constants,
// seeds, closed-form flow and variations, non-degeneracy checks.

#include <random>
#include <string>

#include "kepreg/flow.hpp"

namespace kepreg {

struct ManifoldSpec {
  int k = 1;
  double T = 2.0 * 3.14159265358979323846;
  Dim dim = Dim::Planar;

  void validate() const;
};

struct ManifoldConstants {
  double tau = 0.0;    // tau_k
  double omega = 0.0;  // (tau_k / 2)^{1/2}
  double sigma = 0.0;  // minimal z-period 2 pi / omega
  double S = 0.0;      // orbit period k sigma
};

ManifoldConstants constants(const ManifoldSpec& spec);

enum class SeedPreset { General, Circular, Rectilinear };

/// Seeds are planar (z0, w0) on the ellipse-sphere tau|z0|^2 + |w0|^2/8 = 1,
/// parametrized by sqrt(tau)|z0| = cos(alpha), |w0|/sqrt(8) = sin(alpha).
/// Spatial seeds embed the planar pair into the Levi-Civita plane
/// span{plane_v1, plane_v2}.
struct SeedParams {
  SeedPreset preset = SeedPreset::General;
  double alpha = 0.7853981633974483;
  double phase_z = 0.0;         // argument of z0
  double phase_w = 1.5707963267948966;  // argument of w0 relative to z0
  bool prograde = true;         // circular preset orientation
  double t0 = 0.0;
  Quaternion plane_v1 = Quaternion::one();
  Quaternion plane_v2 = -Quaternion::k();
};

/// Levi-Civita plane whose KS image is the u1-u2 plane with the same
/// orientation as the planar map z -> z^2.
inline Quaternion default_plane_v1() { return Quaternion::one(); }
inline Quaternion default_plane_v2() { return -Quaternion::k(); }

/// a + b i  ->  a v1 + b v2.
Quaternion embed_in_plane(const Complex& c, const Quaternion& v1, const Quaternion& v2);
/// Planar state -> spatial state in the Levi-Civita plane span{v1, v2}.
Vec embed_planar_state(const Vec& x2, const Quaternion& v1 = default_plane_v1(),
                       const Quaternion& v2 = default_plane_v2());

/// Seed on Lambda_k (K_0 = 0, tau = tau_k; BL = 0 in 3D).
Vec seed_state(const ManifoldSpec& spec, const SeedParams& params);

/// Random seed parameters (random ellipse point and, in 3D, a random
/// orthonormal Levi-Civita plane).
SeedParams random_seed_params(std::mt19937_64& rng, Dim dim);

/// Throws InvariantError unless |K_0(x)| and |tau - tau_k| are below tol.
void require_on_manifold(const ManifoldSpec& spec, const Vec& x, double tol = 1e-10);

/// Closed-form unperturbed flow on Lambda_k.
Vec closed_form_flow(const ManifoldSpec& spec, const Vec& x0, double s);

/// Closed-form solution of the linearized equation at eps = 0 with
/// Y(0) = Y* = (z0, 0, 0, -2 tau_k).
Vec closed_form_variation(const ManifoldSpec& spec, const Vec& x0, double s);

/// Y* = (z0, 0, 0, -2 tau_k).
Vec special_tangent(const ManifoldSpec& spec, const Vec& x0);

/// Smallest principal angle between v and span(columns of B) (radians).
double principal_angle(const Vec& v, const Mat& B);

struct DegeneracyReport {
  int dim_E = 0;              // 1 + dim ker(Id - Gamma)
  int rank = 0;               // rank(Id - Gamma)
  int gamma_size = 0;
  Vec singular_values;        // of Id - Gamma
  Eigen::VectorXcd multipliers;  // eigenvalues of the monodromy
  double det_M = 0.0;
};

/// Splits R^n = span{grad K} + span{field} + rest, takes Gamma as the
/// block of B^{-1} M B acting on the rest, and counts the kernel of Id - Gamma
/// with SVD threshold 1e-8 ||Id - Gamma||.
DegeneracyReport degeneracy_index(const Mat& M, const Vec& x0, const RegularizedKepler& model);

struct CertificateReport {
  ManifoldSpec spec;
  Vec x0;
  Vec defect_numeric;      // (Id - P) Y* from the numerical monodromy
  Vec defect_closed_form;  // (Id - P) Y* from the closed form
  Vec field_direction;     // J grad K_0 (x0)
  Vec bl_direction;        // J grad BL (x0), 3D only
  double principal_angle = 0.0;
  double closed_form_mismatch = 0.0;  // relative
  bool certified = false;
  DegeneracyReport degeneracy;
};

/// Numerical monodromy over S_k, (Id - P) Y*, and its angle to the
/// forbidden span (field direction, plus J grad BL in 3D).
CertificateReport nondegeneracy_certificate(const ManifoldSpec& spec, const Vec& x0,
                                            const IntegratorConfig& cfg = {}, double min_angle = 1e-3);

}  // namespace kepreg
