#pragma once

#include <Eigen/Core>

#include "kepreg/algebra.hpp"

namespace kepreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Physical-space vector (N = 2 or 3) with inline storage.
using PVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using PMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

/// Spatial dimension of the physical problem.
enum class Dim { Planar = 2, Spatial = 3 };

inline int physical_dim(Dim d) { return d == Dim::Planar ? 2 : 3; }
/// Real components of z (2 for a complex number, 4 for a quaternion).
inline int z_dim(Dim d) { return d == Dim::Planar ? 2 : 4; }
/// Size of a regularized state (z, w, t, tau).
inline int state_size(Dim d) { return 2 * z_dim(d) + 2; }

/// Index helpers into a packed regularized state [z | w | t | tau].
struct StateLayout {
  int zd;
  explicit StateLayout(Dim d) : zd(z_dim(d)) {}
  int z() const { return 0; }
  int w() const { return zd; }
  int t() const { return 2 * zd; }
  int tau() const { return 2 * zd + 1; }
  int size() const { return 2 * zd + 2; }
};

/// Extended-phase-space point in 2D regularized coordinates.
struct RegState2 {
  Complex z;
  Complex w;
  double t = 0.0;  // lifted time, never reduced
  double tau = 0.0;

  Vec to_vector() const;
  static RegState2 from_vector(const Vec& x);
};

/// Extended-phase-space point in 3D (KS) regularized coordinates.
struct RegState3 {
  Quaternion z;
  Quaternion w;
  double t = 0.0;
  double tau = 0.0;

  Vec to_vector() const;
  static RegState3 from_vector(const Vec& x);
};

/// Physical state (u, v, t).
struct PhysState {
  PVec u;
  PVec v;
  double t = 0.0;
};

inline Complex z_complex(const Vec& x) { return {x[0], x[1]}; }
inline Complex w_complex(const Vec& x) { return {x[2], x[3]}; }
inline Quaternion z_quat(const Vec& x) { return {x[0], x[1], x[2], x[3]}; }
inline Quaternion w_quat(const Vec& x) { return {x[4], x[5], x[6], x[7]}; }

}  // namespace kepreg
