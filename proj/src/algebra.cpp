#include "kepreg/algebra.hpp"

#include <string>

namespace kepreg {

ImaginaryQuaternion imaginary_part(const Quaternion& q, double tol) {
  if (std::abs(q.z0) > tol) {
    throw DomainError("quaternion is not purely imaginary: real part " + std::to_string(q.z0));
  }
  return {q.z1, q.z2, q.z3};
}

LcImage lc_map(const Complex& z, const Complex& w) {
  if (z.norm2() == 0.0) {
    throw DomainError("lc_map: z = 0 is a collision point");
  }
  return {z * z, w / (z.conj() * 2.0)};
}

bool lc_plane_check(const Quaternion& v1, const Quaternion& v2, double tol) {
  // Gram determinant; scale-free test for linear dependence.
  const double n1 = v1.norm2();
  const double n2 = v2.norm2();
  const double d = dot(v1, v2);
  if (n1 == 0.0 || n2 == 0.0 || n1 * n2 - d * d <= 1e-24 * n1 * n2) {
    throw DomainError("lc_plane_check: vectors are linearly dependent");
  }
  return std::abs((v1.conj() * Quaternion::i() * v2).re()) <= tol;
}

}  // namespace kepreg
