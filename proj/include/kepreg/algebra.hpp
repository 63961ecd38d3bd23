#pragma once

// Complex and quaternion arithmetic with the Levi-Civita and
// Kustaanheimo-Stiefel coordinate maps.

#include <array>
#include <cmath>

#include "kepreg/error.hpp"

namespace kepreg {

/// Planar point / complex number stored as a real pair.
struct Complex {
  double x = 0.0;
  double y = 0.0;

  constexpr Complex() = default;
  constexpr Complex(double re, double im = 0.0) : x(re), y(im) {}

  constexpr Complex operator+(const Complex& o) const { return {x + o.x, y + o.y}; }
  constexpr Complex operator-(const Complex& o) const { return {x - o.x, y - o.y}; }
  constexpr Complex operator-() const { return {-x, -y}; }
  constexpr Complex operator*(const Complex& o) const {
    return {x * o.x - y * o.y, x * o.y + y * o.x};
  }
  constexpr Complex operator*(double a) const { return {a * x, a * y}; }
  constexpr Complex operator/(double a) const { return {x / a, y / a}; }
  Complex operator/(const Complex& o) const {
    const double d = o.norm2();
    return {(x * o.x + y * o.y) / d, (y * o.x - x * o.y) / d};
  }
  Complex& operator+=(const Complex& o) { x += o.x; y += o.y; return *this; }
  Complex& operator-=(const Complex& o) { x -= o.x; y -= o.y; return *this; }

  constexpr Complex conj() const { return {x, -y}; }
  constexpr double norm2() const { return x * x + y * y; }
  double abs() const { return std::hypot(x, y); }
  double arg() const { return std::atan2(y, x); }

  static Complex polar(double r, double theta) {
    return {r * std::cos(theta), r * std::sin(theta)};
  }
};

constexpr Complex operator*(double a, const Complex& c) { return c * a; }
/// Euclidean inner product in R^2.
constexpr double dot(const Complex& a, const Complex& b) { return a.x * b.x + a.y * b.y; }

using ComplexPoint = Complex;

/// Quaternion z0 + z1 i + z2 j + z3 k, component order (1, i, j, k).
struct Quaternion {
  double z0 = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
  double z3 = 0.0;

  constexpr Quaternion() = default;
  constexpr Quaternion(double a, double b, double c, double d) : z0(a), z1(b), z2(c), z3(d) {}

  static constexpr Quaternion one() { return {1, 0, 0, 0}; }
  static constexpr Quaternion i() { return {0, 1, 0, 0}; }
  static constexpr Quaternion j() { return {0, 0, 1, 0}; }
  static constexpr Quaternion k() { return {0, 0, 0, 1}; }

  constexpr Quaternion operator+(const Quaternion& o) const {
    return {z0 + o.z0, z1 + o.z1, z2 + o.z2, z3 + o.z3};
  }
  constexpr Quaternion operator-(const Quaternion& o) const {
    return {z0 - o.z0, z1 - o.z1, z2 - o.z2, z3 - o.z3};
  }
  constexpr Quaternion operator-() const { return {-z0, -z1, -z2, -z3}; }
  constexpr Quaternion operator*(double a) const { return {a * z0, a * z1, a * z2, a * z3}; }
  constexpr Quaternion operator/(double a) const { return {z0 / a, z1 / a, z2 / a, z3 / a}; }
  /// Hamilton product.
  constexpr Quaternion operator*(const Quaternion& o) const {
    return {z0 * o.z0 - z1 * o.z1 - z2 * o.z2 - z3 * o.z3,
            z0 * o.z1 + z1 * o.z0 + z2 * o.z3 - z3 * o.z2,
            z0 * o.z2 - z1 * o.z3 + z2 * o.z0 + z3 * o.z1,
            z0 * o.z3 + z1 * o.z2 - z2 * o.z1 + z3 * o.z0};
  }
  Quaternion& operator+=(const Quaternion& o) { return *this = *this + o; }
  Quaternion& operator-=(const Quaternion& o) { return *this = *this - o; }

  constexpr Quaternion conj() const { return {z0, -z1, -z2, -z3}; }
  constexpr double norm2() const { return z0 * z0 + z1 * z1 + z2 * z2 + z3 * z3; }
  double abs() const { return std::sqrt(norm2()); }
  constexpr double re() const { return z0; }

  constexpr std::array<double, 4> components() const { return {z0, z1, z2, z3}; }
  static constexpr Quaternion from(const std::array<double, 4>& c) {
    return {c[0], c[1], c[2], c[3]};
  }
};

constexpr Quaternion operator*(double a, const Quaternion& q) { return q * a; }
/// Euclidean inner product in R^4; equals Re(conj(a) b).
constexpr double dot(const Quaternion& a, const Quaternion& b) {
  return a.z0 * b.z0 + a.z1 * b.z1 + a.z2 * b.z2 + a.z3 * b.z3;
}

/// u1 i + u2 j + u3 k; the real part is structurally absent.
struct ImaginaryQuaternion {
  double u1 = 0.0;
  double u2 = 0.0;
  double u3 = 0.0;

  constexpr Quaternion embed() const { return {0.0, u1, u2, u3}; }
  constexpr double norm2() const { return u1 * u1 + u2 * u2 + u3 * u3; }
  double abs() const { return std::sqrt(norm2()); }
  constexpr std::array<double, 3> components() const { return {u1, u2, u3}; }
};

/// Absolute tolerance used for "purely imaginary" and Levi-Civita plane tests.
inline constexpr double kImaginaryTolerance = 1e-12;

/// Drops the real part of a quaternion; throws DomainError when it exceeds
/// `tol` in absolute value.
ImaginaryQuaternion imaginary_part(const Quaternion& q, double tol = kImaginaryTolerance);

/// Levi-Civita canonical map (z, w) -> (z^2, w / (2 conj z)).
struct LcImage {
  Complex u;
  Complex v;
};
LcImage lc_map(const Complex& z, const Complex& w);

/// Position part of the Levi-Civita map; total, lc_position(0) = 0.
constexpr Complex lc_position(const Complex& z) { return z * z; }

/// KS map conj(z) i z.
constexpr ImaginaryQuaternion ks_map(const Quaternion& z) {
  return {z.z0 * z.z0 + z.z1 * z.z1 - z.z2 * z.z2 - z.z3 * z.z3,
          2.0 * (z.z1 * z.z2 - z.z0 * z.z3),
          2.0 * (z.z1 * z.z3 + z.z0 * z.z2)};
}

/// Gradient of F = G o KS at z, given grad_u G at KS(z): -2 i z grad_u.
constexpr Quaternion ks_gradient_transport(const Quaternion& z, const ImaginaryQuaternion& grad_u) {
  return (Quaternion::i() * z * grad_u.embed()) * -2.0;
}

/// True iff span{v1, v2} is a Levi-Civita plane, i.e. Re(conj(v1) i v2) = 0.
/// Throws DomainError when v1 and v2 are linearly dependent.
bool lc_plane_check(const Quaternion& v1, const Quaternion& v2, double tol = kImaginaryTolerance);

/// Unit complex number cos(theta) + i sin(theta) embedded in the quaternions.
inline Quaternion unit_complex(double theta) {
  return {std::cos(theta), std::sin(theta), 0.0, 0.0};
}

}  // namespace kepreg
