#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "kepreg/types.hpp"

namespace testing {

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline kepreg::Quaternion random_quaternion(std::mt19937_64& rng, double scale = 1.0) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale),
          uniform(rng, -scale, scale)};
}

inline kepreg::Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  kepreg::Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

/// Central-difference gradient of f at x.
inline kepreg::Vec fd_gradient(const std::function<double(const kepreg::Vec&)>& f, const kepreg::Vec& x,
                               double h = 1e-6) {
  kepreg::Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    kepreg::Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// Central-difference Jacobian of f at x.
inline kepreg::Mat fd_jacobian(const std::function<kepreg::Vec(const kepreg::Vec&)>& f, const kepreg::Vec& x,
                               double h = 1e-6) {
  const kepreg::Vec f0 = f(x);
  kepreg::Mat J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    kepreg::Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    J.col(i) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

inline double rel_err(const kepreg::Vec& a, const kepreg::Vec& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
