#pragma once

// Independent reference formulas used by the tests. Nothing here calls into
// the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

constexpr double pi = std::numbers::pi;

// Spherical triangle area from its vertices (unit vectors), L'Huilier's formula.
inline double lhuilier_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  auto arc = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) { return std::atan2(u.cross(v).norm(), u.dot(v)); };
  const double x = arc(b, c), y = arc(a, c), z = arc(a, b);
  const double s = 0.5 * (x + y + z);
  const double t = std::tan(s / 2) * std::tan((s - x) / 2) * std::tan((s - y) / 2) * std::tan((s - z) / 2);
  return 4.0 * std::atan(std::sqrt(std::max(0.0, t)));
}

// Hyperbolic distance in the Poincare disk.
inline double disk_distance(const Eigen::Vector2d& z, const Eigen::Vector2d& w) {
  const double num = 2.0 * (z - w).squaredNorm();
  const double den = (1.0 - z.squaredNorm()) * (1.0 - w.squaredNorm());
  return std::acosh(1.0 + num / den);
}

// Hyperbolic triangle area pi - (A + B + C), angles from the hyperbolic law of cosines.
inline double hyperbolic_triangle_area(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
  const double a = disk_distance(q, r), b = disk_distance(p, r), c = disk_distance(p, q);
  auto angle = [](double opp, double s1, double s2) {
    return std::acos((std::cosh(s1) * std::cosh(s2) - std::cosh(opp)) / (std::sinh(s1) * std::sinh(s2)));
  };
  return pi - angle(a, b, c) - angle(b, a, c) - angle(c, a, b);
}

// Complex spherical harmonic with the Condon-Shortley phase.
inline std::complex<double> ylm(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  const double p = std::sph_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), theta);
  const std::complex<double> y = p * std::exp(std::complex<double>(0.0, am * phi));
  return m >= 0 ? y : ((am % 2) ? -1.0 : 1.0) * std::conj(y);
}

// Composite Simpson integral of f over [a, b] with 2n panels.
inline std::complex<double> simpson(const std::function<std::complex<double>(double)>& f, double a, double b, int n) {
  const double h = (b - a) / (2 * n);
  std::complex<double> s = f(a) + f(b);
  for (int i = 1; i < 2 * n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// <Y_{l1 m}, z^p Y_{l2 m}> by direct quadrature in theta (the phi integral is 2 pi for equal m).
inline double zp_element(int l1, int l2, int m, int p) {
  auto f = [&](double theta) -> std::complex<double> {
    const double z = std::cos(theta);
    return std::conj(ylm(l1, m, theta, 0.0)) * std::pow(z, p) * ylm(l2, m, theta, 0.0) * std::sin(theta);
  };
  return 2.0 * pi * simpson(f, 0.0, pi, 2000).real();
}

// Sign of the permutation sorting `v` (distinct entries), and the sorted result.
inline int sort_sign(std::vector<int>& v) {
  int sign = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j + 1 < v.size() - i; ++j) {
      if (v[j] > v[j + 1]) {
        std::swap(v[j], v[j + 1]);
        sign = -sign;
      }
    }
  }
  return sign;
}

// Wedge coordinates of u ^ v in the basis e_i ^ e_j, i < j (lexicographic).
inline Eigen::VectorXd wedge2(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd out(n * (n - 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) out(k++) = u(i) * v(j) - u(j) * v(i);
  }
  return out;
}

inline Eigen::MatrixXd rotation_xy(int n, int i, int j, double angle) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n);
  r(i, i) = std::cos(angle);
  r(j, j) = std::cos(angle);
  r(i, j) = -std::sin(angle);
  r(j, i) = std::sin(angle);
  return r;
}

// Orthogonal matrix with determinant 1 from a fixed product of plane rotations.
inline Eigen::MatrixXd generic_rotation(int n, double seed) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n);
  double a = seed;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      r = r * rotation_xy(n, i, j, a);
      a = std::fmod(a * 1.618 + 0.37, 2 * pi);
    }
  }
  return r;
}

}  // namespace oracle
