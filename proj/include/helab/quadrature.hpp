#pragma once

#include <vector>

namespace helab::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Legendre rule with `n` nodes on [a, b]; exact for polynomials of degree 2n-1.
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Equispaced trapezoid rule on the periodic interval [a, a + period); weights sum to `period`.
Rule periodic_trapezoid(int n, double period, double a = 0.0);

}  // namespace helab::quadrature
