// Gauss-Legendre quadrature on [-1,1] and its tensor-product extension.
#pragma once

#include <functional>

#include <Eigen/Dense>

namespace mcn {

using Vector = Eigen::VectorXd;

struct QuadRule {
  Vector nodes;    // ascending in (-1, 1)
  Vector weights;  // positive, summing to 2
};

/// Nodes and weights of the `order`-point Gauss-Legendre rule, found by
/// Newton iteration on the Legendre recurrence.
QuadRule gaussLegendre(int order);

/// Integral of f over [-1,1]^d with the same rule on every axis (d <= 3).
double tensorIntegrate(const std::function<double(const Vector&)>& f, int d,
                       const QuadRule& rule);

}  // namespace mcn
