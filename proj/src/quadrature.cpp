#include "mcn/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mcn {

QuadRule gaussLegendre(int order) {
  if (order < 1) {
    throw std::invalid_argument("gaussLegendre: order must be >= 1");
  }
  QuadRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess for the i-th root of P_order.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Evaluate P_order(x) and its derivative by the three-term recurrence.
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      dp = order * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes(i) = -x;
    rule.nodes(order - 1 - i) = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights(i) = w;
    rule.weights(order - 1 - i) = w;
  }
  return rule;
}

double tensorIntegrate(const std::function<double(const Vector&)>& f, int d,
                       const QuadRule& rule) {
  if (d < 1 || d > 3) {
    throw std::invalid_argument(
        "tensorIntegrate: dimension must be in [1, 3], got " +
        std::to_string(d));
  }
  const Eigen::Index n = rule.nodes.size();
  Vector x(d);
  double total = 0.0;
  if (d == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(0) = rule.nodes(i);
      total += rule.weights(i) * f(x);
    }
  } else if (d == 2) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(0) = rule.nodes(i);
      double inner = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        x(1) = rule.nodes(j);
        inner += rule.weights(j) * f(x);
      }
      total += rule.weights(i) * inner;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(0) = rule.nodes(i);
      double mid = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        x(1) = rule.nodes(j);
        double inner = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          x(2) = rule.nodes(k);
          inner += rule.weights(k) * f(x);
        }
        mid += rule.weights(j) * inner;
      }
      total += rule.weights(i) * mid;
    }
  }
  return total;
}

}  // namespace mcn
