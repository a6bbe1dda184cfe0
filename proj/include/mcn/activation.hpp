// Elementwise activation functions together with their Lipschitz constants.
#pragma once

#include <Eigen/Dense>

namespace mcn {

using Matrix = Eigen::MatrixXd;

/// An elementwise activation with a queryable Lipschitz constant.
///
/// Notes on the individual kinds:
///  - `Exp` is the clamped exponential: the input is restricted to
///    [-kExpClampLimit, kExpClampLimit] before exponentiation, so a forward
///    pass can never produce inf/NaN. Its Lipschitz constant is
///    exp(kExpClampLimit). The unclamped variant exists only so that bound
///    reports can state "unbounded"; it is never serialized.
///  - `BinaryStep` (0 for x < 0, 1 for x >= 0) is constructive-only: it may
///    appear in hand-built networks (range reduction, exact floor) but the
///    differentiation engine rejects it.
///  - `Custom` carries a caller-supplied Lipschitz constant for bound
///    arithmetic and cannot be evaluated.
class Activation {
 public:
  enum class Kind { Identity, Relu, Exp, ExpUnclamped, BinaryStep, Custom };

  static Activation Identity() { return Activation(Kind::Identity, 1.0); }
  static Activation Relu() { return Activation(Kind::Relu, 1.0); }
  static Activation ClampedExp();
  static Activation UnclampedExp();
  static Activation BinaryStep();
  static Activation CustomLipschitz(double rho);

  Kind kind() const { return kind_; }

  /// Lipschitz constant; +infinity when unbounded.
  double rho() const { return rho_; }
  bool boundedRho() const;

  /// True when the differentiation engine accepts this activation.
  bool differentiable() const;

  const char* name() const;

  double eval(double x) const;
  double derivative(double x) const;
  Matrix apply(const Matrix& X) const;
  Matrix applyDerivative(const Matrix& X) const;

  static constexpr double kExpClampLimit = 30.0;

 private:
  Activation(Kind kind, double rho) : kind_(kind), rho_(rho) {}

  Kind kind_;
  double rho_;
};

}  // namespace mcn
