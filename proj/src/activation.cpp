#include "mcn/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mcn {

Activation Activation::ClampedExp() {
  return Activation(Kind::Exp, std::exp(kExpClampLimit));
}

Activation Activation::UnclampedExp() {
  return Activation(Kind::ExpUnclamped,
                    std::numeric_limits<double>::infinity());
}

Activation Activation::BinaryStep() {
  return Activation(Kind::BinaryStep,
                    std::numeric_limits<double>::infinity());
}

Activation Activation::CustomLipschitz(double rho) {
  if (!(rho >= 0.0)) {
    throw std::invalid_argument(
        "Activation::CustomLipschitz: rho must be nonnegative");
  }
  return Activation(Kind::Custom, rho);
}

bool Activation::boundedRho() const {
  return std::isfinite(rho_);
}

bool Activation::differentiable() const {
  switch (kind_) {
    case Kind::Identity:
    case Kind::Relu:
    case Kind::Exp:
    case Kind::ExpUnclamped:
      return true;
    case Kind::BinaryStep:
    case Kind::Custom:
      return false;
  }
  return false;
}

const char* Activation::name() const {
  switch (kind_) {
    case Kind::Identity:
      return "identity";
    case Kind::Relu:
      return "relu";
    case Kind::Exp:
    case Kind::ExpUnclamped:
      return "exp";
    case Kind::BinaryStep:
      return "binary-step";
    case Kind::Custom:
      return "custom";
  }
  return "unknown";
}

double Activation::eval(double x) const {
  switch (kind_) {
    case Kind::Identity:
      return x;
    case Kind::Relu:
      return x > 0.0 ? x : 0.0;
    case Kind::Exp:
      return std::exp(std::clamp(x, -kExpClampLimit, kExpClampLimit));
    case Kind::ExpUnclamped:
      return std::exp(x);
    case Kind::BinaryStep:
      return x >= 0.0 ? 1.0 : 0.0;
    case Kind::Custom:
      throw std::logic_error("Activation: custom activation is not evaluable");
  }
  return 0.0;
}

double Activation::derivative(double x) const {
  switch (kind_) {
    case Kind::Identity:
      return 1.0;
    case Kind::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Kind::Exp:
      // Flat outside the clamp interval, so the derivative vanishes there.
      return (x > -kExpClampLimit && x < kExpClampLimit) ? std::exp(x) : 0.0;
    case Kind::ExpUnclamped:
      return std::exp(x);
    case Kind::BinaryStep:
    case Kind::Custom:
      throw std::logic_error("Activation: derivative not defined for " +
                             std::string(name()));
  }
  return 0.0;
}

Matrix Activation::apply(const Matrix& X) const {
  return X.unaryExpr([this](double v) { return eval(v); });
}

Matrix Activation::applyDerivative(const Matrix& X) const {
  return X.unaryExpr([this](double v) { return derivative(v); });
}

}  // namespace mcn
