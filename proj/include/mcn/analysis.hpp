// Closed-form complexity quantities: per-block Lipschitz constants,
// covering-number and generalization bounds, and stationarity diagnostics
// linking trained losses to linear-regression residuals.
#pragma once

#include <vector>

#include <json.hpp>

#include "mcn/network.hpp"

namespace mcn {

/// One block's Lipschitz data: the parameter norm
/// ||theta||_1 = max{ ||Atilde||_1, ||A||_1, ||[L;W]||_1 } (induced l1,
/// i.e. max column absolute sum, of each map; L and W stacked vertically),
/// the activation constant rho = max of the gamma and sigma constants, and
/// kappa = 1 + max{rho, 2} * ||theta||_1. A zero block has kappa = 1 even
/// when rho is unbounded.
struct LayerKappa {
  double thetaNorm = 0.0;
  double rho = 1.0;      // +inf for binary-step / unclamped activations
  double kappa = 1.0;    // +inf when rho is unbounded and thetaNorm > 0
};

struct LipschitzReport {
  std::vector<LayerKappa> layers;
  double productKappa = 1.0;  // product of the per-layer kappas
  nlohmann::json toJson() const;
};

LayerKappa lipschitzKappa(const MCNLayer& layer, const Activation& gamma);
LipschitzReport lipschitzKappa(const MCNNetwork& net);

/// One block applied to independently chosen top / skip / input reads:
///   [ L(top) ; gamma(Atilde(x0)) + max{ W(top), sigma(A(skip)) } ].
/// The empirical Lipschitz check perturbs the three reads independently and
/// compares ||delta out||_1 against kappa times the sum of the three input
/// perturbation norms.
Vector applyBlock(const MCNLayer& layer, const Activation& gamma,
                  const Vector& top, const Vector& skip, const Vector& x0);

/// Logarithmic covering number at radius delta for networks with s nonzero
/// parameters, depth l, width w, activation constant rho, input norm bound,
/// and per-layer kappas:
///   s*l*ln(w + 1) + s*ln(rho * l * inputNorm * prod(kappas) / delta).
/// All constants are fixed at 1; the value is an order-level quantity.
/// Requires 0 < delta < rho * l * inputNorm * prod(kappas).
double coveringBound(double s, double l, double w, double rho,
                     double inputNorm, const std::vector<double>& kappas,
                     double delta);

/// Excess-risk split: optimization gap + approximation error + the
/// complexity term s*l^2*ln(w*n)/n (constant fixed at 1).
struct GeneralizationReport {
  double deltaN = 0.0;
  double approx = 0.0;
  double complexity = 0.0;
  double total = 0.0;
  nlohmann::json toJson() const;
};

GeneralizationReport generalizationBound(double deltaN, double approx,
                                         double s, double l, double w,
                                         double n);

/// Stationarity diagnostics for the square loss (1/n)||Y_theta - Y||_F^2:
/// per-state correlations ||E X_k^T||_F / (||E||_F ||X_k||_F) with
/// E = Y_theta - Y, and the least-squares residual of regressing Y (minus
/// the frozen readout bias) on the final-state features. At a readout
/// stationary point the last correlation vanishes (normal equations) and
/// the LS residual equals the training loss.
struct OrthogonalityReport {
  std::vector<double> stateCorrelation;  // index k = state x_k, k in [0, l]
  double lsResidual = 0.0;               // (1/n)||Y - bias - What X_l||_F^2
  double trainLoss = 0.0;                // (1/n)||Y_theta - Y||_F^2
  nlohmann::json toJson() const;
};

OrthogonalityReport residualOrthogonality(const MCNNetwork& net,
                                          const Matrix& X, const Matrix& Y);

}  // namespace mcn
