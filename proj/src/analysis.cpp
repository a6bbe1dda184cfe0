#include "mcn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcn/serialize.hpp"

namespace mcn {
namespace {

double stackedNorm(const LinearMap& top, const LinearMap& bottom) {
  const Eigen::Index cols = std::max(top.weights.cols(), bottom.weights.cols());
  double norm = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    double colSum = 0.0;
    if (c < top.weights.cols()) {
      colSum += top.weights.col(c).cwiseAbs().sum();
    }
    if (c < bottom.weights.cols()) {
      colSum += bottom.weights.col(c).cwiseAbs().sum();
    }
    norm = std::max(norm, colSum);
  }
  return norm;
}

}  // namespace

LayerKappa lipschitzKappa(const MCNLayer& layer, const Activation& gamma) {
  LayerKappa out;
  out.thetaNorm = std::max({layer.Atilde.inducedL1Norm(),
                            layer.A.inducedL1Norm(),
                            stackedNorm(layer.L, layer.W)});
  out.rho = std::max(gamma.rho(), layer.sigma.rho());
  if (out.thetaNorm == 0.0) {
    out.kappa = 1.0;  // constant block regardless of the activations
  } else {
    out.kappa = 1.0 + std::max(out.rho, 2.0) * out.thetaNorm;
  }
  return out;
}

LipschitzReport lipschitzKappa(const MCNNetwork& net) {
  LipschitzReport report;
  report.layers.reserve(static_cast<std::size_t>(net.depth()));
  for (int k = 0; k < net.depth(); ++k) {
    report.layers.push_back(lipschitzKappa(net.layer(k), net.gamma()));
    report.productKappa *= report.layers.back().kappa;
  }
  return report;
}

nlohmann::json LipschitzReport::toJson() const {
  nlohmann::json doc;
  doc["layers"] = nlohmann::json::array();
  for (const LayerKappa& lk : layers) {
    doc["layers"].push_back({{"theta_norm", encodeReal(lk.thetaNorm)},
                             {"rho", encodeReal(lk.rho)},
                             {"kappa", encodeReal(lk.kappa)}});
  }
  doc["product_kappa"] = encodeReal(productKappa);
  return doc;
}

Vector applyBlock(const MCNLayer& layer, const Activation& gamma,
                  const Vector& top, const Vector& skip, const Vector& x0) {
  Vector out(layer.outputDim());
  if (layer.L.rows() > 0) {
    out.head(layer.L.rows()) = layer.L.apply(top);
  }
  if (layer.W.rows() > 0) {
    const Vector wBranch = layer.W.apply(top);
    const Vector aBranch = layer.sigma.apply(layer.A.apply(skip));
    const Vector gTerm = gamma.apply(layer.Atilde.apply(x0));
    out.tail(layer.W.rows()) = gTerm + wBranch.cwiseMax(aBranch);
  }
  return out;
}

double coveringBound(double s, double l, double w, double rho,
                     double inputNorm, const std::vector<double>& kappas,
                     double delta) {
  if (s <= 0.0 || l <= 0.0 || w < 0.0 || rho <= 0.0 || inputNorm <= 0.0) {
    throw std::invalid_argument(
        "coveringBound: s, l, rho, inputNorm must be positive and w >= 0");
  }
  double prod = 1.0;
  for (double k : kappas) {
    if (k < 1.0 || !std::isfinite(k)) {
      throw std::invalid_argument(
          "coveringBound: kappas must be finite and >= 1");
    }
    prod *= k;
  }
  const double scale = rho * l * inputNorm * prod;
  if (delta <= 0.0 || delta >= scale) {
    throw std::invalid_argument(
        "coveringBound: delta must lie in (0, rho*l*inputNorm*prod(kappa))");
  }
  return s * l * std::log(w + 1.0) + s * std::log(scale / delta);
}

GeneralizationReport generalizationBound(double deltaN, double approx,
                                         double s, double l, double w,
                                         double n) {
  if (deltaN < 0.0 || approx < 0.0 || s < 0.0 || l < 0.0) {
    throw std::invalid_argument(
        "generalizationBound: terms must be nonnegative");
  }
  if (n < 2.0 || w < 1.0) {
    throw std::invalid_argument("generalizationBound: need n >= 2 and w >= 1");
  }
  GeneralizationReport rep;
  rep.deltaN = deltaN;
  rep.approx = approx;
  rep.complexity = s * l * l * std::log(w * n) / n;
  rep.total = rep.deltaN + rep.approx + rep.complexity;
  return rep;
}

nlohmann::json GeneralizationReport::toJson() const {
  return {{"delta_n", encodeReal(deltaN)},
          {"approx", encodeReal(approx)},
          {"complexity", encodeReal(complexity)},
          {"total", encodeReal(total)}};
}

OrthogonalityReport residualOrthogonality(const MCNNetwork& net,
                                          const Matrix& X, const Matrix& Y) {
  if (X.cols() != Y.cols()) {
    throw std::invalid_argument(
        "residualOrthogonality: X and Y sample counts differ");
  }
  if (X.rows() != net.inputDim() || Y.rows() != net.outputDim()) {
    throw std::invalid_argument(
        "residualOrthogonality: data dimensions do not match the network");
  }
  const Eigen::Index n = X.cols();
  if (n < 1) {
    throw std::invalid_argument("residualOrthogonality: empty dataset");
  }

  // Collect every state; per-sample forward keeps the full trajectory.
  std::vector<Matrix> states(static_cast<std::size_t>(net.depth()) + 1);
  for (int k = 0; k <= net.depth(); ++k) {
    states[static_cast<std::size_t>(k)] = Matrix(net.stateDim(k), n);
  }
  Matrix pred(net.outputDim(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Forward f = net.forward(X.col(j));
    for (int k = 0; k <= net.depth(); ++k) {
      states[static_cast<std::size_t>(k)].col(j) =
          f.states[static_cast<std::size_t>(k)];
    }
    pred.col(j) = f.output;
  }

  OrthogonalityReport rep;
  const Matrix err = pred - Y;
  const double errNorm = err.norm();
  rep.trainLoss = errNorm * errNorm / static_cast<double>(n);
  for (int k = 0; k <= net.depth(); ++k) {
    const Matrix& Xk = states[static_cast<std::size_t>(k)];
    const double denom = errNorm * Xk.norm();
    rep.stateCorrelation.push_back(
        denom == 0.0 ? 0.0 : (err * Xk.transpose()).norm() / denom);
  }

  // Least-squares residual of the readout regression on final features,
  // with the frozen readout bias subtracted from the targets.
  const Matrix& Xl = states.back();
  const Matrix target =
      Y - net.readout().map.bias.replicate(1, n);
  const Matrix sol =
      Xl.transpose().colPivHouseholderQr().solve(target.transpose());
  const double lsNorm = (Xl.transpose() * sol - target.transpose()).norm();
  rep.lsResidual = lsNorm * lsNorm / static_cast<double>(n);
  return rep;
}

nlohmann::json OrthogonalityReport::toJson() const {
  nlohmann::json doc;
  doc["state_correlation"] = nlohmann::json::array();
  for (double c : stateCorrelation) {
    doc["state_correlation"].push_back(encodeReal(c));
  }
  doc["ls_residual"] = encodeReal(lsResidual);
  doc["train_loss"] = encodeReal(trainLoss);
  return doc;
}

}  // namespace mcn
