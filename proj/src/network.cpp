#include "mcn/network.hpp"

#include <stdexcept>
#include <string>
#include <unordered_map>

#include <Eigen/QR>

namespace mcn {
namespace {

[[noreturn]] void layerError(int k, const std::string& what) {
  throw std::invalid_argument("MCNNetwork: layer " + std::to_string(k) + ": " +
                              what);
}

std::string dimStr(Eigen::Index a, Eigen::Index b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace

MCNNetwork::MCNNetwork(Eigen::Index inputDim, Activation gamma,
                       std::vector<MCNLayer> layers, Readout readout)
    : inputDim_(inputDim),
      gamma_(gamma),
      layers_(std::move(layers)),
      readout_(std::move(readout)) {
  if (inputDim_ < 1) {
    throw std::invalid_argument("MCNNetwork: input_dim must be >= 1");
  }
  dims_.reserve(layers_.size() + 1);
  dims_.push_back(inputDim_);
  for (int k = 0; k < static_cast<int>(layers_.size()); ++k) {
    const MCNLayer& layer = layers_[static_cast<std::size_t>(k)];
    const Eigen::Index dk = dims_.back();
    if (layer.L.cols() != dk) {
      layerError(k, "cols(L) must equal the incoming state dim, got " +
                        dimStr(layer.L.cols(), dk));
    }
    if (layer.W.cols() != dk) {
      layerError(k, "cols(W) must equal the incoming state dim, got " +
                        dimStr(layer.W.cols(), dk));
    }
    const Eigen::Index m = layer.W.rows();
    if (layer.A.rows() != m) {
      layerError(k, "rows(A) must equal rows(W), got " +
                        dimStr(layer.A.rows(), m));
    }
    if (layer.Atilde.rows() != m) {
      layerError(k, "rows(Atilde) must equal rows(W), got " +
                        dimStr(layer.Atilde.rows(), m));
    }
    if (layer.Atilde.cols() != inputDim_) {
      layerError(k, "cols(Atilde) must equal input_dim, got " +
                        dimStr(layer.Atilde.cols(), inputDim_));
    }
    if (layer.skipIndex < 0 || layer.skipIndex > k) {
      layerError(k, "skip_index " + std::to_string(layer.skipIndex) +
                        " outside [0, " + std::to_string(k) + "]");
    }
    const Eigen::Index ds = dims_[static_cast<std::size_t>(layer.skipIndex)];
    if (layer.A.cols() != ds) {
      layerError(k, "cols(A) must equal the skip state's dim, got " +
                        dimStr(layer.A.cols(), ds));
    }
    if (!layer.L.allFinite() || !layer.W.allFinite() ||
        !layer.A.allFinite() || !layer.Atilde.allFinite()) {
      layerError(k, "non-finite weight or bias entry");
    }
    dims_.push_back(layer.outputDim());
  }
  if (readout_.map.cols() != dims_.back()) {
    throw std::invalid_argument(
        "MCNNetwork: readout cols must equal the final state dim, got " +
        dimStr(readout_.map.cols(), dims_.back()));
  }
  if (!readout_.map.allFinite()) {
    throw std::invalid_argument("MCNNetwork: non-finite readout entry");
  }
  if (readout_.mode == Readout::Mode::Fixed && readout_.map.rows() > 0) {
    if (readout_.map.rows() > readout_.map.cols()) {
      throw std::invalid_argument(
          "MCNNetwork: fixed readout cannot have more rows than cols (full "
          "row rank required)");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(readout_.map.weights);
    if (qr.rank() < readout_.map.rows()) {
      throw std::invalid_argument(
          "MCNNetwork: fixed readout must have full row rank");
    }
  }
}

Eigen::Index MCNNetwork::stateDim(int k) const {
  if (k < 0 || k >= static_cast<int>(dims_.size())) {
    throw std::out_of_range("MCNNetwork::stateDim: index " +
                            std::to_string(k) + " out of range");
  }
  return dims_[static_cast<std::size_t>(k)];
}

const MCNLayer& MCNNetwork::layer(int k) const {
  if (k < 0 || k >= depth()) {
    throw std::out_of_range("MCNNetwork::layer: index " + std::to_string(k) +
                            " out of range");
  }
  return layers_[static_cast<std::size_t>(k)];
}

MCNLayer& MCNNetwork::layerMutable(int k) {
  return const_cast<MCNLayer&>(static_cast<const MCNNetwork*>(this)->layer(k));
}

Forward MCNNetwork::forward(const Vector& x) const {
  if (x.size() != inputDim_) {
    throw std::invalid_argument("MCNNetwork::forward: input length " +
                                std::to_string(x.size()) + " != input_dim " +
                                std::to_string(inputDim_));
  }
  Forward result;
  result.states.reserve(layers_.size() + 1);
  result.states.push_back(x);
  for (const MCNLayer& layer : layers_) {
    const Vector& top = result.states.back();
    const Vector& skip =
        result.states[static_cast<std::size_t>(layer.skipIndex)];
    Vector next(layer.outputDim());
    next.head(layer.L.rows()) = layer.L.apply(top);
    if (layer.W.rows() > 0) {
      const Vector wBranch = layer.W.apply(top);
      Vector aBranch = layer.A.apply(skip);
      for (Eigen::Index j = 0; j < aBranch.size(); ++j) {
        aBranch(j) = layer.sigma.eval(aBranch(j));
      }
      Vector gPart = layer.Atilde.apply(x);
      for (Eigen::Index j = 0; j < gPart.size(); ++j) {
        gPart(j) = gamma_.eval(gPart(j));
      }
      next.tail(layer.W.rows()) = gPart + wBranch.cwiseMax(aBranch);
    }
    result.states.push_back(std::move(next));
  }
  result.output = readout_.map.apply(result.states.back());
  return result;
}

Matrix MCNNetwork::evalStates(const Matrix& X, bool applyReadout) const {
  if (X.rows() != inputDim_) {
    throw std::invalid_argument("MCNNetwork::evalOutput: input rows " +
                                std::to_string(X.rows()) + " != input_dim " +
                                std::to_string(inputDim_));
  }
  // States read by later layers (skip targets); x_0 is always live because
  // every Atilde reads it.
  std::vector<bool> keep(layers_.size() + 1, false);
  keep[0] = true;
  for (const MCNLayer& layer : layers_) {
    keep[static_cast<std::size_t>(layer.skipIndex)] = true;
  }
  std::unordered_map<int, Matrix> kept;
  kept.emplace(0, X);
  Matrix top = X;
  for (int k = 0; k < static_cast<int>(layers_.size()); ++k) {
    const MCNLayer& layer = layers_[static_cast<std::size_t>(k)];
    const Matrix& skip =
        layer.skipIndex == k ? top : kept.at(layer.skipIndex);
    Matrix next(layer.outputDim(), X.cols());
    next.topRows(layer.L.rows()) = layer.L.applyBatch(top);
    if (layer.W.rows() > 0) {
      const Matrix wBranch = layer.W.applyBatch(top);
      const Matrix aBranch = layer.sigma.apply(layer.A.applyBatch(skip));
      const Matrix gPart = gamma_.apply(layer.Atilde.applyBatch(X));
      next.bottomRows(layer.W.rows()) = gPart + wBranch.cwiseMax(aBranch);
    }
    top = std::move(next);
    if (k + 1 < static_cast<int>(keep.size()) &&
        keep[static_cast<std::size_t>(k + 1)]) {
      kept.emplace(k + 1, top);
    }
  }
  return applyReadout ? readout_.map.applyBatch(top) : top;
}

Matrix MCNNetwork::evalOutput(const Matrix& X) const {
  return evalStates(X, true);
}

Matrix MCNNetwork::evalFinalState(const Matrix& X) const {
  return evalStates(X, false);
}

MaxPattern MCNNetwork::maxPattern(const Vector& x) const {
  const Forward fw = forward(x);
  MaxPattern pattern(layers_.size());
  for (int k = 0; k < depth(); ++k) {
    const MCNLayer& layer = layers_[static_cast<std::size_t>(k)];
    const Vector& top = fw.states[static_cast<std::size_t>(k)];
    const Vector& skip =
        fw.states[static_cast<std::size_t>(layer.skipIndex)];
    const Vector wBranch = layer.W.apply(top);
    const Vector aRaw = layer.A.apply(skip);
    std::vector<bool>& bits = pattern[static_cast<std::size_t>(k)];
    bits.resize(static_cast<std::size_t>(layer.W.rows()));
    for (Eigen::Index j = 0; j < layer.W.rows(); ++j) {
      bits[static_cast<std::size_t>(j)] =
          wBranch(j) <= layer.sigma.eval(aRaw(j));
    }
  }
  return pattern;
}

Vector MCNNetwork::forwardWithPattern(const Vector& x,
                                      const MaxPattern& pattern) const {
  if (static_cast<int>(pattern.size()) != depth()) {
    throw std::invalid_argument(
        "MCNNetwork::forwardWithPattern: pattern depth mismatch");
  }
  std::vector<Vector> states;
  states.reserve(layers_.size() + 1);
  states.push_back(x);
  for (int k = 0; k < depth(); ++k) {
    const MCNLayer& layer = layers_[static_cast<std::size_t>(k)];
    const std::vector<bool>& bits = pattern[static_cast<std::size_t>(k)];
    if (static_cast<Eigen::Index>(bits.size()) != layer.W.rows()) {
      throw std::invalid_argument(
          "MCNNetwork::forwardWithPattern: pattern width mismatch at layer " +
          std::to_string(k));
    }
    const Vector& top = states.back();
    const Vector& skip = states[static_cast<std::size_t>(layer.skipIndex)];
    Vector next(layer.outputDim());
    next.head(layer.L.rows()) = layer.L.apply(top);
    if (layer.W.rows() > 0) {
      const Vector wBranch = layer.W.apply(top);
      const Vector aRaw = layer.A.apply(skip);
      const Vector gRaw = layer.Atilde.apply(x);
      for (Eigen::Index j = 0; j < layer.W.rows(); ++j) {
        const double branch = bits[static_cast<std::size_t>(j)]
                                  ? layer.sigma.eval(aRaw(j))
                                  : wBranch(j);
        next(layer.L.rows() + j) = gamma_.eval(gRaw(j)) + branch;
      }
    }
    states.push_back(std::move(next));
  }
  return readout_.map.apply(states.back());
}

long MCNNetwork::nonzeroParamCount() const {
  long count = readout_.map.nonzeroCount();
  for (const MCNLayer& layer : layers_) {
    count += layer.L.nonzeroCount() + layer.W.nonzeroCount() +
             layer.A.nonzeroCount() + layer.Atilde.nonzeroCount();
  }
  return count;
}

Eigen::Index MCNNetwork::maxStateDim() const {
  Eigen::Index best = 0;
  for (Eigen::Index d : dims_) best = std::max(best, d);
  return best;
}

}  // namespace mcn
