// Maximum-and-concatenation network: layer type, network container, forward
// evaluation and max-pattern extraction.
#pragma once

#include <vector>

#include "mcn/activation.hpp"
#include "mcn/linear_map.hpp"

namespace mcn {

/// One block. Mapping state x_k (dim d_k) to
///   x_{k+1} = [ L(x_k) ; gamma(Atilde(x_0)) + max{ W(x_k), sigma(A(x_s)) } ]
/// where s = skipIndex selects an earlier state (0 <= s <= k) and gamma is
/// shared across the whole network.
struct MCNLayer {
  LinearMap L;       // d_L x d_k; d_L may be zero
  LinearMap W;       // m x d_k
  LinearMap A;       // m x d_s (the skip state's dimension)
  LinearMap Atilde;  // m x d_x
  Activation sigma = Activation::Relu();
  int skipIndex = 0;

  Eigen::Index outputDim() const { return L.rows() + W.rows(); }
  Eigen::Index maxWidth() const { return W.rows(); }
};

/// Final linear readout. A fixed readout must have full row rank so that
/// distinct final states map to distinct outputs.
struct Readout {
  enum class Mode { Fixed, Learnable };
  LinearMap map;
  Mode mode = Mode::Fixed;
};

/// All intermediate states of one forward pass plus the readout value.
struct Forward {
  std::vector<Vector> states;  // x_0 .. x_l
  Vector output;               // readout applied to x_l
};

/// Per-layer, per-unit branch record: bit j of layer k is true when the
/// W-branch value is <= the sigma(A)-branch value (the second branch is
/// active; ties count as active).
using MaxPattern = std::vector<std::vector<bool>>;

class MCNNetwork {
 public:
  MCNNetwork(Eigen::Index inputDim, Activation gamma,
             std::vector<MCNLayer> layers, Readout readout);

  Eigen::Index inputDim() const { return inputDim_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  /// Dimension of state x_k for k in [0, depth()].
  Eigen::Index stateDim(int k) const;
  Eigen::Index outputDim() const { return readout_.map.rows(); }

  const Activation& gamma() const { return gamma_; }
  const std::vector<MCNLayer>& layers() const { return layers_; }
  const MCNLayer& layer(int k) const;
  const Readout& readout() const { return readout_; }

  /// Mutable access for the training module; the caller owns the network
  /// exclusively and must preserve all shape invariants.
  MCNLayer& layerMutable(int k);
  Readout& readoutMutable() { return readout_; }

  Forward forward(const Vector& x) const;

  /// Batched readout values, one column per sample. Keeps only the states
  /// later layers actually read, so deep networks evaluate in modest memory.
  Matrix evalOutput(const Matrix& X) const;
  /// Batched final states x_l (no readout), same retention strategy.
  Matrix evalFinalState(const Matrix& X) const;

  MaxPattern maxPattern(const Vector& x) const;
  /// Forward pass with every max unit replaced by its pattern-selected
  /// branch; equals forward() when the pattern came from the same input.
  Vector forwardWithPattern(const Vector& x, const MaxPattern& pattern) const;

  /// Count of nonzero weights and biases across all layers plus the readout.
  long nonzeroParamCount() const;
  /// Largest state dimension (the width proxy used by the bound reports).
  Eigen::Index maxStateDim() const;

 private:
  Matrix evalStates(const Matrix& X, bool applyReadout) const;

  Eigen::Index inputDim_;
  Activation gamma_;
  std::vector<MCNLayer> layers_;
  Readout readout_;
  std::vector<Eigen::Index> dims_;  // d_0 .. d_l
};

}  // namespace mcn
