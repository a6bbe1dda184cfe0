// First-order training of small networks: loss programs on the reverse-mode
// tape, SGD/Adam update loops, and a closed-form readout refit.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcn/network.hpp"
#include "mcn/tape.hpp"

namespace mcn {

/// A labelled sample set. Inputs and targets are stored one column per
/// sample; `oracle` is a free-form description of the generating process and
/// `noiseSigma` the noise level used, both echoed into experiment metadata.
struct Dataset {
  Matrix X;  // d_x x n
  Matrix Y;  // q x n
  std::string oracle;
  double noiseSigma = 0.0;

  Eigen::Index sampleCount() const { return X.cols(); }

  /// Shape/finiteness checks: matching column counts, n >= 1, finite entries.
  /// With `requireDistinct` also rejects duplicate input columns (closer than
  /// 1e-12 in sup norm), naming the colliding pair.
  void validate(bool requireDistinct = false) const;
};

enum class LossKind { Square, CrossEntropy };
enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  LossKind loss = LossKind::Square;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double lr = 1e-2;
  double momentum = 0.0;  // SGD only
  double beta1 = 0.9;     // Adam only
  double beta2 = 0.999;   // Adam only
  double adamEps = 1e-8;  // Adam only
  int epochs = 200;
  int batch = 0;  // 0 = full batch; otherwise minibatch size
  std::uint64_t seed = 0;
  double gradTol = 1e-6;
  /// Refit a learnable readout by least squares every this many epochs
  /// (0 = never). The readout bias stays frozen during refits.
  int psiRefitEvery = 0;
  /// Full-batch plain SGD only: halve the step on loss increase (up to 40
  /// halvings per epoch) and stop as stalled when no descent step exists.
  bool backtracking = false;
  /// Layer indices whose parameters are held fixed.
  std::vector<int> frozenLayers;
};

struct TrainTrace {
  std::vector<double> epochLoss;  // loss after each completed epoch
  double initialLoss = 0.0;
  double finalLoss = 0.0;
  double gradNorm = 0.0;  // at the stopping point
  double wallMs = 0.0;
  std::string stopReason;  // "grad-tol", "epoch-budget", or "stalled"
};

/// A differentiable loss computation for one network on one sample batch.
/// Trainable weights/biases live as tape variables; `params` maps each back
/// to its slot in the network so updates can be written through.
struct LossProgram {
  enum class Field {
    LWeights,
    LBias,
    WWeights,
    WBias,
    AWeights,
    ABias,
    AtildeWeights,
    AtildeBias,
    PsiWeights,
  };

  struct ParamRef {
    Tape::NodeId node = -1;
    int layer = -1;  // -1 = readout
    Field field = Field::PsiWeights;
  };

  Tape tape;
  std::vector<ParamRef> params;
  Tape::NodeId inputs = -1;      // constant leaf holding X
  Tape::NodeId targets = -1;     // constant leaf holding Y
  Tape::NodeId finalState = -1;  // x_l for the whole batch
  Tape::NodeId prediction = -1;  // readout of the final state
  Tape::NodeId loss = -1;        // 1x1
};

/// Builds the forward/loss graph for `net` on the batch (X, Y). Layers listed
/// in `frozenLayers` contribute constants instead of variables; the readout
/// weight matrix becomes a variable only when the readout is learnable and
/// `trainReadout` is set (its bias is always a constant).
///
/// Throws std::invalid_argument when shapes disagree, gamma is neither
/// identity nor the clamped exponential, or any activation in the trainable
/// part is not differentiable.
LossProgram buildLossProgram(const MCNNetwork& net, const Matrix& X,
                             const Matrix& Y, LossKind loss,
                             const std::vector<int>& frozenLayers = {},
                             bool trainReadout = true);

/// Copies the current tape values of every trainable parameter back into the
/// network.
void writeParams(const LossProgram& program, MCNNetwork& net);

/// Minimum-norm least-squares readout weights for min ||weights * F - T||_F,
/// returned as a (T.rows() x F.rows()) matrix.
Matrix solveReadout(const Matrix& features, const Matrix& target);

/// The optimal value of (1/n) ||Psi F - Y||_F^2 over all linear readouts Psi
/// (no intercept), computed by the normal-equations route above.
double leastSquaresLoss(const Matrix& features, const Matrix& targets);

/// Trains `net` in place on `data` and reports the trace. Deterministic for
/// a fixed seed; single-threaded. Throws on incompatible shapes, on a
/// non-differentiable activation anywhere in the trainable part (binary
/// steps included), on gamma outside {identity, clamped exp}, and on a
/// non-finite loss (naming the offending epoch).
TrainTrace train(MCNNetwork& net, const Dataset& data, const TrainConfig& cfg);

/// Derives the sub-seed for restart `index` from a master seed.
std::uint64_t restartSeed(std::uint64_t master, int index);

}  // namespace mcn
