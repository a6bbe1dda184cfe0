// Dense affine maps: the building block behind every linear operator in a
// network block (carried part, both max branches, input gate, readout).
#pragma once

#include <Eigen/Dense>

namespace mcn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// An affine map x -> weights * x + bias.
///
/// The bias is always materialized; a map constructed without one gets a zero
/// bias of the right length. Weights are stored dense; JSON serialization
/// flattens them row-major.
struct LinearMap {
  Matrix weights;  // rows x cols
  Vector bias;     // length rows

  LinearMap() = default;
  LinearMap(Matrix w, Vector b);
  explicit LinearMap(Matrix w);

  static LinearMap Zero(Eigen::Index rows, Eigen::Index cols);
  static LinearMap Identity(Eigen::Index n);

  Eigen::Index rows() const { return weights.rows(); }
  Eigen::Index cols() const { return weights.cols(); }

  /// weights * x + bias. Throws std::invalid_argument on a shape mismatch,
  /// naming both dimensions.
  Vector apply(const Vector& x) const;

  /// Batch version: applies the map to every column of X.
  Matrix applyBatch(const Matrix& X) const;

  /// Induced l1 operator norm of the weight matrix (max column abs sum).
  /// The bias does not change Lipschitz behaviour and is excluded.
  double inducedL1Norm() const;

  bool allFinite() const;
  long nonzeroCount() const;
};

}  // namespace mcn
