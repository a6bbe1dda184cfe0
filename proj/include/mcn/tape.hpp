// Reverse-mode differentiation over batched matrix expressions.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mcn/activation.hpp"

namespace mcn {

using Matrix = Eigen::MatrixXd;

/// A small expression tape for reverse-mode differentiation.
///
/// Nodes hold dense matrices (typically d x batch). Values are computed
/// eagerly when a node is created, so shape mismatches throw at graph
/// construction time. `recompute()` re-evaluates the whole tape in insertion
/// order against the current variable values, and `backward(root)` fills the
/// adjoints of every node reachable from `root` (which must be scalar, i.e.
/// 1x1).
///
/// Tie-breaking: `cwiseMax(a, b)` routes the gradient to `a` wherever the two
/// operands are equal, matching a subgradient choice that favors the first
/// argument.
class Tape {
 public:
  using NodeId = int;

  /// A node whose value never receives a gradient (inputs, targets).
  NodeId constant(Matrix value);
  /// A trainable leaf; its adjoint is accumulated by backward().
  NodeId variable(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  /// value(a) + value(bias) broadcast across columns; bias must be n x 1.
  NodeId addColwise(NodeId a, NodeId bias);
  NodeId cwiseMax(NodeId a, NodeId b);
  NodeId activate(NodeId a, const Activation& act);
  /// Stack values vertically; all parts must share a column count.
  NodeId concatRows(const std::vector<NodeId>& parts);
  /// (1 / cols) * ||pred - target||_F^2, a 1x1 node.
  NodeId squareLossMean(NodeId pred, NodeId target);
  /// Softmax cross-entropy averaged over columns, a 1x1 node:
  /// (1 / cols) * sum_j [logsumexp(pred col j) - target col j . pred col j].
  /// Target columns are probability vectors; logits are max-shifted for
  /// stability and the gradient is the fused (softmax - target) / cols form.
  NodeId crossEntropyLossMean(NodeId pred, NodeId target);

  const Matrix& value(NodeId id) const;
  const Matrix& grad(NodeId id) const;

  /// Overwrite a variable or constant leaf in place (shape must match).
  void setValue(NodeId id, const Matrix& v);

  /// Re-evaluate every node in insertion order.
  void recompute();

  /// Zero all adjoints, seed d(root) = 1 and sweep the tape in reverse.
  void backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Constant,
    Variable,
    MatMul,
    Add,
    Sub,
    Scale,
    AddColwise,
    CwiseMax,
    Activate,
    ConcatRows,
    SquareLossMean,
    CrossEntropyLossMean,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    double factor = 1.0;                       // Scale
    Activation act = Activation::Identity();   // Activate
    Matrix value;
    Matrix grad;
  };

  NodeId push(Node node);
  void evalNode(Node& node);
  const Node& at(NodeId id) const;
  Node& at(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace mcn
