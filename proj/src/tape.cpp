#include "mcn/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mcn {
namespace {

[[noreturn]] void shapeError(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(
      std::string("Tape::") + op + ": incompatible shapes " +
      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
      std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

Tape::NodeId Tape::push(Node node) {
  evalNode(node);
  node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tape::Node& Tape::at(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw std::out_of_range("Tape: node id " + std::to_string(id) +
                            " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::at(NodeId id) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->at(id));
}

Tape::NodeId Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::variable(Matrix value) {
  Node n;
  n.op = Op::Variable;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Add;
  n.inputs = {a, b};
  return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Sub;
  n.inputs = {a, b};
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a};
  n.factor = factor;
  return push(std::move(n));
}

Tape::NodeId Tape::addColwise(NodeId a, NodeId bias) {
  Node n;
  n.op = Op::AddColwise;
  n.inputs = {a, bias};
  return push(std::move(n));
}

Tape::NodeId Tape::cwiseMax(NodeId a, NodeId b) {
  Node n;
  n.op = Op::CwiseMax;
  n.inputs = {a, b};
  return push(std::move(n));
}

Tape::NodeId Tape::activate(NodeId a, const Activation& act) {
  if (!act.differentiable()) {
    throw std::invalid_argument(
        std::string("Tape::activate: activation '") + act.name() +
        "' cannot appear in a differentiated program");
  }
  Node n;
  n.op = Op::Activate;
  n.inputs = {a};
  n.act = act;
  return push(std::move(n));
}

Tape::NodeId Tape::concatRows(const std::vector<NodeId>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("Tape::concatRows: needs at least one part");
  }
  Node n;
  n.op = Op::ConcatRows;
  n.inputs = parts;
  return push(std::move(n));
}

Tape::NodeId Tape::squareLossMean(NodeId pred, NodeId target) {
  Node n;
  n.op = Op::SquareLossMean;
  n.inputs = {pred, target};
  return push(std::move(n));
}

Tape::NodeId Tape::crossEntropyLossMean(NodeId pred, NodeId target) {
  Node n;
  n.op = Op::CrossEntropyLossMean;
  n.inputs = {pred, target};
  return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const { return at(id).value; }

const Matrix& Tape::grad(NodeId id) const { return at(id).grad; }

void Tape::setValue(NodeId id, const Matrix& v) {
  Node& n = at(id);
  if (n.op != Op::Constant && n.op != Op::Variable) {
    throw std::invalid_argument("Tape::setValue: node is not a leaf");
  }
  if (n.value.rows() != v.rows() || n.value.cols() != v.cols()) {
    shapeError("setValue", n.value, v);
  }
  n.value = v;
}

void Tape::evalNode(Node& node) {
  auto val = [this](NodeId id) -> const Matrix& { return at(id).value; };
  switch (node.op) {
    case Op::Constant:
    case Op::Variable:
      break;
    case Op::MatMul: {
      const Matrix& a = val(node.inputs[0]);
      const Matrix& b = val(node.inputs[1]);
      if (a.cols() != b.rows()) shapeError("matmul", a, b);
      node.value = a * b;
      break;
    }
    case Op::Add: {
      const Matrix& a = val(node.inputs[0]);
      const Matrix& b = val(node.inputs[1]);
      if (a.rows() != b.rows() || a.cols() != b.cols()) shapeError("add", a, b);
      node.value = a + b;
      break;
    }
    case Op::Sub: {
      const Matrix& a = val(node.inputs[0]);
      const Matrix& b = val(node.inputs[1]);
      if (a.rows() != b.rows() || a.cols() != b.cols()) shapeError("sub", a, b);
      node.value = a - b;
      break;
    }
    case Op::Scale: {
      node.value = node.factor * val(node.inputs[0]);
      break;
    }
    case Op::AddColwise: {
      const Matrix& a = val(node.inputs[0]);
      const Matrix& b = val(node.inputs[1]);
      if (b.cols() != 1 || a.rows() != b.rows()) shapeError("addColwise", a, b);
      node.value = a.colwise() + Eigen::VectorXd(b.col(0));
      break;
    }
    case Op::CwiseMax: {
      const Matrix& a = val(node.inputs[0]);
      const Matrix& b = val(node.inputs[1]);
      if (a.rows() != b.rows() || a.cols() != b.cols()) {
        shapeError("cwiseMax", a, b);
      }
      node.value = a.cwiseMax(b);
      break;
    }
    case Op::Activate: {
      node.value = node.act.apply(val(node.inputs[0]));
      break;
    }
    case Op::ConcatRows: {
      Eigen::Index rows = 0;
      const Eigen::Index cols = val(node.inputs[0]).cols();
      for (NodeId id : node.inputs) {
        const Matrix& part = val(id);
        if (part.cols() != cols) shapeError("concatRows", val(node.inputs[0]), part);
        rows += part.rows();
      }
      node.value.resize(rows, cols);
      Eigen::Index offset = 0;
      for (NodeId id : node.inputs) {
        const Matrix& part = val(id);
        node.value.middleRows(offset, part.rows()) = part;
        offset += part.rows();
      }
      break;
    }
    case Op::SquareLossMean: {
      const Matrix& p = val(node.inputs[0]);
      const Matrix& t = val(node.inputs[1]);
      if (p.rows() != t.rows() || p.cols() != t.cols()) {
        shapeError("squareLossMean", p, t);
      }
      node.value = Matrix::Constant(
          1, 1, (p - t).squaredNorm() / static_cast<double>(p.cols()));
      break;
    }
    case Op::CrossEntropyLossMean: {
      const Matrix& p = val(node.inputs[0]);
      const Matrix& t = val(node.inputs[1]);
      if (p.rows() != t.rows() || p.cols() != t.cols()) {
        shapeError("crossEntropyLossMean", p, t);
      }
      if (p.rows() < 1 || p.cols() < 1) {
        shapeError("crossEntropyLossMean", p, t);
      }
      double total = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double shift = p.col(j).maxCoeff();
        const double lse =
            shift + std::log((p.col(j).array() - shift).exp().sum());
        total += lse - t.col(j).dot(p.col(j));
      }
      node.value = Matrix::Constant(1, 1, total / static_cast<double>(p.cols()));
      break;
    }
  }
}

void Tape::recompute() {
  for (Node& node : nodes_) evalNode(node);
}

void Tape::backward(NodeId root) {
  const Node& r = at(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::invalid_argument("Tape::backward: root must be 1x1");
  }
  for (Node& node : nodes_) {
    node.grad.setZero(node.value.rows(), node.value.cols());
  }
  at(root).grad(0, 0) = 1.0;

  for (NodeId id = root; id >= 0; --id) {
    Node& node = at(id);
    if (node.grad.isZero(0.0)) continue;
    const Matrix& g = node.grad;
    switch (node.op) {
      case Op::Constant:
      case Op::Variable:
        break;
      case Op::MatMul: {
        Node& a = at(node.inputs[0]);
        Node& b = at(node.inputs[1]);
        a.grad.noalias() += g * b.value.transpose();
        b.grad.noalias() += a.value.transpose() * g;
        break;
      }
      case Op::Add:
        at(node.inputs[0]).grad += g;
        at(node.inputs[1]).grad += g;
        break;
      case Op::Sub:
        at(node.inputs[0]).grad += g;
        at(node.inputs[1]).grad -= g;
        break;
      case Op::Scale:
        at(node.inputs[0]).grad += node.factor * g;
        break;
      case Op::AddColwise:
        at(node.inputs[0]).grad += g;
        at(node.inputs[1]).grad.col(0) += g.rowwise().sum();
        break;
      case Op::CwiseMax: {
        Node& a = at(node.inputs[0]);
        Node& b = at(node.inputs[1]);
        // Ties route to the first argument.
        const Matrix mask =
            (a.value.array() >= b.value.array()).cast<double>().matrix();
        a.grad.array() += g.array() * mask.array();
        b.grad.array() += g.array() * (1.0 - mask.array());
        break;
      }
      case Op::Activate: {
        Node& a = at(node.inputs[0]);
        a.grad.array() += g.array() * node.act.applyDerivative(a.value).array();
        break;
      }
      case Op::ConcatRows: {
        Eigen::Index offset = 0;
        for (NodeId pid : node.inputs) {
          Node& part = at(pid);
          part.grad += g.middleRows(offset, part.value.rows());
          offset += part.value.rows();
        }
        break;
      }
      case Op::SquareLossMean: {
        Node& p = at(node.inputs[0]);
        Node& t = at(node.inputs[1]);
        const double scale = 2.0 * g(0, 0) / static_cast<double>(p.value.cols());
        const Matrix diff = scale * (p.value - t.value);
        p.grad += diff;
        t.grad -= diff;
        break;
      }
      case Op::CrossEntropyLossMean: {
        Node& p = at(node.inputs[0]);
        Node& t = at(node.inputs[1]);
        const double scale = g(0, 0) / static_cast<double>(p.value.cols());
        for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
          const double shift = p.value.col(j).maxCoeff();
          const Eigen::ArrayXd e = (p.value.col(j).array() - shift).exp();
          const Eigen::VectorXd softmax = (e / e.sum()).matrix();
          p.grad.col(j) += scale * (softmax - t.value.col(j));
          t.grad.col(j) -= scale * p.value.col(j);
        }
        break;
      }
    }
  }
}

}  // namespace mcn
