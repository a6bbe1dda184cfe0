#include "mcn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace mcn {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("train: " + what);
}

void checkActivations(const MCNNetwork& net) {
  const Activation::Kind g = net.gamma().kind();
  if (g != Activation::Kind::Identity && g != Activation::Kind::Exp) {
    fail(std::string("gamma must be identity or the clamped exponential, got "
                     "'") +
         net.gamma().name() + "'");
  }
  for (int k = 0; k < net.depth(); ++k) {
    const Activation& s = net.layer(k).sigma;
    if (net.layer(k).W.rows() > 0 && !s.differentiable()) {
      fail("layer " + std::to_string(k) + " uses non-differentiable '" +
           s.name() + "'");
    }
  }
}

}  // namespace

void Dataset::validate(bool requireDistinct) const {
  if (X.cols() < 1) fail("dataset is empty");
  if (Y.cols() != X.cols()) {
    fail("inputs hold " + std::to_string(X.cols()) + " samples but targets " +
         std::to_string(Y.cols()));
  }
  if (X.rows() < 1 || Y.rows() < 1) fail("dataset has zero-dimensional rows");
  if (!X.allFinite() || !Y.allFinite()) fail("dataset has non-finite entries");
  if (!requireDistinct) return;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < X.cols(); ++j) {
      if ((X.col(i) - X.col(j)).lpNorm<Eigen::Infinity>() < 1e-12) {
        fail("input samples " + std::to_string(i) + " and " +
             std::to_string(j) + " coincide");
      }
    }
  }
}

LossProgram buildLossProgram(const MCNNetwork& net, const Matrix& X,
                             const Matrix& Y, LossKind loss,
                             const std::vector<int>& frozenLayers,
                             bool trainReadout) {
  if (X.rows() != net.inputDim()) {
    fail("input rows " + std::to_string(X.rows()) + " != network input dim " +
         std::to_string(net.inputDim()));
  }
  if (Y.rows() != net.outputDim()) {
    fail("target rows " + std::to_string(Y.rows()) +
         " != network output dim " + std::to_string(net.outputDim()));
  }
  if (X.cols() != Y.cols() || X.cols() < 1) fail("batch shapes disagree");
  checkActivations(net);
  std::vector<bool> frozen(static_cast<std::size_t>(net.depth()), false);
  for (int k : frozenLayers) {
    if (k < 0 || k >= net.depth()) {
      fail("frozen layer index " + std::to_string(k) + " out of range");
    }
    frozen[static_cast<std::size_t>(k)] = true;
  }

  LossProgram prog;
  Tape& tape = prog.tape;
  using Field = LossProgram::Field;

  auto leaf = [&](const Matrix& value, bool trainable, int layer, Field field) {
    if (trainable && value.size() > 0) {
      const Tape::NodeId id = tape.variable(value);
      prog.params.push_back({id, layer, field});
      return id;
    }
    return tape.constant(value);
  };
  auto affine = [&](const LinearMap& map, Tape::NodeId src, bool trainable,
                    int layer, Field wField, Field bField) {
    const Tape::NodeId w = leaf(map.weights, trainable, layer, wField);
    const Tape::NodeId b = leaf(Matrix(map.bias), trainable, layer, bField);
    return tape.addColwise(tape.matmul(w, src), b);
  };

  prog.inputs = tape.constant(X);
  prog.targets = tape.constant(Y);

  std::vector<Tape::NodeId> states;
  states.push_back(prog.inputs);
  for (int k = 0; k < net.depth(); ++k) {
    const MCNLayer& layer = net.layer(k);
    const bool live = !frozen[static_cast<std::size_t>(k)];
    const Tape::NodeId top = states.back();
    const Tape::NodeId skip =
        states[static_cast<std::size_t>(layer.skipIndex)];
    std::vector<Tape::NodeId> parts;
    if (layer.L.rows() > 0) {
      parts.push_back(
          affine(layer.L, top, live, k, Field::LWeights, Field::LBias));
    }
    if (layer.W.rows() > 0) {
      const Tape::NodeId wBranch =
          affine(layer.W, top, live, k, Field::WWeights, Field::WBias);
      const Tape::NodeId aBranch = tape.activate(
          affine(layer.A, skip, live, k, Field::AWeights, Field::ABias),
          layer.sigma);
      const Tape::NodeId gate = tape.activate(
          affine(layer.Atilde, prog.inputs, live, k, Field::AtildeWeights,
                 Field::AtildeBias),
          net.gamma());
      parts.push_back(tape.add(gate, tape.cwiseMax(wBranch, aBranch)));
    }
    states.push_back(parts.size() == 1 ? parts.front()
                                       : tape.concatRows(parts));
  }
  prog.finalState = states.back();

  const bool psiTrainable =
      trainReadout && net.readout().mode == Readout::Mode::Learnable;
  const Tape::NodeId psiW =
      leaf(net.readout().map.weights, psiTrainable, -1, Field::PsiWeights);
  const Tape::NodeId psiB = tape.constant(Matrix(net.readout().map.bias));
  prog.prediction = tape.addColwise(tape.matmul(psiW, prog.finalState), psiB);
  prog.loss = loss == LossKind::Square
                  ? tape.squareLossMean(prog.prediction, prog.targets)
                  : tape.crossEntropyLossMean(prog.prediction, prog.targets);
  return prog;
}

void writeParams(const LossProgram& program, MCNNetwork& net) {
  using Field = LossProgram::Field;
  for (const LossProgram::ParamRef& ref : program.params) {
    const Matrix& v = program.tape.value(ref.node);
    if (ref.layer < 0) {
      net.readoutMutable().map.weights = v;
      continue;
    }
    MCNLayer& layer = net.layerMutable(ref.layer);
    switch (ref.field) {
      case Field::LWeights: layer.L.weights = v; break;
      case Field::LBias: layer.L.bias = v.col(0); break;
      case Field::WWeights: layer.W.weights = v; break;
      case Field::WBias: layer.W.bias = v.col(0); break;
      case Field::AWeights: layer.A.weights = v; break;
      case Field::ABias: layer.A.bias = v.col(0); break;
      case Field::AtildeWeights: layer.Atilde.weights = v; break;
      case Field::AtildeBias: layer.Atilde.bias = v.col(0); break;
      case Field::PsiWeights: net.readoutMutable().map.weights = v; break;
    }
  }
}

Matrix solveReadout(const Matrix& features, const Matrix& target) {
  if (features.cols() != target.cols() || features.cols() < 1) {
    fail("readout solve: feature/target sample counts disagree");
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(features.transpose());
  return cod.solve(target.transpose()).transpose();
}

double leastSquaresLoss(const Matrix& features, const Matrix& targets) {
  const Matrix w = solveReadout(features, targets);
  return (w * features - targets).squaredNorm() /
         static_cast<double>(features.cols());
}

std::uint64_t restartSeed(std::uint64_t master, int index) {
  std::uint64_t z =
      master + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

TrainTrace train(MCNNetwork& net, const Dataset& data, const TrainConfig& cfg) {
  const auto tick = std::chrono::steady_clock::now();
  data.validate();
  if (cfg.lr <= 0.0) fail("lr must be positive");
  if (cfg.epochs < 1) fail("epochs must be >= 1");
  if (cfg.batch < 0 || cfg.batch > data.sampleCount()) {
    fail("batch size out of range");
  }
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) fail("momentum not in [0,1)");
  if (cfg.beta1 <= 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 <= 0.0 ||
      cfg.beta2 >= 1.0 || cfg.adamEps <= 0.0) {
    fail("adam parameters out of range");
  }
  if (cfg.gradTol < 0.0) fail("gradTol must be non-negative");
  if (cfg.psiRefitEvery < 0) fail("psiRefitEvery must be non-negative");
  if (cfg.psiRefitEvery > 0 &&
      net.readout().mode != Readout::Mode::Learnable) {
    fail("readout refit requires a learnable readout");
  }
  const bool fullBatch = cfg.batch == 0 || cfg.batch >= data.sampleCount();
  if (cfg.backtracking && (cfg.optimizer != OptimizerKind::Sgd ||
                           cfg.momentum != 0.0 || !fullBatch)) {
    fail("backtracking requires full-batch plain SGD");
  }

  LossProgram prog = buildLossProgram(net, data.X, data.Y, cfg.loss,
                                      cfg.frozenLayers, true);
  Tape& tape = prog.tape;
  const std::size_t nParams = prog.params.size();

  Tape::NodeId psiNode = -1;
  for (const LossProgram::ParamRef& ref : prog.params) {
    if (ref.layer < 0) psiNode = ref.node;
  }
  if (cfg.psiRefitEvery > 0 && psiNode < 0) {
    fail("readout refit requested but the readout is not trainable");
  }

  auto currentLoss = [&]() {
    const double v = tape.value(prog.loss)(0, 0);
    return v;
  };
  auto requireFinite = [&](double v, int epoch) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("train: non-finite loss at epoch " +
                               std::to_string(epoch));
    }
  };
  auto gradientNorm = [&]() {
    double sq = 0.0;
    for (const LossProgram::ParamRef& ref : prog.params) {
      sq += tape.grad(ref.node).squaredNorm();
    }
    return std::sqrt(sq);
  };
  auto refitReadout = [&]() {
    const double before = currentLoss();
    const Matrix saved = tape.value(psiNode);
    const Matrix w = solveReadout(tape.value(prog.finalState), data.Y);
    tape.setValue(psiNode, w);
    tape.recompute();
    // The closed-form solution can land a hair above an already-optimal
    // readout through factorization noise; never let a refit go uphill.
    if (!(currentLoss() <= before)) {
      tape.setValue(psiNode, saved);
      tape.recompute();
    }
  };

  TrainTrace trace;
  trace.initialLoss = currentLoss();
  requireFinite(trace.initialLoss, 0);
  double cur = trace.initialLoss;

  std::vector<Matrix> momentum(nParams);
  std::vector<Matrix> adamM(nParams);
  std::vector<Matrix> adamV(nParams);
  for (std::size_t i = 0; i < nParams; ++i) {
    const Matrix& v = tape.value(prog.params[i].node);
    momentum[i] = Matrix::Zero(v.rows(), v.cols());
    adamM[i] = Matrix::Zero(v.rows(), v.cols());
    adamV[i] = Matrix::Zero(v.rows(), v.cols());
  }
  long adamStep = 0;
  double lrCur = cfg.lr;
  double lastGradNorm = 0.0;

  auto applyStep = [&](double lr) {
    ++adamStep;
    for (std::size_t i = 0; i < nParams; ++i) {
      const Tape::NodeId id = prog.params[i].node;
      const Matrix& g = tape.grad(id);
      Matrix v = tape.value(id);
      if (cfg.optimizer == OptimizerKind::Sgd) {
        momentum[i] = cfg.momentum * momentum[i] + g;
        v -= lr * momentum[i];
      } else {
        adamM[i] = cfg.beta1 * adamM[i] + (1.0 - cfg.beta1) * g;
        adamV[i] =
            cfg.beta2 * adamV[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const double mScale =
            1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(adamStep)));
        const double vScale =
            1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(adamStep)));
        v.array() -= lr * (mScale * adamM[i].array()) /
                     ((vScale * adamV[i].array()).sqrt() + cfg.adamEps);
      }
      tape.setValue(id, v);
    }
    tape.recompute();
  };

  std::mt19937_64 rng(cfg.seed);
  LossProgram miniProg;
  std::vector<Eigen::Index> order;
  if (!fullBatch) {
    miniProg = buildLossProgram(net, data.X.leftCols(cfg.batch),
                                data.Y.leftCols(cfg.batch), cfg.loss,
                                cfg.frozenLayers, true);
    order.resize(static_cast<std::size_t>(data.sampleCount()));
    std::iota(order.begin(), order.end(), 0);
  }

  if (fullBatch) {
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      tape.backward(prog.loss);
      lastGradNorm = gradientNorm();
      if (lastGradNorm <= cfg.gradTol) {
        trace.stopReason = "grad-tol";
        break;
      }
      if (cfg.backtracking) {
        std::vector<Matrix> saved(nParams);
        for (std::size_t i = 0; i < nParams; ++i) {
          saved[i] = tape.value(prog.params[i].node);
        }
        bool accepted = false;
        double lr = lrCur;
        for (int attempt = 0; attempt <= 40; ++attempt) {
          for (std::size_t i = 0; i < nParams; ++i) {
            tape.setValue(prog.params[i].node,
                          saved[i] - lr * tape.grad(prog.params[i].node));
          }
          tape.recompute();
          const double candidate = currentLoss();
          if (std::isfinite(candidate) && candidate <= cur) {
            cur = candidate;
            lrCur = std::min(cfg.lr, lr * 2.0);
            accepted = true;
            break;
          }
          lr *= 0.5;
        }
        if (!accepted) {
          for (std::size_t i = 0; i < nParams; ++i) {
            tape.setValue(prog.params[i].node, saved[i]);
          }
          tape.recompute();
          trace.stopReason = "stalled";
          break;
        }
      } else {
        applyStep(lrCur);
        cur = currentLoss();
        requireFinite(cur, epoch);
      }
      if (cfg.psiRefitEvery > 0 && epoch % cfg.psiRefitEvery == 0) {
        refitReadout();
        cur = currentLoss();
        requireFinite(cur, epoch);
      }
      trace.epochLoss.push_back(cur);
    }
    if (trace.stopReason.empty()) {
      trace.stopReason = "epoch-budget";
      tape.backward(prog.loss);
      lastGradNorm = gradientNorm();
    }
    writeParams(prog, net);
  } else {
    Tape& mini = miniProg.tape;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      const Eigen::Index steps = data.sampleCount() / cfg.batch;
      Matrix bx(data.X.rows(), cfg.batch);
      Matrix by(data.Y.rows(), cfg.batch);
      for (Eigen::Index s = 0; s < steps; ++s) {
        for (Eigen::Index c = 0; c < cfg.batch; ++c) {
          const Eigen::Index src =
              order[static_cast<std::size_t>(s * cfg.batch + c)];
          bx.col(c) = data.X.col(src);
          by.col(c) = data.Y.col(src);
        }
        // Mirror the full-batch parameter values into the minibatch program.
        for (std::size_t i = 0; i < nParams; ++i) {
          mini.setValue(miniProg.params[i].node,
                        tape.value(prog.params[i].node));
        }
        mini.setValue(miniProg.inputs, bx);
        mini.setValue(miniProg.targets, by);
        mini.recompute();
        mini.backward(miniProg.loss);
        ++adamStep;
        for (std::size_t i = 0; i < nParams; ++i) {
          const Matrix& g = mini.grad(miniProg.params[i].node);
          Matrix v = tape.value(prog.params[i].node);
          if (cfg.optimizer == OptimizerKind::Sgd) {
            momentum[i] = cfg.momentum * momentum[i] + g;
            v -= lrCur * momentum[i];
          } else {
            adamM[i] = cfg.beta1 * adamM[i] + (1.0 - cfg.beta1) * g;
            adamV[i] =
                cfg.beta2 * adamV[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            const double mScale =
                1.0 /
                (1.0 - std::pow(cfg.beta1, static_cast<double>(adamStep)));
            const double vScale =
                1.0 /
                (1.0 - std::pow(cfg.beta2, static_cast<double>(adamStep)));
            v.array() -= lrCur * (mScale * adamM[i].array()) /
                         ((vScale * adamV[i].array()).sqrt() + cfg.adamEps);
          }
          tape.setValue(prog.params[i].node, v);
        }
      }
      tape.recompute();
      cur = currentLoss();
      requireFinite(cur, epoch);
      if (cfg.psiRefitEvery > 0 && epoch % cfg.psiRefitEvery == 0) {
        refitReadout();
        cur = currentLoss();
        requireFinite(cur, epoch);
      }
      trace.epochLoss.push_back(cur);
      tape.backward(prog.loss);
      lastGradNorm = gradientNorm();
      if (lastGradNorm <= cfg.gradTol) {
        trace.stopReason = "grad-tol";
        break;
      }
    }
    if (trace.stopReason.empty()) trace.stopReason = "epoch-budget";
    writeParams(prog, net);
  }

  trace.finalLoss = cur;
  trace.gradNorm = lastGradNorm;
  const auto tock = std::chrono::steady_clock::now();
  trace.wallMs =
      std::chrono::duration<double, std::milli>(tock - tick).count();
  return trace;
}

}  // namespace mcn
