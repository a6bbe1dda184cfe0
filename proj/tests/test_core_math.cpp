// Linear maps, activations, and the differentiation tape.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mcn/activation.hpp"
#include "mcn/linear_map.hpp"
#include "mcn/tape.hpp"
#include "test_util.hpp"

using mcn::Activation;
using mcn::LinearMap;
using mcn::Matrix;
using mcn::Tape;
using mcn::Vector;

TEST_CASE("affine apply: identity and diagonal") {
  LinearMap id = LinearMap::Identity(2);
  Vector x(2);
  x << 3.0, -1.0;
  CHECK(id.apply(x) == x);

  Matrix diag(2, 2);
  diag << 2.0, 0.0, 0.0, 3.0;
  LinearMap scale{diag};
  Vector ones = Vector::Ones(2);
  Vector out = scale.apply(ones);
  CHECK(out(0) == 2.0);
  CHECK(out(1) == 3.0);
}

TEST_CASE("affine apply matches hand-summed dot products") {
  std::mt19937_64 rng(7);
  LinearMap map = testutil::randomMap(3, 2, rng);
  Vector x(2);
  x << 0.5, -0.25;
  Vector out = map.apply(x);
  for (Eigen::Index r = 0; r < 3; ++r) {
    double acc = map.bias(r);
    for (Eigen::Index c = 0; c < 2; ++c) acc += map.weights(r, c) * x(c);
    CHECK(out(r) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("affine apply rejects mismatched dims, naming both") {
  LinearMap map = LinearMap::Zero(3, 2);
  Vector x = Vector::Zero(4);
  try {
    map.apply(x);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
}

TEST_CASE("affine apply is exactly linear with zero bias") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    LinearMap map{testutil::randomMatrix(3, 4, rng)};
    Vector x = testutil::randomVector(4, rng);
    Vector y = testutil::randomVector(4, rng);
    const double a = 0.75, b = -1.5;
    Vector lhs = map.apply(a * x + b * y);
    Vector rhs = a * map.apply(x) + b * map.apply(y);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("induced l1 norm is the max column abs sum") {
  Matrix w(2, 3);
  w << 1.0, -2.0, 0.5, -3.0, 1.0, 0.25;
  LinearMap map{w};
  CHECK(map.inducedL1Norm() == doctest::Approx(4.0));  // column 0: 1+3
  CHECK(LinearMap::Zero(2, 2).inducedL1Norm() == 0.0);
}

TEST_CASE("activation eval basics") {
  Activation relu = Activation::Relu();
  CHECK(relu.eval(-1.0) == 0.0);
  CHECK(relu.eval(0.0) == 0.0);
  CHECK(relu.eval(2.0) == 2.0);

  Activation step = Activation::BinaryStep();
  CHECK(step.eval(-0.1) == 0.0);
  CHECK(step.eval(0.0) == 1.0);
  CHECK(step.eval(0.1) == 1.0);

  Activation expAct = Activation::ClampedExp();
  CHECK(expAct.eval(0.0) == 1.0);
}

TEST_CASE("clamped exp never overflows") {
  Activation expAct = Activation::ClampedExp();
  CHECK(std::isfinite(expAct.eval(1e6)));
  CHECK(expAct.eval(1e6) == std::exp(30.0));
  CHECK(expAct.eval(-1e6) == std::exp(-30.0));
  CHECK(expAct.rho() == std::exp(30.0));
  CHECK(expAct.boundedRho());
  CHECK_FALSE(Activation::UnclampedExp().boundedRho());
}

TEST_CASE("relu is 1-Lipschitz on random pairs") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  Activation relu = Activation::Relu();
  for (int i = 0; i < 1000; ++i) {
    const double a = dist(rng), b = dist(rng);
    CHECK(std::abs(relu.eval(a) - relu.eval(b)) <= std::abs(a - b) + 1e-15);
  }
}

TEST_CASE("custom activation carries rho but cannot be evaluated") {
  Activation c = Activation::CustomLipschitz(2.5);
  CHECK(c.rho() == 2.5);
  CHECK_FALSE(c.differentiable());
  CHECK_THROWS_AS(c.eval(0.0), std::logic_error);
  CHECK_THROWS_AS(Activation::CustomLipschitz(-1.0), std::invalid_argument);
}

TEST_CASE("tape: d(w^2)/dw = 2w") {
  Tape tape;
  auto w = tape.variable(Matrix::Constant(1, 1, 3.0));
  auto zero = tape.constant(Matrix::Zero(1, 1));
  auto loss = tape.squareLossMean(w, zero);
  CHECK(tape.value(loss)(0, 0) == 9.0);
  tape.backward(loss);
  CHECK(tape.grad(w)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("tape: max tie routes gradient to the first argument") {
  Tape tape;
  auto a = tape.variable(Matrix::Constant(1, 1, 1.0));
  auto b = tape.variable(Matrix::Constant(1, 1, 1.0));
  auto m = tape.cwiseMax(a, b);
  auto zero = tape.constant(Matrix::Zero(1, 1));
  auto loss = tape.squareLossMean(m, zero);
  tape.backward(loss);
  CHECK(tape.grad(a)(0, 0) == doctest::Approx(2.0));
  CHECK(tape.grad(b)(0, 0) == 0.0);
}

TEST_CASE("tape rejects non-differentiable activations") {
  Tape tape;
  auto x = tape.constant(Matrix::Zero(1, 1));
  CHECK_THROWS_AS(tape.activate(x, Activation::BinaryStep()),
                  std::invalid_argument);
  CHECK_THROWS_AS(tape.activate(x, Activation::CustomLipschitz(1.0)),
                  std::invalid_argument);
}

TEST_CASE("tape rejects shape mismatches at construction") {
  Tape tape;
  auto a = tape.constant(Matrix::Zero(2, 3));
  auto b = tape.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);
}

namespace {

// A two-block network expressed directly on the tape: each block computes
// concat(L x + bias, gamma(At x0 + bias) + max(W x + bias, relu(A x + bias))).
struct TapeProgram {
  Tape tape;
  std::vector<Tape::NodeId> params;
  Tape::NodeId loss = -1;
  // Smallest |W-branch - A-branch| gap across both blocks, used to keep
  // finite-difference probes away from max ties.
  double tieGap = 1e9;
};

TapeProgram buildProgram(unsigned seed) {
  TapeProgram prog;
  std::mt19937_64 rng(seed);
  Tape& t = prog.tape;
  const int batch = 4;
  auto x0 = t.constant(testutil::randomMatrix(2, batch, rng));
  auto target = t.constant(testutil::randomMatrix(1, batch, rng));

  auto block = [&](Tape::NodeId in, Eigen::Index dIn,
                   const Activation& gamma) {
    auto Lw = t.variable(testutil::randomMatrix(2, dIn, rng));
    auto Lb = t.variable(testutil::randomMatrix(2, 1, rng));
    auto Ww = t.variable(testutil::randomMatrix(2, dIn, rng));
    auto Wb = t.variable(testutil::randomMatrix(2, 1, rng));
    auto Aw = t.variable(testutil::randomMatrix(2, 2, rng));
    auto Ab = t.variable(testutil::randomMatrix(2, 1, rng));
    auto Tw = t.variable(testutil::randomMatrix(2, 2, rng));
    auto Tb = t.variable(testutil::randomMatrix(2, 1, rng));
    for (auto p : {Lw, Lb, Ww, Wb, Aw, Ab, Tw, Tb}) prog.params.push_back(p);

    auto lin = t.addColwise(t.matmul(Lw, in), Lb);
    auto wBranch = t.addColwise(t.matmul(Ww, in), Wb);
    auto aPre = t.addColwise(t.matmul(Aw, x0), Ab);
    auto aBranch = t.activate(aPre, Activation::Relu());
    auto gPart = t.activate(t.addColwise(t.matmul(Tw, x0), Tb), gamma);
    const Matrix gap = (t.value(wBranch) - t.value(aBranch)).cwiseAbs();
    // Stay away from both max ties and relu kinks.
    prog.tieGap = std::min(prog.tieGap, gap.minCoeff());
    prog.tieGap = std::min(prog.tieGap, t.value(aPre).cwiseAbs().minCoeff());
    auto maxed = t.add(gPart, t.cwiseMax(wBranch, aBranch));
    return t.concatRows({lin, maxed});
  };

  auto x1 = block(x0, 2, Activation::ClampedExp());
  auto x2 = block(x1, 4, Activation::Identity());
  auto psi = t.variable(testutil::randomMatrix(1, 4, rng));
  prog.params.push_back(psi);
  prog.loss = t.squareLossMean(t.matmul(psi, x2), target);
  return prog;
}

}  // namespace

TEST_CASE("tape gradients match central finite differences") {
  int programs = 0;
  unsigned seed = 1000;
  while (programs < 50) {
    TapeProgram prog = buildProgram(seed++);
    if (prog.tieGap < 0.02) continue;  // resample away from max ties
    ++programs;
    Tape& t = prog.tape;
    t.backward(prog.loss);
    std::vector<Matrix> grads;
    grads.reserve(prog.params.size());
    for (auto p : prog.params) grads.push_back(t.grad(p));

    const double h = 1e-4;
    for (std::size_t pi = 0; pi < prog.params.size(); ++pi) {
      const auto p = prog.params[pi];
      Matrix v = t.value(p);
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
          Matrix vp = v, vm = v;
          vp(r, c) += h;
          vm(r, c) -= h;
          t.setValue(p, vp);
          t.recompute();
          const double fp = t.value(prog.loss)(0, 0);
          t.setValue(p, vm);
          t.recompute();
          const double fm = t.value(prog.loss)(0, 0);
          t.setValue(p, v);
          const double fd = (fp - fm) / (2.0 * h);
          const double an = grads[pi](r, c);
          const double rel =
              std::abs(fd - an) / std::max(1.0, std::abs(an));
          CHECK(rel <= 1e-5);
        }
      }
      t.recompute();
    }
  }
  CHECK(programs == 50);
}

TEST_CASE("tape recompute tracks variable updates") {
  Tape tape;
  auto w = tape.variable(Matrix::Constant(1, 1, 2.0));
  auto zero = tape.constant(Matrix::Zero(1, 1));
  auto loss = tape.squareLossMean(w, zero);
  CHECK(tape.value(loss)(0, 0) == 4.0);
  tape.setValue(w, Matrix::Constant(1, 1, 5.0));
  tape.recompute();
  CHECK(tape.value(loss)(0, 0) == 25.0);
}
