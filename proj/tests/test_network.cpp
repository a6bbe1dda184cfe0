// Network forward semantics, max patterns, and structural validation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mcn/network.hpp"
#include "test_util.hpp"

using mcn::Activation;
using mcn::LinearMap;
using mcn::Matrix;
using mcn::MaxPattern;
using mcn::MCNLayer;
using mcn::MCNNetwork;
using mcn::Readout;
using mcn::Vector;

namespace {

MCNNetwork zeroNet() {
  MCNLayer layer;
  layer.L = LinearMap::Zero(1, 1);
  layer.W = LinearMap::Zero(1, 1);
  layer.A = LinearMap::Zero(1, 1);
  layer.Atilde = LinearMap::Zero(1, 1);
  layer.sigma = Activation::Relu();
  layer.skipIndex = 0;
  Readout readout{LinearMap::Identity(2), Readout::Mode::Fixed};
  return MCNNetwork(1, Activation::ClampedExp(), {layer}, readout);
}

}  // namespace

TEST_CASE("zero single layer with gamma=exp maps 0 to [0, 1]") {
  MCNNetwork net = zeroNet();
  Vector x = Vector::Zero(1);
  auto fw = net.forward(x);
  REQUIRE(fw.states.size() == 2);
  CHECK(fw.states[1](0) == 0.0);
  CHECK(fw.states[1](1) == 1.0);  // exp(0) + max(0, 0)
}

TEST_CASE("identity L and W with zero skips pass the input through") {
  MCNLayer layer;
  layer.L = LinearMap::Identity(1);
  layer.W = LinearMap::Identity(1);
  layer.A = LinearMap::Zero(1, 1);
  layer.Atilde = LinearMap::Zero(1, 1);
  layer.sigma = Activation::Relu();
  Readout readout{LinearMap::Identity(2), Readout::Mode::Fixed};
  MCNNetwork net(1, Activation::Identity(), {layer}, readout);
  Vector x(1);
  x << 2.0;
  auto fw = net.forward(x);
  CHECK(fw.states[1](0) == 2.0);
  CHECK(fw.states[1](1) == 2.0);  // 0 + max(2, relu(0))
}

TEST_CASE("forward matches a straight-line re-implementation") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 3;
  spec.depth = 3;
  spec.dL = 2;
  spec.maxWidth = 2;
  spec.outputDim = 2;
  spec.gamma = Activation::ClampedExp();
  MCNNetwork net = randomNet(20250401, spec);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = testutil::randomVector(3, rng);
    // Unrolled evaluation using only Eigen arithmetic on the raw maps.
    std::vector<Vector> states{x};
    for (const MCNLayer& layer : net.layers()) {
      const Vector& prev = states.back();
      const Vector& skip = states[static_cast<std::size_t>(layer.skipIndex)];
      Vector lin = layer.L.weights * prev + layer.L.bias;
      Vector wb = layer.W.weights * prev + layer.W.bias;
      Vector ab = layer.A.weights * skip + layer.A.bias;
      for (Eigen::Index j = 0; j < ab.size(); ++j) {
        ab(j) = std::max(ab(j), 0.0);  // sigma = relu
      }
      Vector gb = layer.Atilde.weights * x + layer.Atilde.bias;
      for (Eigen::Index j = 0; j < gb.size(); ++j) {
        gb(j) = std::exp(std::clamp(gb(j), -30.0, 30.0));  // gamma
      }
      Vector next(lin.size() + wb.size());
      next << lin, gb + wb.cwiseMax(ab);
      states.push_back(next);
    }
    Vector expected =
        net.readout().map.weights * states.back() + net.readout().map.bias;
    auto fw = net.forward(x);
    CHECK((fw.output - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
    for (std::size_t k = 0; k < states.size(); ++k) {
      CHECK((fw.states[k] - states[k]).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("batched evaluation equals per-sample forward") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 2;
  spec.depth = 4;
  spec.gamma = Activation::Identity();
  MCNNetwork net = randomNet(7, spec);
  std::mt19937_64 rng(4);
  Matrix X = testutil::randomMatrix(2, 17, rng);
  Matrix out = net.evalOutput(X);
  Matrix fin = net.evalFinalState(X);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    auto fw = net.forward(X.col(c));
    CHECK((out.col(c) - fw.output).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((fin.col(c) - fw.states.back()).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("max pattern bit is 1 when the sigma(A) branch wins or ties") {
  // One unit: W(x) = x, sigma(A(x)) = relu(3) fixed.
  MCNLayer layer;
  layer.L = LinearMap::Zero(0, 1);
  layer.W = LinearMap::Identity(1);
  Matrix aw = Matrix::Zero(1, 1);
  Vector ab(1);
  ab << 3.0;
  layer.A = LinearMap(aw, ab);
  layer.Atilde = LinearMap::Zero(1, 1);
  layer.sigma = Activation::Relu();
  Readout readout{LinearMap::Identity(1), Readout::Mode::Fixed};
  MCNNetwork net(1, Activation::Identity(), {layer}, readout);

  Vector x(1);
  x << 2.0;  // W-branch 2 < 3
  CHECK(net.maxPattern(x)[0][0] == true);
  x << 5.0;  // W-branch 5 > 3
  CHECK(net.maxPattern(x)[0][0] == false);
  x << 3.0;  // tie: inclusive <=
  CHECK(net.maxPattern(x)[0][0] == true);
}

TEST_CASE("pattern substitution reproduces the forward pass") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 2;
  spec.depth = 3;
  spec.gamma = Activation::ClampedExp();
  std::mt19937_64 rng(17);
  for (unsigned seed = 100; seed < 110; ++seed) {
    MCNNetwork net = randomNet(seed, spec);
    Vector x = testutil::randomVector(2, rng);
    MaxPattern pattern = net.maxPattern(x);
    Vector sub = net.forwardWithPattern(x, pattern);
    Vector ref = net.forward(x).output;
    CHECK((sub - ref).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("output is affine within a fixed max pattern") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 2;
  spec.depth = 3;
  spec.gamma = Activation::Identity();
  spec.sigma = Activation::Relu();
  MCNNetwork net = randomNet(31, spec);
  std::mt19937_64 rng(23);
  int checked = 0;
  while (checked < 5) {
    Vector x = testutil::randomVector(2, rng);
    Vector d = testutil::randomVector(2, rng);
    double step = 1e-4;
    const MaxPattern p0 = net.maxPattern(x);
    // Shrink the probe interval until the pattern is constant on it.
    bool constant = false;
    for (int tries = 0; tries < 12 && !constant; ++tries, step /= 4.0) {
      constant = net.maxPattern(x + 4.0 * step * d) == p0 &&
                 net.maxPattern(x + 2.0 * step * d) == p0;
    }
    if (!constant) continue;
    ++checked;
    const double f0 = net.forward(x).output(0);
    const double f1 = net.forward(x + step * d).output(0);
    const double f2 = net.forward(x + 2.0 * step * d).output(0);
    // Second difference of an affine function vanishes.
    CHECK(std::abs(f2 - 2.0 * f1 + f0) <=
          1e-9 * std::max({1.0, std::abs(f0), std::abs(f2)}));
  }
}

TEST_CASE("construction rejects shape violations with layer identification") {
  MCNLayer layer;
  layer.L = LinearMap::Zero(1, 2);  // wrong: input_dim is 1
  layer.W = LinearMap::Zero(1, 1);
  layer.A = LinearMap::Zero(1, 1);
  layer.Atilde = LinearMap::Zero(1, 1);
  Readout readout{LinearMap::Identity(2), Readout::Mode::Fixed};
  CHECK_THROWS_WITH_AS(
      MCNNetwork(1, Activation::Identity(), {layer}, readout),
      doctest::Contains("layer 0"), std::invalid_argument);

  MCNLayer ok;
  ok.L = LinearMap::Zero(1, 1);
  ok.W = LinearMap::Zero(1, 1);
  ok.A = LinearMap::Zero(1, 1);
  ok.Atilde = LinearMap::Zero(1, 1);
  ok.skipIndex = 1;  // out of range for the first layer
  CHECK_THROWS_WITH_AS(MCNNetwork(1, Activation::Identity(), {ok}, readout),
                       doctest::Contains("skip_index"), std::invalid_argument);
}

TEST_CASE("fixed readout must have full row rank") {
  Matrix w(2, 2);
  w << 1.0, 2.0, 2.0, 4.0;  // rank 1
  Readout bad{LinearMap{w}, Readout::Mode::Fixed};
  CHECK_THROWS_AS(MCNNetwork(2, Activation::Identity(), {}, bad),
                  std::invalid_argument);
  // The same matrix is fine when the readout is learnable.
  Readout learn{LinearMap{w}, Readout::Mode::Learnable};
  MCNNetwork net(2, Activation::Identity(), {}, learn);
  CHECK(net.depth() == 0);
  Vector x(2);
  x << 1.0, 1.0;
  CHECK(net.forward(x).output(0) == doctest::Approx(3.0));
}

TEST_CASE("dimension chain is exposed through stateDim") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 3;
  spec.depth = 2;
  spec.dL = 1;
  spec.maxWidth = 2;
  MCNNetwork net = randomNet(5, spec);
  CHECK(net.stateDim(0) == 3);
  CHECK(net.stateDim(1) == 3);  // 1 + 2
  CHECK(net.stateDim(2) == 3);
  CHECK(net.layer(1).outputDim() == 3);
  CHECK_THROWS_AS(net.stateDim(3), std::out_of_range);
}
