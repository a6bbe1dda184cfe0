// JSON round-trip fidelity and malformed-document rejection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <string>

#include "mcn/serialize.hpp"
#include "test_util.hpp"

using mcn::Activation;
using mcn::LinearMap;
using mcn::Matrix;
using mcn::MCNLayer;
using mcn::MCNNetwork;
using mcn::Readout;
using nlohmann::json;

namespace {

bool bitIdentical(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bitIdentical(const LinearMap& a, const LinearMap& b) {
  return bitIdentical(a.weights, b.weights) &&
         bitIdentical(Matrix(a.bias), Matrix(b.bias));
}

json minimalDoc() {
  MCNLayer layer;
  layer.L = LinearMap::Zero(1, 1);
  layer.W = LinearMap::Zero(1, 1);
  layer.A = LinearMap::Zero(1, 1);
  layer.Atilde = LinearMap::Zero(1, 1);
  Readout readout{LinearMap::Identity(2), Readout::Mode::Fixed};
  MCNNetwork net(1, Activation::ClampedExp(), {layer}, readout);
  return mcn::networkToJson(net);
}

}  // namespace

TEST_CASE("real codec round-trips awkward doubles exactly") {
  const double values[] = {0.0,    -0.0,   0.1,       1.0 / 3.0, 6.25e-2,
                           1e300,  5e-324, 0x1p-52,   -2.5,      3.141592653589793,
                           1.5e-7, 2.0,    -1.0 / 3.0};
  for (double v : values) {
    const std::string s = mcn::encodeReal(v);
    const double back = mcn::decodeReal(json(s), "x");
    CHECK(std::memcmp(&v, &back, sizeof v) == 0);
  }
}

TEST_CASE("decode accepts plain JSON numbers and rejects junk") {
  CHECK(mcn::decodeReal(json(2.5), "x") == 2.5);
  CHECK(mcn::decodeReal(json(3), "x") == 3.0);
  CHECK_THROWS_WITH_AS(mcn::decodeReal(json("zebra"), "f"),
                       doctest::Contains("f"), std::runtime_error);
  CHECK_THROWS_AS(mcn::decodeReal(json(true), "x"), std::runtime_error);
  CHECK_THROWS_AS(mcn::decodeReal(json("inf"), "x"), std::runtime_error);
}

TEST_CASE("zero net round-trips structurally") {
  json doc = minimalDoc();
  MCNNetwork net = mcn::networkFromJson(doc);
  CHECK(net.inputDim() == 1);
  CHECK(net.depth() == 1);
  CHECK(net.gamma().kind() == Activation::Kind::Exp);
  CHECK(net.readout().mode == Readout::Mode::Fixed);
  CHECK(mcn::networkToJson(net) == doc);
}

TEST_CASE("random 3-layer net round-trips bit-identically") {
  testutil::RandomNetSpec spec;
  spec.inputDim = 3;
  spec.depth = 3;
  spec.dL = 2;
  spec.maxWidth = 2;
  spec.outputDim = 2;
  spec.gamma = Activation::ClampedExp();
  MCNNetwork net = randomNet(12345, spec);

  const std::string text = mcn::serializeNetwork(net);
  MCNNetwork back = mcn::deserializeNetwork(text);
  REQUIRE(back.depth() == net.depth());
  for (int k = 0; k < net.depth(); ++k) {
    CHECK(bitIdentical(back.layer(k).L, net.layer(k).L));
    CHECK(bitIdentical(back.layer(k).W, net.layer(k).W));
    CHECK(bitIdentical(back.layer(k).A, net.layer(k).A));
    CHECK(bitIdentical(back.layer(k).Atilde, net.layer(k).Atilde));
    CHECK(back.layer(k).skipIndex == net.layer(k).skipIndex);
    CHECK(back.layer(k).sigma.kind() == net.layer(k).sigma.kind());
  }
  CHECK(bitIdentical(back.readout().map, net.readout().map));
  // A second serialization pass is byte-identical (stable canonical form).
  CHECK(mcn::serializeNetwork(back) == text);
}

TEST_CASE("mismatched dimensions are rejected with a field path") {
  json doc = minimalDoc();
  doc["layers"][0]["W"]["rows"] = 2;  // weights array no longer matches
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc),
                       doctest::Contains("layers[0].W"), std::runtime_error);

  json doc2 = minimalDoc();
  doc2["layers"][0]["A"]["cols"] = 3;
  doc2["layers"][0]["A"]["weights"] = {"0", "0", "0"};
  // Consistent map, but cols(A) disagrees with the skip state's dimension.
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc2), doctest::Contains("layer 0"),
                       std::runtime_error);
}

TEST_CASE("missing and malformed fields are rejected with paths") {
  json doc = minimalDoc();
  doc.erase("gamma");
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc), doctest::Contains("gamma"),
                       std::runtime_error);

  json doc2 = minimalDoc();
  doc2["layers"][0]["sigma"] = "softplus";
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc2),
                       doctest::Contains("softplus"), std::runtime_error);

  json doc3 = minimalDoc();
  doc3["layers"][0]["d_L"] = 7;
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc3), doctest::Contains("d_L"),
                       std::runtime_error);

  json doc4 = minimalDoc();
  doc4["readout"]["mode"] = "frozen";
  CHECK_THROWS_WITH_AS(mcn::networkFromJson(doc4), doctest::Contains("mode"),
                       std::runtime_error);

  CHECK_THROWS_AS(mcn::deserializeNetwork("{ not json"), std::runtime_error);
}

TEST_CASE("weights written as plain numbers still load") {
  json doc = minimalDoc();
  doc["readout"]["weights"] = {1.0, 0.0, 0.0, 1.0};
  doc["readout"]["bias"] = {0, 0};
  MCNNetwork net = mcn::networkFromJson(doc);
  CHECK(net.readout().map.weights(0, 0) == 1.0);
}

TEST_CASE("bias is optional and defaults to zero") {
  json doc = minimalDoc();
  doc["layers"][0]["L"].erase("bias");
  MCNNetwork net = mcn::networkFromJson(doc);
  CHECK(net.layer(0).L.bias(0) == 0.0);
}
