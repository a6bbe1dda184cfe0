#include "mcn/serialize.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace mcn {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("network JSON: " + path + ": " + what);
}

const json& field(const json& j, const char* name, const std::string& path) {
  auto it = j.find(name);
  if (it == j.end()) fail(path + "." + name, "missing field");
  return *it;
}

long intField(const json& j, const char* name, const std::string& path) {
  const json& v = field(j, name, path);
  if (!v.is_number_integer()) fail(path + "." + name, "expected an integer");
  return v.get<long>();
}

std::string activationName(const Activation& act) {
  switch (act.kind()) {
    case Activation::Kind::Identity:
    case Activation::Kind::Relu:
    case Activation::Kind::Exp:
    case Activation::Kind::BinaryStep:
      return act.name();
    default:
      throw std::runtime_error(
          std::string("network JSON: activation '") + act.name() +
          "' has no serialized form");
  }
}

Activation activationFromName(const std::string& name,
                              const std::string& path) {
  if (name == "identity") return Activation::Identity();
  if (name == "relu") return Activation::Relu();
  if (name == "exp") return Activation::ClampedExp();
  if (name == "binary-step") return Activation::BinaryStep();
  fail(path, "unknown activation '" + name + "'");
}

}  // namespace

std::string encodeReal(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("encodeReal: conversion failed");
  }
  return std::string(buf, res.ptr);
}

double decodeReal(const json& j, const std::string& path) {
  double value = 0.0;
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail(path, "not a decimal number: '" + s + "'");
    }
  } else if (j.is_number()) {
    value = j.get<double>();
  } else {
    fail(path, "expected a number or decimal string");
  }
  if (!std::isfinite(value)) fail(path, "non-finite value");
  return value;
}

json linearMapToJson(const LinearMap& map) {
  json j;
  j["rows"] = map.rows();
  j["cols"] = map.cols();
  json weights = json::array();
  for (Eigen::Index r = 0; r < map.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
      weights.push_back(encodeReal(map.weights(r, c)));
    }
  }
  j["weights"] = std::move(weights);
  json bias = json::array();
  for (Eigen::Index r = 0; r < map.rows(); ++r) {
    bias.push_back(encodeReal(map.bias(r)));
  }
  j["bias"] = std::move(bias);
  return j;
}

LinearMap linearMapFromJson(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  const long rows = intField(j, "rows", path);
  const long cols = intField(j, "cols", path);
  if (rows < 0 || cols < 0) fail(path, "negative dimension");
  const json& weights = field(j, "weights", path);
  if (!weights.is_array()) fail(path + ".weights", "expected an array");
  if (static_cast<long>(weights.size()) != rows * cols) {
    fail(path + ".weights", "expected " + std::to_string(rows * cols) +
                                " entries, got " +
                                std::to_string(weights.size()));
  }
  Matrix w(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, ++idx) {
      w(r, c) = decodeReal(weights[idx],
                           path + ".weights[" + std::to_string(idx) + "]");
    }
  }
  Vector b = Vector::Zero(rows);
  if (auto it = j.find("bias"); it != j.end()) {
    if (!it->is_array()) fail(path + ".bias", "expected an array");
    if (static_cast<long>(it->size()) != rows) {
      fail(path + ".bias", "expected " + std::to_string(rows) +
                               " entries, got " + std::to_string(it->size()));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      b(r) = decodeReal((*it)[static_cast<std::size_t>(r)],
                        path + ".bias[" + std::to_string(r) + "]");
    }
  }
  return LinearMap(std::move(w), std::move(b));
}

json networkToJson(const MCNNetwork& net) {
  json j;
  j["input_dim"] = net.inputDim();
  j["gamma"] = activationName(net.gamma());
  json readout = linearMapToJson(net.readout().map);
  readout["mode"] =
      net.readout().mode == Readout::Mode::Fixed ? "fixed" : "learnable";
  j["readout"] = std::move(readout);
  json layers = json::array();
  for (const MCNLayer& layer : net.layers()) {
    json lj;
    lj["d_L"] = layer.L.rows();
    lj["skip_index"] = layer.skipIndex;
    lj["sigma"] = activationName(layer.sigma);
    lj["L"] = linearMapToJson(layer.L);
    lj["W"] = linearMapToJson(layer.W);
    lj["A"] = linearMapToJson(layer.A);
    lj["Atilde"] = linearMapToJson(layer.Atilde);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

MCNNetwork networkFromJson(const json& j) {
  if (!j.is_object()) fail("$", "expected an object");
  const long inputDim = intField(j, "input_dim", "$");
  const json& gammaField = field(j, "gamma", "$");
  if (!gammaField.is_string()) fail("$.gamma", "expected a string");
  const Activation gamma =
      activationFromName(gammaField.get<std::string>(), "$.gamma");

  const json& readoutJson = field(j, "readout", "$");
  Readout readout;
  readout.map = linearMapFromJson(readoutJson, "$.readout");
  const json& mode = field(readoutJson, "mode", "$.readout");
  if (!mode.is_string()) fail("$.readout.mode", "expected a string");
  const std::string modeStr = mode.get<std::string>();
  if (modeStr == "fixed") {
    readout.mode = Readout::Mode::Fixed;
  } else if (modeStr == "learnable") {
    readout.mode = Readout::Mode::Learnable;
  } else {
    fail("$.readout.mode", "expected 'fixed' or 'learnable'");
  }

  const json& layersJson = field(j, "layers", "$");
  if (!layersJson.is_array()) fail("$.layers", "expected an array");
  std::vector<MCNLayer> layers;
  layers.reserve(layersJson.size());
  for (std::size_t k = 0; k < layersJson.size(); ++k) {
    const std::string path = "$.layers[" + std::to_string(k) + "]";
    const json& lj = layersJson[k];
    if (!lj.is_object()) fail(path, "expected an object");
    MCNLayer layer;
    layer.L = linearMapFromJson(field(lj, "L", path), path + ".L");
    layer.W = linearMapFromJson(field(lj, "W", path), path + ".W");
    layer.A = linearMapFromJson(field(lj, "A", path), path + ".A");
    layer.Atilde =
        linearMapFromJson(field(lj, "Atilde", path), path + ".Atilde");
    const json& sigma = field(lj, "sigma", path);
    if (!sigma.is_string()) fail(path + ".sigma", "expected a string");
    layer.sigma =
        activationFromName(sigma.get<std::string>(), path + ".sigma");
    layer.skipIndex = static_cast<int>(intField(lj, "skip_index", path));
    const long dL = intField(lj, "d_L", path);
    if (dL != layer.L.rows()) {
      fail(path + ".d_L", "declared " + std::to_string(dL) +
                              " but L has " + std::to_string(layer.L.rows()) +
                              " rows");
    }
    layers.push_back(std::move(layer));
  }

  try {
    return MCNNetwork(inputDim, gamma, std::move(layers), std::move(readout));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("network JSON: ") + e.what());
  }
}

std::string serializeNetwork(const MCNNetwork& net) {
  return networkToJson(net).dump(2) + "\n";
}

MCNNetwork deserializeNetwork(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("network JSON: parse error: ") +
                             e.what());
  }
  return networkFromJson(j);
}

}  // namespace mcn
