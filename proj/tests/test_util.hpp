// Shared helpers for the test binaries: seeded random networks and data.
#pragma once

#include <random>

#include "mcn/network.hpp"

namespace testutil {

inline mcn::Matrix randomMatrix(Eigen::Index rows, Eigen::Index cols,
                                std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  mcn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

inline mcn::LinearMap randomMap(Eigen::Index rows, Eigen::Index cols,
                                std::mt19937_64& rng, double scale = 1.0) {
  return mcn::LinearMap(randomMatrix(rows, cols, rng, scale),
                        randomMatrix(rows, 1, rng, scale).col(0));
}

struct RandomNetSpec {
  int inputDim = 2;
  int depth = 3;
  int dL = 2;
  int maxWidth = 2;
  int outputDim = 1;
  mcn::Activation gamma = mcn::Activation::Identity();
  mcn::Activation sigma = mcn::Activation::Relu();
  double scale = 1.0;
  bool randomSkips = true;  // otherwise every skip_index = 0
};

inline mcn::MCNNetwork randomNet(unsigned seed, const RandomNetSpec& spec) {
  std::mt19937_64 rng(seed);
  std::vector<mcn::MCNLayer> layers;
  std::vector<Eigen::Index> dims{spec.inputDim};
  for (int k = 0; k < spec.depth; ++k) {
    mcn::MCNLayer layer;
    const Eigen::Index dk = dims.back();
    int skip = 0;
    if (spec.randomSkips && k > 0) {
      skip = static_cast<int>(rng() % static_cast<unsigned>(k + 1));
    }
    layer.skipIndex = skip;
    layer.L = randomMap(spec.dL, dk, rng, spec.scale);
    layer.W = randomMap(spec.maxWidth, dk, rng, spec.scale);
    layer.A = randomMap(spec.maxWidth, dims[static_cast<std::size_t>(skip)],
                        rng, spec.scale);
    layer.Atilde = randomMap(spec.maxWidth, spec.inputDim, rng, spec.scale);
    layer.sigma = spec.sigma;
    dims.push_back(layer.outputDim());
    layers.push_back(std::move(layer));
  }
  mcn::Readout readout;
  readout.map = randomMap(spec.outputDim, dims.back(), rng, spec.scale);
  readout.mode = mcn::Readout::Mode::Fixed;
  return mcn::MCNNetwork(spec.inputDim, spec.gamma, std::move(layers),
                         std::move(readout));
}

inline mcn::Vector randomVector(Eigen::Index n, std::mt19937_64& rng,
                                double scale = 1.0) {
  return randomMatrix(n, 1, rng, scale).col(0);
}

}  // namespace testutil
