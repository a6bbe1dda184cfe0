#include "mcn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "mcn/analysis.hpp"

namespace mcn {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("experiments: " + what);
}

double evalSinPiX(const Vector& x) { return std::sin(std::numbers::pi * x(0)); }
double evalSinPiX1TimesX2(const Vector& x) {
  return std::sin(std::numbers::pi * x(0)) * x(1);
}
double evalLinear2d(const Vector& x) {
  return 0.7 * x(0) - 0.4 * x(1) + 0.2;
}
double evalLinear1d(const Vector& x) { return 0.8 * x(0) + 0.1; }

Matrix randMatrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                  double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * nd(rng);
  }
  return m;
}

/// A trainable gated block on top of a state of dimension `prev`: carries the
/// first `carry` coordinates and adds `width` max units reading the top state.
MCNLayer randomBlock(Eigen::Index prev, Eigen::Index carry, int width,
                     Eigen::Index inputDim, int skipIndex,
                     std::mt19937_64& rng) {
  const double scale = 0.5 / std::sqrt(static_cast<double>(prev));
  MCNLayer layer;
  Matrix l = Matrix::Zero(carry, prev);
  l.leftCols(carry).setIdentity();
  layer.L = LinearMap(std::move(l), Vector::Zero(carry));
  layer.W = LinearMap(randMatrix(width, prev, rng, scale),
                      randMatrix(width, 1, rng, 0.1).col(0));
  layer.A = LinearMap(randMatrix(width, prev, rng, scale),
                      randMatrix(width, 1, rng, 0.1).col(0));
  layer.Atilde = LinearMap(randMatrix(width, inputDim, rng, 0.1),
                           Vector::Zero(width));
  layer.sigma = Activation::Relu();
  layer.skipIndex = skipIndex;
  return layer;
}

double squareLoss(const MCNNetwork& net, const Matrix& X, const Matrix& Y) {
  return (net.evalOutput(X) - Y).squaredNorm() / static_cast<double>(X.cols());
}

double medianOf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Descent-safe settings shared by the landscape experiments: full-batch
/// plain gradient descent with backtracking on the square loss, so a warm
/// start can never end worse than it began.
TrainConfig descentSafe(TrainConfig cfg) {
  cfg.loss = LossKind::Square;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.momentum = 0.0;
  cfg.batch = 0;
  cfg.backtracking = true;
  return cfg;
}

json configEcho(const TrainConfig& cfg) {
  return json{{"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"grad_tol", cfg.gradTol},
              {"psi_refit_every", cfg.psiRefitEvery},
              {"backtracking", cfg.backtracking}};
}

}  // namespace

RegressionOracle makeOracle(const std::string& kind) {
  if (kind == "sin-pi-x") return {kind, 1, &evalSinPiX};
  if (kind == "sin-pi-x1-times-x2") return {kind, 2, &evalSinPiX1TimesX2};
  if (kind == "linear-2d") return {kind, 2, &evalLinear2d};
  if (kind == "linear-1d") return {kind, 1, &evalLinear1d};
  fail("unknown oracle kind '" + kind + "'");
}

Dataset sampleDataset(const RegressionOracle& oracle, int n, double noiseSigma,
                      std::uint64_t seed) {
  if (n < 1) fail("sample count must be >= 1");
  if (noiseSigma < 0.0) fail("noise sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.X = Matrix(oracle.inputDim, n);
  data.Y = Matrix(1, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < oracle.inputDim; ++i) data.X(i, j) = uniform(rng);
  }
  for (int j = 0; j < n; ++j) {
    data.Y(0, j) = oracle.eval(data.X.col(j)) + noiseSigma * gauss(rng);
  }
  data.oracle = oracle.name;
  data.noiseSigma = noiseSigma;
  data.validate(true);
  return data;
}

Readout makeFixedReadout(Eigen::Index outputDim, Eigen::Index stateDim,
                         std::uint64_t seed) {
  if (outputDim < 1 || stateDim < outputDim) {
    fail("fixed readout needs 1 <= outputDim <= stateDim");
  }
  std::mt19937_64 rng(seed);
  Matrix w(outputDim, stateDim);
  w.setZero();
  w.leftCols(outputDim).setIdentity();
  w.rightCols(stateDim - outputDim) =
      randMatrix(outputDim, stateDim - outputDim, rng, 0.5);
  Readout readout;
  readout.map = LinearMap(std::move(w), Vector::Zero(outputDim));
  readout.mode = Readout::Mode::Fixed;
  return readout;
}

MCNNetwork makeEqualWidthNet(Eigen::Index inputDim, int depth, int width,
                             std::uint64_t seed, Activation gamma,
                             Readout readout) {
  if (inputDim < 1 || depth < 0 || width < 1) {
    fail("equal-width net needs inputDim >= 1, depth >= 0, width >= 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<MCNLayer> layers;
  for (int k = 0; k < depth; ++k) {
    const Eigen::Index prev = k == 0 ? inputDim : inputDim + width;
    layers.push_back(randomBlock(prev, inputDim, width, inputDim, k, rng));
  }
  return MCNNetwork(inputDim, gamma, std::move(layers), std::move(readout));
}

MCNNetwork appendIdentityBlock(const MCNNetwork& net) {
  if (net.depth() < 1) fail("identity block needs at least one layer below");
  if (net.gamma().kind() != Activation::Kind::Exp) {
    fail("identity block requires the clamped-exp gate");
  }
  const MCNLayer& last = net.layer(net.depth() - 1);
  const Eigen::Index m = last.W.rows();
  if (m < 1) fail("identity block needs a nonempty max part below");
  const Eigen::Index prev = net.stateDim(net.depth());
  const Eigen::Index carry = prev - m;
  const double gate = std::exp(-30.0);

  MCNLayer layer;
  Matrix l = Matrix::Zero(carry, prev);
  l.leftCols(carry).setIdentity();
  layer.L = LinearMap(std::move(l), Vector::Zero(carry));
  Matrix w = Matrix::Zero(m, prev);
  for (Eigen::Index j = 0; j < m; ++j) w(j, carry + j) = 1.0;
  layer.W = LinearMap(std::move(w), Vector::Constant(m, -gate));
  layer.A = LinearMap::Zero(m, prev);
  layer.Atilde = LinearMap(Matrix::Zero(m, net.inputDim()),
                           Vector::Constant(m, -30.0));
  layer.sigma = Activation::Relu();
  layer.skipIndex = net.depth();

  std::vector<MCNLayer> layers = net.layers();
  layers.push_back(std::move(layer));
  return MCNNetwork(net.inputDim(), net.gamma(), std::move(layers),
                    net.readout());
}

ExperimentResult depthSweep(const DepthSweepConfig& cfg, const Dataset& data) {
  data.validate();
  if (cfg.depths.empty()) fail("depth sweep needs at least one depth");
  std::vector<int> depths = cfg.depths;
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  if (depths.front() < 1) fail("depths must be >= 1");
  if (cfg.width < 1 || cfg.restarts < 1) fail("width and restarts must be >= 1");

  const Eigen::Index d = data.X.rows();
  const Eigen::Index q = data.Y.rows();
  TrainConfig eff = descentSafe(cfg.trainCfg);
  eff.psiRefitEvery = 0;  // the readout is fixed across the whole sweep
  eff.frozenLayers.clear();

  const Readout readout =
      makeFixedReadout(q, d + cfg.width, restartSeed(cfg.seed, 1 << 20));
  const Activation gamma = Activation::ClampedExp();

  ExperimentResult result;
  std::optional<MCNNetwork> bestPrev;
  int prevDepth = 0;
  int counter = 0;
  json perDepth = json::array();

  std::vector<double> minLoss;
  for (int depth : depths) {
    std::optional<MCNNetwork> bestHere;
    double bestHereLoss = std::numeric_limits<double>::infinity();
    std::vector<double> losses;
    for (int r = 0; r < cfg.restarts; ++r) {
      MCNNetwork net = [&]() {
        if (r == 0 && bestPrev) {
          MCNNetwork warm = *bestPrev;
          for (int k = prevDepth; k < depth; ++k) {
            warm = appendIdentityBlock(warm);
          }
          return warm;
        }
        return makeEqualWidthNet(d, depth, cfg.width,
                                 restartSeed(cfg.seed, counter), gamma,
                                 readout);
      }();
      ++counter;
      TrainConfig runCfg = eff;
      runCfg.seed = restartSeed(cfg.seed, counter + (1 << 16));
      const TrainTrace trace = train(net, data, runCfg);
      losses.push_back(trace.finalLoss);
      if (trace.finalLoss < bestHereLoss) {
        bestHereLoss = trace.finalLoss;
        bestHere = net;
      }
      result.rows.push_back({"depth-sweep", depth, r, trace.finalLoss,
                             trace.gradNorm, trace.wallMs, ""});
    }
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    perDepth.push_back(json{{"depth", depth},
                            {"min", sorted.front()},
                            {"median", medianOf(losses)},
                            {"max", sorted.back()}});
    minLoss.push_back(sorted.front());
    bestPrev = bestHere;
    prevDepth = depth;
  }

  bool monotone = true;
  for (std::size_t i = 1; i < minLoss.size(); ++i) {
    if (minLoss[i] > minLoss[i - 1] + cfg.tolerance) monotone = false;
  }
  result.verdict = monotone;
  const std::string verdict = monotone ? "pass" : "fail";
  for (ExperimentRow& row : result.rows) row.verdict = verdict;

  result.metadata = json{
      {"experiment", "depth-sweep"},
      {"seed", cfg.seed},
      {"depths", depths},
      {"width", cfg.width},
      {"restarts", cfg.restarts},
      {"tolerance", cfg.tolerance},
      {"train", configEcho(eff)},
      {"oracle", data.oracle},
      {"noise_sigma", data.noiseSigma},
      {"per_depth", perDepth},
      {"verdict", verdict},
      {"deviations",
       json::array(
           {"gate is the exponential clamped to [-30,30], not the bare "
            "exponential",
            "descent-safe training enforced: full-batch backtracking "
            "gradient descent on the square loss"})},
  };
  return result;
}

namespace {

/// Extractor prefix as zero or one gated block whose units sit at
/// 1 + (feature) thanks to the exp(0) = 1 gate.
std::vector<MCNLayer> extractorLayers(const AppendConfig& cfg, Eigen::Index d,
                                      std::mt19937_64& rng) {
  std::vector<MCNLayer> layers;
  if (cfg.extractor == ExtractorKind::Identity) return layers;
  const int we = cfg.extractorWidth;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  MCNLayer layer;
  layer.L = LinearMap::Identity(d);
  const Matrix r = randMatrix(we, d, rng, scale);
  const Vector b = randMatrix(we, 1, rng, 0.3).col(0);
  if (cfg.extractor == ExtractorKind::RandomRelu) {
    layer.W = LinearMap::Zero(we, d);
    layer.A = LinearMap(r, b);
    layer.sigma = Activation::Relu();
  } else {
    layer.W = LinearMap(r, b);
    layer.A = LinearMap(r, b);
    layer.sigma = Activation::Identity();
  }
  layer.Atilde = LinearMap::Zero(we, d);
  layer.skipIndex = 0;
  layers.push_back(std::move(layer));
  return layers;
}

}  // namespace

ExperimentResult appendExperiment(const AppendConfig& cfg,
                                  const Dataset& data) {
  data.validate();
  if (cfg.appendDepth < 1) fail("append depth must be >= 1");
  if (cfg.width < 1 || cfg.restarts < 1) fail("width and restarts must be >= 1");
  if (cfg.extractor != ExtractorKind::Identity && cfg.extractorWidth < 1) {
    fail("extractor width must be >= 1");
  }
  const Eigen::Index d = data.X.rows();
  const Eigen::Index q = data.Y.rows();
  const Activation gamma = Activation::ClampedExp();

  std::mt19937_64 extractorRng(restartSeed(cfg.seed, 7));
  const std::vector<MCNLayer> prefix = extractorLayers(cfg, d, extractorRng);
  const Eigen::Index s0 =
      prefix.empty() ? d : prefix.front().L.rows() + prefix.front().W.rows();
  const std::vector<int> frozenPrefix =
      prefix.empty() ? std::vector<int>{} : std::vector<int>{0};

  auto makeNet = [&](int appended, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<MCNLayer> layers = prefix;
    const int base = static_cast<int>(prefix.size());
    for (int k = 0; k < appended; ++k) {
      const Eigen::Index prev = k == 0 ? s0 : s0 + cfg.width;
      layers.push_back(
          randomBlock(prev, s0, cfg.width, d, base + k, rng));
    }
    const Eigen::Index stateDim = appended == 0 ? s0 : s0 + cfg.width;
    Readout readout;
    readout.map = LinearMap::Zero(q, stateDim);
    readout.mode = Readout::Mode::Learnable;
    return MCNNetwork(d, gamma, std::move(layers), std::move(readout));
  };

  // Injectivity of the extractor on the samples.
  MCNNetwork prefixNet = makeNet(0, 0);
  const Matrix features = prefixNet.evalFinalState(data.X);
  double minDist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < features.cols(); ++j) {
      const double dist = (features.col(i) - features.col(j)).norm();
      if (dist < minDist) minDist = dist;
      if (dist < 1e-9) {
        fail("extractor collides on samples " + std::to_string(i) + " and " +
             std::to_string(j) + " (distance " + std::to_string(dist) + ")");
      }
    }
  }
  const double baseline = leastSquaresLoss(features, data.Y);

  TrainConfig eff = descentSafe(cfg.trainCfg);
  if (eff.psiRefitEvery < 1) eff.psiRefitEvery = 1;

  ExperimentResult result;
  std::vector<double> partialMin;
  std::vector<double> fullMin;
  std::optional<MCNNetwork> bestPartial;
  std::optional<MCNNetwork> bestFull;
  int counter = 0;
  const std::string tag = cfg.full ? "append-full" : "append-partial";

  for (int a = 0; a <= cfg.appendDepth; ++a) {
    std::optional<MCNNetwork> bestHere;
    double bestHereLoss = std::numeric_limits<double>::infinity();
    const int restarts = a == 0 ? 1 : cfg.restarts;
    for (int r = 0; r < restarts; ++r) {
      MCNNetwork net = [&]() {
        if (a >= 1 && r == 0 && bestPartial) {
          if (a == 1) {
            // Zero readout columns over the fresh block keep the warm
            // start's predictions bit-identical to the depth-0 solution.
            MCNNetwork warm = makeNet(1, restartSeed(cfg.seed, counter));
            Matrix psi = Matrix::Zero(q, s0 + cfg.width);
            psi.leftCols(s0) = bestPartial->readout().map.weights;
            warm.readoutMutable().map.weights = std::move(psi);
            return warm;
          }
          return appendIdentityBlock(*bestPartial);
        }
        return makeNet(a, restartSeed(cfg.seed, counter));
      }();
      ++counter;
      TrainConfig runCfg = eff;
      runCfg.seed = restartSeed(cfg.seed, counter + (1 << 16));
      runCfg.frozenLayers = frozenPrefix;
      const TrainTrace trace = train(net, data, runCfg);
      if (trace.finalLoss < bestHereLoss) {
        bestHereLoss = trace.finalLoss;
        bestHere = net;
      }
      if (!cfg.full) {
        result.rows.push_back({tag, a, r, trace.finalLoss, trace.gradNorm,
                               trace.wallMs, ""});
      }
    }
    partialMin.push_back(bestHereLoss);
    bestPartial = bestHere;

    if (cfg.full) {
      // Fine-tune with the extractor unfrozen, warm starting from whichever
      // is better: this depth's frozen solution or the previous full one
      // extended by an identity block.
      MCNNetwork cand = *bestHere;
      if (bestFull && a >= 1) {
        MCNNetwork chained = a == 1 ? *bestFull : appendIdentityBlock(*bestFull);
        if (a == 1) {
          MCNNetwork warm = makeNet(1, restartSeed(cfg.seed, counter));
          ++counter;
          Matrix psi = Matrix::Zero(q, s0 + cfg.width);
          psi.leftCols(s0) = bestFull->readout().map.weights;
          warm.readoutMutable().map.weights = std::move(psi);
          // Keep the fine-tuned extractor from the full chain.
          for (std::size_t k = 0; k < prefix.size(); ++k) {
            warm.layerMutable(static_cast<int>(k)) =
                bestFull->layer(static_cast<int>(k));
          }
          chained = warm;
        }
        if (squareLoss(chained, data.X, data.Y) <
            squareLoss(cand, data.X, data.Y)) {
          cand = chained;
        }
      }
      TrainConfig fullCfg = eff;
      fullCfg.seed = restartSeed(cfg.seed, counter + (1 << 17));
      fullCfg.frozenLayers.clear();
      const TrainTrace trace = train(cand, data, fullCfg);
      fullMin.push_back(trace.finalLoss);
      bestFull = cand;
      result.rows.push_back({tag, a, 0, trace.finalLoss, trace.gradNorm,
                             trace.wallMs, ""});
    }
  }

  const std::vector<double>& finals = cfg.full ? fullMin : partialMin;
  const bool verdictOk = finals.back() <= finals.front() + 1e-12;
  result.verdict = verdictOk;
  const std::string verdict = verdictOk ? "pass" : "fail";
  for (ExperimentRow& row : result.rows) row.verdict = verdict;

  const char* extractorName =
      cfg.extractor == ExtractorKind::Identity
          ? "identity"
          : (cfg.extractor == ExtractorKind::RandomRelu ? "random-relu"
                                                        : "random-affine");
  result.metadata = json{
      {"experiment", tag},
      {"seed", cfg.seed},
      {"extractor", extractorName},
      {"extractor_width",
       cfg.extractor == ExtractorKind::Identity ? 0 : cfg.extractorWidth},
      {"append_depth", cfg.appendDepth},
      {"width", cfg.width},
      {"restarts", cfg.restarts},
      {"train", configEcho(eff)},
      {"oracle", data.oracle},
      {"noise_sigma", data.noiseSigma},
      {"baseline_least_squares", baseline},
      {"min_pairwise_feature_distance", minDist},
      {"partial_min_loss", partialMin},
      {"full_min_loss", fullMin},
      {"verdict", verdict},
      {"deviations",
       json::array(
           {"gate is the exponential clamped to [-30,30], not the bare "
            "exponential",
            "descent-safe training enforced: full-batch backtracking "
            "gradient descent on the square loss"})},
  };
  return result;
}

ExperimentResult interpolationExperiment(const InterpolationConfig& cfg) {
  const RegressionOracle oracle = makeOracle(cfg.oracleKind);
  if (oracle.inputDim != 1) {
    fail("the exact-fit stage is built for one-dimensional oracles");
  }
  if (cfg.sizes.empty()) fail("interpolation needs at least one sample size");
  for (int n : cfg.sizes) {
    if (n < 2) fail("sample sizes must be >= 2");
  }
  if (cfg.seedsPerSize < 1 || cfg.smoothWidth < 1 || cfg.testPoints < 1) {
    fail("seedsPerSize, smoothWidth and testPoints must be >= 1");
  }

  // Frozen random-relu features plus one constant unit (the intercept),
  // shared by every row so the smooth bias is constant across sample sizes:
  // kinks uniform in [0,1], slopes N(0,4). The last unit is max{1, relu(0)}.
  const int w = cfg.smoothWidth;
  const int units = w + 1;
  std::mt19937_64 featRng(restartSeed(cfg.seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix aW = Matrix::Zero(units, 1);
  Vector aB = Vector::Zero(units);
  for (int i = 0; i < w; ++i) {
    aW(i, 0) = 4.0 * gauss(featRng);
    aB(i) = -aW(i, 0) * uniform(featRng);
  }
  Vector constBias = Vector::Zero(units);
  constBias(w) = 1.0;
  MCNLayer smooth;
  smooth.L = LinearMap::Identity(1);
  smooth.W = LinearMap(Matrix::Zero(units, 1), std::move(constBias));
  smooth.A = LinearMap(std::move(aW), std::move(aB));
  smooth.Atilde = LinearMap::Zero(units, 1);
  smooth.sigma = Activation::Relu();
  smooth.skipIndex = 0;

  // Held-out sample, identical for every row.
  std::mt19937_64 testRng(restartSeed(cfg.seed, 2));
  Matrix xTest(1, cfg.testPoints);
  Vector yTest(cfg.testPoints);
  for (int j = 0; j < cfg.testPoints; ++j) {
    xTest(0, j) = uniform(testRng);
    yTest(j) = oracle.eval(xTest.col(j));
  }

  ExperimentResult result;
  json rowMeta = json::array();
  json medians = json::array();
  std::vector<double> logN;
  std::vector<double> logMse;
  bool allDecreasing = true;
  double prevMedian = std::numeric_limits<double>::infinity();
  int rowCounter = 0;

  for (int n : cfg.sizes) {
    std::vector<double> testMses;
    for (int s = 0; s < cfg.seedsPerSize; ++s) {
      const auto tick = std::chrono::steady_clock::now();
      const Dataset data = sampleDataset(oracle, n, cfg.noiseSigma,
                                         restartSeed(cfg.seed, 1000 + rowCounter));
      ++rowCounter;

      // Smooth stage: least-squares readout on the frozen features.
      const Eigen::Index sd = 1 + units;  // [x; relu features; 1]
      Readout smoothReadout;
      smoothReadout.map = LinearMap::Zero(1, sd);
      smoothReadout.mode = Readout::Mode::Learnable;
      MCNNetwork smoothNet(1, Activation::Identity(), {smooth}, smoothReadout);
      const Matrix feats = smoothNet.evalFinalState(data.X);
      const Matrix psiSmooth = solveReadout(feats, data.Y);
      const Matrix residual = data.Y - psiSmooth * feats;  // 1 x n

      // Exact-fit stage: one |x - x_i| block, one hat block, and readout
      // columns carrying the residuals. Hat half-width keeps bumps disjoint.
      std::vector<double> xs(data.X.data(), data.X.data() + n);
      std::vector<double> sorted = xs;
      std::sort(sorted.begin(), sorted.end());
      double minGap = std::numeric_limits<double>::infinity();
      for (int i = 1; i < n; ++i) minGap = std::min(minGap, sorted[i] - sorted[i - 1]);
      const double h =
          std::min(0.45 * minGap, 1.0 / (static_cast<double>(n) * n));

      MCNLayer s1;  // units |x - x_i|, carrying [x; features]
      s1.L = LinearMap::Identity(sd);
      {
        Matrix wRows = Matrix::Zero(n, sd);
        Vector wBias(n);
        Matrix aRows = Matrix::Zero(n, sd);
        Vector aBias(n);
        for (int i = 0; i < n; ++i) {
          wRows(i, 0) = 1.0;
          wBias(i) = -xs[static_cast<std::size_t>(i)];
          aRows(i, 0) = -1.0;
          aBias(i) = xs[static_cast<std::size_t>(i)];
        }
        s1.W = LinearMap(std::move(wRows), std::move(wBias));
        s1.A = LinearMap(std::move(aRows), std::move(aBias));
      }
      s1.Atilde = LinearMap::Zero(n, 1);
      s1.sigma = Activation::Identity();
      s1.skipIndex = 1;

      MCNLayer s2;  // units max{0, 1 - |x - x_i| / h}
      {
        Matrix l = Matrix::Zero(sd, sd + n);
        l.leftCols(sd).setIdentity();
        s2.L = LinearMap(std::move(l), Vector::Zero(sd));
        s2.W = LinearMap::Zero(n, sd + n);
        Matrix aRows = Matrix::Zero(n, sd + n);
        for (int i = 0; i < n; ++i) aRows(i, sd + i) = -1.0 / h;
        s2.A = LinearMap(std::move(aRows), Vector::Ones(n));
      }
      s2.Atilde = LinearMap::Zero(n, 1);
      s2.sigma = Activation::Relu();
      s2.skipIndex = 2;

      Matrix psi = Matrix::Zero(1, sd + n);
      psi.leftCols(sd) = psiSmooth;
      psi.rightCols(n) = residual;
      Readout readout;
      readout.map = LinearMap(std::move(psi), Vector::Zero(1));
      readout.mode = Readout::Mode::Learnable;
      MCNNetwork net(1, Activation::Identity(), {smooth, s1, s2}, readout);

      const double trainMse = squareLoss(net, data.X, data.Y);
      const bool fitted = trainMse <= 1e-8;
      const Matrix predTest = net.evalOutput(xTest);
      const double testMse =
          (predTest.row(0).transpose() - yTest).squaredNorm() /
          static_cast<double>(cfg.testPoints);
      const auto tock = std::chrono::steady_clock::now();
      const double wallMs =
          std::chrono::duration<double, std::milli>(tock - tick).count();

      if (fitted) testMses.push_back(testMse);
      result.rows.push_back({"interpolation", n, s, trainMse, 0.0, wallMs,
                             fitted ? "exact-fit" : "no-fit"});
      rowMeta.push_back(json{{"n", n},
                             {"seed_index", s},
                             {"train_mse", trainMse},
                             {"test_mse", testMse},
                             {"exact_fit", fitted}});
    }
    if (testMses.empty()) {
      allDecreasing = false;
      medians.push_back(json{{"n", n}, {"median_test_mse", nullptr}});
      continue;
    }
    const double med = medianOf(testMses);
    medians.push_back(json{{"n", n}, {"median_test_mse", med}});
    if (med >= prevMedian) allDecreasing = false;
    prevMedian = med;
    logN.push_back(std::log(static_cast<double>(n)));
    logMse.push_back(std::log(med));
  }

  double slope = 0.0;
  if (logN.size() >= 2) {
    const double mx = std::accumulate(logN.begin(), logN.end(), 0.0) /
                      static_cast<double>(logN.size());
    const double my = std::accumulate(logMse.begin(), logMse.end(), 0.0) /
                      static_cast<double>(logMse.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < logN.size(); ++i) {
      num += (logN[i] - mx) * (logMse[i] - my);
      den += (logN[i] - mx) * (logN[i] - mx);
    }
    slope = den > 0.0 ? num / den : 0.0;
  }
  const double reference = -2.0 * cfg.betaProxy / (2.0 * cfg.betaProxy + 1.0);

  result.verdict = allDecreasing;
  const std::string verdict = allDecreasing ? "pass" : "fail";
  for (ExperimentRow& row : result.rows) {
    if (row.verdict == "exact-fit") row.verdict = verdict;
  }
  result.metadata = json{
      {"experiment", "interpolation"},
      {"seed", cfg.seed},
      {"sizes", cfg.sizes},
      {"seeds_per_size", cfg.seedsPerSize},
      {"noise_sigma", cfg.noiseSigma},
      {"oracle", oracle.name},
      {"smooth_width", cfg.smoothWidth},
      {"test_points", cfg.testPoints},
      {"rows", rowMeta},
      {"median_test_mse", medians},
      {"log_log_slope", slope},
      {"reference_slope", reference},
      {"verdict", verdict},
      {"deviations",
       json::array({"exact fit realized constructively: disjoint hat bumps "
                     "absorb the residual at every sample on top of the "
                     "least-squares smooth stage"})},
  };
  return result;
}

Dataset makeToyRegressionSuite(int n, double noiseSigma, std::uint64_t seed) {
  if (n < 1) fail("sample count must be >= 1");
  if (noiseSigma < 0.0) fail("noise sigma must be non-negative");
  const RegressionOracle first = makeOracle("sin-pi-x1-times-x2");
  const RegressionOracle second = makeOracle("linear-2d");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.X = Matrix(2, n);
  data.Y = Matrix(2, n);
  for (int j = 0; j < n; ++j) {
    data.X(0, j) = uniform(rng);
    data.X(1, j) = uniform(rng);
  }
  for (int j = 0; j < n; ++j) {
    data.Y(0, j) = first.eval(data.X.col(j)) + noiseSigma * gauss(rng);
    data.Y(1, j) = second.eval(data.X.col(j)) + noiseSigma * gauss(rng);
  }
  data.oracle = "toy-pair";
  data.noiseSigma = noiseSigma;
  data.validate(true);
  return data;
}

ExperimentResult stationarityExperiment(const StationarityConfig& cfg) {
  if (cfg.runs < 1) fail("stationarity needs at least one run");
  if (cfg.depths.empty()) fail("stationarity needs at least one depth");
  for (int depth : cfg.depths) {
    if (depth < 1) fail("depths must be >= 1");
  }
  if (cfg.width < 1) fail("width must be >= 1");
  if (cfg.n < 2) fail("stationarity needs at least two samples");
  if (cfg.relTol <= 0.0 || cfg.orthTol <= 0.0) {
    fail("tolerances must be positive");
  }
  const RegressionOracle oracle = makeOracle(cfg.oracleKind);
  const Eigen::Index d = oracle.inputDim;

  TrainConfig eff = descentSafe(cfg.trainCfg);
  eff.gradTol = std::min(eff.gradTol, 1e-6);
  // Periodic refits land the readout on the normal-equations solution, after
  // which the gradient check certifies stationarity.
  if (eff.psiRefitEvery < 1) eff.psiRefitEvery = 25;

  ExperimentResult result;
  json runMeta = json::array();
  bool allPass = true;
  for (int i = 0; i < cfg.runs; ++i) {
    const int depth = cfg.depths[static_cast<std::size_t>(i) % cfg.depths.size()];
    const Dataset data = sampleDataset(oracle, cfg.n, cfg.noiseSigma,
                                       restartSeed(cfg.seed, 4096 + i));
    const Eigen::Index q = data.Y.rows();
    Readout readout;
    readout.map = LinearMap::Zero(q, d + cfg.width);
    readout.mode = Readout::Mode::Learnable;
    MCNNetwork net =
        makeEqualWidthNet(d, depth, cfg.width, restartSeed(cfg.seed, i),
                          Activation::ClampedExp(), std::move(readout));

    TrainConfig runCfg = eff;
    runCfg.seed = restartSeed(cfg.seed, i + (1 << 16));
    runCfg.frozenLayers.resize(static_cast<std::size_t>(depth));
    std::iota(runCfg.frozenLayers.begin(), runCfg.frozenLayers.end(), 0);
    const TrainTrace trace = train(net, data, runCfg);

    const OrthogonalityReport report =
        residualOrthogonality(net, data.X, data.Y);
    const double relErr = std::abs(trace.finalLoss - report.lsResidual) /
                          std::max(report.lsResidual, 1e-30);
    const double lastCorr = report.stateCorrelation.back();
    const bool converged =
        trace.stopReason == "grad-tol" && trace.gradNorm <= eff.gradTol;
    const bool pass =
        converged && relErr <= cfg.relTol && lastCorr <= cfg.orthTol;
    allPass = allPass && pass;

    result.rows.push_back({"stationarity", depth, i, trace.finalLoss,
                           trace.gradNorm, trace.wallMs,
                           pass ? "pass" : "fail"});
    runMeta.push_back(json{{"depth", depth},
                           {"stop_reason", trace.stopReason},
                           {"grad_norm", trace.gradNorm},
                           {"final_loss", trace.finalLoss},
                           {"ls_residual", report.lsResidual},
                           {"rel_error", relErr},
                           {"last_correlation", lastCorr},
                           {"pass", pass}});
  }

  result.verdict = allPass;
  result.metadata = json{
      {"experiment", "stationarity"},
      {"seed", cfg.seed},
      {"runs", cfg.runs},
      {"depths", cfg.depths},
      {"width", cfg.width},
      {"n", cfg.n},
      {"oracle", oracle.name},
      {"noise_sigma", cfg.noiseSigma},
      {"rel_tol", cfg.relTol},
      {"orth_tol", cfg.orthTol},
      {"train", configEcho(eff)},
      {"per_run", runMeta},
      {"verdict", allPass ? "pass" : "fail"},
      {"deviations",
       json::array(
           {"gate is the exponential clamped to [-30,30], not the bare "
            "exponential",
            "feature layers are frozen and the readout is refit by least "
            "squares periodically so every run reaches the gradient "
            "tolerance within the epoch budget"})},
  };
  return result;
}

}  // namespace mcn
