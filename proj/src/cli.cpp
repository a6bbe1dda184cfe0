#include "mcn/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcn/analysis.hpp"
#include "mcn/constructive.hpp"
#include "mcn/experiments.hpp"
#include "mcn/io_util.hpp"
#include "mcn/serialize.hpp"
#include "mcn/sup_error.hpp"

namespace mcn::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

// ---------------------------------------------------------------------------
// Small parsers for comma-separated flag values.

std::vector<std::string> splitList(const std::string& text) {
  std::vector<std::string> parts;
  std::string piece;
  std::istringstream in(text);
  while (std::getline(in, piece, ',')) parts.push_back(piece);
  return parts;
}

std::vector<double> parseDoubles(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const std::string& piece : splitList(text)) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(piece, &pos);
      while (pos < piece.size() &&
             std::isspace(static_cast<unsigned char>(piece[pos]))) {
        ++pos;
      }
      if (pos != piece.size()) throw std::invalid_argument(piece);
      out.push_back(v);
    } catch (const std::exception&) {
      fail(std::string(flag) + ": bad number '" + piece + "'");
    }
  }
  if (out.empty()) fail(std::string(flag) + ": empty list");
  return out;
}

std::vector<long> parseLongs(const std::string& text, const char* flag) {
  std::vector<long> out;
  for (double v : parseDoubles(text, flag)) {
    if (v != std::floor(v)) fail(std::string(flag) + ": expected integers");
    out.push_back(static_cast<long>(v));
  }
  return out;
}

std::vector<int> parseInts(const std::string& text, const char* flag) {
  std::vector<int> out;
  for (long v : parseLongs(text, flag)) out.push_back(static_cast<int>(v));
  return out;
}

// ---------------------------------------------------------------------------
// Config-file preprocessing: values from --config are appended as --key=value
// tokens for every key the command line does not already set, so CLI11 sees
// one token stream with flag-over-file precedence.

bool hasFlagToken(const std::vector<std::string>& args,
                  const std::string& key) {
  const std::string plain = "--" + key;
  const std::string withEq = plain + "=";
  for (const std::string& a : args) {
    if (a == plain || a.rfind(withEq, 0) == 0) return true;
  }
  return false;
}

std::optional<std::string> findConfigPath(
    const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

void injectConfig(std::vector<std::string>& args,
                  const std::map<std::string, std::string>& cfg) {
  for (const auto& [key, value] : cfg) {
    if (key == "config") fail("config: config files cannot nest");
    if (hasFlagToken(args, key)) continue;
    args.push_back("--" + key + "=" + value);
  }
}

// ---------------------------------------------------------------------------
// Per-leaf bookkeeping shared by every subcommand.

struct Common {
  std::string out;
  std::string config;
  std::string grid;
  std::uint64_t seed = 0;
  CLI::Option* seedOpt = nullptr;
};

CLI::Option* addOut(CLI::App* cmd, Common& c, const std::string& what) {
  return cmd->add_option("--out", c.out, what)->capture_default_str();
}

void addConfigFlag(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config,
                  "run config file: flat 'key = value' lines or a JSON "
                  "object; flags override file values");
}

void addGrid(CLI::App* cmd, Common& c) {
  cmd->add_option("--grid", c.grid,
                  "comma-separated grid resolutions (points per axis)");
}

void addSeed(CLI::App* cmd, Common& c, bool required) {
  c.seedOpt = cmd->add_option("--seed", c.seed, "master seed");
  if (required) c.seedOpt->required();
}

/// Echoes the leaf's effective option values (post config and flags).
RunConfig makeRunConfig(const std::string& command, const Common& c,
                        CLI::App* leaf) {
  RunConfig rc;
  rc.command = command;
  for (const CLI::Option* opt : leaf->get_options()) {
    const std::vector<std::string>& lnames = opt->get_lnames();
    if (lnames.empty()) continue;
    const std::string& name = lnames.front();
    if (name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const std::string& r : opt->results()) {
        if (!value.empty()) value += ',';
        value += r;
      }
    } else {
      value = opt->get_default_str();
    }
    rc.params[name] = value;
  }
  if (c.seedOpt != nullptr && c.seedOpt->count() > 0) rc.seed = c.seed;
  if (!c.grid.empty()) rc.grid = parseLongs(c.grid, "--grid");
  return rc;
}

json runConfigJson(const RunConfig& rc) {
  json params = json::object();
  for (const auto& [k, v] : rc.params) params[k] = v;
  json j{{"command", rc.command},
         {"params", std::move(params)},
         {"format_version", 1}};
  j["seed"] = rc.seed ? json(std::to_string(*rc.seed)) : json(nullptr);
  j["grid"] = rc.grid;
  return j;
}

fs::path metaPathFor(const fs::path& artifact) {
  return artifact.parent_path() / (artifact.stem().string() + ".meta.json");
}

void writeMeta(const fs::path& path, const RunConfig& rc, json extra) {
  json meta = runConfigJson(rc);
  for (auto& [k, v] : extra.items()) meta[k] = std::move(v);
  atomicWriteFile(path, meta.dump(2) + "\n");
}

/// Resolves a file-artifact path, creating and probing its directory.
fs::path resolveOutFile(RunConfig& rc, const std::string& out) {
  fs::path path = out;
  rc.outDir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  ensureWritableDir(rc.outDir);
  return path;
}

void printRow(const ExperimentRow& row, const char* idxName) {
  std::cout << row.experiment << " " << idxName << "=" << row.index
            << " restart=" << row.restart
            << " final_loss=" << encodeReal(row.finalLoss)
            << " grad_norm=" << encodeReal(row.gradNorm) << " ["
            << row.verdict << "]\n";
}

/// Shared tail of every experiment command: CSV + metadata into the output
/// directory, one line per row, exit by verdict.
int finishExperiment(RunConfig rc, const std::string& outDir,
                     const ExperimentResult& res, const char* idxName) {
  rc.outDir = outDir;
  ensureWritableDir(rc.outDir);
  atomicWriteFile(rc.outDir / "results.csv", renderCsv(res.rows));
  writeMeta(rc.outDir / "metadata.json", rc,
            json{{"artifacts", json{{"csv", "results.csv"}}},
                 {"experiment", res.metadata}});
  for (const ExperimentRow& row : res.rows) printRow(row, idxName);
  std::cout << rc.command << ": verdict " << (res.verdict ? "pass" : "fail")
            << " -> " << (rc.outDir / "results.csv").string() << "\n";
  return res.verdict ? kExitOk : kExitVerdict;
}

Dataset datasetFor(const std::string& oracle, int n, double noise,
                   std::uint64_t seed) {
  if (oracle == "toy-pair") return makeToyRegressionSuite(n, noise, seed);
  return sampleDataset(makeOracle(oracle), n, noise, seed);
}

// ---------------------------------------------------------------------------
// build

struct BuildOpts {
  int stages = 8;
  int blocks = 1;
  int arity = 2;
  std::string coeffs;
  long range = 8;
  int freq = 1;
  std::string freqs = "1";
  std::string parity;
  int degree = 16;
  std::string target = "cospi-prod";
  int dim = 2;
  int level = 2;
  int quadOrder = 64;
};

CertifiedNet dispatchBuild(const std::string& what, const BuildOpts& b) {
  if (what == "square") return buildSawtoothSquare(b.stages, b.blocks);
  if (what == "product") {
    return b.arity == 2 ? buildProduct2(b.stages, b.blocks)
                        : buildProduct(b.arity, b.stages, b.blocks);
  }
  if (what == "poly") {
    return buildPolynomial(parseDoubles(b.coeffs, "--coeffs"), b.stages,
                           b.blocks);
  }
  if (what == "floor") return buildFloor(b.range);
  if (what == "cos") {
    return buildTrig(TrigKind::Cos, b.freq, b.degree, b.stages, b.blocks);
  }
  if (what == "sin") {
    return buildTrig(TrigKind::Sin, b.freq, b.degree, b.stages, b.blocks);
  }
  if (what == "phi") {
    const MultiIndex n = parseInts(b.freqs, "--freqs");
    const std::vector<int> parity =
        b.parity.empty() ? std::vector<int>(n.size(), 0)
                         : parseInts(b.parity, "--parity");
    return buildBasisElement(n, parity, b.degree, b.stages, b.blocks);
  }
  if (what == "fourier") {
    json descriptor;
    if (!b.target.empty() && b.target.front() == '{') {
      descriptor = json::parse(b.target);
    } else if (b.target == "cospi-prod" || b.target == "zero") {
      descriptor = json{{"kind", b.target}, {"d", b.dim}};
    } else if (b.target == "cos-mix") {
      if (b.dim != 1) fail("--target cos-mix is one-dimensional");
      descriptor = json{{"kind", "cos-mix"}};
    } else {
      fail("--target must be cospi-prod, zero, cos-mix, or a JSON "
           "descriptor");
    }
    return buildFourierApprox(makeTarget(descriptor), b.dim, b.level,
                              b.degree, b.stages, b.blocks, b.quadOrder);
  }
  fail("unknown build kind '" + what + "'");
}

int runBuild(const std::string& what, const BuildOpts& b, const Common& c,
             CLI::App* leaf) {
  const CertifiedNet cnet = dispatchBuild(what, b);
  RunConfig rc = makeRunConfig("build " + what, c, leaf);
  const fs::path outPath = resolveOutFile(rc, c.out);
  atomicWriteFile(outPath, certifiedNetToJson(cnet).dump(2) + "\n");
  writeMeta(metaPathFor(outPath), rc,
            json{{"artifacts", json{{"net", outPath.filename().string()}}},
                 {"bound", encodeReal(cnet.bound)},
                 {"bound_formula", cnet.boundFormula},
                 {"deviations", cnet.deviations}});
  std::cout << "build " << what << ": bound=" << encodeReal(cnet.bound)
            << " (" << cnet.boundFormula << ") depth=" << cnet.net.depth()
            << " width=" << cnet.net.maxStateDim() << " -> "
            << outPath.string() << "\n";
  int code = kExitOk;
  for (long g : rc.grid) {
    const SupErrorResult r = supError(cnet, g);
    const bool ok = r.error <= cnet.bound;
    std::cout << "  grid=" << g << " measured=" << encodeReal(r.error)
              << " bound=" << encodeReal(cnet.bound)
              << (ok ? " ok" : " EXCEEDED") << "\n";
    if (!ok) code = kExitVerdict;
  }
  return code;
}

// ---------------------------------------------------------------------------
// eval-error

struct EvalOpts {
  std::string cert;
  long random = 0;
};

int runEvalError(const EvalOpts& e, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("eval-error", c, leaf);
  const CertifiedNet cnet =
      certifiedNetFromJson(json::parse(readTextFile(e.cert)));
  if (e.random < 0) fail("--random must be positive");
  std::vector<long> grids = rc.grid;
  if (grids.empty() && e.random == 0) grids.push_back(1000);

  json checks = json::array();
  bool allOk = true;
  auto record = [&](const char* kind, long resolution,
                    const SupErrorResult& r, json extra) {
    const bool ok = r.error <= cnet.bound;
    allOk = allOk && ok;
    json entry{{"kind", kind},
               {"measured", encodeReal(r.error)},
               {"bound", encodeReal(cnet.bound)},
               {"ok", ok}};
    json argmax = json::array();
    for (Eigen::Index i = 0; i < r.argmax.size(); ++i) {
      argmax.push_back(encodeReal(r.argmax(i)));
    }
    entry["argmax"] = std::move(argmax);
    for (auto& [k, v] : extra.items()) entry[k] = std::move(v);
    std::cout << "eval-error " << kind << "=" << resolution
              << " measured=" << encodeReal(r.error)
              << " bound=" << encodeReal(cnet.bound)
              << (ok ? " ok" : " EXCEEDED") << "\n";
    checks.push_back(std::move(entry));
  };

  for (long g : grids) {
    record("grid", g, supError(cnet, g), json{{"resolution", g}});
  }
  if (e.random > 0) {
    if (c.seedOpt->count() == 0) fail("--random needs --seed");
    record("random", e.random, supErrorRandom(cnet, e.random, c.seed),
           json{{"count", e.random}, {"seed", std::to_string(c.seed)}});
  }

  if (!c.out.empty()) {
    const fs::path outPath = resolveOutFile(rc, c.out);
    writeMeta(outPath, rc,
              json{{"bound", encodeReal(cnet.bound)},
                   {"bound_formula", cnet.boundFormula},
                   {"target", cnet.target.descriptor},
                   {"checks", checks},
                   {"verdict", allOk ? "pass" : "fail"}});
  }
  return allOk ? kExitOk : kExitVerdict;
}

// ---------------------------------------------------------------------------
// bounds

long countNonzero(const LinearMap& map) {
  long count = 0;
  for (Eigen::Index j = 0; j < map.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < map.weights.rows(); ++i) {
      if (map.weights(i, j) != 0.0) ++count;
    }
  }
  for (Eigen::Index i = 0; i < map.bias.size(); ++i) {
    if (map.bias(i) != 0.0) ++count;
  }
  return count;
}

long countNonzeroParams(const MCNNetwork& net) {
  long count = countNonzero(net.readout().map);
  for (int k = 0; k < net.depth(); ++k) {
    const MCNLayer& layer = net.layer(k);
    count += countNonzero(layer.L) + countNonzero(layer.W) +
             countNonzero(layer.A) + countNonzero(layer.Atilde);
  }
  return count;
}

struct KappaOpts {
  std::string net;
};

int runKappa(const KappaOpts& k, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("bounds kappa", c, leaf);
  const MCNNetwork net = deserializeNetwork(readTextFile(k.net));
  const LipschitzReport report = lipschitzKappa(net);
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const LayerKappa& lk = report.layers[i];
    std::cout << "layer " << i << ": theta_l1=" << encodeReal(lk.thetaNorm)
              << " rho=" << encodeReal(lk.rho)
              << " kappa=" << encodeReal(lk.kappa) << "\n";
  }
  std::cout << "product kappa=" << encodeReal(report.productKappa) << "\n";
  if (!c.out.empty()) {
    const fs::path outPath = resolveOutFile(rc, c.out);
    writeMeta(outPath, rc,
              json{{"report", report.toJson()},
                   {"nonzero_params", countNonzeroParams(net)}});
  }
  return kExitOk;
}

struct CoveringOpts {
  double s = 10.0;
  double depth = 2.0;
  double width = 8.0;
  double rho = 1.0;
  double inputNorm = 1.0;
  std::string kappas = "2,2";
  std::string deltas = "0.1";
  std::string net;
  CLI::Option* sOpt = nullptr;
  CLI::Option* depthOpt = nullptr;
  CLI::Option* widthOpt = nullptr;
  CLI::Option* rhoOpt = nullptr;
  CLI::Option* kappasOpt = nullptr;
};

int runCovering(const CoveringOpts& o, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("bounds covering", c, leaf);
  double s = o.s;
  double depth = o.depth;
  double width = o.width;
  double rho = o.rho;
  std::vector<double> kappas = parseDoubles(o.kappas, "--kappas");
  if (!o.net.empty()) {
    const MCNNetwork net = deserializeNetwork(readTextFile(o.net));
    const LipschitzReport report = lipschitzKappa(net);
    if (o.sOpt->count() == 0) {
      s = static_cast<double>(countNonzeroParams(net));
    }
    if (o.depthOpt->count() == 0) depth = net.depth();
    if (o.widthOpt->count() == 0) {
      width = static_cast<double>(net.maxStateDim());
    }
    if (o.rhoOpt->count() == 0) {
      rho = 1.0;
      for (const LayerKappa& lk : report.layers) rho = std::max(rho, lk.rho);
      if (!std::isfinite(rho)) {
        fail("--net has an unbounded activation constant; pass --rho");
      }
    }
    if (o.kappasOpt->count() == 0) {
      kappas.clear();
      for (const LayerKappa& lk : report.layers) kappas.push_back(lk.kappa);
    }
  }
  json rows = json::array();
  for (double delta : parseDoubles(o.deltas, "--delta")) {
    const double value =
        coveringBound(s, depth, width, rho, o.inputNorm, kappas, delta);
    std::cout << "covering delta=" << encodeReal(delta)
              << " log_cover=" << encodeReal(value) << "\n";
    rows.push_back(json{{"delta", encodeReal(delta)},
                        {"log_cover", encodeReal(value)}});
  }
  if (!c.out.empty()) {
    const fs::path outPath = resolveOutFile(rc, c.out);
    writeMeta(outPath, rc,
              json{{"s", s},
                   {"depth", depth},
                   {"width", width},
                   {"rho", rho},
                   {"input_norm", o.inputNorm},
                   {"kappas", kappas},
                   {"rows", rows}});
  }
  return kExitOk;
}

struct GeneralizationOpts {
  double deltaN = 0.0;
  double approx = 0.0;
  double s = 10.0;
  double depth = 2.0;
  double width = 8.0;
  double n = 64.0;
};

int runGeneralization(const GeneralizationOpts& o, const Common& c,
                      CLI::App* leaf) {
  RunConfig rc = makeRunConfig("bounds generalization", c, leaf);
  const GeneralizationReport report =
      generalizationBound(o.deltaN, o.approx, o.s, o.depth, o.width, o.n);
  std::cout << "generalization delta_n=" << encodeReal(report.deltaN)
            << " approx=" << encodeReal(report.approx)
            << " complexity=" << encodeReal(report.complexity)
            << " total=" << encodeReal(report.total) << "\n";
  if (!c.out.empty()) {
    const fs::path outPath = resolveOutFile(rc, c.out);
    writeMeta(outPath, rc, json{{"report", report.toJson()}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string oracle = "sin-pi-x1-times-x2";
  int n = 64;
  double noise = 0.05;
  int depth = 2;
  int width = 8;
  int restarts = 1;
  std::string loss = "square";
  std::string optimizer = "sgd";
  double lr = 0.05;
  double momentum = 0.0;
  int epochs = 200;
  int batch = 0;
  double gradTol = 1e-6;
  int refitEvery = 0;
  bool backtracking = false;
  std::string gamma = "exp";
  std::string readout = "fixed";
};

int runTrain(const TrainOpts& t, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("train", c, leaf);
  Dataset data =
      datasetFor(t.oracle, t.n, t.noise, restartSeed(c.seed, 1 << 21));

  TrainConfig tc;
  if (t.loss == "square") {
    tc.loss = LossKind::Square;
  } else if (t.loss == "cross-entropy") {
    tc.loss = LossKind::CrossEntropy;
    // Classification surrogate: one-hot encode "above the median" of the
    // first regression target.
    std::vector<double> ys(data.Y.cols());
    for (Eigen::Index j = 0; j < data.Y.cols(); ++j) ys[j] = data.Y(0, j);
    std::nth_element(ys.begin(), ys.begin() + ys.size() / 2, ys.end());
    const double median = ys[ys.size() / 2];
    Matrix onehot(2, data.Y.cols());
    for (Eigen::Index j = 0; j < data.Y.cols(); ++j) {
      const bool hi = data.Y(0, j) > median;
      onehot(0, j) = hi ? 0.0 : 1.0;
      onehot(1, j) = hi ? 1.0 : 0.0;
    }
    data.Y = std::move(onehot);
  } else {
    fail("--loss must be square or cross-entropy");
  }
  if (t.optimizer == "sgd") {
    tc.optimizer = OptimizerKind::Sgd;
  } else if (t.optimizer == "adam") {
    tc.optimizer = OptimizerKind::Adam;
  } else {
    fail("--optimizer must be sgd or adam");
  }
  tc.lr = t.lr;
  tc.momentum = t.momentum;
  tc.epochs = t.epochs;
  tc.batch = t.batch;
  tc.gradTol = t.gradTol;
  tc.psiRefitEvery = t.refitEvery;
  tc.backtracking = t.backtracking;

  Activation gamma = Activation::Identity();
  if (t.gamma == "exp") {
    gamma = Activation::ClampedExp();
  } else if (t.gamma != "identity") {
    fail("--gamma must be exp or identity");
  }

  const Eigen::Index d = data.X.rows();
  const Eigen::Index q = data.Y.rows();
  const Eigen::Index stateDim = t.depth == 0 ? d : d + t.width;
  Readout readout;
  if (t.readout == "fixed") {
    readout = makeFixedReadout(q, stateDim, restartSeed(c.seed, 1 << 20));
  } else if (t.readout == "learnable") {
    readout.map = LinearMap::Zero(q, stateDim);
    readout.mode = Readout::Mode::Learnable;
  } else {
    fail("--readout must be fixed or learnable");
  }

  ExperimentResult res;
  res.verdict = true;
  json restartsMeta = json::array();
  double bestLoss = std::numeric_limits<double>::infinity();
  std::optional<MCNNetwork> bestNet;
  for (int r = 0; r < t.restarts; ++r) {
    MCNNetwork net = makeEqualWidthNet(d, t.depth, t.width,
                                       restartSeed(c.seed, r), gamma, readout);
    TrainConfig runCfg = tc;
    runCfg.seed = restartSeed(c.seed, r + (1 << 16));
    const TrainTrace trace = train(net, data, runCfg);
    res.rows.push_back({"train", t.depth, r, trace.finalLoss, trace.gradNorm,
                        trace.wallMs, trace.stopReason});
    restartsMeta.push_back(json{{"restart", r},
                                {"initial_loss", trace.initialLoss},
                                {"final_loss", trace.finalLoss},
                                {"grad_norm", trace.gradNorm},
                                {"stop_reason", trace.stopReason}});
    if (trace.finalLoss < bestLoss) {
      bestLoss = trace.finalLoss;
      bestNet = std::move(net);
    }
  }
  res.metadata = json{
      {"experiment", "train"},
      {"seed", c.seed},
      {"oracle", data.oracle},
      {"loss", t.loss},
      {"restarts", restartsMeta},
      {"best_final_loss", bestLoss},
      {"deviations",
       json::array({t.loss == "cross-entropy"
                        ? "cross-entropy targets are a median-threshold "
                          "one-hot encoding of the first regression target"
                        : "gate is the exponential clamped to [-30,30] when "
                          "--gamma exp"})},
  };

  const int code = finishExperiment(rc, c.out, res, "depth");
  if (bestNet) {
    atomicWriteFile(fs::path(c.out) / "net.json", serializeNetwork(*bestNet));
  }
  return code;
}

// ---------------------------------------------------------------------------
// experiment commands

struct SweepOpts {
  std::string depths = "1,2,3,4";
  int width = 8;
  int restarts = 20;
  double tolerance = 1e-3;
  std::string oracle = "toy-pair";
  int n = 64;
  double noise = 0.05;
  int epochs = 120;
  double lr = 0.05;
  double gradTol = 1e-6;
};

int runDepthSweep(const SweepOpts& s, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("depth-sweep", c, leaf);
  DepthSweepConfig cfg;
  cfg.depths = parseInts(s.depths, "--depths");
  cfg.width = s.width;
  cfg.restarts = s.restarts;
  cfg.seed = c.seed;
  cfg.tolerance = s.tolerance;
  cfg.trainCfg.epochs = s.epochs;
  cfg.trainCfg.lr = s.lr;
  cfg.trainCfg.gradTol = s.gradTol;
  const Dataset data =
      datasetFor(s.oracle, s.n, s.noise, restartSeed(c.seed, 1 << 21));
  return finishExperiment(rc, c.out, depthSweep(cfg, data), "depth");
}

struct AppendOpts {
  std::string extractor = "random-relu";
  int extractorWidth = 8;
  int appendDepth = 2;
  int width = 8;
  int restarts = 3;
  bool full = false;
  std::string oracle = "sin-pi-x1-times-x2";
  int n = 48;
  double noise = 0.05;
  int epochs = 80;
  double lr = 0.05;
};

int runAppend(const AppendOpts& a, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("append", c, leaf);
  AppendConfig cfg;
  if (a.extractor == "identity") {
    cfg.extractor = ExtractorKind::Identity;
  } else if (a.extractor == "random-relu") {
    cfg.extractor = ExtractorKind::RandomRelu;
  } else if (a.extractor == "random-affine") {
    cfg.extractor = ExtractorKind::RandomAffine;
  } else {
    fail("--extractor must be identity, random-relu, or random-affine");
  }
  cfg.extractorWidth = a.extractorWidth;
  cfg.appendDepth = a.appendDepth;
  cfg.width = a.width;
  cfg.restarts = a.restarts;
  cfg.seed = c.seed;
  cfg.full = a.full;
  cfg.trainCfg.epochs = a.epochs;
  cfg.trainCfg.lr = a.lr;
  const Dataset data =
      datasetFor(a.oracle, a.n, a.noise, restartSeed(c.seed, 1 << 21));
  return finishExperiment(rc, c.out, appendExperiment(cfg, data), "depth");
}

struct InterpOpts {
  std::string sizes = "32,128,512";
  int seedsPerSize = 5;
  double noise = 0.1;
  std::string oracle = "sin-pi-x";
  int smoothWidth = 16;
  int testPoints = 10000;
  double beta = 1.0;
};

int runInterpolation(const InterpOpts& i, const Common& c, CLI::App* leaf) {
  RunConfig rc = makeRunConfig("interpolation", c, leaf);
  InterpolationConfig cfg;
  cfg.sizes = parseInts(i.sizes, "--sizes");
  cfg.seedsPerSize = i.seedsPerSize;
  cfg.noiseSigma = i.noise;
  cfg.oracleKind = i.oracle;
  cfg.smoothWidth = i.smoothWidth;
  cfg.testPoints = i.testPoints;
  cfg.seed = c.seed;
  cfg.betaProxy = i.beta;
  return finishExperiment(rc, c.out, interpolationExperiment(cfg), "n");
}

struct StationarityOpts {
  int runs = 10;
  std::string depths = "1,2,3";
  int width = 8;
  int n = 64;
  std::string oracle = "sin-pi-x1-times-x2";
  double noise = 0.05;
  double relTol = 1e-6;
  double orthTol = 1e-3;
  int epochs = 200;
  double lr = 0.05;
  int refitEvery = 0;
};

int runStationarity(const StationarityOpts& s, const Common& c,
                    CLI::App* leaf) {
  RunConfig rc = makeRunConfig("stationarity", c, leaf);
  StationarityConfig cfg;
  cfg.runs = s.runs;
  cfg.depths = parseInts(s.depths, "--depths");
  cfg.width = s.width;
  cfg.n = s.n;
  cfg.oracleKind = s.oracle;
  cfg.noiseSigma = s.noise;
  cfg.seed = c.seed;
  cfg.relTol = s.relTol;
  cfg.orthTol = s.orthTol;
  cfg.trainCfg.epochs = s.epochs;
  cfg.trainCfg.lr = s.lr;
  cfg.trainCfg.psiRefitEvery = s.refitEvery;
  return finishExperiment(rc, c.out, stationarityExperiment(cfg), "depth");
}

void addTrainFlags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--oracle", t.oracle,
                  "regression target: sin-pi-x, sin-pi-x1-times-x2, "
                  "linear-1d, linear-2d, or toy-pair")
      ->capture_default_str();
  cmd->add_option("--n", t.n, "sample count")->capture_default_str();
  cmd->add_option("--noise", t.noise, "label noise sigma")
      ->capture_default_str();
  cmd->add_option("--depth", t.depth, "number of blocks")
      ->capture_default_str();
  cmd->add_option("--width", t.width, "max units per block")
      ->capture_default_str();
  cmd->add_option("--restarts", t.restarts, "independent restarts")
      ->capture_default_str();
  cmd->add_option("--loss", t.loss, "square or cross-entropy")
      ->capture_default_str();
  cmd->add_option("--optimizer", t.optimizer, "sgd or adam")
      ->capture_default_str();
  cmd->add_option("--lr", t.lr, "learning rate")->capture_default_str();
  cmd->add_option("--momentum", t.momentum, "SGD momentum")
      ->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "epoch budget")->capture_default_str();
  cmd->add_option("--batch", t.batch, "minibatch size (0 = full batch)")
      ->capture_default_str();
  cmd->add_option("--grad-tol", t.gradTol, "stopping gradient norm")
      ->capture_default_str();
  cmd->add_option("--refit-every", t.refitEvery,
                  "least-squares readout refit period (0 = never)")
      ->capture_default_str();
  cmd->add_flag("--backtracking", t.backtracking,
                "halve the step on loss increase (full-batch plain SGD)")
      ->default_str("false");
  cmd->add_option("--gamma", t.gamma, "input gate: exp or identity")
      ->capture_default_str();
  cmd->add_option("--readout", t.readout, "fixed or learnable")
      ->capture_default_str();
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{
      "max-and-concatenation networks: certified constructions, bound "
      "calculators, and landscape experiments",
      "mcn"};
  app.require_subcommand(1);
  int exitCode = kExitOk;

  std::deque<Common> commons;
  std::deque<BuildOpts> buildOpts;
  EvalOpts evalOpts;
  KappaOpts kappaOpts;
  CoveringOpts coveringOpts;
  GeneralizationOpts genOpts;
  TrainOpts trainOpts;
  SweepOpts sweepOpts;
  AppendOpts appendOpts;
  InterpOpts interpOpts;
  StationarityOpts statOpts;

  // build ---------------------------------------------------------------
  CLI::App* build = app.add_subcommand(
      "build", "construct a certified network and write net + certificate");
  build->require_subcommand(1);
  const struct {
    const char* name;
    const char* help;
  } buildKinds[] = {
      {"square", "x^2 on [-1,1] from sawtooth stages"},
      {"product", "product of --arity inputs on [-1,1]^p"},
      {"poly", "polynomial sum_j c_j x^j from --coeffs"},
      {"floor", "exact floor on [0, --range]"},
      {"cos", "cos(n pi x) via range reduction + Taylor"},
      {"sin", "sin((n - 1/2) pi x) via range reduction + Taylor"},
      {"phi", "one tensor cosine/sine basis element"},
      {"fourier", "truncated hyperbolic-cross series of --target"},
  };
  for (const auto& kind : buildKinds) {
    CLI::App* leaf = build->add_subcommand(kind.name, kind.help);
    BuildOpts* b = &buildOpts.emplace_back();
    Common* c = &commons.emplace_back();
    const std::string name = kind.name;
    leaf->add_option("--stages", b->stages, "sawtooth stages per block (m)")
        ->capture_default_str();
    leaf->add_option("--blocks", b->blocks, "sawtooth blocks (l)")
        ->capture_default_str();
    if (name == "product") {
      leaf->add_option("--arity", b->arity, "number of factors p in [2,32]")
          ->capture_default_str();
    }
    if (name == "poly") {
      leaf->add_option("--coeffs", b->coeffs,
                       "comma list; entry j is the coefficient of x^(j+1)")
          ->required();
    }
    if (name == "floor") {
      leaf->add_option("--range", b->range, "certified domain is [0, range]")
          ->capture_default_str();
    }
    if (name == "cos" || name == "sin") {
      leaf->add_option("--freq", b->freq, "frequency index n in [1,64]")
          ->capture_default_str();
    }
    if (name == "phi") {
      leaf->add_option("--freqs", b->freqs, "per-axis frequencies, e.g. 1,2")
          ->capture_default_str();
      leaf->add_option("--parity", b->parity,
                       "per-axis 0=cos 1=sin (default all cos)");
    }
    if (name == "cos" || name == "sin" || name == "phi" || name == "fourier") {
      leaf->add_option("--degree", b->degree, "Taylor degree p (even, >= 4)")
          ->capture_default_str();
    }
    if (name == "fourier") {
      leaf->add_option("--target", b->target,
                       "cospi-prod, zero, cos-mix, or a JSON descriptor")
          ->capture_default_str();
      leaf->add_option("--dim", b->dim, "input dimension d")
          ->capture_default_str();
      leaf->add_option("--level", b->level, "hyperbolic-cross level r")
          ->capture_default_str();
      leaf->add_option("--quad-order", b->quadOrder,
                       "Gauss-Legendre points per axis")
          ->capture_default_str();
    }
    addOut(leaf, *c, "output network JSON (certificate embedded)")
        ->required();
    addGrid(leaf, *c);
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, name, b, c, leaf] {
      exitCode = runBuild(name, *b, *c, leaf);
    });
  }

  // eval-error ------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "eval-error",
        "measure a certificate's sup error on grids or random clouds");
    Common* c = &commons.emplace_back();
    leaf->add_option("--cert", evalOpts.cert,
                     "certificate JSON from `mcn build`")
        ->required();
    leaf->add_option("--random", evalOpts.random,
                     "also check this many uniform random points");
    addGrid(leaf, *c);
    addSeed(leaf, *c, false);
    addOut(leaf, *c, "optional report JSON");
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &evalOpts, c, leaf] {
      exitCode = runEvalError(evalOpts, *c, leaf);
    });
  }

  // bounds ------------------------------------------------------------------
  CLI::App* bounds = app.add_subcommand(
      "bounds", "Lipschitz, covering-number, and generalization formulas");
  bounds->require_subcommand(1);
  {
    CLI::App* leaf =
        bounds->add_subcommand("kappa", "per-block Lipschitz table");
    Common* c = &commons.emplace_back();
    leaf->add_option("--net", kappaOpts.net, "network or certificate JSON")
        ->required();
    addOut(leaf, *c, "optional report JSON");
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &kappaOpts, c, leaf] {
      exitCode = runKappa(kappaOpts, *c, leaf);
    });
  }
  {
    CLI::App* leaf = bounds->add_subcommand(
        "covering", "log covering number at radius --delta");
    Common* c = &commons.emplace_back();
    CoveringOpts& o = coveringOpts;
    o.sOpt = leaf->add_option("--s", o.s, "nonzero parameter count")
                 ->capture_default_str();
    o.depthOpt =
        leaf->add_option("--depth", o.depth, "depth l")->capture_default_str();
    o.widthOpt =
        leaf->add_option("--width", o.width, "width w")->capture_default_str();
    o.rhoOpt = leaf->add_option("--rho", o.rho, "activation constant")
                   ->capture_default_str();
    leaf->add_option("--input-norm", o.inputNorm, "sup of ||x||_1")
        ->capture_default_str();
    o.kappasOpt =
        leaf->add_option("--kappas", o.kappas, "per-layer kappa list")
            ->capture_default_str();
    leaf->add_option("--delta", o.deltas, "radius (comma list for a scan)")
        ->capture_default_str();
    leaf->add_option("--net", o.net,
                     "derive s/depth/width/rho/kappas from this network "
                     "(explicit flags still win)");
    addOut(leaf, *c, "optional report JSON");
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &o, c, leaf] {
      exitCode = runCovering(o, *c, leaf);
    });
  }
  {
    CLI::App* leaf = bounds->add_subcommand(
        "generalization", "optimization + approximation + complexity split");
    Common* c = &commons.emplace_back();
    GeneralizationOpts& o = genOpts;
    leaf->add_option("--delta-n", o.deltaN, "optimization gap")
        ->capture_default_str();
    leaf->add_option("--approx", o.approx, "approximation error")
        ->capture_default_str();
    leaf->add_option("--s", o.s, "nonzero parameter count")
        ->capture_default_str();
    leaf->add_option("--depth", o.depth, "depth l")->capture_default_str();
    leaf->add_option("--width", o.width, "width w")->capture_default_str();
    leaf->add_option("--n", o.n, "sample count")->capture_default_str();
    addOut(leaf, *c, "optional report JSON");
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &o, c, leaf] {
      exitCode = runGeneralization(o, *c, leaf);
    });
  }

  // train -------------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "train", "train one small network on a synthetic regression task");
    Common* c = &commons.emplace_back();
    addTrainFlags(leaf, trainOpts);
    addSeed(leaf, *c, true);
    addOut(leaf, *c,
           "output directory (results.csv, metadata.json, net.json)")
        ->required();
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &trainOpts, c, leaf] {
      exitCode = runTrain(trainOpts, *c, leaf);
    });
  }

  // depth-sweep ---------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "depth-sweep",
        "best-of-restarts loss across depths with warm-started restarts");
    Common* c = &commons.emplace_back();
    SweepOpts& s = sweepOpts;
    leaf->add_option("--depths", s.depths, "depth list")
        ->capture_default_str();
    leaf->add_option("--width", s.width, "units per block")
        ->capture_default_str();
    leaf->add_option("--restarts", s.restarts, "restarts per depth")
        ->capture_default_str();
    leaf->add_option("--tolerance", s.tolerance,
                     "allowed min-loss increase between depths")
        ->capture_default_str();
    leaf->add_option("--oracle", s.oracle,
                     "dataset: toy-pair or a scalar oracle name")
        ->capture_default_str();
    leaf->add_option("--n", s.n, "sample count")->capture_default_str();
    leaf->add_option("--noise", s.noise, "label noise sigma")
        ->capture_default_str();
    leaf->add_option("--epochs", s.epochs, "epoch budget per restart")
        ->capture_default_str();
    leaf->add_option("--lr", s.lr, "learning rate")->capture_default_str();
    leaf->add_option("--grad-tol", s.gradTol, "stopping gradient norm")
        ->capture_default_str();
    addSeed(leaf, *c, true);
    addOut(leaf, *c, "output directory")->required();
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &s, c, leaf] {
      exitCode = runDepthSweep(s, *c, leaf);
    });
  }

  // append --------------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "append",
        "train blocks appended to a frozen extractor vs its least-squares "
        "baseline");
    Common* c = &commons.emplace_back();
    AppendOpts& a = appendOpts;
    leaf->add_option("--extractor", a.extractor,
                     "identity, random-relu, or random-affine")
        ->capture_default_str();
    leaf->add_option("--extractor-width", a.extractorWidth,
                     "frozen extractor units")
        ->capture_default_str();
    leaf->add_option("--append-depth", a.appendDepth,
                     "appended blocks to sweep up to")
        ->capture_default_str();
    leaf->add_option("--width", a.width, "units per appended block")
        ->capture_default_str();
    leaf->add_option("--restarts", a.restarts, "restarts per depth")
        ->capture_default_str();
    leaf->add_flag("--full", a.full,
                   "also fine-tune the extractor from the frozen solution")
        ->default_str("false");
    leaf->add_option("--oracle", a.oracle, "dataset oracle")
        ->capture_default_str();
    leaf->add_option("--n", a.n, "sample count")->capture_default_str();
    leaf->add_option("--noise", a.noise, "label noise sigma")
        ->capture_default_str();
    leaf->add_option("--epochs", a.epochs, "epoch budget per restart")
        ->capture_default_str();
    leaf->add_option("--lr", a.lr, "learning rate")->capture_default_str();
    addSeed(leaf, *c, true);
    addOut(leaf, *c, "output directory")->required();
    addConfigFlag(leaf, *c);
    leaf->callback(
        [&exitCode, &a, c, leaf] { exitCode = runAppend(a, *c, leaf); });
  }

  // interpolation ---------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "interpolation",
        "held-out error of exact-fit networks across sample sizes");
    Common* c = &commons.emplace_back();
    InterpOpts& i = interpOpts;
    leaf->add_option("--sizes", i.sizes, "sample sizes")
        ->capture_default_str();
    leaf->add_option("--seeds-per-size", i.seedsPerSize,
                     "independent datasets per size")
        ->capture_default_str();
    leaf->add_option("--noise", i.noise, "label noise sigma")
        ->capture_default_str();
    leaf->add_option("--oracle", i.oracle, "one-dimensional oracle")
        ->capture_default_str();
    leaf->add_option("--smooth-width", i.smoothWidth,
                     "random features in the smooth stage")
        ->capture_default_str();
    leaf->add_option("--test-points", i.testPoints, "held-out grid size")
        ->capture_default_str();
    leaf->add_option("--beta", i.beta,
                     "smoothness proxy for the reference slope")
        ->capture_default_str();
    addSeed(leaf, *c, true);
    addOut(leaf, *c, "output directory")->required();
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &i, c, leaf] {
      exitCode = runInterpolation(i, *c, leaf);
    });
  }

  // stationarity ----------------------------------------------------------------
  {
    CLI::App* leaf = app.add_subcommand(
        "stationarity",
        "converged runs vs the normal-equations residual on final-state "
        "features");
    Common* c = &commons.emplace_back();
    StationarityOpts& s = statOpts;
    leaf->add_option("--runs", s.runs, "converged runs to check")
        ->capture_default_str();
    leaf->add_option("--depths", s.depths, "depth cycle across runs")
        ->capture_default_str();
    leaf->add_option("--width", s.width, "units per block")
        ->capture_default_str();
    leaf->add_option("--n", s.n, "sample count")->capture_default_str();
    leaf->add_option("--oracle", s.oracle, "dataset oracle")
        ->capture_default_str();
    leaf->add_option("--noise", s.noise, "label noise sigma")
        ->capture_default_str();
    leaf->add_option("--rel-tol", s.relTol,
                     "allowed |loss - LS residual| / LS residual")
        ->capture_default_str();
    leaf->add_option("--orth-tol", s.orthTol,
                     "allowed residual-feature correlation")
        ->capture_default_str();
    leaf->add_option("--epochs", s.epochs, "epoch budget per run")
        ->capture_default_str();
    leaf->add_option("--lr", s.lr, "learning rate")->capture_default_str();
    leaf->add_option("--refit-every", s.refitEvery,
                     "readout refit period (0 = every 25 epochs)")
        ->capture_default_str();
    addSeed(leaf, *c, true);
    addOut(leaf, *c, "output directory")->required();
    addConfigFlag(leaf, *c);
    leaf->callback([&exitCode, &s, c, leaf] {
      exitCode = runStationarity(s, *c, leaf);
    });
  }

  try {
    const std::optional<std::string> cfgPath = findConfigPath(args);
    if (cfgPath) injectConfig(args, loadConfigFile(*cfgPath));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return exitCode;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace mcn::cli
