#include "mcn/builder.hpp"

#include <stdexcept>
#include <string>

namespace mcn {

Aff Aff::of(Chan c, double coeff, double bias) {
  Aff a;
  a.terms.push_back({c, coeff});
  a.bias = bias;
  return a;
}

Aff Aff::constant(double bias) {
  Aff a;
  a.bias = bias;
  return a;
}

Aff& Aff::add(Chan c, double coeff) {
  terms.push_back({c, coeff});
  return *this;
}

Aff Aff::scaled(double s) const {
  Aff a = *this;
  a.bias *= s;
  for (Term& t : a.terms) t.coeff *= s;
  return a;
}

Aff Aff::plus(const Aff& other) const {
  Aff a = *this;
  a.bias += other.bias;
  a.terms.insert(a.terms.end(), other.terms.begin(), other.terms.end());
  return a;
}

Aff Aff::minus(const Aff& other) const { return plus(other.scaled(-1.0)); }

NetBuilder::NetBuilder(Eigen::Index inputDim, Activation gamma)
    : inputDim_(inputDim), gamma_(gamma) {
  if (inputDim < 1) {
    throw std::invalid_argument("NetBuilder: input dim must be >= 1");
  }
  const bool gammaVanishes =
      (gamma.kind() == Activation::Kind::Identity ||
       gamma.kind() == Activation::Kind::Relu);
  if (!gammaVanishes) {
    throw std::invalid_argument(
        "NetBuilder: gamma(0) must be 0 (identity or relu) so that max units "
        "compute exactly max{W, sigma(A)}");
  }
  dims_.push_back(inputDim);
}

Eigen::Index NetBuilder::stateDim(int layer) const {
  if (layer < 0 || layer >= static_cast<int>(dims_.size())) {
    throw std::out_of_range("NetBuilder::stateDim: layer " +
                            std::to_string(layer) + " out of range");
  }
  return dims_[static_cast<std::size_t>(layer)];
}

Chan NetBuilder::input(Eigen::Index j) const {
  if (j < 0 || j >= inputDim_) {
    throw std::out_of_range("NetBuilder::input: index out of range");
  }
  return Chan{0, j};
}

void NetBuilder::requireOpen(bool open, const char* fn) const {
  if (open_ != open) {
    throw std::logic_error(std::string("NetBuilder::") + fn +
                           (open ? ": no layer is open" : ": layer already open"));
  }
}

void NetBuilder::checkAff(const Aff& aff, int expectedLayer,
                          const char* what) const {
  for (const Aff::Term& t : aff.terms) {
    if (t.chan.layer != expectedLayer) {
      throw std::logic_error(std::string("NetBuilder: ") + what +
                             " references layer " +
                             std::to_string(t.chan.layer) +
                             " but must read layer " +
                             std::to_string(expectedLayer));
    }
    if (t.chan.pos < 0 ||
        t.chan.pos >= dims_[static_cast<std::size_t>(expectedLayer)]) {
      throw std::out_of_range(std::string("NetBuilder: ") + what +
                              " channel position out of range");
    }
  }
}

void NetBuilder::beginLayer(Activation sigma, int skipLayer) {
  requireOpen(false, "beginLayer");
  if (skipLayer < 0 || skipLayer > topLayer()) {
    throw std::out_of_range("NetBuilder::beginLayer: skip layer " +
                            std::to_string(skipLayer) + " outside [0, " +
                            std::to_string(topLayer()) + "]");
  }
  open_ = true;
  sigma_ = sigma;
  skipLayer_ = skipLayer;
  linRows_.clear();
  wRows_.clear();
  aRows_.clear();
}

Chan NetBuilder::carry(Chan c) { return lin(Aff::of(c)); }

Chan NetBuilder::lin(const Aff& overTop) {
  requireOpen(true, "lin");
  if (!wRows_.empty()) {
    throw std::logic_error(
        "NetBuilder::lin: linear rows must precede max units");
  }
  checkAff(overTop, topLayer(), "linear row");
  linRows_.push_back(overTop);
  return Chan{topLayer() + 1,
              static_cast<Eigen::Index>(linRows_.size()) - 1};
}

Chan NetBuilder::maxUnit(const Aff& wOverTop, const Aff& aOverSkip) {
  requireOpen(true, "maxUnit");
  checkAff(wOverTop, topLayer(), "W row");
  checkAff(aOverSkip, skipLayer_, "A row");
  wRows_.push_back(wOverTop);
  aRows_.push_back(aOverSkip);
  return Chan{topLayer() + 1,
              static_cast<Eigen::Index>(linRows_.size() + wRows_.size()) - 1};
}

namespace {

LinearMap materialize(const std::vector<Aff>& rows, Eigen::Index cols) {
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), cols);
  Vector b = Vector::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    b(static_cast<Eigen::Index>(r)) = rows[r].bias;
    for (const Aff::Term& t : rows[r].terms) {
      w(static_cast<Eigen::Index>(r), t.chan.pos) += t.coeff;
    }
  }
  return LinearMap(std::move(w), std::move(b));
}

}  // namespace

void NetBuilder::endLayer() {
  requireOpen(true, "endLayer");
  const Eigen::Index dTop = dims_.back();
  const Eigen::Index dSkip = dims_[static_cast<std::size_t>(skipLayer_)];
  MCNLayer layer;
  layer.L = materialize(linRows_, dTop);
  layer.W = materialize(wRows_, dTop);
  layer.A = materialize(aRows_, dSkip);
  layer.Atilde =
      LinearMap::Zero(static_cast<Eigen::Index>(wRows_.size()), inputDim_);
  layer.sigma = sigma_;
  layer.skipIndex = skipLayer_;
  dims_.push_back(layer.outputDim());
  layers_.push_back(std::move(layer));
  open_ = false;
}

MCNNetwork NetBuilder::finish(const std::vector<Aff>& rows,
                              Readout::Mode mode) const {
  requireOpen(false, "finish");
  for (const Aff& row : rows) checkAff(row, topLayer(), "readout row");
  Readout readout;
  readout.map = materialize(rows, dims_.back());
  readout.mode = mode;
  return MCNNetwork(inputDim_, gamma_, layers_, readout);
}

MCNNetwork NetBuilder::finishFixed(const std::vector<Aff>& rows) const {
  return finish(rows, Readout::Mode::Fixed);
}

MCNNetwork NetBuilder::finishLearnable(const std::vector<Aff>& rows) const {
  return finish(rows, Readout::Mode::Learnable);
}

}  // namespace mcn
