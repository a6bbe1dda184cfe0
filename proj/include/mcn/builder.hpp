// Incremental construction of networks from named channels and affine rows.
#pragma once

#include <vector>

#include "mcn/network.hpp"

namespace mcn {

/// A coordinate of one network state: component `pos` of x_{layer}.
struct Chan {
  int layer = -1;
  Eigen::Index pos = 0;
};

/// An affine expression over channels of a single state. Which state is
/// legal depends on where the expression is used: L/W rows read the top
/// state, A rows read the layer's skip state.
struct Aff {
  struct Term {
    Chan chan;
    double coeff = 1.0;
  };
  std::vector<Term> terms;
  double bias = 0.0;

  static Aff of(Chan c, double coeff = 1.0, double bias = 0.0);
  static Aff constant(double bias);
  Aff& add(Chan c, double coeff);
  Aff scaled(double s) const;
  Aff plus(const Aff& other) const;
  Aff minus(const Aff& other) const;
};

/// Builds an MCNNetwork one layer at a time. Every row of a layer is an
/// affine expression over channel handles, so construction code reads like
/// the arithmetic it implements. Within an open layer all linear rows must
/// be declared before the first max unit (the linear block's height fixes
/// the max units' positions).
///
/// Built layers always use a zero Atilde, so the gamma term contributes
/// gamma(0) to every max unit; the constructor therefore requires
/// gamma(0) == 0 (identity or relu).
class NetBuilder {
 public:
  NetBuilder(Eigen::Index inputDim, Activation gamma);

  Eigen::Index inputDim() const { return inputDim_; }
  /// Index of the current top state (0 = the input).
  int topLayer() const { return static_cast<int>(layers_.size()); }
  Eigen::Index stateDim(int layer) const;
  Chan input(Eigen::Index j) const;

  void beginLayer(Activation sigma, int skipLayer);
  /// L row copying one top-state channel forward.
  Chan carry(Chan c);
  /// L row evaluating an affine expression over the top state.
  Chan lin(const Aff& overTop);
  /// Max unit: max{ wOverTop, sigma(aOverSkip) }.
  Chan maxUnit(const Aff& wOverTop, const Aff& aOverSkip);
  void endLayer();

  /// Finish with a fixed readout whose rows are affine expressions over the
  /// final state (full row rank enforced by the network constructor).
  MCNNetwork finishFixed(const std::vector<Aff>& rows) const;
  /// Finish with a learnable readout initialized from the given rows.
  MCNNetwork finishLearnable(const std::vector<Aff>& rows) const;

 private:
  MCNNetwork finish(const std::vector<Aff>& rows, Readout::Mode mode) const;
  void requireOpen(bool open, const char* fn) const;
  void checkAff(const Aff& aff, int expectedLayer, const char* what) const;

  Eigen::Index inputDim_;
  Activation gamma_;
  std::vector<MCNLayer> layers_;
  std::vector<Eigen::Index> dims_;

  // Open-layer scratch.
  bool open_ = false;
  Activation sigma_ = Activation::Identity();
  int skipLayer_ = 0;
  std::vector<Aff> linRows_;
  std::vector<Aff> wRows_;
  std::vector<Aff> aRows_;
};

}  // namespace mcn
