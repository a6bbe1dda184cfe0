// Hyperbolic-cross index sets and the cosine/sine basis on [-1,1]^d.
#pragma once

#include <functional>
#include <vector>

#include "mcn/quadrature.hpp"

namespace mcn {

/// d nonnegative frequencies, one per axis.
using MultiIndex = std::vector<int>;

/// One basis element phi_n^[i] (tensor product over the axes) with its
/// coefficient once computed. parity[j] selects cos (0) vs sin (1) on axis j
/// and is forced to 0 wherever n[j] == 0 (the constant factor 1/sqrt(2)).
struct FourierTerm {
  MultiIndex n;
  std::vector<int> parity;
  double coeff = 0.0;
};

/// The dyadic-block union {n : exists alpha, |alpha|_1 <= r, n in rho(alpha)}
/// crossed with all admissible parity vectors.
struct FourierIndexSet {
  int d = 1;
  int r = 0;
  long nCount = 0;  // distinct frequency vectors (terms / parities collapsed)
  std::vector<FourierTerm> terms;
};

/// Enumerates the hyperbolic cross exactly; deterministic canonical order
/// (frequencies lexicographic, parities in binary order).
FourierIndexSet hyperbolicCross(int d, int r);

/// One-axis factor: 1/sqrt(2) for n=0, cos(n pi x) for parity 0,
/// sin((n-1/2) pi x) for parity 1.
double basisFactor(int n, int parity, double x);

/// Full tensor basis element at x.
double evalBasis(const MultiIndex& n, const std::vector<int>& parity,
                 const Vector& x);

/// Fills every term's coefficient with the tensor Gauss-Legendre integral
/// of f * phi over [-1,1]^d. Requires quadOrder >= 2*maxfreq + 8.
void fourierCoeffs(const std::function<double(const Vector&)>& f,
                   FourierIndexSet& idx, int quadOrder);

/// The truncated series evaluated directly (the reference target for nets
/// assembled from an index set).
double evalSeries(const FourierIndexSet& idx, const Vector& x);

}  // namespace mcn
