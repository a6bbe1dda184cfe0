// Explicit-weight builders: squares, products, polynomials, floor, cosine /
// sine pipelines, and truncated Fourier series, each with a certified
// sup-norm error bound.
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcn/fourier.hpp"
#include "mcn/network.hpp"

namespace mcn {

/// Construction size record: sawtooth stages per block (m), blocks (l),
/// polynomial/Taylor degree or product arity (p), and the widest state of
/// the built network.
struct StageParams {
  int m = 0;
  int l = 0;
  int p = 0;
  Eigen::Index width = 0;
};

/// An evaluable target with a JSON descriptor from which it can be rebuilt
/// (the descriptor is what certificates persist).
struct TargetFn {
  nlohmann::json descriptor;
  std::function<double(const Vector&)> eval;
};

/// A constructed network bundled with its analytic sup-norm error bound.
/// Central contract: measured sup error over the stated domain never
/// exceeds `bound`, and `bound` is strictly positive (exact constructions
/// report one double-precision ulp of slack).
struct CertifiedNet {
  MCNNetwork net;
  std::vector<std::array<double, 2>> domain;  // per-axis [lo, hi]
  TargetFn target;
  double bound = 0.0;
  std::string boundFormula;
  StageParams stageParams;
  std::vector<std::string> deviations;
};

/// Rebuilds an evaluable target from a certificate descriptor. Supported
/// kinds: square, product{p}, polynomial{coeffs}, floor, cos{n}, sin{n},
/// basis{n,parity}, series{terms}, zero{d}, cospi-prod{d}, cos-mix.
TargetFn makeTarget(const nlohmann::json& descriptor);

/// Piecewise-linear interpolant of x^2 on [-1,1] with knot spacing
/// 2^-(m*l); bound 2^-(m*l). Rejects m*l > 50.
CertifiedNet buildSawtoothSquare(int m, int l);

/// xy on [-1,1]^2 via 2[S((x+y)/2) - S(x/2) - S(y/2)]; bound 6 * 2^-(m*l).
CertifiedNet buildProduct2(int m, int l);

/// Product of p inputs on [-1,1]^p by a binary tree of pairwise products
/// (inputs padded with constant 1 to the next power of two). p in [2, 32].
CertifiedNet buildProduct(int p, int m, int l);

/// sum_j coeffs[j-1] * x^j on [-1,1], built from the repeated-squaring
/// power ladder and one product tree per monomial. Degree limit 32.
CertifiedNet buildPolynomial(const std::vector<double>& coeffs, int m, int l);

/// Exact floor on [0, rangeMax] from rangeMax binary-step units.
/// Negative inputs are outside the certified domain (see deviations).
CertifiedNet buildFloor(long rangeMax);

enum class TrigKind { Cos, Sin };

/// cos(n pi x) or sin((n - 1/2) pi x) on [-1,1]: range reduction by the
/// floor construction, then a per-subinterval Taylor polynomial of even
/// degree p >= 4 evaluated through the square/product machinery.
/// n in [1, 64]; bound = Taylor remainder + construction error.
CertifiedNet buildTrig(TrigKind kind, int n, int p, int m, int l);

/// One tensor basis element phi_n^[parity] on [-1,1]^d, d <= 3.
CertifiedNet buildBasisElement(const MultiIndex& n,
                               const std::vector<int>& parity, int p, int m,
                               int l);

/// Truncated hyperbolic-cross series of f at level r, assembled from basis
/// elements sharing one lockstep pipeline. The certificate bound covers the
/// distance to the truncated series; the truncation error itself depends on
/// unknown smoothness and is not certified.
CertifiedNet buildFourierApprox(const TargetFn& f, int d, int r, int p, int m,
                                int l, int quadOrder = 64);

nlohmann::json certifiedNetToJson(const CertifiedNet& cnet);
CertifiedNet certifiedNetFromJson(const nlohmann::json& j);

}  // namespace mcn
