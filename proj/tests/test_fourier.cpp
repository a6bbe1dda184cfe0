// Hyperbolic-cross index sets, Gauss-Legendre quadrature, basis
// orthonormality, coefficient recovery, and assembled series nets.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "mcn/constructive.hpp"
#include "mcn/fourier.hpp"
#include "mcn/quadrature.hpp"
#include "mcn/sup_error.hpp"

using mcn::evalBasis;
using mcn::evalSeries;
using mcn::FourierIndexSet;
using mcn::FourierTerm;
using mcn::fourierCoeffs;
using mcn::gaussLegendre;
using mcn::hyperbolicCross;
using mcn::MultiIndex;
using mcn::tensorIntegrate;
using mcn::Vector;

namespace {

// Independent membership rule: block index of n is 0 for n=0 and
// floor(log2 n) + 1 otherwise; a frequency vector belongs to the cross at
// budget r when its block indices sum to at most r.
int blockIndex(int n) {
  if (n == 0) return 0;
  int a = 0;
  while ((1 << a) <= n) ++a;
  return a;
}

std::set<MultiIndex> bruteForceCross(int d, int r) {
  std::set<MultiIndex> out;
  const int cap = 1 << r;  // largest admissible frequency is 2^r - 1
  MultiIndex n(static_cast<std::size_t>(d), 0);
  while (true) {
    int sum = 0;
    for (int v : n) sum += blockIndex(v);
    if (sum <= r) out.insert(n);
    int axis = 0;
    while (axis < d) {
      if (++n[static_cast<std::size_t>(axis)] < cap) break;
      n[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == d) break;
  }
  return out;
}

}  // namespace

TEST_CASE("hyperbolic cross equals exhaustive enumeration up to d=4, r=6") {
  for (int d = 1; d <= 4; ++d) {
    for (int r = 0; r <= 6; ++r) {
      const FourierIndexSet idx = hyperbolicCross(d, r);
      std::set<MultiIndex> got;
      long termCount = 0;
      for (const FourierTerm& term : idx.terms) {
        got.insert(term.n);
        ++termCount;
      }
      const std::set<MultiIndex> want = bruteForceCross(d, r);
      CAPTURE(d);
      CAPTURE(r);
      CHECK(got == want);
      CHECK(idx.nCount == static_cast<long>(want.size()));
      long expectedTerms = 0;
      for (const MultiIndex& n : want) {
        int nz = 0;
        for (int v : n) nz += (v != 0);
        expectedTerms += 1L << nz;
      }
      CHECK(termCount == expectedTerms);
    }
  }
}

TEST_CASE("documented sizes: 8 frequencies for d=1,r=3 and d=2,r=2") {
  CHECK(hyperbolicCross(1, 3).nCount == 8);
  CHECK(hyperbolicCross(2, 2).nCount == 8);
  // The d=2, r=2 cross crossed with parities gives 17 basis elements.
  CHECK(hyperbolicCross(2, 2).terms.size() == 17);
}

TEST_CASE("parities enumerate exactly the nonzero axes") {
  const FourierIndexSet idx = hyperbolicCross(2, 2);
  for (const FourierTerm& term : idx.terms) {
    for (std::size_t j = 0; j < term.n.size(); ++j) {
      if (term.n[j] == 0) CHECK(term.parity[j] == 0);
    }
  }
  // The (1,1) frequency appears with all four parity combinations.
  int count11 = 0;
  for (const FourierTerm& term : idx.terms) {
    if (term.n == MultiIndex{1, 1}) ++count11;
  }
  CHECK(count11 == 4);
}

TEST_CASE("index count grows like 2^r r^(d-1) within a factor of ten") {
  for (int r = 4; r <= 8; ++r) {
    const double n = static_cast<double>(hyperbolicCross(2, r).nCount);
    const double model = std::ldexp(1.0, r) * r;
    CHECK(n / model >= 0.1);
    CHECK(n / model <= 10.0);
  }
}

TEST_CASE("index set rejects sizes that cannot be materialized") {
  CHECK_THROWS_AS(hyperbolicCross(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(hyperbolicCross(2, -1), std::invalid_argument);
  CHECK_THROWS_AS(hyperbolicCross(4, 24), std::invalid_argument);
}

TEST_CASE("gauss-legendre rules integrate what they promise") {
  const mcn::QuadRule rule = gaussLegendre(8);
  CHECK(rule.nodes.size() == 8);
  double wsum = 0.0;
  for (double w : rule.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rule.nodes[i] == -rule.nodes[7 - i]);  // symmetric by construction
    CHECK(rule.weights[i] == rule.weights[7 - i]);
  }
  CHECK(std::is_sorted(rule.nodes.begin(), rule.nodes.end()));

  // Order 5 is exact through degree 9.
  const mcn::QuadRule r5 = gaussLegendre(5);
  double x8 = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    x8 += r5.weights[i] * std::pow(r5.nodes[i], 8);
  }
  CHECK(x8 == doctest::Approx(2.0 / 9.0).epsilon(1e-14));

  const double triple = tensorIntegrate(
      [](const Vector& x) {
        return x(0) * x(0) * std::pow(x(1), 4) * std::pow(x(2), 6);
      },
      3, gaussLegendre(8));
  CHECK(triple ==
        doctest::Approx((2.0 / 3.0) * (2.0 / 5.0) * (2.0 / 7.0)).epsilon(1e-13));
  CHECK_THROWS_AS(gaussLegendre(0), std::invalid_argument);
  CHECK_THROWS_AS(tensorIntegrate([](const Vector&) { return 0.0; }, 4,
                                  gaussLegendre(4)),
                  std::invalid_argument);
}

TEST_CASE("the tensor basis is orthonormal under the quadrature rule") {
  const FourierIndexSet idx = hyperbolicCross(2, 2);
  const std::size_t n = idx.terms.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const double g = tensorIntegrate(
          [&](const Vector& x) {
            return evalBasis(idx.terms[a].n, idx.terms[a].parity, x) *
                   evalBasis(idx.terms[b].n, idx.terms[b].parity, x);
          },
          2, gaussLegendre(64));
      const double want = (a == b) ? 1.0 : 0.0;
      CHECK(std::abs(g - want) <= 1e-8);
    }
  }
}

TEST_CASE("coefficients recover a pure cosine product exactly") {
  FourierIndexSet idx = hyperbolicCross(2, 2);
  fourierCoeffs(
      [](const Vector& x) {
        return std::cos(std::numbers::pi * x(0)) *
               std::cos(std::numbers::pi * x(1));
      },
      idx, 64);
  for (const FourierTerm& term : idx.terms) {
    const bool hit = term.n == MultiIndex{1, 1} && term.parity[0] == 0 &&
                     term.parity[1] == 0;
    if (hit) {
      CHECK(std::abs(term.coeff - 1.0) <= 1e-10);
    } else {
      CHECK(std::abs(term.coeff) <= 1e-10);
    }
  }
}

TEST_CASE("a constant lands entirely on the constant term") {
  FourierIndexSet idx = hyperbolicCross(2, 2);
  fourierCoeffs([](const Vector&) { return 1.0; }, idx, 64);
  for (const FourierTerm& term : idx.terms) {
    const bool isConst =
        std::all_of(term.n.begin(), term.n.end(), [](int v) { return v == 0; });
    if (isConst) {
      CHECK(std::abs(term.coeff - 2.0) <= 1e-10);  // (sqrt 2)^2
    } else {
      CHECK(std::abs(term.coeff) <= 1e-10);
    }
  }
  Vector x(2);
  x(0) = 0.39;
  x(1) = -0.77;
  CHECK(std::abs(evalSeries(idx, x) - 1.0) <= 1e-10);
}

TEST_CASE("series evaluation matches manual summation") {
  FourierIndexSet idx = hyperbolicCross(1, 2);
  double fill = 0.25;
  for (FourierTerm& term : idx.terms) {
    term.coeff = fill;
    fill = -0.5 * fill;
  }
  for (double xv : {-0.9, -0.31, 0.0, 0.44, 1.0}) {
    Vector x(1);
    x(0) = xv;
    double manual = 0.0;
    for (const FourierTerm& term : idx.terms) {
      manual += term.coeff * evalBasis(term.n, term.parity, x);
    }
    CHECK(evalSeries(idx, x) == doctest::Approx(manual).epsilon(1e-15));
  }
}

TEST_CASE("coefficient computation enforces the aliasing guard") {
  FourierIndexSet idx = hyperbolicCross(1, 2);  // frequencies up to 3
  CHECK_THROWS_AS(fourierCoeffs([](const Vector&) { return 1.0; }, idx, 8),
                  std::invalid_argument);
}

TEST_CASE("a vanishing integrand assembles the zero fallback net") {
  const mcn::TargetFn zero = mcn::makeTarget({{"kind", "zero"}, {"d", 1}});
  const mcn::CertifiedNet c = buildFourierApprox(zero, 1, 2, 8, 1, 12);
  CHECK(c.bound == 0x1p-52);
  CHECK(c.net.depth() >= 1);
  Vector x(1);
  for (double xv : {-1.0, -0.2, 0.7}) {
    x(0) = xv;
    CHECK(c.net.evalOutput(x)(0, 0) == 0.0);
  }
  CHECK(mcn::supError(c, 501).error == 0.0);
}

TEST_CASE("series nets certify against the truncated series") {
  const mcn::TargetFn f = mcn::makeTarget({{"kind", "cos-mix"}});
  const mcn::CertifiedNet c = buildFourierApprox(f, 1, 2, 16, 1, 20);
  CHECK(mcn::supError(c, 2001).error <= c.bound);
  CHECK(c.stageParams.width == c.net.maxStateDim());
}

TEST_CASE("widening the cross strictly improves a two-frequency mixture") {
  const mcn::TargetFn f = mcn::makeTarget({{"kind", "cos-mix"}});
  const mcn::CertifiedNet c1 = buildFourierApprox(f, 1, 1, 16, 1, 20);
  const mcn::CertifiedNet c2 = buildFourierApprox(f, 1, 2, 16, 1, 20);
  const double e1 = mcn::supErrorOn(c1, f.eval, 2001).error;
  const double e2 = mcn::supErrorOn(c2, f.eval, 2001).error;
  CHECK(e2 < e1);
  // The missing half-amplitude frequency dominates the r=1 error.
  CHECK(e1 > 0.4);
  CHECK(e2 <= c2.bound);
}

TEST_CASE("a function constant along one axis uses the 1/sqrt2 factor") {
  FourierIndexSet idx = hyperbolicCross(2, 2);
  auto f = [](const Vector& x) { return std::cos(std::numbers::pi * x(0)); };
  fourierCoeffs(f, idx, 64);
  for (const FourierTerm& term : idx.terms) {
    const bool hit = term.n == MultiIndex{1, 0} && term.parity[0] == 0;
    if (hit) {
      CHECK(std::abs(term.coeff - std::numbers::sqrt2) <= 1e-10);
    } else {
      CHECK(std::abs(term.coeff) <= 1e-10);
    }
  }
  const mcn::TargetFn target{{{"kind", "cos"}, {"n", 1}}, f};
  const mcn::CertifiedNet c = buildFourierApprox(target, 2, 2, 16, 1, 20);
  CHECK(mcn::supErrorOn(c, f, 151).error <= c.bound);
}
