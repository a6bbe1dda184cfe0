// Explicit-weight builders: certified bounds, exactness at special points,
// and the hand-computed interpolant values the constructions must hit.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mcn/constructive.hpp"
#include "mcn/serialize.hpp"
#include "mcn/sup_error.hpp"

using mcn::buildBasisElement;
using mcn::buildFloor;
using mcn::buildFourierApprox;
using mcn::buildPolynomial;
using mcn::buildProduct;
using mcn::buildProduct2;
using mcn::buildSawtoothSquare;
using mcn::buildTrig;
using mcn::CertifiedNet;
using mcn::makeTarget;
using mcn::supError;
using mcn::supErrorOn;
using mcn::supErrorRandom;
using mcn::TargetFn;
using mcn::TrigKind;
using mcn::Vector;

namespace {

double evalAt1(const CertifiedNet& c, double x) {
  Vector v(1);
  v(0) = x;
  return c.net.evalOutput(v)(0, 0);
}

double evalAt2(const CertifiedNet& c, double x, double y) {
  Vector v(2);
  v(0) = x;
  v(1) = y;
  return c.net.evalOutput(v)(0, 0);
}

}  // namespace

TEST_CASE("square interpolant hits hand-computed values at two stages") {
  const CertifiedNet c = buildSawtoothSquare(2, 1);  // knot spacing 1/4
  // Knots carry exact squares; midpoints carry chord averages.
  CHECK(evalAt1(c, 0.5) == 0.25);
  CHECK(evalAt1(c, 0.25) == 0.0625);
  CHECK(evalAt1(c, 0.125) == 0.03125);    // chord of 0 and 1/16
  CHECK(evalAt1(c, 0.375) == 0.15625);    // chord of 1/16 and 1/4
  CHECK(evalAt1(c, -0.375) == 0.15625);   // even symmetry through |x|
  CHECK(evalAt1(c, 1.0) == 1.0);
  CHECK(evalAt1(c, -1.0) == 1.0);
  CHECK(evalAt1(c, 0.0) == 0.0);
}

TEST_CASE("square error halves per stage and vanishes at dyadic knots") {
  for (int t : {2, 4, 8, 12}) {
    const CertifiedNet c = buildSawtoothSquare(1, t);
    CHECK(c.bound == std::ldexp(1.0, -t));
    const mcn::SupErrorResult r = supError(c, 4001);
    CHECK(r.error <= c.bound);
    // Dyadic values stay exactly representable through every stage, so the
    // interpolant is bit-exact at its knots.
    const int knots = 1 << t;
    const int stride = std::max(1, knots / 64);
    for (int k = -knots; k <= knots; k += stride) {
      const double x = std::ldexp(static_cast<double>(k), -t);
      CHECK(evalAt1(c, x) == x * x);
    }
  }
  // Tighter stages strictly reduce the measured error.
  const double e4 = supError(buildSawtoothSquare(1, 4), 4001).error;
  const double e8 = supError(buildSawtoothSquare(2, 4), 4001).error;
  CHECK(e8 < e4);
}

TEST_CASE("square builder validates stage counts") {
  CHECK_THROWS_AS(buildSawtoothSquare(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(buildSawtoothSquare(3, 0), std::invalid_argument);
  CHECK_THROWS_AS(buildSawtoothSquare(13, 4), std::invalid_argument);
}

TEST_CASE("pairwise product annihilates exactly when either factor is zero") {
  const CertifiedNet c = buildProduct2(1, 8);
  for (double v : {-1.0, -0.73, -0.25, 0.1, 0.5, 0.999}) {
    // The three sawtooth chains for (v, 0) run in bitwise lockstep, so the
    // combination cancels to exactly zero.
    CHECK(evalAt2(c, v, 0.0) == 0.0);
    CHECK(evalAt2(c, 0.0, v) == 0.0);
  }
  CHECK(evalAt2(c, 0.5, 0.5) == 0.25);
  CHECK(evalAt2(c, -0.5, 0.5) == -0.25);
  CHECK(evalAt2(c, 1.0, 1.0) == 1.0);
}

TEST_CASE("pairwise product respects its stated bound on a dense grid") {
  const CertifiedNet c = buildProduct2(2, 4);
  CHECK(c.bound == 6.0 * std::ldexp(1.0, -8));
  const mcn::SupErrorResult r = supError(c, 301);
  CHECK(r.error <= c.bound);
  CHECK(c.stageParams.m == 2);
  CHECK(c.stageParams.l == 4);
}

TEST_CASE("product trees pad odd arities and stay within the tree bound") {
  const CertifiedNet c3 = buildProduct(3, 1, 10);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector x(3);
  for (int i = 0; i < 2000; ++i) {
    for (int a = 0; a < 3; ++a) x(a) = dist(rng);
    const double want = x(0) * x(1) * x(2);
    CHECK(std::abs(c3.net.evalOutput(x)(0, 0) - want) <= c3.bound);
  }
  // A zero factor still cancels exactly through the padded tree.
  x(0) = 0.37;
  x(1) = -0.81;
  x(2) = 0.0;
  CHECK(c3.net.evalOutput(x)(0, 0) == 0.0);
}

TEST_CASE("product bound accumulates one doubling per tree level") {
  const int t = 12;
  const double pairwise = 6.0 * std::ldexp(1.0, -t);
  CHECK(buildProduct(4, 1, t).bound == 4.0 * pairwise);
  CHECK(buildProduct(8, 1, t).bound == 8.0 * pairwise);
  CHECK(buildProduct(5, 1, t).bound == 8.0 * pairwise);  // padded to 8
  const CertifiedNet c8 = buildProduct(8, 1, t);
  const mcn::SupErrorResult r = supErrorRandom(c8, 20000, 3);
  CHECK(r.error <= c8.bound);
  CHECK_THROWS_AS(buildProduct(1, 1, 8), std::invalid_argument);
  CHECK_THROWS_AS(buildProduct(33, 1, 8), std::invalid_argument);
}

TEST_CASE("x^7 stays within its per-monomial certificate") {
  const int t = 12;
  std::vector<double> a(7, 0.0);
  a[6] = 1.0;
  const CertifiedNet c = buildPolynomial(a, 1, t);
  // bits(7) = {1, 2, 4}: ladder drift (0 + 1 + 3) eps0, tree of three
  // factors padded to four: 4 * eps2.
  CHECK(c.bound == 28.0 * std::ldexp(1.0, -t));
  const mcn::SupErrorResult r = supError(c, 20001);
  CHECK(r.error <= c.bound);
}

TEST_CASE("linear polynomials pass through exactly") {
  const CertifiedNet c = buildPolynomial({2.5}, 1, 4);
  for (double x : {-1.0, -0.375, 0.0, 0.6285193, 1.0}) {
    CHECK(evalAt1(c, x) == 2.5 * x);
  }
  CHECK(c.bound == 0x1p-52);
}

TEST_CASE("the degree-2 polynomial reproduces the square builder bitwise") {
  const CertifiedNet sq = buildSawtoothSquare(1, 8);
  const CertifiedNet poly = buildPolynomial({0.0, 1.0}, 1, 8);
  CHECK(poly.bound == sq.bound);
  for (int i = 0; i <= 1000; ++i) {
    const double x = -1.0 + 2.0 * i / 1000.0;
    CHECK(evalAt1(poly, x) == evalAt1(sq, x));
  }
}

TEST_CASE("mixed-coefficient polynomials weight the monomial bounds") {
  const int t = 10;
  const std::vector<double> a{0.5, 0.0, -2.0};  // 0.5 x - 2 x^3
  const CertifiedNet c = buildPolynomial(a, 2, 5);
  // x contributes nothing; x^3 has bits {1, 2}: ladder (0 + 1) eps0 plus a
  // 2-leaf tree: 2 * eps2 = 12 eps0, weighted by |a_3| = 2.
  CHECK(c.bound == 2.0 * 13.0 * std::ldexp(1.0, -t));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = dist(rng);
    CHECK(std::abs(evalAt1(c, x) - (0.5 * x - 2.0 * x * x * x)) <= c.bound);
  }
  CHECK(buildPolynomial({0.0, 0.0}, 1, 4).bound == 0x1p-52);
  CHECK_THROWS_AS(buildPolynomial({}, 1, 4), std::invalid_argument);
}

TEST_CASE("floor is exact on its domain including integer inputs") {
  const CertifiedNet c = buildFloor(5);
  CHECK(evalAt1(c, 2.5) == 2.0);
  CHECK(evalAt1(c, 3.0) == 3.0);
  CHECK(evalAt1(c, 0.99) == 0.0);
  CHECK(evalAt1(c, 0.0) == 0.0);
  CHECK(evalAt1(c, 5.0) == 5.0);
  CHECK(evalAt1(c, 3.0 - 0x1p-44) == 2.0);

  const CertifiedNet big = buildFloor(1000);
  const mcn::SupErrorResult r = supErrorRandom(big, 100000, 17);
  CHECK(r.error == 0.0);
  CHECK(big.bound == 0x1p-52);

  CHECK_THROWS_AS(buildFloor(0), std::invalid_argument);
  CHECK_THROWS_AS(buildFloor(1'000'001), std::invalid_argument);
}

TEST_CASE("cosine nets track the library cosine within their bounds") {
  for (int n : {1, 2, 4}) {
    const CertifiedNet c = buildTrig(TrigKind::Cos, n, 16, 1, 20);
    const mcn::SupErrorResult r = supError(c, 4001);
    CHECK(r.error <= c.bound);
    CHECK(c.bound <= 1e-3);
    CHECK(std::abs(evalAt1(c, 1.0) - ((n % 2) ? -1.0 : 1.0)) <= c.bound);
    CHECK(std::abs(evalAt1(c, 0.0) - 1.0) <= c.bound);
  }
}

TEST_CASE("shifted sine nets share the pipeline and its certificate") {
  for (int n : {1, 3}) {
    const CertifiedNet c = buildTrig(TrigKind::Sin, n, 16, 1, 20);
    const mcn::SupErrorResult r = supError(c, 4001);
    CHECK(r.error <= c.bound);
    const double at1 = std::sin((n - 0.5) * std::numbers::pi);
    CHECK(std::abs(evalAt1(c, 1.0) - at1) <= c.bound);
    CHECK(std::abs(evalAt1(c, 0.0)) <= c.bound);
    CHECK_FALSE(c.deviations.empty());
  }
}

TEST_CASE("trig bound decreases with Taylor degree until the stage floor") {
  const double b4 = buildTrig(TrigKind::Cos, 1, 4, 1, 30).bound;
  const double b6 = buildTrig(TrigKind::Cos, 1, 6, 1, 30).bound;
  const double b8 = buildTrig(TrigKind::Cos, 1, 8, 1, 30).bound;
  CHECK(b4 > b6);
  CHECK(b6 > b8);
}

TEST_CASE("trig builder validates frequency and degree") {
  CHECK_THROWS_AS(buildTrig(TrigKind::Cos, 0, 8, 1, 12), std::invalid_argument);
  CHECK_THROWS_AS(buildTrig(TrigKind::Cos, 65, 8, 1, 12),
                  std::invalid_argument);
  CHECK_THROWS_AS(buildTrig(TrigKind::Cos, 1, 3, 1, 12), std::invalid_argument);
  CHECK_THROWS_AS(buildTrig(TrigKind::Cos, 1, 2, 1, 12), std::invalid_argument);
  CHECK_THROWS_AS(buildTrig(TrigKind::Sin, 1, 8, 3, 17), std::invalid_argument);
}

TEST_CASE("basis elements cover constants, single axes, and tensors") {
  const CertifiedNet c11 = buildBasisElement({1, 1}, {0, 0}, 16, 1, 20);
  const mcn::SupErrorResult r = supError(c11, 201);
  CHECK(r.error <= c11.bound);

  const CertifiedNet c0 = buildBasisElement({0, 0}, {0, 0}, 8, 1, 12);
  CHECK(c0.bound == 0x1p-52);
  Vector at(2);
  at(0) = 0.3;
  at(1) = -0.8;
  // Matches the rounded tensor constant (1/sqrt2)^2 bit for bit.
  CHECK(evalAt2(c0, 0.3, -0.8) == mcn::evalBasis({0, 0}, {0, 0}, at));

  const CertifiedNet cs = buildBasisElement({2, 0}, {1, 0}, 16, 1, 20);
  const mcn::SupErrorResult rs = supError(cs, 201);
  CHECK(rs.error <= cs.bound);

  CHECK_THROWS_AS(buildBasisElement({0}, {1}, 8, 1, 12), std::invalid_argument);
  CHECK_THROWS_AS(buildBasisElement({1, 1}, {0}, 8, 1, 12),
                  std::invalid_argument);
  CHECK_THROWS_AS(buildBasisElement({1, 1, 1, 1}, {0, 0, 0, 0}, 8, 1, 12),
                  std::invalid_argument);
}

TEST_CASE("every certificate upper-bounds its measured error and survives JSON") {
  std::vector<CertifiedNet> nets;
  nets.push_back(buildSawtoothSquare(1, 8));
  nets.push_back(buildProduct2(1, 8));
  nets.push_back(buildProduct(3, 1, 8));
  nets.push_back(buildPolynomial({1.0, 0.0, 1.0}, 1, 8));
  nets.push_back(buildFloor(7));
  nets.push_back(buildTrig(TrigKind::Cos, 2, 8, 1, 12));
  nets.push_back(buildTrig(TrigKind::Sin, 1, 8, 1, 12));
  nets.push_back(buildBasisElement({1, 1}, {0, 0}, 8, 1, 12));
  for (const CertifiedNet& c : nets) {
    CAPTURE(c.boundFormula);
    CHECK(c.bound > 0.0);
    CHECK(c.net.depth() >= 1);
    CHECK(c.domain.size() == static_cast<std::size_t>(c.net.inputDim()));
    CHECK(c.stageParams.width == c.net.maxStateDim());
    const long grid = (c.net.inputDim() == 1) ? 2001 : 101;
    CHECK(supError(c, grid).error <= c.bound);

    const nlohmann::json j = certifiedNetToJson(c);
    const CertifiedNet back = mcn::certifiedNetFromJson(j);
    CHECK(certifiedNetToJson(back).dump() == j.dump());
    CHECK(back.bound == c.bound);
    CHECK(back.domain == c.domain);
    // The rebuilt target evaluates identically.
    Vector x = Vector::Constant(c.net.inputDim(), 0.3125);
    if (c.domain[0][0] >= 0.0) x = Vector::Constant(c.net.inputDim(), 2.5);
    CHECK(back.target.eval(x) == c.target.eval(x));
  }
}

TEST_CASE("target factory rejects unknown kinds and rebuilds known ones") {
  CHECK_THROWS_AS(makeTarget({{"kind", "mystery"}}), std::invalid_argument);
  CHECK_THROWS_AS(makeTarget(nlohmann::json::array()), std::invalid_argument);
  const TargetFn mix = makeTarget({{"kind", "cos-mix"}});
  Vector x(1);
  x(0) = 0.3;
  CHECK(mix.eval(x) ==
        doctest::Approx(std::cos(0.3 * std::numbers::pi) +
                        0.5 * std::cos(0.6 * std::numbers::pi))
            .epsilon(1e-15));
  const TargetFn zero = makeTarget({{"kind", "zero"}, {"d", 2}});
  Vector y(2);
  y(0) = 0.5;
  y(1) = -0.5;
  CHECK(zero.eval(y) == 0.0);
}
