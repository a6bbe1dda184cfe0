#include "mcn/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mcn {
namespace {

constexpr long kMaxTerms = 10'000'000;

// Dyadic block along one axis: alpha=0 holds only n=0; alpha>=1 holds
// 2^(alpha-1) <= n < 2^alpha.
void axisRange(int alpha, long& lo, long& hi) {
  if (alpha == 0) {
    lo = 0;
    hi = 0;
  } else {
    lo = 1L << (alpha - 1);
    hi = (1L << alpha) - 1;
  }
}

void enumerateBlocks(int d, int r, int axis, int budget, MultiIndex& alpha,
                     std::vector<MultiIndex>& out, MultiIndex& n) {
  if (axis == d) {
    out.push_back(n);
    return;
  }
  for (int a = 0; a <= budget; ++a) {
    alpha[static_cast<std::size_t>(axis)] = a;
    long lo = 0, hi = 0;
    axisRange(a, lo, hi);
    for (long v = lo; v <= hi; ++v) {
      n[static_cast<std::size_t>(axis)] = static_cast<int>(v);
      enumerateBlocks(d, r, axis + 1, budget - a, alpha, out, n);
    }
  }
}

// Frequency count by convolution over per-axis block sizes, so oversized
// requests are rejected before anything is materialized.
double countCross(int d, int r) {
  std::vector<double> g(static_cast<std::size_t>(r) + 1, 0.0);
  auto blockSize = [](int a) {
    return (a == 0) ? 1.0 : std::ldexp(1.0, a - 1);
  };
  for (int a = 0; a <= r; ++a) g[static_cast<std::size_t>(a)] = blockSize(a);
  for (int k = 2; k <= d; ++k) {
    std::vector<double> h(static_cast<std::size_t>(r) + 1, 0.0);
    for (int s = 0; s <= r; ++s) {
      for (int a = 0; a <= s; ++a) {
        h[static_cast<std::size_t>(s)] +=
            g[static_cast<std::size_t>(s - a)] * blockSize(a);
      }
    }
    g = std::move(h);
  }
  double total = 0.0;
  for (double v : g) total += v;
  return total;
}

}  // namespace

FourierIndexSet hyperbolicCross(int d, int r) {
  if (d < 1) throw std::invalid_argument("hyperbolicCross: d must be >= 1");
  if (r < 0) throw std::invalid_argument("hyperbolicCross: r must be >= 0");
  const double predicted = countCross(d, r) * std::ldexp(1.0, d);
  if (predicted > static_cast<double>(kMaxTerms)) {
    throw std::invalid_argument(
        "hyperbolicCross: index set too large: about " +
        std::to_string(predicted) + " terms exceeds " +
        std::to_string(kMaxTerms));
  }

  std::vector<MultiIndex> freqs;
  MultiIndex alpha(static_cast<std::size_t>(d), 0);
  MultiIndex n(static_cast<std::size_t>(d), 0);
  enumerateBlocks(d, r, 0, r, alpha, freqs, n);
  std::sort(freqs.begin(), freqs.end());

  FourierIndexSet idx;
  idx.d = d;
  idx.r = r;
  idx.nCount = static_cast<long>(freqs.size());

  for (const MultiIndex& f : freqs) {
    // Free parity choices exist only on axes with a nonzero frequency.
    std::vector<int> freeAxes;
    for (int j = 0; j < d; ++j) {
      if (f[static_cast<std::size_t>(j)] != 0) freeAxes.push_back(j);
    }
    const long combos = 1L << freeAxes.size();
    for (long mask = 0; mask < combos; ++mask) {
      FourierTerm term;
      term.n = f;
      term.parity.assign(static_cast<std::size_t>(d), 0);
      for (std::size_t b = 0; b < freeAxes.size(); ++b) {
        if ((mask >> b) & 1) {
          term.parity[static_cast<std::size_t>(freeAxes[b])] = 1;
        }
      }
      idx.terms.push_back(std::move(term));
    }
  }
  return idx;
}

double basisFactor(int n, int parity, double x) {
  if (n == 0) return 1.0 / std::numbers::sqrt2;
  if (parity == 0) return std::cos(n * std::numbers::pi * x);
  return std::sin((n - 0.5) * std::numbers::pi * x);
}

double evalBasis(const MultiIndex& n, const std::vector<int>& parity,
                 const Vector& x) {
  double value = 1.0;
  for (std::size_t j = 0; j < n.size(); ++j) {
    value *= basisFactor(n[j], parity[j], x(static_cast<Eigen::Index>(j)));
  }
  return value;
}

void fourierCoeffs(const std::function<double(const Vector&)>& f,
                   FourierIndexSet& idx, int quadOrder) {
  int maxFreq = 0;
  for (const FourierTerm& term : idx.terms) {
    for (int nj : term.n) maxFreq = std::max(maxFreq, nj);
  }
  if (quadOrder < 2 * maxFreq + 8) {
    throw std::invalid_argument(
        "fourierCoeffs: quadrature order " + std::to_string(quadOrder) +
        " below the aliasing guard " + std::to_string(2 * maxFreq + 8));
  }
  const QuadRule rule = gaussLegendre(quadOrder);
  for (FourierTerm& term : idx.terms) {
    term.coeff = tensorIntegrate(
        [&](const Vector& x) {
          return f(x) * evalBasis(term.n, term.parity, x);
        },
        idx.d, rule);
  }
}

double evalSeries(const FourierIndexSet& idx, const Vector& x) {
  double value = 0.0;
  for (const FourierTerm& term : idx.terms) {
    value += term.coeff * evalBasis(term.n, term.parity, x);
  }
  return value;
}

}  // namespace mcn
