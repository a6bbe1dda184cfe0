#include "mcn/sup_error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mcn {
namespace {

constexpr long kMaxPoints = 20'000'000;
constexpr Eigen::Index kBatch = 8192;

struct BatchResult {
  double error = -1.0;
  long index = 0;  // global point index of the argmax
};

// Evaluates |net - ref| over points produced by `point(g)` for g in
// [0, total), in fixed-size batches distributed over a thread pool. The
// per-batch maxima are reduced in batch order, so the argmax is
// deterministic regardless of thread scheduling.
SupErrorResult sweep(const CertifiedNet& cnet,
                     const std::function<double(const Vector&)>& ref,
                     long total,
                     const std::function<void(long, Vector&)>& point) {
  const Eigen::Index d = cnet.net.inputDim();
  const long nBatches = (total + kBatch - 1) / kBatch;
  std::vector<BatchResult> results(static_cast<std::size_t>(nBatches));

  auto worker = [&](long firstBatch, long strideBatches) {
    Vector x(d);
    for (long bi = firstBatch; bi < nBatches; bi += strideBatches) {
      const long lo = bi * kBatch;
      const long hi = std::min(total, lo + kBatch);
      const Eigen::Index cols = static_cast<Eigen::Index>(hi - lo);
      Matrix X(d, cols);
      std::vector<double> want(static_cast<std::size_t>(cols));
      for (Eigen::Index j = 0; j < cols; ++j) {
        point(lo + j, x);
        X.col(j) = x;
        want[static_cast<std::size_t>(j)] = ref(x);
      }
      const Matrix out = cnet.net.evalOutput(X);
      BatchResult best;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double err =
            std::abs(out(0, j) - want[static_cast<std::size_t>(j)]);
        if (err > best.error) {
          best.error = err;
          best.index = lo + j;
        }
      }
      results[static_cast<std::size_t>(bi)] = best;
    }
  };

  long nThreads = static_cast<long>(std::thread::hardware_concurrency());
  nThreads = std::clamp<long>(nThreads, 1, 8);
  nThreads = std::min(nThreads, nBatches);
  if (nThreads <= 1 || total < 2 * kBatch) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nThreads));
    for (long i = 0; i < nThreads; ++i) {
      pool.emplace_back(worker, i, nThreads);
    }
    for (std::thread& th : pool) th.join();
  }

  BatchResult best;
  for (const BatchResult& r : results) {
    if (r.error > best.error) best = r;
  }
  SupErrorResult res;
  res.error = std::max(best.error, 0.0);
  res.argmax = Vector(d);
  point(best.index, res.argmax);
  return res;
}

}  // namespace

SupErrorResult supErrorOn(const CertifiedNet& cnet,
                          const std::function<double(const Vector&)>& ref,
                          long gridPerAxis) {
  const int d = static_cast<int>(cnet.domain.size());
  if (d < 1 || cnet.net.inputDim() != d) {
    throw std::invalid_argument("supError: certificate domain/net mismatch");
  }
  if (gridPerAxis < 1) {
    throw std::invalid_argument("supError: grid must have >= 1 point per axis");
  }
  double totalD = 1.0;
  for (int a = 0; a < d; ++a) totalD *= static_cast<double>(gridPerAxis);
  if (totalD > static_cast<double>(kMaxPoints)) {
    throw std::invalid_argument(
        "supError: grid of " + std::to_string(totalD) +
        " points exceeds the 2*10^7 cap; reduce the per-axis count");
  }
  const long total = static_cast<long>(totalD);

  const auto& domain = cnet.domain;
  auto point = [&, gridPerAxis](long g, Vector& x) {
    for (int a = 0; a < d; ++a) {
      const long i = g % gridPerAxis;
      g /= gridPerAxis;
      const double lo = domain[static_cast<std::size_t>(a)][0];
      const double hi = domain[static_cast<std::size_t>(a)][1];
      x(a) = (gridPerAxis == 1)
                 ? 0.5 * (lo + hi)
                 : lo + (hi - lo) * static_cast<double>(i) /
                           static_cast<double>(gridPerAxis - 1);
    }
  };
  return sweep(cnet, ref, total, point);
}

SupErrorResult supError(const CertifiedNet& cnet, long gridPerAxis) {
  return supErrorOn(cnet, cnet.target.eval, gridPerAxis);
}

SupErrorResult supErrorRandom(const CertifiedNet& cnet, long count,
                              std::uint64_t seed) {
  const int d = static_cast<int>(cnet.domain.size());
  if (d < 1 || cnet.net.inputDim() != d) {
    throw std::invalid_argument("supError: certificate domain/net mismatch");
  }
  if (count < 1 || count > kMaxPoints) {
    throw std::invalid_argument("supError: sample count out of range");
  }
  // Pre-draw the cloud so the point callback is pure (the sweep revisits
  // the argmax index after the reduction).
  Matrix cloud(d, count);
  std::mt19937_64 rng(seed);
  for (long j = 0; j < count; ++j) {
    for (int a = 0; a < d; ++a) {
      std::uniform_real_distribution<double> dist(
          cnet.domain[static_cast<std::size_t>(a)][0],
          cnet.domain[static_cast<std::size_t>(a)][1]);
      cloud(a, j) = dist(rng);
    }
  }
  auto point = [&cloud](long g, Vector& x) { x = cloud.col(g); };
  return sweep(cnet, cnet.target.eval, count, point);
}

}  // namespace mcn
