// Measured sup-norm error of certified nets over grids or random clouds.
#pragma once

#include <cstdint>
#include <functional>

#include "mcn/constructive.hpp"

namespace mcn {

struct SupErrorResult {
  double error = 0.0;
  Vector argmax;
};

/// Sup of |net(x) - target(x)| over the tensor grid with `gridPerAxis`
/// equally spaced points per axis of the certified domain (endpoints
/// included). Batched and threaded; the reduction order is fixed, so the
/// result is deterministic. Rejects grids above 2*10^7 total points.
SupErrorResult supError(const CertifiedNet& cnet, long gridPerAxis);

/// Same sweep against an arbitrary reference function (for example the
/// original integrand rather than the certificate's truncated series).
SupErrorResult supErrorOn(const CertifiedNet& cnet,
                          const std::function<double(const Vector&)>& ref,
                          long gridPerAxis);

/// Sup over `count` uniform samples from the certified domain.
SupErrorResult supErrorRandom(const CertifiedNet& cnet, long count,
                              std::uint64_t seed);

}  // namespace mcn
