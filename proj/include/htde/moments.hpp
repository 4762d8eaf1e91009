#pragma once

#include "htde/basis.hpp"
#include "htde/parallel.hpp"
#include "htde/samples.hpp"
#include "htde/tensor.hpp"
#include "htde/tree.hpp"

namespace htde {

/// Sketched second moments of a distribution over the tree.
///
/// Slot-indexed by node:
///  - A[slot]: cross moment between the node's cluster-side and
///    complement-side sketches. At leaves the cluster side is one-hot, so the
///    leaf entry is the full sketched leaf marginal (n^m x width rows). The
///    root slot is empty.
///  - B[slot]: for internal nodes, the three-way moment between the two
///    children's cluster-side sketches and the node's own complement-side
///    sketch.
///
/// Sample-based sets keep the raw accumulated sums next to the normalized
/// moments; sums of the spin-basis products are integer-valued, which makes
/// merge_moments exact.
struct MomentSet {
  std::vector<Matrix> A;
  std::vector<Tensor3> B;
  Index sample_count = 0;  // 0 for exact (density) moments
  std::vector<Matrix> A_sums;
  std::vector<Tensor3> B_sums;

  const Matrix& leaf_marginal(Index slot) const { return A[static_cast<std::size_t>(slot)]; }
};

struct EstimateOptions {
  Index chunk = 256;
  unsigned threads = default_threads();
};

/// Streaming estimate: every moment entry is the sample average of the
/// corresponding sketch products. Accumulation order is fixed (chunks of
/// `chunk` samples, nodes independent), so results are bit-reproducible for
/// any thread count.
MomentSet estimate_moments(const DimensionTree& tree, const SampleSet& samples,
                           const BasisSet& bases, const EstimateOptions& options = {});

/// Exact moments of a dense density (length n^d, first site slowest) by
/// matrix contraction against fully enumerated sketch matrices.
MomentSet moments_from_density(const DimensionTree& tree, const Vector& density,
                               const BasisSet& bases, Index entry_cap = Index(1) << 26);

/// Sample-count-weighted combination; exact for spin/one-hot bases because the
/// underlying sums are integer-valued.
MomentSet merge_moments(const DimensionTree& tree, const BasisSet& bases,
                        const MomentSet& a, const MomentSet& b);

}  // namespace htde
