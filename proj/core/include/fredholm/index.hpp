#pragma once

// Index data of self-adjoint families (enhanced operators, the per-chart
// index chain and spectral flow) and of general Fredholm families (the pair
// of small-singular-value spaces and Atiyah stabilization).

#include <optional>
#include <vector>

#include "fredholm/atlas.hpp"

namespace fredholm {

/// (A, eps) with +-eps outside the spectrum of A.
struct EnhancedOperator {
  HermitianOperator a;
  double eps;
  Subspace band;  // Im P_[-eps, eps](A)
  Eigen::Index interior_rank;
};

/// Throws boundary_zero-free validation errors: ambiguous_boundary when an
/// eigenvalue sits within gap_tol of +-eps, band_collision when declared
/// frozen +-1 bands would enter the band (eps >= 1 - gap_tol).
EnhancedOperator enhanced_check(const HermitianOperator& a, double eps,
                                const std::optional<PolarizedBands>& declared_bands = std::nullopt,
                                double gap_tol = 1e-6);

/// H = H_minus + V + H_plus for an enhanced operator.
struct PolarizedBand {
  Subspace v;
  Subspace h_minus;
  Subspace h_plus;
};

PolarizedBand polarized_band(const EnhancedOperator& e);

struct ChainSegment {
  std::size_t chart = 0;
  double eps = 0.0;
  std::size_t left = 0;   // segment start sample
  std::size_t right = 0;  // segment end sample
  std::vector<Subspace> bands;  // one band per sample of the chart
  Eigen::Index n_below_left = 0;   // eigenvalues in [-eps, 0) at `left`
  Eigen::Index n_below_right = 0;  // eigenvalues in [-eps, 0) at `right`
};

struct ChainOverlap {
  std::size_t sample = 0;      // transition sample shared by two charts
  double eps_small = 0.0;
  double eps_large = 0.0;
  Subspace v_small;            // band for eps_small
  Subspace v_large;            // band for eps_large
  Subspace u_minus;            // Im P_[-eps_large, -eps_small]
  Subspace u_plus;             // Im P_[eps_small, eps_large]
};

struct IndexChain {
  std::vector<ChainSegment> segments;
  std::vector<ChainOverlap> overlaps;  // overlaps[j] joins segments j and j+1
};

struct ChainOptions {
  double zero_tol = 1e-8;
};

/// Splits the grid at one transition sample per chart overlap (the middle of
/// the overlap, nudged one sample at a time away from zero eigenvalues) and
/// records bands, below-zero counts and overlap decompositions.
IndexChain index_chain(const OperatorFamily& f, const Atlas& atlas,
                       const ChainOptions& options = {});

/// Sum over segments of n_below(left) - n_below(right).
long spectral_flow_chartwise(const IndexChain& chain);

struct OracleOptions {
  std::size_t refine = 4;
  double match_tol = 1e-9;
};

/// Branch tracking on a grid refined by linear interpolation of the sampled
/// operators: nearest-neighbour matching between consecutive points and a
/// signed count of sign changes (up +1, down -1). Nonnegative counts as the
/// upper side.
long spectral_flow_oracle(const OperatorFamily& f, const OracleOptions& options = {});

/// n_+(last) - n_+(first); both endpoints must be invertible.
long endpoint_signature_flow(const OperatorFamily& f, double zero_tol = 1e-8);

struct FredholmPair {
  Subspace e1;  // Im P_[0, eps](|B|)
  Subspace e2;  // Im P_[0, eps](|B*|)
  PartialIsometry tail_isometry;
  long numeric_index = 0;
};

/// B may be rectangular; the index is then cols - rows plus nothing else.
FredholmPair fredholm_pair(const ComplexMatrix& b, double eps, double boundary_rel = 1e-9);

/// dim Ker B - dim Ker B* from singular values.
long kernel_cokernel_index(const ComplexMatrix& b, double rank_rel = 1e-10);

struct StabilizationResult {
  Eigen::Index m = 0;                   // dimension of the added summand
  ComplexMatrix q;                      // rows x m, constant across samples
  std::vector<Eigen::Index> kernel_dims;
  std::vector<Subspace> kernels;        // Ker Q_x in C^m + C^cols
  long index_value = 0;                 // dim K - m
};

/// Q_x(v + u) = q(v) + B_x(u) with q spanning the union of all cokernels.
StabilizationResult atiyah_stabilize(const OperatorFamily& family, double rank_rel = 1e-10);

}  // namespace fredholm
