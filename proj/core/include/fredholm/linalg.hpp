#pragma once

// Dense complex linear algebra used throughout the library: Hermitian
// eigendecompositions, spectral projections, polar data and subspace
// arithmetic. Everything here is a pure function of its inputs.

#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/error.hpp"

namespace fredholm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Throws a validation error unless `m` has at least one row and column and
/// only finite entries.
void validate_matrix(const ComplexMatrix& m, std::string_view what = "matrix");

/// A square matrix equal to its conjugate transpose up to
/// `rel_tol * max|entry|`.
class HermitianOperator {
public:
  explicit HermitianOperator(ComplexMatrix m, double rel_tol = 1e-12);

  /// Replaces `m` by (m + m*)/2 before validation; used by generators whose
  /// arithmetic breaks exact symmetry.
  static HermitianOperator symmetrized(const ComplexMatrix& m);
  static HermitianOperator diagonal(std::span<const double> values);
  static HermitianOperator diagonal(std::initializer_list<double> values);

  const ComplexMatrix& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

private:
  ComplexMatrix m_;
};

struct SpectralDecomposition {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors; // one orthonormal column per eigenvalue

  Eigen::Index dim() const noexcept { return eigenvalues.size(); }
  double spectral_radius() const noexcept;
};

/// Eigendecomposition with ascending eigenvalues. Each eigenvector is
/// phase-fixed so that its first component of significant magnitude is real
/// and positive, which makes the output deterministic.
SpectralDecomposition hermitian_eig(const HermitianOperator& a);

/// A real interval whose ends may be infinite. Spectral windows never decide
/// the fate of an eigenvalue sitting on an end, so open and closed ends are
/// not distinguished.
struct Window {
  double lo = -kInf;
  double hi = kInf;

  static Window between(double lo, double hi);
  static Window at_least(double lo) { return {lo, kInf}; }
  static Window at_most(double hi) { return {-kInf, hi}; }
  static Window everything() { return {}; }

  bool contains(double x) const noexcept { return lo < x && x < hi; }
};

/// Orthonormal column frame of a subspace of C^n. The zero subspace is a
/// legitimate value with an n x 0 frame.
class Subspace {
public:
  Subspace() = default;

  /// Trusts nothing: checks frame*frame = I within `tol`.
  static Subspace from_orthonormal(ComplexMatrix frame, double tol = 1e-10);
  /// Orthonormal basis for the column span of `m`; columns whose singular
  /// value is below `rel_tol * sigma_max` are dropped.
  static Subspace span_of(const ComplexMatrix& m, double rel_tol = 1e-10);
  /// Orthonormal basis for the column span of `m`, which must have full
  /// column rank (checked against `rel_tol`).
  static Subspace span_of_full_rank(const ComplexMatrix& m,
                                    double rel_tol = 1e-10);
  static Subspace zero(Eigen::Index ambient_dim);
  static Subspace full(Eigen::Index ambient_dim);
  static Subspace line(const ComplexVector& v);

  Eigen::Index ambient_dim() const noexcept { return ambient_; }
  Eigen::Index dim() const noexcept { return frame_.cols(); }
  const ComplexMatrix& frame() const noexcept { return frame_; }

  ComplexMatrix projector() const;
  Subspace orthogonal_complement() const;
  /// Largest component of `other` outside this subspace, i.e. the norm of
  /// (I - P) applied to other's frame. Zero iff other is contained here.
  double containment_residual(const Subspace& other) const;

private:
  Subspace(Eigen::Index ambient, ComplexMatrix frame)
      : ambient_(ambient), frame_(std::move(frame)) {}

  Eigen::Index ambient_ = 0;
  ComplexMatrix frame_;
};

/// U together with its initial and final spaces: U*U projects onto the
/// initial space and UU* onto the final space.
struct PartialIsometry {
  ComplexMatrix matrix;
  Subspace initial_space;
  Subspace final_space;
};

/// Span of the eigenvectors whose eigenvalues lie strictly inside `window`.
/// An eigenvalue closer than `boundary_rel * max(spectral radius, 1)` to a
/// finite end is an ambiguous-boundary error.
Subspace spectral_projection(const SpectralDecomposition& eig, Window window,
                             double boundary_rel = 1e-9);
Subspace spectral_projection(const HermitianOperator& a, Window window,
                             double boundary_rel = 1e-9);

/// Number of eigenvalues inside `window`, with the same boundary rule.
Eigen::Index eigenvalue_count(const SpectralDecomposition& eig, Window window,
                              double boundary_rel = 1e-9);

/// |B| = sqrt(B*B), or B*B itself when `square` is set.
HermitianOperator absolute_value(const ComplexMatrix& b, bool square = false);

/// Partial isometry of the polar decomposition B = U|B|. Rank is decided by
/// singular values above `rank_rel * sigma_max`; a singular value within a
/// factor 10 of that threshold is reported as ill-conditioned.
PartialIsometry polar_partial_isometry(const ComplexMatrix& b,
                                       double rank_rel = 1e-10);

/// Operator norm of P_V - P_W.
double subspace_distance(const Subspace& v, const Subspace& w);

/// Nested chain H_0 > H_1 > ... > H_n together with convex weights.
struct ProjectionChain {
  std::vector<Subspace> spaces;
  std::vector<double> weights;
};

/// Image of K under t_0 p_0 + ... + t_n p_n, where p_i projects onto H_i.
/// Requires p_n to be injective on K (smallest singular value of p_n on K's
/// frame at least `inj_tol`).
Subspace convex_combination_image(const Subspace& k,
                                  const ProjectionChain& chain,
                                  double inj_tol = 1e-8);

/// Point `s` of the canonical linear path from K (s = 0) to the convex
/// combination image (s = 1).
Subspace combination_path(const Subspace& k, const ProjectionChain& chain,
                          double s, double inj_tol = 1e-8);

/// The operator t_0 p_0 + ... + t_n p_n itself.
ComplexMatrix combination_operator(const ProjectionChain& chain);

}  // namespace fredholm
