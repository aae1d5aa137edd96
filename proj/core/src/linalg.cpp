#include "fredholm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace fredholm {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::ambient_mismatch: return "ambient_mismatch";
    case ErrorKind::ambiguous_boundary: return "ambiguous_boundary";
    case ErrorKind::ill_conditioned_rank: return "ill_conditioned_rank";
    case ErrorKind::injectivity: return "injectivity";
    case ErrorKind::path_degeneracy: return "path_degeneracy";
    case ErrorKind::unknown_generator: return "unknown_generator";
    case ErrorKind::invalid_params: return "invalid_params";
    case ErrorKind::atlas_failure: return "atlas_failure";
    case ErrorKind::boundary_zero: return "boundary_zero";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::band_collision: return "band_collision";
    case ErrorKind::structural: return "structural";
    case ErrorKind::stabilization: return "stabilization";
    case ErrorKind::range: return "range";
    case ErrorKind::size: return "size";
    case ErrorKind::model_violation: return "model_violation";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

namespace {

double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Smallest singular value of a tall matrix; +inf for an empty one so that
// "injective on the zero subspace" holds vacuously.
double smallest_singular_value(const ComplexMatrix& m) {
  if (m.cols() == 0) return kInf;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().minCoeff();
}

}  // namespace

void validate_matrix(const ComplexMatrix& m, std::string_view what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(ErrorKind::validation,
                std::string(what) + ": needs at least one row and column");
  }
  if (!m.allFinite()) {
    throw Error(ErrorKind::validation,
                std::string(what) + ": entries must be finite");
  }
}

// ---------------------------------------------------------------------------
// HermitianOperator

HermitianOperator::HermitianOperator(ComplexMatrix m, double rel_tol)
    : m_(std::move(m)) {
  validate_matrix(m_, "hermitian operator");
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorKind::validation, "hermitian operator: matrix not square");
  }
  const double tol = rel_tol * max_abs(m_);
  const double asym = max_abs(m_ - m_.adjoint());
  if (asym > tol) {
    std::ostringstream os;
    os << "hermitian operator: max |A - A*| = " << asym << " exceeds " << tol;
    throw Error(ErrorKind::validation, os.str());
  }
}

HermitianOperator HermitianOperator::symmetrized(const ComplexMatrix& m) {
  validate_matrix(m, "hermitian operator");
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::validation, "hermitian operator: matrix not square");
  }
  ComplexMatrix h = 0.5 * (m + m.adjoint());
  return HermitianOperator(std::move(h), 0.0);
}

HermitianOperator HermitianOperator::diagonal(std::span<const double> values) {
  const auto n = static_cast<Eigen::Index>(values.size());
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = values[static_cast<std::size_t>(i)];
  return HermitianOperator(std::move(m));
}

HermitianOperator HermitianOperator::diagonal(std::initializer_list<double> values) {
  return diagonal(std::span<const double>(values.begin(), values.size()));
}

// ---------------------------------------------------------------------------
// Eigendecomposition

double SpectralDecomposition::spectral_radius() const noexcept {
  return eigenvalues.size() == 0 ? 0.0 : eigenvalues.cwiseAbs().maxCoeff();
}

SpectralDecomposition hermitian_eig(const HermitianOperator& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::validation, "hermitian_eig: eigensolver did not converge");
  }
  SpectralDecomposition out{solver.eigenvalues(), solver.eigenvectors()};

  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) {
    auto col = out.eigenvectors.col(j);
    const double scale = col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double mag = std::abs(col(i));
      if (mag > 1e-8 * scale) {
        col *= std::conj(col(i)) / mag;
        col(i) = Complex(std::abs(col(i)), 0.0);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windows and spectral projections

Window Window::between(double lo, double hi) {
  if (!(lo < hi)) {
    throw Error(ErrorKind::validation, "window: lower end must be below upper end");
  }
  return {lo, hi};
}

namespace {

void check_window_ends(const SpectralDecomposition& eig, Window window,
                       double boundary_rel) {
  const double tol = boundary_rel * std::max(eig.spectral_radius(), 1.0);
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    const double lambda = eig.eigenvalues(i);
    for (double end : {window.lo, window.hi}) {
      if (std::isfinite(end) && std::abs(lambda - end) <= tol) {
        std::ostringstream os;
        os.precision(17);
        os << "ambiguous spectral window: eigenvalue " << lambda
           << " lies within " << tol << " of window end " << end;
        throw Error(ErrorKind::ambiguous_boundary, os.str());
      }
    }
  }
}

}  // namespace

Subspace spectral_projection(const SpectralDecomposition& eig, Window window,
                             double boundary_rel) {
  check_window_ends(eig, window, boundary_rel);
  std::vector<Eigen::Index> picked;
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    if (window.contains(eig.eigenvalues(i))) picked.push_back(i);
  }
  ComplexMatrix frame(eig.eigenvectors.rows(), static_cast<Eigen::Index>(picked.size()));
  for (std::size_t c = 0; c < picked.size(); ++c) {
    frame.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors.col(picked[c]);
  }
  return Subspace::from_orthonormal(std::move(frame));
}

Subspace spectral_projection(const HermitianOperator& a, Window window,
                             double boundary_rel) {
  return spectral_projection(hermitian_eig(a), window, boundary_rel);
}

Eigen::Index eigenvalue_count(const SpectralDecomposition& eig, Window window,
                              double boundary_rel) {
  check_window_ends(eig, window, boundary_rel);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    if (window.contains(eig.eigenvalues(i))) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Subspace

Subspace Subspace::from_orthonormal(ComplexMatrix frame, double tol) {
  const Eigen::Index n = frame.rows();
  if (n < 1) throw Error(ErrorKind::validation, "subspace: ambient dimension must be positive");
  if (frame.cols() > n) throw Error(ErrorKind::validation, "subspace: more columns than ambient dimension");
  if (frame.cols() > 0) {
    const ComplexMatrix gram = frame.adjoint() * frame;
    const double err = max_abs(gram - ComplexMatrix::Identity(frame.cols(), frame.cols()));
    if (!(err <= tol)) {
      std::ostringstream os;
      os << "subspace: frame not orthonormal (deviation " << err << ")";
      throw Error(ErrorKind::validation, os.str());
    }
  }
  return Subspace(n, std::move(frame));
}

Subspace Subspace::span_of(const ComplexMatrix& m, double rel_tol) {
  const Eigen::Index n = m.rows();
  if (m.cols() == 0) return zero(n);
  Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU);
  const RealVector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    while (rank < sv.size() && sv(rank) > rel_tol * smax) ++rank;
  }
  return Subspace(n, svd.matrixU().leftCols(rank));
}

Subspace Subspace::span_of_full_rank(const ComplexMatrix& m, double rel_tol) {
  Subspace s = span_of(m, rel_tol);
  if (s.dim() != m.cols()) {
    throw Error(ErrorKind::validation, "subspace: spanning set is rank deficient");
  }
  return s;
}

Subspace Subspace::zero(Eigen::Index ambient_dim) {
  if (ambient_dim < 1) throw Error(ErrorKind::validation, "subspace: ambient dimension must be positive");
  return Subspace(ambient_dim, ComplexMatrix(ambient_dim, 0));
}

Subspace Subspace::full(Eigen::Index ambient_dim) {
  if (ambient_dim < 1) throw Error(ErrorKind::validation, "subspace: ambient dimension must be positive");
  return Subspace(ambient_dim, ComplexMatrix::Identity(ambient_dim, ambient_dim));
}

Subspace Subspace::line(const ComplexVector& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !v.allFinite()) {
    throw Error(ErrorKind::validation, "subspace: line needs a finite nonzero vector");
  }
  return Subspace(v.size(), ComplexMatrix(v / norm));
}

ComplexMatrix Subspace::projector() const {
  return frame_ * frame_.adjoint();
}

Subspace Subspace::orthogonal_complement() const {
  const Eigen::Index k = dim();
  if (k == 0) return full(ambient_);
  Eigen::HouseholderQR<ComplexMatrix> qr(frame_);
  const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(ambient_, ambient_);
  return Subspace(ambient_, q.rightCols(ambient_ - k));
}

double Subspace::containment_residual(const Subspace& other) const {
  if (other.ambient_ != ambient_) {
    throw Error(ErrorKind::ambient_mismatch, "subspace: ambient dimensions differ");
  }
  if (other.dim() == 0) return 0.0;
  const ComplexMatrix outside = other.frame_ - frame_ * (frame_.adjoint() * other.frame_);
  Eigen::JacobiSVD<ComplexMatrix> svd(outside);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// Polar data

HermitianOperator absolute_value(const ComplexMatrix& b, bool square) {
  validate_matrix(b, "absolute_value");
  const ComplexMatrix gram = b.adjoint() * b;
  if (square) return HermitianOperator::symmetrized(gram);
  const SpectralDecomposition eig = hermitian_eig(HermitianOperator::symmetrized(gram));
  const RealVector roots = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  const ComplexMatrix abs =
      eig.eigenvectors * roots.cast<Complex>().asDiagonal() * eig.eigenvectors.adjoint();
  return HermitianOperator::symmetrized(abs);
}

PartialIsometry polar_partial_isometry(const ComplexMatrix& b, double rank_rel) {
  validate_matrix(b, "polar_partial_isometry");
  Eigen::JacobiSVD<ComplexMatrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RealVector& sv = svd.singularValues();
  const double smax = sv(0);
  const double thr = rank_rel * smax;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (smax > 0.0 && sv(i) > thr / 10.0 && sv(i) < thr * 10.0) {
      std::ostringstream os;
      os << "polar_partial_isometry: singular value " << sv(i)
         << " is within a factor 10 of the rank threshold " << thr;
      throw Error(ErrorKind::ill_conditioned_rank, os.str());
    }
    if (smax > 0.0 && sv(i) > thr) ++rank;
  }
  const ComplexMatrix w = svd.matrixU().leftCols(rank);
  const ComplexMatrix v = svd.matrixV().leftCols(rank);
  PartialIsometry out{w * v.adjoint(), Subspace::from_orthonormal(v, 1e-9),
                      Subspace::from_orthonormal(w, 1e-9)};
  if (out.matrix.size() == 0) out.matrix = ComplexMatrix::Zero(b.rows(), b.cols());

  const ComplexMatrix recon = out.matrix * absolute_value(b).matrix();
  if (max_abs(recon - b) > 1e-9 * std::max(1.0, smax)) {
    throw Error(ErrorKind::structural, "polar_partial_isometry: U|B| does not reproduce B");
  }
  return out;
}

double subspace_distance(const Subspace& v, const Subspace& w) {
  if (v.ambient_dim() != w.ambient_dim()) {
    throw Error(ErrorKind::ambient_mismatch, "subspace_distance: ambient dimensions differ");
  }
  if (v.dim() != w.dim()) return 1.0;
  if (v.dim() == 0) return 0.0;
  const ComplexMatrix diff = v.projector() - w.projector();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(diff, Eigen::EigenvaluesOnly);
  return std::min(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Convex combinations of nested projections

namespace {

void validate_chain(const Subspace& k, const ProjectionChain& chain) {
  if (chain.spaces.empty() || chain.spaces.size() != chain.weights.size()) {
    throw Error(ErrorKind::validation,
                "projection chain: need one weight per subspace and at least one subspace");
  }
  double sum = 0.0;
  for (double t : chain.weights) {
    if (!(t >= 0.0)) throw Error(ErrorKind::validation, "projection chain: negative weight");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw Error(ErrorKind::validation, "projection chain: weights must sum to 1");
  }
  for (std::size_t i = 0; i < chain.spaces.size(); ++i) {
    if (chain.spaces[i].ambient_dim() != k.ambient_dim()) {
      throw Error(ErrorKind::ambient_mismatch, "projection chain: ambient dimensions differ");
    }
    if (i + 1 < chain.spaces.size() &&
        chain.spaces[i].containment_residual(chain.spaces[i + 1]) > 1e-8) {
      std::ostringstream os;
      os << "projection chain: H_" << i + 1 << " is not contained in H_" << i;
      throw Error(ErrorKind::validation, os.str());
    }
  }
}

void check_tail_injective(const Subspace& k, const ProjectionChain& chain, double inj_tol) {
  if (k.dim() == 0) return;
  const ComplexMatrix image = chain.spaces.back().projector() * k.frame();
  Eigen::JacobiSVD<ComplexMatrix> svd(image, Eigen::ComputeThinV);
  const Eigen::Index last = svd.singularValues().size() - 1;
  const double smin = svd.singularValues()(last);
  if (smin < inj_tol) {
    const ComplexVector dir = k.frame() * svd.matrixV().col(last);
    std::ostringstream os;
    os << "convex combination: last projection is not injective on K "
       << "(smallest singular value " << smin << "); near-kernel direction [";
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      os << (i ? ", " : "") << dir(i).real() << (dir(i).imag() < 0 ? "-" : "+")
         << std::abs(dir(i).imag()) << "i";
    }
    os << "]";
    throw Error(ErrorKind::injectivity, os.str());
  }
}

// Asserts t_0 p_0 + ... + t_n p_n = s_0 q_0 + ... + s_{n-1} q_{n-1} + p_n with
// q_i the projection onto H_i minus H_{i+1}, each q_i built from its own frame.
void check_telescoping_identity(const ProjectionChain& chain, const ComplexMatrix& combo) {
  const std::size_t n = chain.spaces.size() - 1;
  ComplexMatrix rhs = chain.spaces[n].projector();
  double partial = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    partial += chain.weights[i];
    const ComplexMatrix& hi = chain.spaces[i].frame();
    const ComplexMatrix rest = hi - chain.spaces[i + 1].projector() * hi;
    // Columns of `rest` are either ~0 or ~unit length for a nested chain.
    Eigen::JacobiSVD<ComplexMatrix> svd(rest, Eigen::ComputeThinU);
    Eigen::Index rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > 0.5) ++rank;
    const ComplexMatrix q = svd.matrixU().leftCols(rank);
    rhs += partial * (q * q.adjoint());
  }
  if (max_abs(combo - rhs) > 1e-10) {
    throw Error(ErrorKind::structural,
                "convex combination: telescoping projection identity violated");
  }
}

}  // namespace

ComplexMatrix combination_operator(const ProjectionChain& chain) {
  const Eigen::Index n = chain.spaces.front().ambient_dim();
  ComplexMatrix combo = ComplexMatrix::Zero(n, n);
  for (std::size_t i = 0; i < chain.spaces.size(); ++i) {
    combo += chain.weights[i] * chain.spaces[i].projector();
  }
  return combo;
}

Subspace convex_combination_image(const Subspace& k, const ProjectionChain& chain,
                                  double inj_tol) {
  validate_chain(k, chain);
  check_tail_injective(k, chain, inj_tol);
  const ComplexMatrix combo = combination_operator(chain);
  check_telescoping_identity(chain, combo);
  if (k.dim() == 0) return Subspace::zero(k.ambient_dim());
  return Subspace::span_of_full_rank(combo * k.frame(), 1e-12);
}

Subspace combination_path(const Subspace& k, const ProjectionChain& chain, double s,
                          double inj_tol) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw Error(ErrorKind::validation, "combination_path: s must lie in [0, 1]");
  }
  validate_chain(k, chain);
  check_tail_injective(k, chain, inj_tol);
  if (s == 0.0 || k.dim() == 0) return k;
  const ComplexMatrix combo = combination_operator(chain);
  const Eigen::Index n = k.ambient_dim();
  const ComplexMatrix moved =
      ((1.0 - s) * ComplexMatrix::Identity(n, n) + s * combo) * k.frame();
  const double smin = smallest_singular_value(moved);
  if (smin < inj_tol) {
    std::ostringstream os;
    os << "combination_path: path degenerates at s = " << s
       << " (smallest singular value " << smin << ")";
    throw Error(ErrorKind::path_degeneracy, os.str());
  }
  return Subspace::span_of_full_rank(moved, 1e-12);
}

}  // namespace fredholm
