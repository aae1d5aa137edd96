#include "fredholm/index.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace fredholm {

EnhancedOperator enhanced_check(const HermitianOperator& a, double eps,
                                const std::optional<PolarizedBands>& declared_bands,
                                double gap_tol) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorKind::validation, "enhanced_check: eps must be positive and finite");
  }
  if (declared_bands && eps >= 1.0 - gap_tol) {
    std::ostringstream os;
    os << "enhanced_check: eps = " << eps << " reaches the frozen +-1 bands";
    throw Error(ErrorKind::band_collision, os.str());
  }
  const SpectralDecomposition eig = hermitian_eig(a);
  for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
    const double lambda = eig.eigenvalues(k);
    if (std::abs(lambda - eps) < gap_tol || std::abs(lambda + eps) < gap_tol) {
      std::ostringstream os;
      os.precision(17);
      os << "enhanced_check: eigenvalue " << lambda << " lies within " << gap_tol << " of +-"
         << eps;
      throw Error(ErrorKind::ambiguous_boundary, os.str());
    }
  }
  Subspace band = spectral_projection(eig, Window{-eps, eps}, 0.0);
  const Eigen::Index rank = band.dim();
  return EnhancedOperator{a, eps, std::move(band), rank};
}

PolarizedBand polarized_band(const EnhancedOperator& e) {
  const SpectralDecomposition eig = hermitian_eig(e.a);
  return PolarizedBand{e.band, spectral_projection(eig, Window::at_most(-e.eps), 0.0),
                       spectral_projection(eig, Window::at_least(e.eps), 0.0)};
}

// ---------------------------------------------------------------------------
// Index chain

namespace {

double min_abs_eigenvalue(const SpectralDecomposition& s) {
  return s.eigenvalues.cwiseAbs().minCoeff();
}

Eigen::Index count_strictly_between(const SpectralDecomposition& s, double lo, double hi) {
  Eigen::Index n = 0;
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    if (lo < s.eigenvalues(k) && s.eigenvalues(k) < hi) ++n;
  }
  return n;
}

[[noreturn]] void zero_at_boundary(std::size_t sample, const std::string& where) {
  throw Error(ErrorKind::boundary_zero,
              "index_chain: zero eigenvalue at " + where + " sample " + std::to_string(sample) +
                  "; shift the chart edge by one sample or perturb the grid");
}

}  // namespace

IndexChain index_chain(const OperatorFamily& f, const Atlas& atlas, const ChainOptions& options) {
  atlas.validate(f.size());
  const auto spectra = f.spectra();
  for (std::size_t j = 0; j < atlas.charts.size(); ++j) {
    const AdaptedReport rep = is_adapted(spectra, atlas.charts[j]);
    if (!rep.adapted) {
      throw Error(ErrorKind::validation, "index_chain: chart " + std::to_string(j) +
                                             " is not adapted: " + rep.violation);
    }
  }

  const std::size_t last = f.size() - 1;
  if (min_abs_eigenvalue(spectra.front()) < options.zero_tol) zero_at_boundary(0, "first");
  if (min_abs_eigenvalue(spectra.back()) < options.zero_tol) zero_at_boundary(last, "last");

  // Transition samples: y_0 = 0, y_j in overlap(j-1, j), y_k = last.
  std::vector<std::size_t> cuts{0};
  for (std::size_t j = 1; j < atlas.charts.size(); ++j) {
    const std::size_t lo = std::max(atlas.charts[j].start, cuts.back());
    const std::size_t hi = atlas.charts[j - 1].end;
    if (lo > hi) zero_at_boundary(hi, "overlap");
    const std::size_t mid = lo + (hi - lo) / 2;
    std::optional<std::size_t> chosen;
    for (std::size_t d = 0; d <= hi - lo && !chosen; ++d) {
      for (std::size_t cand : {mid + d, mid - std::min(d, mid)}) {
        if (cand < lo || cand > hi) continue;
        if (min_abs_eigenvalue(spectra[cand]) >= options.zero_tol) {
          chosen = cand;
          break;
        }
      }
    }
    if (!chosen) zero_at_boundary(mid, "chart-overlap");
    cuts.push_back(*chosen);
  }
  cuts.push_back(last);

  IndexChain chain;
  for (std::size_t j = 0; j < atlas.charts.size(); ++j) {
    const AdaptedChart& c = atlas.charts[j];
    ChainSegment seg;
    seg.chart = j;
    seg.eps = c.eps;
    seg.left = cuts[j];
    seg.right = cuts[j + 1];
    for (std::size_t i = c.start; i <= c.end; ++i) {
      seg.bands.push_back(spectral_projection(spectra[i], Window{-c.eps, c.eps}, 0.0));
    }
    seg.n_below_left = count_strictly_between(spectra[seg.left], -c.eps, 0.0);
    seg.n_below_right = count_strictly_between(spectra[seg.right], -c.eps, 0.0);
    chain.segments.push_back(std::move(seg));
  }

  for (std::size_t j = 1; j < atlas.charts.size(); ++j) {
    const std::size_t y = cuts[j];
    const double e1 = atlas.charts[j - 1].eps;
    const double e2 = atlas.charts[j].eps;
    const double small = std::min(e1, e2);
    const double large = std::max(e1, e2);
    const SpectralDecomposition& s = spectra[y];
    ChainOverlap ov{y,
                    small,
                    large,
                    spectral_projection(s, Window{-small, small}, 0.0),
                    spectral_projection(s, Window{-large, large}, 0.0),
                    Subspace::zero(s.dim()),
                    Subspace::zero(s.dim())};
    if (small < large) {
      ov.u_minus = spectral_projection(s, Window{-large, -small}, 0.0);
      ov.u_plus = spectral_projection(s, Window{small, large}, 0.0);
    }
    if (ov.v_large.dim() != ov.u_minus.dim() + ov.v_small.dim() + ov.u_plus.dim()) {
      throw Error(ErrorKind::structural, "index_chain: overlap decomposition dimensions disagree");
    }
    chain.overlaps.push_back(std::move(ov));
  }
  return chain;
}

long spectral_flow_chartwise(const IndexChain& chain) {
  long flow = 0;
  for (const ChainSegment& seg : chain.segments) {
    flow += static_cast<long>(seg.n_below_left) - static_cast<long>(seg.n_below_right);
  }
  return flow;
}

// ---------------------------------------------------------------------------
// Branch-tracking oracle

namespace {

RealVector eigenvalues_only(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

// Greedy nearest-neighbour assignment: repeatedly pair the closest unmatched
// (previous, current) values. Returns match[i] = index into `cur`.
std::vector<Eigen::Index> nearest_neighbour_match(const RealVector& prev, const RealVector& cur) {
  const Eigen::Index n = prev.size();
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) pairs.emplace_back(std::abs(prev(i) - cur(j)), i, j);
  std::sort(pairs.begin(), pairs.end());
  std::vector<Eigen::Index> match(static_cast<std::size_t>(n), -1);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  for (const auto& [d, i, j] : pairs) {
    if (match[static_cast<std::size_t>(i)] >= 0 || taken[static_cast<std::size_t>(j)]) continue;
    match[static_cast<std::size_t>(i)] = j;
    taken[static_cast<std::size_t>(j)] = true;
  }
  return match;
}

bool has_neighbour_within(const RealVector& values, Eigen::Index self, double tol) {
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (k != self && std::abs(values(k) - values(self)) <= tol) return true;
  }
  return false;
}

}  // namespace

long spectral_flow_oracle(const OperatorFamily& f, const OracleOptions& options) {
  if (!f.self_adjoint()) throw Error(ErrorKind::validation, "spectral_flow_oracle: not self-adjoint");
  const std::size_t refine = std::max<std::size_t>(options.refine, 1);
  long flow = 0;
  RealVector prev = eigenvalues_only(f.matrix(0));
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    for (std::size_t s = 1; s <= refine; ++s) {
      const double w = static_cast<double>(s) / static_cast<double>(refine);
      const ComplexMatrix m =
          s == refine ? f.matrix(i + 1) : ComplexMatrix((1.0 - w) * f.matrix(i) + w * f.matrix(i + 1));
      const RealVector cur = eigenvalues_only(m);
      const auto match = nearest_neighbour_match(prev, cur);
      for (Eigen::Index a = 0; a < prev.size(); ++a) {
        const Eigen::Index b = match[static_cast<std::size_t>(a)];
        const bool was_up = prev(a) >= 0.0;
        const bool is_up = cur(b) >= 0.0;
        if (was_up == is_up) continue;
        if (has_neighbour_within(prev, a, options.match_tol) ||
            has_neighbour_within(cur, b, options.match_tol)) {
          std::ostringstream os;
          os << "spectral_flow_oracle: ambiguous branch matching at a zero crossing between "
                "samples "
             << i << " and " << i + 1 << "; refine the grid";
          throw Error(ErrorKind::resolution, os.str());
        }
        flow += is_up ? 1 : -1;
      }
      prev = cur;
    }
  }
  return flow;
}

long endpoint_signature_flow(const OperatorFamily& f, double zero_tol) {
  const SpectralDecomposition first = f.spectrum(0);
  const SpectralDecomposition last = f.spectrum(f.size() - 1);
  if (min_abs_eigenvalue(first) < zero_tol) zero_at_boundary(0, "first");
  if (min_abs_eigenvalue(last) < zero_tol) zero_at_boundary(f.size() - 1, "last");
  auto positives = [](const SpectralDecomposition& s) {
    return static_cast<long>((s.eigenvalues.array() > 0.0).count());
  };
  return positives(last) - positives(first);
}

// ---------------------------------------------------------------------------
// General Fredholm operators

FredholmPair fredholm_pair(const ComplexMatrix& b, double eps, double boundary_rel) {
  validate_matrix(b, "fredholm_pair");
  if (!(eps > 0.0)) throw Error(ErrorKind::validation, "fredholm_pair: eps must be positive");
  const SpectralDecomposition abs_b = hermitian_eig(absolute_value(b));
  const SpectralDecomposition abs_bstar = hermitian_eig(absolute_value(b.adjoint()));

  FredholmPair out;
  out.e1 = spectral_projection(abs_b, Window::at_most(eps), boundary_rel);
  out.e2 = spectral_projection(abs_bstar, Window::at_most(eps), boundary_rel);
  out.numeric_index = static_cast<long>(out.e1.dim()) - static_cast<long>(out.e2.dim());

  const Subspace tail1 = spectral_projection(abs_b, Window::at_least(eps), boundary_rel);
  const Subspace tail2 = spectral_projection(abs_bstar, Window::at_least(eps), boundary_rel);
  const PartialIsometry polar = polar_partial_isometry(b);
  const ComplexMatrix mapped = polar.matrix * tail1.frame();
  if (mapped.cols() > 0) {
    const ComplexMatrix gram = mapped.adjoint() * mapped;
    const double iso_err =
        (gram - ComplexMatrix::Identity(mapped.cols(), mapped.cols())).cwiseAbs().maxCoeff();
    if (iso_err > 1e-9 || subspace_distance(Subspace::span_of(mapped), tail2) > 1e-8) {
      throw Error(ErrorKind::structural,
                  "fredholm_pair: polar isometry does not carry the tail of |B| onto that of |B*|");
    }
  } else if (tail2.dim() != 0) {
    throw Error(ErrorKind::structural, "fredholm_pair: tail dimensions disagree");
  }
  out.tail_isometry = PartialIsometry{polar.matrix * tail1.projector(), tail1, tail2};
  return out;
}

namespace {

Eigen::Index numeric_rank(const Eigen::JacobiSVD<ComplexMatrix>& svd, double rank_rel) {
  const RealVector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > rank_rel * sv(0)) ++r;
  return r;
}

}  // namespace

long kernel_cokernel_index(const ComplexMatrix& b, double rank_rel) {
  Eigen::JacobiSVD<ComplexMatrix> svd(b);
  const Eigen::Index r = numeric_rank(svd, rank_rel);
  return static_cast<long>(b.cols() - r) - static_cast<long>(b.rows() - r);
}

StabilizationResult atiyah_stabilize(const OperatorFamily& family, double rank_rel) {
  const Eigen::Index rows = family.rows();
  const Eigen::Index cols = family.cols();

  std::vector<ComplexMatrix> cokernels;
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    Eigen::JacobiSVD<ComplexMatrix> svd(family.matrix(i), Eigen::ComputeFullU);
    const Eigen::Index r = numeric_rank(svd, rank_rel);
    cokernels.push_back(svd.matrixU().rightCols(rows - r));
    total += rows - r;
  }
  ComplexMatrix stacked(rows, total);
  Eigen::Index col = 0;
  for (const auto& c : cokernels) {
    stacked.middleCols(col, c.cols()) = c;
    col += c.cols();
  }
  const Subspace union_span = Subspace::span_of(stacked, 1e-8);

  StabilizationResult out;
  out.m = union_span.dim();
  out.q = union_span.frame();
  for (std::size_t i = 0; i < family.size(); ++i) {
    ComplexMatrix qx(rows, out.m + cols);
    qx.leftCols(out.m) = out.q;
    qx.rightCols(cols) = family.matrix(i);
    Eigen::JacobiSVD<ComplexMatrix> svd(qx, Eigen::ComputeFullV);
    const Eigen::Index r = numeric_rank(svd, rank_rel);
    if (r != rows) {
      throw Error(ErrorKind::stabilization,
                  "atiyah_stabilize: Q is not surjective at sample " + std::to_string(i));
    }
    const Eigen::Index k = out.m + cols - r;
    out.kernels.push_back(Subspace::from_orthonormal(svd.matrixV().rightCols(k), 1e-9));
    out.kernel_dims.push_back(k);
    if (static_cast<long>(k - out.m) != kernel_cokernel_index(family.matrix(i), rank_rel)) {
      throw Error(ErrorKind::structural, "atiyah_stabilize: dim K - m differs from ker - coker at "
                                         "sample " + std::to_string(i));
    }
    if (k != out.kernel_dims.front()) {
      throw Error(ErrorKind::structural, "atiyah_stabilize: kernel dimension is not constant");
    }
  }
  out.index_value = static_cast<long>(out.kernel_dims.front()) - static_cast<long>(out.m);
  return out;
}

}  // namespace fredholm
