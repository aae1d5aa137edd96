#include "fredholm/polarize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fredholm/index.hpp"

namespace fredholm {

double chi_eval(double r, double u) {
  if (!(r > 0.0 && r <= 1.0)) {
    std::ostringstream os;
    os << "chi_eval: r = " << r << " outside (0, 1]";
    throw Error(ErrorKind::range, os.str());
  }
  const double a = std::abs(u);
  double v;
  if (a <= r / 2) {
    v = a;
  } else if (a < r) {
    v = (2.0 / r - 1.0) * a + r - 1.0;
  } else {
    v = 1.0;
  }
  return u < 0.0 ? -v : v;
}

std::vector<double> radius_function(const Atlas& atlas, const PartitionOfUnity& pou) {
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    if (atlas.charts[i].eps >= 1.0) {
      std::ostringstream os;
      os << "radius_function: chart " << i << " has eps = " << atlas.charts[i].eps << " >= 1";
      throw Error(ErrorKind::range, os.str());
    }
  }
  pou.validate(atlas);
  const std::size_t n = pou.t.front().size();
  std::vector<double> r(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    double lower = kInf;
    for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
      r[x] += pou.t[i][x] * atlas.charts[i].eps;
      if (atlas.charts[i].contains(x)) lower = std::min(lower, atlas.charts[i].eps);
    }
    if (!(r[x] > 0.0 && r[x] < 1.0) || r[x] < lower - 1e-15) {
      throw Error(ErrorKind::structural,
                  "radius_function: r violates its bounds at sample " + std::to_string(x));
    }
  }
  return r;
}

HermitianOperator apply_chi(const HermitianOperator& a, double r) {
  const SpectralDecomposition eig = hermitian_eig(a);
  RealVector mapped(eig.dim());
  for (Eigen::Index k = 0; k < eig.dim(); ++k) mapped(k) = chi_eval(r, eig.eigenvalues(k));
  return HermitianOperator::symmetrized(eig.eigenvectors * mapped.asDiagonal() *
                                        eig.eigenvectors.adjoint());
}

double polarization_scale(const OperatorFamily& f) {
  double k = 0.0;
  for (const auto& s : f.spectra()) k = std::max(k, s.spectral_radius());
  return k > 1.0 ? k : 1.0;
}

OperatorFamily scaled_family(const OperatorFamily& f, double scale) {
  if (scale == 1.0) return f;
  std::vector<HermitianOperator> ops;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ops.push_back(HermitianOperator::symmetrized(f.op(i).matrix() / scale));
  }
  FamilyOptions opts;
  opts.family_tol = f.options().family_tol;
  opts.scale = f.options().scale * scale;
  if (f.options().interior_radius) opts.interior_radius = *f.options().interior_radius / scale;
  return OperatorFamily(f.grid(), std::move(ops), opts);
}

namespace {

// Levels strictly inside (0, limit) that avoid |spectrum|: the middle of
// every free gap.
std::vector<double> admissible_levels(const SpectralDecomposition& s, double limit) {
  std::vector<double> cuts{0.0, limit};
  for (Eigen::Index k = 0; k < s.dim(); ++k) {
    const double a = std::abs(s.eigenvalues(k));
    if (a > 0.0 && a < limit) cuts.push_back(a);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> out;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    if (cuts[j + 1] - cuts[j] > 1e-6) out.push_back(0.5 * (cuts[j] + cuts[j + 1]));
  }
  return out;
}

}  // namespace

PolarizedReplacement apply_chi_family(const OperatorFamily& scaled, std::vector<double> r,
                                      double scale) {
  if (!scaled.self_adjoint()) throw Error(ErrorKind::validation, "polarize: family is not self-adjoint");
  if (r.size() != scaled.size()) throw Error(ErrorKind::size, "polarize: r needs one value per sample");
  if (scaled.grid().closure().is_loop()) {
    const double seam = std::min(r.front(), r.back());
    r.front() = seam;
    r.back() = seam;
  }

  std::vector<HermitianOperator> ops;
  Eigen::Index minus = scaled.dim();
  Eigen::Index plus = scaled.dim();
  double residual = 0.0;
  for (std::size_t x = 0; x < scaled.size(); ++x) {
    const SpectralDecomposition eig = scaled.spectrum(x);
    Eigen::Index at_minus = 0;
    Eigen::Index at_plus = 0;
    for (Eigen::Index k = 0; k < eig.dim(); ++k) {
      if (eig.eigenvalues(k) <= -r[x]) ++at_minus;
      if (eig.eigenvalues(k) >= r[x]) ++at_plus;
    }
    minus = std::min(minus, at_minus);
    plus = std::min(plus, at_plus);
    ops.push_back(apply_chi(scaled.op(x), r[x]));

    const SpectralDecomposition replaced = hermitian_eig(ops.back());
    for (double eps : admissible_levels(eig, r[x] / 2)) {
      residual = std::max(residual,
                          subspace_distance(spectral_projection(eig, Window::at_least(eps)),
                                            spectral_projection(replaced, Window::at_least(eps))));
    }
  }
  if (residual > 1e-9) {
    std::ostringstream os;
    os << "polarize: band identity fails by " << residual;
    throw Error(ErrorKind::structural, os.str());
  }

  FamilyOptions opts;
  opts.family_tol = scaled.options().family_tol;
  opts.scale = scaled.options().scale;
  opts.polarized_bands = PolarizedBands{minus, plus};
  if (scaled.grid().closure().is_loop()) {
    // Eigenvalues up to r/2 are untouched, so the seam relabelling is checked there.
    const double seam = r.front() / 2;
    opts.interior_radius = std::min(scaled.options().interior_radius.value_or(kInf), seam);
  }
  PolarizedReplacement out{scaled, OperatorFamily(scaled.grid(), std::move(ops), opts), scale,
                           std::move(r), PolarizedBands{minus, plus}, residual};
  return out;
}

PolarizedReplacement finite_polarized_replace(const OperatorFamily& f, const Atlas& atlas,
                                              const PartitionOfUnity& pou) {
  const double scale = polarization_scale(f);
  return apply_chi_family(scaled_family(f, scale), radius_function(atlas, pou), scale);
}

PolarizedReplacement finite_polarized_replace(const OperatorFamily& f,
                                              const AtlasOptions& atlas_options) {
  // Already finite-polarized: chi_1 is the identity on [-1, 1].
  if (f.polarized_bands() && finite_polarized_check(f).ok) {
    return apply_chi_family(f, std::vector<double>(f.size(), 1.0), 1.0);
  }
  const double scale = polarization_scale(f);
  const OperatorFamily scaled = scaled_family(f, scale);
  const Atlas atlas = build_atlas(scaled.spectra(), atlas_options, true);
  const PartitionOfUnity pou = PartitionOfUnity::subordinate(atlas, scaled.size());
  return apply_chi_family(scaled, radius_function(atlas, pou), scale);
}

FlowPreservation flow_preservation_check(const PolarizedReplacement& rep) {
  AtlasOptions opts;
  for (double r : rep.r) opts.eps_cap.push_back(r / 2);
  FlowPreservation out;
  out.shared = build_atlas(rep.original.spectra(), opts, false);
  for (std::size_t i = 0; i < out.shared.charts.size(); ++i) {
    const AdaptedChart& c = out.shared.charts[i];
    for (std::size_t x = c.start; x <= c.end; ++x) {
      if (!(c.eps < rep.r[x] / 2)) {
        throw Error(ErrorKind::atlas_failure, "flow_preservation_check: shared chart " +
                                                  std::to_string(i) + " has eps >= r/2");
      }
    }
    const AdaptedReport a = is_adapted(rep.replaced, c);
    if (!a.adapted) {
      throw Error(ErrorKind::atlas_failure, "flow_preservation_check: shared chart " +
                                                std::to_string(i) +
                                                " is not adapted to the replacement: " +
                                                a.violation);
    }
  }
  out.flow_before = spectral_flow_chartwise(index_chain(rep.original, out.shared));
  out.flow_after = spectral_flow_chartwise(index_chain(rep.replaced, out.shared));
  out.preserved = out.flow_before == out.flow_after;
  return out;
}

FinitePolarizedReport finite_polarized_check(const OperatorFamily& f, double tol) {
  FinitePolarizedReport rep;
  const auto bands = f.polarized_bands();
  for (std::size_t x = 0; x < f.size(); ++x) {
    const SpectralDecomposition eig = f.spectrum(x);
    const double norm = eig.spectral_radius();
    rep.norm = std::max(rep.norm, norm);
    Eigen::Index at_minus = 0;
    Eigen::Index at_plus = 0;
    for (Eigen::Index k = 0; k < eig.dim(); ++k) {
      if (std::abs(eig.eigenvalues(k) + 1.0) <= tol) ++at_minus;
      if (std::abs(eig.eigenvalues(k) - 1.0) <= tol) ++at_plus;
    }
    std::string why;
    if (norm > 1.0 + tol) why = "spectrum leaves [-1, 1]";
    if (bands && (at_minus < bands->minus || at_plus < bands->plus)) why = "frozen band missing";
    if (bands && bands->minus + bands->plus > 0 && std::abs(norm - 1.0) > tol) why = "norm is not 1";
    if (!why.empty() && rep.ok) {
      rep.ok = false;
      rep.violation = why + " at sample " + std::to_string(x);
    }
  }
  return rep;
}

}  // namespace fredholm
