#include "fredholm/sections.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/SVD>

#include "fredholm/index.hpp"

namespace fredholm {

// ---------------------------------------------------------------------------
// Partition of unity

namespace {

std::vector<std::vector<double>> tent_weights(const Atlas& atlas, std::size_t n, bool keep_edges) {
  const double far = static_cast<double>(n);
  const double lift = keep_edges ? 1.0 : 0.0;
  std::vector<std::vector<double>> w(atlas.charts.size(), std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    const AdaptedChart& c = atlas.charts[i];
    for (std::size_t x = c.start; x <= c.end; ++x) {
      const double left = c.start == 0 ? far : static_cast<double>(x - c.start) + lift;
      const double right = c.end + 1 == n ? far : static_cast<double>(c.end - x) + lift;
      w[i][x] = std::min(left, right);
    }
  }
  return w;
}

}  // namespace

PartitionOfUnity PartitionOfUnity::subordinate(const Atlas& atlas, std::size_t n) {
  atlas.validate(n);
  auto w = tent_weights(atlas, n, false);
  auto uncovered = [&](const std::vector<std::vector<double>>& weights) {
    for (std::size_t x = 0; x < n; ++x) {
      double total = 0.0;
      for (const auto& wi : weights) total += wi[x];
      if (total <= 0.0) return true;
    }
    return false;
  };
  // Charts sharing a single sample leave it without an interior chart; fall
  // back to tents that stay positive on chart edges.
  if (uncovered(w)) w = tent_weights(atlas, n, true);

  PartitionOfUnity pou;
  pou.t.assign(atlas.charts.size(), std::vector<double>(n, 0.0));
  pou.s.assign(atlas.charts.size(), std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    double total = 0.0;
    for (const auto& wi : w) total += wi[x];
    for (std::size_t i = 0; i < w.size(); ++i) pou.t[i][x] = w[i][x] / total;
  }
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    const AdaptedChart& c = atlas.charts[i];
    for (std::size_t x = c.start; x <= c.end; ++x) pou.s[i][x] = pou.t[i][x] > 0.0 ? 1.0 : 0.0;
  }
  pou.validate(atlas);
  return pou;
}

void PartitionOfUnity::validate(const Atlas& atlas) const {
  if (t.size() != atlas.charts.size() || s.size() != atlas.charts.size()) {
    throw Error(ErrorKind::validation, "partition of unity: one weight per chart required");
  }
  const std::size_t n = t.empty() ? 0 : t.front().size();
  for (std::size_t x = 0; x < n; ++x) {
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double ti = t[i][x];
      const double si = s[i][x];
      if (ti < 0.0 || si < 0.0 || si > 1.0) {
        throw Error(ErrorKind::validation, "partition of unity: weight out of range");
      }
      if (!atlas.charts[i].contains(x) && (ti != 0.0 || si != 0.0)) {
        throw Error(ErrorKind::validation, "partition of unity: support leaves chart " +
                                               std::to_string(i));
      }
      if (ti > 0.0 && si != 1.0) {
        throw Error(ErrorKind::validation, "partition of unity: s_i < 1 where t_i > 0");
      }
      total += ti;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorKind::validation,
                  "partition of unity: weights do not sum to 1 at sample " + std::to_string(x));
    }
  }
}

// ---------------------------------------------------------------------------
// Weak sections and the sandwich predicate

namespace {

// Frame of eigenvectors with lambda >= level (closed end, no boundary rule).
Subspace closed_upper(const SpectralDecomposition& eig, double level) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index k = 0; k < eig.dim(); ++k)
    if (eig.eigenvalues(k) >= level) cols.push_back(k);
  ComplexMatrix frame(eig.dim(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    frame.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors.col(cols[j]);
  return Subspace::from_orthonormal(std::move(frame), 1e-8);
}

void check_section_shape(const OperatorFamily& f, const WeakSpectralSection& s) {
  if (s.subspaces.size() != f.size()) {
    throw Error(ErrorKind::size, "section: one subspace per sample required");
  }
  for (const Subspace& sx : s.subspaces) {
    if (sx.ambient_dim() != f.dim()) {
      throw Error(ErrorKind::ambient_mismatch, "section: subspace ambient dimension differs");
    }
  }
}

}  // namespace

WeakSectionReport weak_section_report(const OperatorFamily& f, const WeakSpectralSection& s) {
  check_section_shape(f, s);
  WeakSectionReport rep;
  for (std::size_t x = 0; x < f.size(); ++x) {
    const SpectralDecomposition eig = f.spectrum(x);
    const Subspace& sx = s.subspaces[x];
    const Eigen::Index ref = eigenvalue_count(eig, Window::at_least(s.reference_cut));
    rep.dim_defect.push_back(static_cast<long>(sx.dim()) - static_cast<long>(ref));
    double floor = kInf;
    for (Eigen::Index k = 0; k < eig.dim() && sx.dim() > 0; ++k) {
      if ((sx.frame().adjoint() * eig.eigenvectors.col(k)).norm() > 1e-8) {
        floor = eig.eigenvalues(k);
        break;
      }
    }
    rep.floor.push_back(floor);
    if (x > 0) {
      rep.max_step = std::max(rep.max_step, subspace_distance(s.subspaces[x - 1], sx));
    }
  }
  rep.continuous = rep.max_step <= s.continuity_tol;
  return rep;
}

DiscreteSpectrumReport discrete_spectrum_check(const OperatorFamily& f,
                                               const std::vector<double>& levels,
                                               double collision_tol) {
  const auto spectra = f.spectra();
  DiscreteSpectrumReport rep;
  for (double level : levels) {
    LevelResult res;
    res.requested = level;
    res.level = level;

    bool pinned = false;
    for (Eigen::Index k = 0; k < f.dim() && !pinned; ++k) {
      pinned = std::all_of(spectra.begin(), spectra.end(), [&](const SpectralDecomposition& s) {
        return std::abs(s.eigenvalues(k) - level) < collision_tol;
      });
    }
    if (pinned) {
      res.message = "an eigenvalue branch is pinned at the level at every sample";
      rep.ok = false;
      rep.levels.push_back(res);
      continue;
    }

    auto collides = [&](double l) {
      for (const auto& s : spectra)
        if ((s.eigenvalues.array() - l).abs().minCoeff() < collision_tol) return true;
      return false;
    };
    for (int step = 1; collides(res.level) && step <= 1000; ++step) {
      res.level = level + 1e-6 * step;
    }

    try {
      const Atlas atlas = build_atlas(f.shifted(res.level));
      res.charts = atlas.charts.size();
      res.ok = true;
    } catch (const Error& e) {
      std::ostringstream os;
      os.precision(17);
      os << e.what() << " (level " << res.level << ")";
      throw Error(e.kind(), os.str());
    }
    rep.levels.push_back(res);
  }
  return rep;
}

SandwichReport is_spectral_section(const OperatorFamily& f, const WeakSpectralSection& s,
                                   const std::vector<double>& r, double tol) {
  check_section_shape(f, s);
  if (r.size() != f.size()) throw Error(ErrorKind::size, "is_spectral_section: r needs one value per sample");
  SandwichReport rep;
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (!(r[x] > 0.0)) throw Error(ErrorKind::validation, "is_spectral_section: r must be positive");
    const SpectralDecomposition eig = f.spectrum(x);
    const Subspace& sx = s.subspaces[x];
    const double up = sx.containment_residual(closed_upper(eig, r[x]));
    const double low = closed_upper(eig, -r[x]).containment_residual(sx);
    const double worst = std::max(up, low);
    if (x == 0 || worst > rep.worst_residual) {
      rep.worst_sample = x;
      rep.worst_residual = worst;
      rep.upper_residual = up;
      rep.lower_residual = low;
    }
  }
  rep.ok = rep.worst_residual <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Homotopy

Subspace SectionHomotopy::at(std::size_t sample, double s) const {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::validation, "homotopy: s must lie in [0, 1]");
  const SampleData& d = data_.at(sample);
  if (s <= 0.5) return combination_path(d.s, d.chain, 2.0 * s);
  return combination_path(d.l_perp, d.perp_chain, 2.0 * s - 1.0).orthogonal_complement();
}

// ---------------------------------------------------------------------------
// Deformation

namespace {

struct Interval {
  double lo;
  double hi;
};

// Merged signed occupancy of a chart: sampled eigenvalues and the sweep of
// every sorted branch between consecutive samples.
std::vector<Interval> chart_occupancy(const std::vector<SpectralDecomposition>& spectra,
                                      const AdaptedChart& c) {
  std::vector<Interval> occ;
  for (std::size_t x = c.start; x <= c.end; ++x) {
    for (Eigen::Index k = 0; k < spectra[x].dim(); ++k) {
      const double a = spectra[x].eigenvalues(k);
      const double b = x < c.end ? spectra[x + 1].eigenvalues(k) : a;
      occ.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(occ.begin(), occ.end(), [](const Interval& p, const Interval& q) { return p.lo < q.lo; });
  std::vector<Interval> merged;
  for (const Interval& iv : occ) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

// Levels below zero that avoid the occupancy, ordered from the top down. In
// each free component the level sits `offset` below its upper end (or below
// zero when zero itself is free), but never past the component's middle.
std::vector<double> candidate_levels(const std::vector<Interval>& occ, double gap_tol,
                                     double offset) {
  std::vector<Interval> free;
  double cursor = -kInf;
  for (const Interval& iv : occ) {
    if (iv.lo > cursor) free.push_back({cursor, iv.lo});
    cursor = std::max(cursor, iv.hi);
  }
  free.push_back({cursor, kInf});

  std::vector<double> out;
  for (auto it = free.rbegin(); it != free.rend(); ++it) {
    const double top = std::min(it->hi, 0.0);
    if (it->lo >= top) continue;
    const double width = top - it->lo;
    if (width <= 2.0 * gap_tol) continue;
    const double step = std::max(std::min(0.5 * width, offset), std::min(0.5 * width, 10.0 * gap_tol));
    out.push_back(top - step);
  }
  return out;
}

double smallest_sigma(const ComplexMatrix& m) {
  if (m.cols() == 0) return kInf;
  if (m.rows() < m.cols()) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().minCoeff();
}

// Highest admissible negative level nu for a chart with P_[nu, inf)(A_x)
// injective on K_x at every sample of the chart. `flip` runs the mirrored
// search: the level is -nu and the projection is P_(-inf, -nu].
double find_level(const std::vector<SpectralDecomposition>& spectra, const AdaptedChart& c,
                  const std::vector<Subspace>& k, bool flip, const DeformOptions& opt,
                  std::size_t chart_index) {
  std::vector<SpectralDecomposition> signed_spectra;
  for (std::size_t x = c.start; x <= c.end; ++x) {
    SpectralDecomposition s = spectra[x];
    if (flip) {
      s.eigenvalues = -s.eigenvalues.reverse().eval();
      s.eigenvectors = s.eigenvectors.rowwise().reverse().eval();
    }
    signed_spectra.push_back(std::move(s));
  }
  const AdaptedChart local{0, c.end - c.start, c.eps};
  std::vector<double> levels = candidate_levels(chart_occupancy(signed_spectra, local),
                                                opt.gap_tol, opt.nu_offset);
  double lowest = 0.0;
  for (const auto& s : signed_spectra) lowest = std::min(lowest, s.eigenvalues.minCoeff());
  levels.push_back(lowest - 1.0);

  for (double nu : levels) {
    bool injective = true;
    for (std::size_t j = 0; j < signed_spectra.size() && injective; ++j) {
      const Subspace h = spectral_projection(signed_spectra[j], Window::at_least(nu));
      injective = smallest_sigma(h.frame().adjoint() * k[c.start + j].frame()) >= opt.inj_tol;
    }
    if (injective) return flip ? -nu : nu;
  }
  std::ostringstream os;
  os << "deform_to_spectral_section: no admissible level on chart " << chart_index
     << " (samples " << c.start << ".." << c.end << ")";
  throw Error(ErrorKind::structural, os.str());
}

// Chain of the charts active at x (t_i(x) > 0), equal levels merged. With
// `ascending` the spaces Im P_[nu, inf) shrink as nu grows; otherwise the
// spaces Im P_(-inf, nu] shrink as nu falls.
ProjectionChain chain_at(const SpectralDecomposition& eig, const PartitionOfUnity& pou,
                         const std::vector<double>& levels, std::size_t x, bool upper) {
  std::map<double, double> weight;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (pou.t[i][x] > 0.0) weight[levels[i]] += pou.t[i][x];
  }
  ProjectionChain chain;
  auto push = [&](double level, double w) {
    chain.spaces.push_back(spectral_projection(
        eig, upper ? Window::at_least(level) : Window::at_most(level)));
    chain.weights.push_back(w);
  };
  if (upper) {
    for (const auto& [level, w] : weight) push(level, w);
  } else {
    for (auto it = weight.rbegin(); it != weight.rend(); ++it) push(it->first, it->second);
  }
  // The weights already sum to one up to rounding; renormalize exactly.
  double total = 0.0;
  for (double w : chain.weights) total += w;
  for (double& w : chain.weights) w /= total;
  return chain;
}

double smallest_gap(const std::vector<SpectralDecomposition>& spectra) {
  double gap = kInf;
  for (const auto& s : spectra) {
    for (Eigen::Index k = 0; k + 1 < s.dim(); ++k) {
      const double g = s.eigenvalues(k + 1) - s.eigenvalues(k);
      if (g >= 1e-9) gap = std::min(gap, g);
    }
  }
  return gap;
}

}  // namespace

DeformResult deform_to_spectral_section(const OperatorFamily& f, const WeakSpectralSection& s,
                                        const Atlas& atlas, const DeformOptions& opt) {
  if (!f.self_adjoint()) throw Error(ErrorKind::validation, "deform_to_spectral_section: not self-adjoint");
  check_section_shape(f, s);
  const std::size_t n = f.size();
  for (const Subspace& sx : s.subspaces) {
    if (sx.dim() != s.subspaces.front().dim()) {
      throw Error(ErrorKind::validation, "deform_to_spectral_section: section dimension varies");
    }
  }
  if (opt.check_discrete && !discrete_spectrum_check(f, {0.0}).ok) {
    throw Error(ErrorKind::validation,
                "deform_to_spectral_section: family has an eigenvalue pinned at 0");
  }
  const auto spectra = f.spectra();
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    const AdaptedReport rep = is_adapted(spectra, atlas.charts[i]);
    if (!rep.adapted) {
      throw Error(ErrorKind::validation, "deform_to_spectral_section: chart " + std::to_string(i) +
                                             " is not adapted: " + rep.violation);
    }
  }

  DeformResult out;
  out.pou = PartitionOfUnity::subordinate(atlas, n);
  const PartitionOfUnity& pou = out.pou;
  const std::size_t charts = atlas.charts.size();

  // Pass one: push S up into Im P_[mu, inf).
  for (std::size_t i = 0; i < charts; ++i) {
    out.nu.push_back(find_level(spectra, atlas.charts[i], s.subspaces, false, opt, i));
  }
  std::vector<Subspace> l(n);
  std::vector<ProjectionChain> chains(n);
  out.mu.assign(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    chains[x] = chain_at(spectra[x], pou, out.nu, x, true);
    l[x] = convex_combination_image(s.subspaces[x], chains[x], opt.inj_tol);
    double bound = kInf;
    for (std::size_t i = 0; i < charts; ++i) {
      out.mu[x] += pou.s[i][x] * out.nu[i];
      if (pou.t[i][x] != 0.0) bound = std::min(bound, out.nu[i]);
    }
    // The levels are negative and s_i = 1 wherever t_i > 0, so the sum sits
    // at or below every active level.
    if (out.mu[x] > bound + 1e-12) {
      throw Error(ErrorKind::structural, "deform_to_spectral_section: mu exceeds an active level");
    }
    // The window is closed and mu can land exactly on an eigenvalue (two
    // equal levels summed), so widen by round-off before the boundary check.
    const double slack = 1e-12 * std::max(spectra[x].spectral_radius(), 1.0);
    const Subspace floor =
        spectral_projection(spectra[x], Window::at_least(out.mu[x] - slack), 0.0);
    if (floor.containment_residual(l[x]) > 1e-8) {
      throw Error(ErrorKind::structural,
                  "deform_to_spectral_section: L leaves Im P_[mu, inf) at sample " +
                      std::to_string(x));
    }
  }

  // Pass two: the mirror image on orthogonal complements.
  std::vector<Subspace> l_perp(n);
  for (std::size_t x = 0; x < n; ++x) l_perp[x] = l[x].orthogonal_complement();
  for (std::size_t i = 0; i < charts; ++i) {
    out.nu_perp.push_back(find_level(spectra, atlas.charts[i], l_perp, true, opt, i));
  }
  std::vector<ProjectionChain> perp_chains(n);
  out.mu_perp.assign(n, 0.0);
  out.section.reference_cut = s.reference_cut;
  out.section.continuity_tol = s.continuity_tol;
  for (std::size_t x = 0; x < n; ++x) {
    perp_chains[x] = chain_at(spectra[x], pou, out.nu_perp, x, false);
    const Subspace m_perp = convex_combination_image(l_perp[x], perp_chains[x], opt.inj_tol);
    double bound = -kInf;
    for (std::size_t i = 0; i < charts; ++i) {
      out.mu_perp[x] += pou.s[i][x] * out.nu_perp[i];
      if (pou.t[i][x] != 0.0) bound = std::max(bound, out.nu_perp[i]);
    }
    if (out.mu_perp[x] < bound - 1e-12) {
      throw Error(ErrorKind::structural,
                  "deform_to_spectral_section: mu_perp falls below an active level");
    }
    const double slack = 1e-12 * std::max(spectra[x].spectral_radius(), 1.0);
    const Subspace ceiling =
        spectral_projection(spectra[x], Window::at_most(out.mu_perp[x] + slack), 0.0);
    if (ceiling.containment_residual(m_perp) > 1e-8) {
      throw Error(ErrorKind::structural,
                  "deform_to_spectral_section: complement leaves Im P_(-inf, mu_perp] at sample " +
                      std::to_string(x));
    }
    out.section.subspaces.push_back(m_perp.orthogonal_complement());
  }

  out.margin = std::min(opt.margin_cap, 0.5 * smallest_gap(spectra));
  for (std::size_t x = 0; x < n; ++x) {
    double r = std::max(std::abs(out.mu[x]), std::abs(out.mu_perp[x])) + out.margin;
    auto near_level = [&](double v) {
      return (spectra[x].eigenvalues.array().abs() - v).abs().minCoeff() < 1e-7;
    };
    for (int k = 0; near_level(r) && k < 100; ++k) r += 2e-7;
    out.r.push_back(r);
  }

  std::vector<SectionHomotopy::SampleData> data;
  for (std::size_t x = 0; x < n; ++x) {
    data.push_back({s.subspaces[x], chains[x], l_perp[x], perp_chains[x]});
  }
  out.homotopy = SectionHomotopy(std::move(data));

  out.verification = is_spectral_section(f, out.section, out.r);
  if (!out.verification.ok) {
    std::ostringstream os;
    os << "deform_to_spectral_section: output fails the sandwich at sample "
       << out.verification.worst_sample << " (residual " << out.verification.worst_residual << ")";
    throw Error(ErrorKind::structural, os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Existence

SectionExistence section_existence(const OperatorFamily& f, const AtlasOptions& atlas_options,
                                   const DeformOptions& options) {
  if (!f.grid().closure().is_loop()) {
    throw Error(ErrorKind::validation, "section_existence: family is not a loop");
  }
  const Atlas atlas = build_atlas(f, atlas_options);
  SectionExistence out;
  out.flow = spectral_flow_chartwise(index_chain(f, atlas));
  if (out.flow != 0) return out;

  // Witness: the span of the top k eigenvectors for the k that keeps a gap
  // of at least 1e-3 open at every sample and needs the smallest radius.
  const auto spectra = f.spectra();
  const Eigen::Index d = f.dim();
  std::optional<std::pair<double, Eigen::Index>> best;
  for (Eigen::Index k = 0; k <= d; ++k) {
    double need = 0.0;
    bool gapped = true;
    for (const auto& s : spectra) {
      const double below = k < d ? s.eigenvalues(d - k - 1) : -kInf;
      const double above = k > 0 ? s.eigenvalues(d - k) : kInf;
      if (above - below < 1e-3) {
        gapped = false;
        break;
      }
      need = std::max({need, below, -above});
    }
    if (gapped && (!best || need < best->first)) best = std::make_pair(need, k);
  }
  const Eigen::Index k = best->second;
  WeakSpectralSection witness;
  for (const auto& s : spectra) {
    witness.subspaces.push_back(Subspace::from_orthonormal(s.eigenvectors.rightCols(k), 1e-8));
  }
  DeformResult deformed = deform_to_spectral_section(f, witness, atlas, options);
  if (f.grid().closure().type == Closure::Type::exact_loop) {
    out.closure_ok = subspace_distance(deformed.section.subspaces.front(),
                                       deformed.section.subspaces.back()) <= 1e-8;
  }
  out.exists = deformed.verification.ok && out.closure_ok;
  out.witness_rank = static_cast<std::size_t>(k);
  out.witness = std::move(deformed);
  return out;
}

}  // namespace fredholm
