#include "fredholm/atlas.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

namespace fredholm {

void Atlas::validate(std::size_t sample_count) const {
  if (charts.empty()) throw Error(ErrorKind::validation, "atlas: no charts");
  if (charts.front().start != 0 || charts.back().end + 1 != sample_count) {
    throw Error(ErrorKind::validation, "atlas: charts do not cover the grid");
  }
  for (std::size_t j = 0; j < charts.size(); ++j) {
    const AdaptedChart& c = charts[j];
    if (c.start > c.end || !(c.eps > 0.0) || !std::isfinite(c.eps)) {
      throw Error(ErrorKind::validation, "atlas: chart " + std::to_string(j) + " is malformed");
    }
    if (j > 0) {
      const AdaptedChart& prev = charts[j - 1];
      if (c.start <= prev.start || c.start > prev.end || c.end <= prev.end) {
        throw Error(ErrorKind::validation, "atlas: charts " + std::to_string(j - 1) + " and " +
                                               std::to_string(j) +
                                               " must be ordered and overlap");
      }
    }
  }
}

namespace {

struct Interval {
  double lo;
  double hi;
};

// Occupied part of [0, inf) in |lambda| space: every sampled |eigenvalue| and
// the |.|-image of every branch sweep between consecutive samples.
class AbsOccupancy {
public:
  void add_sample(const SpectralDecomposition& s) {
    for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
      const double a = std::abs(s.eigenvalues(k));
      occ_.push_back({a, a});
    }
    radius_ = std::max(radius_, s.spectral_radius());
  }

  void add_sweep(const SpectralDecomposition& from, const SpectralDecomposition& to) {
    for (Eigen::Index k = 0; k < from.eigenvalues.size(); ++k) {
      const double a = std::min(from.eigenvalues(k), to.eigenvalues(k));
      const double b = std::max(from.eigenvalues(k), to.eigenvalues(k));
      if (a <= 0.0 && b >= 0.0) {
        occ_.push_back({0.0, std::max(-a, b)});
      } else {
        occ_.push_back({std::min(std::abs(a), std::abs(b)), std::max(std::abs(a), std::abs(b))});
      }
    }
  }

  /// Free open intervals of (0, upper) where upper is the spectral radius
  /// (1 for the zero operator) further limited by `cap`.
  std::vector<Interval> free_components(double cap) const {
    double upper = radius_ > 0.0 ? radius_ : 1.0;
    upper = std::min(upper, cap);
    std::vector<Interval> sorted = occ_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    std::vector<Interval> out;
    double cursor = 0.0;
    for (const Interval& iv : sorted) {
      if (iv.lo >= upper) break;
      if (iv.lo > cursor) out.push_back({cursor, iv.lo});
      cursor = std::max(cursor, iv.hi);
    }
    if (cursor < upper) out.push_back({cursor, upper});
    return out;
  }

private:
  std::vector<Interval> occ_;
  double radius_ = 0.0;
};

std::optional<double> choose_eps(const AbsOccupancy& occ, double cap, double gap_tol,
                                 EpsRule rule) {
  std::optional<Interval> best;
  for (const Interval& c : occ.free_components(cap)) {
    if ((c.hi - c.lo) / 2.0 < gap_tol) continue;
    if (rule == EpsRule::smallest_gap) {
      best = c;
      break;
    }
    if (!best || (c.hi - c.lo) > (best->hi - best->lo) + 1e-15) best = c;
  }
  if (!best) return std::nullopt;
  return 0.5 * (best->lo + best->hi);
}

Subspace band_of(const SpectralDecomposition& s, double eps) {
  return spectral_projection(s, Window{-eps, eps}, 0.0);
}

// Conditions of a single sample of a chart.
std::optional<std::string> sample_violation(const SpectralDecomposition& s, double eps,
                                            double gap_tol) {
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    const double lambda = s.eigenvalues(k);
    if (std::abs(lambda - eps) < gap_tol || std::abs(lambda + eps) < gap_tol) {
      std::ostringstream os;
      os << "eigenvalue " << lambda << " lies within gap_tol of +-" << eps;
      return os.str();
    }
  }
  return std::nullopt;
}

Eigen::Index band_rank(const SpectralDecomposition& s, double eps) {
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    if (std::abs(s.eigenvalues(k)) < eps) ++r;
  }
  return r;
}

// Checks the step from sample i to i + 1 (both already individually valid).
std::optional<std::string> step_violation(const SpectralDecomposition& a,
                                          const SpectralDecomposition& b, double eps,
                                          double band_tol) {
  if (band_rank(a, eps) != band_rank(b, eps)) return std::string("band rank changes");
  const double d = subspace_distance(band_of(a, eps), band_of(b, eps));
  if (d > band_tol) {
    std::ostringstream os;
    os << "band subspace jumps by " << d;
    return os.str();
  }
  return std::nullopt;
}

}  // namespace

AdaptedReport is_adapted(const std::vector<SpectralDecomposition>& spectra,
                         const AdaptedChart& chart, const ChartCheckOptions& options) {
  AdaptedReport report;
  auto fail = [&](std::size_t i, std::string why) {
    report.adapted = false;
    report.sample = i;
    report.violation = std::move(why);
    return report;
  };
  if (chart.start > chart.end || chart.end >= spectra.size()) {
    return fail(chart.start, "chart range outside the grid");
  }
  if (!(chart.eps > 0.0)) return fail(chart.start, "eps must be positive");
  for (std::size_t i = chart.start; i <= chart.end; ++i) {
    if (auto v = sample_violation(spectra[i], chart.eps, options.gap_tol)) return fail(i, *v);
  }
  for (std::size_t i = chart.start; i < chart.end; ++i) {
    if (auto v = step_violation(spectra[i], spectra[i + 1], chart.eps,
                                options.band_continuity_tol)) {
      return fail(i + 1, *v);
    }
  }
  return report;
}

AdaptedReport is_adapted(const OperatorFamily& f, const AdaptedChart& chart,
                         const ChartCheckOptions& options) {
  if (chart.end >= f.size() || chart.start > chart.end) {
    AdaptedReport r;
    r.adapted = false;
    r.sample = chart.start;
    r.violation = "chart range outside the grid";
    return r;
  }
  std::vector<SpectralDecomposition> spectra(f.size());
  for (std::size_t i = chart.start; i <= chart.end; ++i) spectra[i] = f.spectrum(i);
  return is_adapted(spectra, chart, options);
}

namespace {

class ChartGrower {
public:
  ChartGrower(const std::vector<SpectralDecomposition>& spectra, const AtlasOptions& options,
              bool polarized)
      : spectra_(spectra), options_(options), polarized_(polarized) {}

  // Longest admissible chart starting at `start` with at most `max_len`
  // samples; nullopt when not even the single sample admits an eps.
  std::optional<AdaptedChart> grow(std::size_t start, std::size_t max_len) const {
    AbsOccupancy occ;
    occ.add_sample(spectra_[start]);
    double cap = cap_at(start);
    auto eps = choose_eps(occ, cap, options_.gap_tol, options_.rule);
    if (!eps) return std::nullopt;
    AdaptedChart chart{start, start, *eps};
    const ChartCheckOptions check{options_.gap_tol, options_.band_continuity_tol};
    while (chart.end + 1 < spectra_.size() && chart.end + 2 - chart.start <= max_len) {
      const std::size_t next = chart.end + 1;
      AbsOccupancy trial = occ;
      trial.add_sample(spectra_[next]);
      trial.add_sweep(spectra_[chart.end], spectra_[next]);
      const double trial_cap = std::min(cap, cap_at(next));
      auto trial_eps = choose_eps(trial, trial_cap, options_.gap_tol, options_.rule);
      if (!trial_eps) break;
      AdaptedChart candidate{chart.start, next, *trial_eps};
      bool ok = false;
      if (*trial_eps == chart.eps) {
        ok = !sample_violation(spectra_[next], chart.eps, options_.gap_tol) &&
             !step_violation(spectra_[chart.end], spectra_[next], chart.eps,
                             options_.band_continuity_tol);
      } else {
        ok = is_adapted(spectra_, candidate, check).adapted;
      }
      if (!ok) break;
      chart = candidate;
      occ = std::move(trial);
      cap = trial_cap;
    }
    return chart;
  }

private:
  double cap_at(std::size_t i) const {
    double cap = kInf;
    if (!options_.eps_cap.empty()) cap = options_.eps_cap.at(i);
    if (polarized_) cap = std::min(cap, 1.0);
    return cap;
  }

  const std::vector<SpectralDecomposition>& spectra_;
  const AtlasOptions& options_;
  bool polarized_;
};

[[noreturn]] void atlas_failure(std::size_t sample) {
  throw Error(ErrorKind::atlas_failure,
              "build_atlas: no admissible eps around sample " + std::to_string(sample) +
                  "; an eigenvalue branch is pinned near a level or the grid is too coarse "
                  "(refine the grid)");
}

}  // namespace

Atlas build_atlas(const std::vector<SpectralDecomposition>& spectra, const AtlasOptions& options,
                  bool polarized) {
  const std::size_t n = spectra.size();
  if (n < 2) throw Error(ErrorKind::validation, "build_atlas: need at least two samples");
  if (!options.eps_cap.empty() && options.eps_cap.size() != n) {
    throw Error(ErrorKind::validation, "build_atlas: eps_cap needs one value per sample");
  }
  const std::size_t overlap = std::max<std::size_t>(options.overlap, 1);
  const std::size_t unbounded = options.max_chart_len == 0 ? n : options.max_chart_len;
  std::mt19937_64 rng(options.length_seed);
  auto next_len = [&]() -> std::size_t {
    if (options.length_seed == 0) return std::max<std::size_t>(unbounded, 2);
    const std::size_t lo = std::min(overlap + 2, std::max<std::size_t>(unbounded, 2));
    std::uniform_int_distribution<std::size_t> dist(lo, std::max(lo, unbounded));
    return dist(rng);
  };

  ChartGrower grower(spectra, options, polarized);
  Atlas atlas;
  auto first = grower.grow(0, next_len());
  if (!first || (first->end == 0 && n > 1)) atlas_failure(0);
  atlas.charts.push_back(*first);

  while (atlas.charts.back().end + 1 < n) {
    const AdaptedChart prev = atlas.charts.back();
    const std::size_t len = next_len();
    const std::size_t lowest = std::max(prev.start + 1, prev.end + 1 >= overlap
                                                            ? prev.end + 1 - overlap
                                                            : std::size_t{0});
    bool placed = false;
    for (std::size_t s = std::min(lowest, prev.end); s <= prev.end; ++s) {
      auto chart = grower.grow(s, std::max<std::size_t>(len, prev.end - s + 2));
      if (chart && chart->end > prev.end) {
        atlas.charts.push_back(*chart);
        placed = true;
        break;
      }
    }
    if (!placed) atlas_failure(prev.end);
  }
  atlas.validate(n);
  return atlas;
}

Atlas build_atlas(const OperatorFamily& f, const AtlasOptions& options) {
  return build_atlas(f.spectra(), options, f.polarized_bands().has_value());
}

std::pair<double, double> admissible_eps_interval(
    const std::vector<SpectralDecomposition>& spectra, const AdaptedChart& chart) {
  AbsOccupancy occ;
  for (std::size_t i = chart.start; i <= chart.end; ++i) {
    occ.add_sample(spectra.at(i));
    if (i > chart.start) occ.add_sweep(spectra[i - 1], spectra[i]);
  }
  for (const Interval& c : occ.free_components(kInf)) {
    if (c.lo < chart.eps && chart.eps < c.hi) return {c.lo, c.hi};
  }
  throw Error(ErrorKind::validation, "admissible_eps_interval: chart eps meets the spectrum");
}

double eps_for_subset(const Atlas& atlas, const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw Error(ErrorKind::validation, "eps_for_subset: empty chart subset");
  double eps = kInf;
  std::size_t lo = 0;
  std::size_t hi = static_cast<std::size_t>(-1);
  for (std::size_t j : subset) {
    if (j >= atlas.charts.size()) {
      throw Error(ErrorKind::validation, "eps_for_subset: chart index out of range");
    }
    const AdaptedChart& c = atlas.charts[j];
    eps = std::min(eps, c.eps);
    lo = std::max(lo, c.start);
    hi = std::min(hi, c.end);
  }
  if (lo > hi) {
    throw Error(ErrorKind::validation, "eps_for_subset: chart ranges have empty intersection");
  }
  return eps;
}

CoverCategoryData cover_category(const Atlas& atlas, std::size_t sample_count,
                                 std::size_t max_dim) {
  if (max_dim > 3) throw Error(ErrorKind::validation, "cover_category: max_dim must be <= 3");
  atlas.validate(sample_count);
  constexpr std::size_t kMaxObjects = 1000000;

  CoverCategoryData data;
  data.nerve_counts.assign(max_dim + 1, 0);
  for (std::size_t x = 0; x < sample_count; ++x) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < atlas.charts.size(); ++j) {
      if (atlas.charts[j].contains(x)) members.push_back(j);
    }
    const std::size_t c = members.size();
    if (c > 20 || data.objects.size() + ((std::size_t{1} << c) - 1) > kMaxObjects) {
      throw Error(ErrorKind::size, "cover_category: more than 1e6 objects");
    }
    const std::uint32_t full = (std::uint32_t{1} << c) - 1;
    const std::size_t base = data.objects.size();
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
      CoverCategoryData::Object obj{x, {}};
      for (std::size_t b = 0; b < c; ++b) {
        if (mask & (std::uint32_t{1} << b)) obj.charts.push_back(members[b]);
      }
      data.objects.push_back(std::move(obj));
    }
    // Object for mask m sits at base + m - 1.
    for (std::uint32_t from = 1; from <= full; ++from) {
      for (std::uint32_t to = from;; to = (to - 1) & from) {
        if (to == 0) break;
        data.morphisms.emplace_back(base + from - 1, base + to - 1);
        if (to == from) ++data.identity_morphisms;
      }
    }
    // chains[k][m]: strictly decreasing chains of length k starting at m.
    std::vector<std::uint64_t> prev(full + 1, 1);
    prev[0] = 0;
    for (std::size_t k = 0; k <= max_dim; ++k) {
      if (k > 0) {
        std::vector<std::uint64_t> cur(full + 1, 0);
        for (std::uint32_t m = 1; m <= full; ++m) {
          for (std::uint32_t sub = (m - 1) & m; sub != 0; sub = (sub - 1) & m) cur[m] += prev[sub];
        }
        prev = std::move(cur);
      }
      for (std::uint32_t m = 1; m <= full; ++m) data.nerve_counts[k] += prev[m];
    }
  }
  return data;
}

StrictAdaptedReport strictly_adapted_check(const OperatorFamily& f, const AdaptedChart& chart,
                                           double strict_tol) {
  if (chart.end >= f.size() || chart.start > chart.end) {
    throw Error(ErrorKind::validation, "strictly_adapted_check: chart outside the grid");
  }
  std::vector<SpectralDecomposition> spectra(f.size());
  for (std::size_t i = chart.start; i <= chart.end; ++i) spectra[i] = f.spectrum(i);

  auto run = [&](double eps) {
    ContinuityReport rep;
    rep.worst_step_index = chart.start;
    for (std::size_t i = chart.start; i < chart.end; ++i) {
      const double eig_step =
          (spectra[i].eigenvalues - spectra[i + 1].eigenvalues).cwiseAbs().maxCoeff();
      const double d = subspace_distance(spectral_projection(spectra[i], Window::at_least(eps)),
                                         spectral_projection(spectra[i + 1], Window::at_least(eps)));
      rep.max_eigenvalue_step = std::max(rep.max_eigenvalue_step, eig_step);
      if (d > rep.max_band_subspace_step) {
        rep.max_band_subspace_step = d;
        rep.worst_step_index = i;
      }
    }
    return rep;
  };

  StrictAdaptedReport out;
  out.steps = run(chart.eps);
  out.strictly_adapted = out.steps.max_band_subspace_step <= strict_tol;
  const auto [lo, hi] = admissible_eps_interval(spectra, chart);
  const double margin = std::min(1e-6, (hi - lo) / 4.0);
  out.eps_low = lo + margin;
  out.eps_high = hi - margin;
  const bool low_ok = run(out.eps_low).max_band_subspace_step <= strict_tol;
  const bool high_ok = run(out.eps_high).max_band_subspace_step <= strict_tol;
  out.eps_invariant = low_ok == out.strictly_adapted && high_ok == out.strictly_adapted;
  return out;
}

}  // namespace fredholm
