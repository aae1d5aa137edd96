#pragma once

// Adapted charts (a contiguous run of samples plus a gap radius eps with
// +-eps outside every spectrum on the run), greedy atlas construction, and
// the combinatorics of the covering category of an atlas.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fredholm/family.hpp"

namespace fredholm {

struct AdaptedChart {
  std::size_t start = 0;  // first sample index, inclusive
  std::size_t end = 0;    // last sample index, inclusive
  double eps = 0.0;

  bool contains(std::size_t i) const noexcept { return start <= i && i <= end; }
};

struct Atlas {
  std::vector<AdaptedChart> charts;

  /// Throws unless the charts are ordered, cover samples 0..sample_count-1,
  /// and consecutive charts share at least one sample.
  void validate(std::size_t sample_count) const;
};

struct ChartCheckOptions {
  double gap_tol = 1e-6;
  double band_continuity_tol = 0.5;
};

struct AdaptedReport {
  bool adapted = true;
  std::string violation;                // empty when adapted
  std::optional<std::size_t> sample;    // first offending sample
};

AdaptedReport is_adapted(const OperatorFamily& f, const AdaptedChart& chart,
                         const ChartCheckOptions& options = {});
AdaptedReport is_adapted(const std::vector<SpectralDecomposition>& spectra,
                         const AdaptedChart& chart, const ChartCheckOptions& options = {});

enum class EpsRule {
  largest_gap,    // midpoint of the widest free gap; ties go to the smaller eps
  smallest_gap,   // midpoint of the lowest free gap that is wide enough
};

struct AtlasOptions {
  std::size_t max_chart_len = 25;  // samples per chart; 0 means unbounded
  std::size_t overlap = 3;         // requested shared samples between charts
  double gap_tol = 1e-6;
  double band_continuity_tol = 0.5;
  EpsRule rule = EpsRule::largest_gap;
  /// Nonzero: each chart draws its own length cap from [overlap + 2,
  /// max_chart_len] with this seed.
  std::uint64_t length_seed = 0;
  /// Optional per-sample upper bound on eps (exclusive).
  std::vector<double> eps_cap;
};

/// Greedy left-to-right construction: a chart grows while some eps keeps
/// +-eps at least gap_tol away from every eigenvalue branch swept over the
/// chart, then the next chart starts `overlap` samples back.
Atlas build_atlas(const OperatorFamily& f, const AtlasOptions& options = {});
Atlas build_atlas(const std::vector<SpectralDecomposition>& spectra,
                  const AtlasOptions& options = {}, bool polarized = false);

/// Free interval of admissible eps containing `eps` on the chart, with the
/// occupied set built from eigenvalue sweeps between consecutive samples.
std::pair<double, double> admissible_eps_interval(
    const std::vector<SpectralDecomposition>& spectra, const AdaptedChart& chart);

/// min of member eps over a nonempty chart subset with a common sample.
double eps_for_subset(const Atlas& atlas, const std::vector<std::size_t>& subset);

struct CoverCategoryData {
  struct Object {
    std::size_t sample = 0;
    std::vector<std::size_t> charts;  // ascending chart indices
  };
  std::vector<Object> objects;
  /// (from, to) object indices with the same sample and to.charts a
  /// nonempty subset of from.charts; identities included.
  std::vector<std::pair<std::size_t, std::size_t>> morphisms;
  /// nerve_counts[k]: nondegenerate k-simplices, i.e. strictly decreasing
  /// chains sigma_0 > ... > sigma_k at a common sample.
  std::vector<std::uint64_t> nerve_counts;
  std::size_t identity_morphisms = 0;
};

CoverCategoryData cover_category(const Atlas& atlas, std::size_t sample_count,
                                 std::size_t max_dim = 3);

struct StrictAdaptedReport {
  ContinuityReport steps;  // band step = distance of Im P_[eps, inf) between samples
  bool strictly_adapted = false;
  bool eps_invariant = false;  // same verdict at both ends of the admissible eps range
  double eps_low = 0.0;
  double eps_high = 0.0;
};

StrictAdaptedReport strictly_adapted_check(const OperatorFamily& f, const AdaptedChart& chart,
                                           double strict_tol = 0.5);

}  // namespace fredholm
