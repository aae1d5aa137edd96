#pragma once

// Weak spectral sections of a sampled family, the sandwich predicate
// Im P_[r, inf) <= S <= Im P_[-r, inf), and the two-pass deformation of a
// weak section into a spectral one by convex combinations of projections.

#include <optional>
#include <string>
#include <vector>

#include "fredholm/atlas.hpp"

namespace fredholm {

/// Piecewise-linear weights subordinate to an atlas. t[i][x] is a tent inside
/// chart i (flat towards the ends of the grid); s[i][x] is 1 wherever
/// t[i][x] > 0 and 0 at the remaining chart edges.
struct PartitionOfUnity {
  std::vector<std::vector<double>> t;
  std::vector<std::vector<double>> s;

  /// Needs consecutive charts to share at least two samples.
  static PartitionOfUnity subordinate(const Atlas& atlas, std::size_t sample_count);
  void validate(const Atlas& atlas) const;
};

struct WeakSpectralSection {
  std::vector<Subspace> subspaces;
  double reference_cut = 0.0;
  double continuity_tol = 0.5;
};

struct WeakSectionReport {
  std::vector<long> dim_defect;  // dim S_x - dim H_x(c, inf)
  std::vector<double> floor;     // lowest eigenvalue whose eigenvector meets S_x
  double max_step = 0.0;         // largest consecutive subspace distance
  bool continuous = true;        // max_step <= continuity_tol
};

/// Commensurability data against the reference cut; the cut must avoid every
/// spectrum (ambiguous_boundary otherwise).
WeakSectionReport weak_section_report(const OperatorFamily& f, const WeakSpectralSection& s);

struct LevelResult {
  double requested = 0.0;
  double level = 0.0;  // after nudging away from sampled eigenvalues
  bool ok = false;
  std::size_t charts = 0;
  std::string message;
};

struct DiscreteSpectrumReport {
  bool ok = true;
  std::vector<LevelResult> levels;
};

/// For each level, builds an adapted atlas of A - level. A level pinned to
/// one eigenvalue branch at every sample fails; a level merely touched at
/// some samples is nudged. Atlas failures propagate with the level named.
DiscreteSpectrumReport discrete_spectrum_check(const OperatorFamily& f,
                                               const std::vector<double>& levels,
                                               double collision_tol = 1e-8);

struct SandwichReport {
  bool ok = true;
  std::size_t worst_sample = 0;
  double worst_residual = 0.0;
  double upper_residual = 0.0;  // Im P_[r, inf) outside S
  double lower_residual = 0.0;  // S outside Im P_[-r, inf)
};

/// Im P_[r(x), inf)(A_x) <= S_x <= Im P_[-r(x), inf)(A_x) by frame residuals.
SandwichReport is_spectral_section(const OperatorFamily& f, const WeakSpectralSection& s,
                                   const std::vector<double>& r, double tol = 1e-8);

/// Path from S (s = 0) through the pass-one section L (s = 1/2) to the
/// output M (s = 1), sample by sample.
class SectionHomotopy {
public:
  struct SampleData {
    Subspace s;
    ProjectionChain chain;       // pass one: Im P_[nu, inf), nested
    Subspace l_perp;
    ProjectionChain perp_chain;  // pass two: Im P_(-inf, nu_perp], nested
  };

  SectionHomotopy() = default;
  explicit SectionHomotopy(std::vector<SampleData> data) : data_(std::move(data)) {}

  Subspace at(std::size_t sample, double s) const;
  std::size_t size() const noexcept { return data_.size(); }

private:
  std::vector<SampleData> data_;
};

struct DeformOptions {
  double gap_tol = 1e-6;
  double inj_tol = 1e-8;
  double nu_offset = 0.05;   // preferred distance of nu from the spectrum it sits below
  double margin_cap = 0.1;
  bool check_discrete = true;
};

struct DeformResult {
  WeakSpectralSection section;
  std::vector<double> r;
  std::vector<double> nu;        // per chart, negative
  std::vector<double> nu_perp;   // per chart, positive
  std::vector<double> mu;        // per sample
  std::vector<double> mu_perp;
  double margin = 0.0;
  PartitionOfUnity pou;
  SectionHomotopy homotopy;
  SandwichReport verification;
};

DeformResult deform_to_spectral_section(const OperatorFamily& f, const WeakSpectralSection& s,
                                        const Atlas& atlas, const DeformOptions& options = {});

struct SectionExistence {
  bool exists = false;
  long flow = 0;              // the obstruction when nonzero
  std::optional<std::size_t> witness_rank;
  std::optional<DeformResult> witness;
  bool closure_ok = true;     // witness agrees at both ends of an exact loop
};

/// Loops only. Nonzero spectral flow is returned as the obstruction;
/// otherwise a top-k eigenvector span with a uniformly open gap is deformed
/// and verified as the witness.
SectionExistence section_existence(const OperatorFamily& f, const AtlasOptions& atlas_options = {},
                                   const DeformOptions& options = {});

}  // namespace fredholm
