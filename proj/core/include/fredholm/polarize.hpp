#pragma once

// Finite-polarized replacement: the odd saturating function chi_r applied by
// functional calculus with a radius r(x) blended from chart gap radii, and
// the check that the replacement keeps the spectral flow.

#include <vector>

#include "fredholm/sections.hpp"

namespace fredholm {

/// u on [0, r/2], (2/r - 1) u + r - 1 on [r/2, r], 1 beyond r; odd.
/// r must lie in (0, 1].
double chi_eval(double r, double u);

/// r(x) = sum_U t_U(x) eps_U. Every eps must be below 1 (range error), and
/// r(x) >= min{eps_U : x in U} is asserted.
std::vector<double> radius_function(const Atlas& atlas, const PartitionOfUnity& pou);

/// chi_r(A) with the eigenvectors of A.
HermitianOperator apply_chi(const HermitianOperator& a, double r);

struct PolarizedReplacement {
  OperatorFamily original;     // the input divided by `scale`
  OperatorFamily replaced;
  double scale = 1.0;
  std::vector<double> r;
  PolarizedBands frozen;
  double band_identity_residual = 0.0;  // worst over samples and checked eps
};

/// Divides by the largest spectral radius K when K > 1, so saturation at
/// +-1 is meaningful for the atlas the caller builds on that scale.
double polarization_scale(const OperatorFamily& f);
OperatorFamily scaled_family(const OperatorFamily& f, double scale);

/// A'_x = chi_{r(x)}(A_x) for an already scaled family and explicit radii.
/// On loops both seam samples use the smaller of the two seam radii so the
/// replacement closes up the way the input does.
PolarizedReplacement apply_chi_family(const OperatorFamily& scaled, std::vector<double> r,
                                      double scale = 1.0);

/// Scales f, builds r from the atlas and partition of unity (both on the
/// scaled family), and replaces. Checks the band identity
/// Im P_[eps, inf)(A) = Im P_[eps, inf)(A') for eps < r(x)/2.
PolarizedReplacement finite_polarized_replace(const OperatorFamily& f, const Atlas& atlas,
                                              const PartitionOfUnity& pou);

/// Convenience: atlas and partition of unity built on the scaled family. A
/// family that already declares frozen bands and passes
/// finite_polarized_check is replaced with r = 1, i.e. left as it is.
PolarizedReplacement finite_polarized_replace(const OperatorFamily& f,
                                              const AtlasOptions& atlas_options = {});

struct FlowPreservation {
  long flow_before = 0;
  long flow_after = 0;
  bool preserved = false;
  Atlas shared;  // eps < r(x)/2 on every chart
};

/// Chartwise flow of both families over one atlas built with eps capped by
/// r(x)/2 and checked adapted for both.
FlowPreservation flow_preservation_check(const PolarizedReplacement& rep);

struct FinitePolarizedReport {
  bool ok = true;
  double norm = 0.0;
  std::string violation;
};

/// Norm at most 1, spectrum in [-1, 1], declared frozen bands present, and
/// norm exactly 1 when a band is declared.
FinitePolarizedReport finite_polarized_check(const OperatorFamily& f, double tol = 1e-9);

}  // namespace fredholm
