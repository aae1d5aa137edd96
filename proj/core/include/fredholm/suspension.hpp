#pragma once

// The suspension B_{x,t} = cos t + i A_x sin t over X x [0, pi] of a
// self-adjoint family, the band lemma relating |B_t| to |A|, and an index
// read off from kernels on the equator t = pi/2.

#include <optional>
#include <string>
#include <vector>

#include "fredholm/family.hpp"

namespace fredholm {

/// cos t + i a sin t.
ComplexMatrix suspension_operator(const HermitianOperator& a, double t);

struct SuspensionFamily {
  OperatorFamily base;
  std::vector<double> t_samples;                   // 0 = t_0 < ... < t_last = pi
  std::size_t equator = 0;                         // index with t = pi/2 exactly
  std::vector<std::vector<ComplexMatrix>> operators;  // operators[x][t]

  const ComplexMatrix& at(std::size_t x, std::size_t t) const { return operators.at(x).at(t); }
};

/// Samples t uniformly on [0, pi] (t_count >= 3), inserting pi/2 when the
/// uniform grid misses it. Checks the endpoint collapse B_0 = 1, B_pi = -1
/// and normality at every point; violations are model_violation errors.
SuspensionFamily suspend(const OperatorFamily& f, std::size_t t_count = 33);

/// Largest deviation between the sorted spectrum of |B_t|^2 = B_t* B_t and
/// the sorted values cos^2 t + lambda^2 sin^2 t.
double suspension_spectrum_check(const HermitianOperator& a, double t);

struct LemmaBandReport {
  double delta = 0.0;
  Eigen::Index band_dim = 0;   // dim Im P_[0, delta](|B_t|)
  double distance = 0.0;       // to Im P_[0, eps](|A|)
  bool holds = false;          // distance <= 1e-8
};

/// delta = sqrt(cos^2 t + eps^2 sin^2 t). Requires +-eps outside the spectrum
/// of A (gap 1e-9) and sin t != 0.
LemmaBandReport lemma_band_check(const HermitianOperator& a, double eps, double t);

/// dim Im P_[0, delta](|B_t|) for an arbitrary delta; zero whenever
/// delta < |cos t| since |B_t|^2 >= cos^2 t.
Eigen::Index suspension_band_dim(const HermitianOperator& a, double delta, double t);

/// With no eigenvalue of |A| in [beta, alpha], every eps in [beta, alpha]
/// gives the same band Im P_[0, eps](|A|). Returns the largest distance from
/// Im P_[0, alpha](|A|) over `eps_values`.
double band_monotonicity_check(const HermitianOperator& a, double beta, double alpha,
                               const std::vector<double>& eps_values);

struct KernelPoint {
  std::size_t x = 0;
  double t = 0.0;
  Eigen::Index multiplicity = 0;
};

struct SuspensionIndexReport {
  long index = 0;
  std::vector<KernelPoint> kernels;   // samples with Ker B_{x, pi/2} != 0
  double min_off_equator_sigma = kInf;
  std::optional<double> det_winding;  // exact loops with invertible ends only
};

/// Eigenvalues of B_{x, pi/2} (general complex solver) are i times those of
/// A_x; the index is the signed count of imaginary parts changing sign along
/// x, nonnegative counting as the upper side. Any sample off the equator with
/// sigma_min(B) < tol is a model_violation error.
SuspensionIndexReport suspension_index(const SuspensionFamily& sf, double tol = 1e-8);

/// x_index,x,t_index,t,k,value rows of the sorted |B|^2 spectra.
std::string suspension_spectra_csv(const SuspensionFamily& sf);

}  // namespace fredholm
