#pragma once

// Sampled operator families over a one-dimensional parameter grid, the
// built-in generators, and continuity diagnostics.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fredholm/linalg.hpp"

namespace fredholm {

enum class GridKind { interval_path, circle_loop };

struct Closure {
  enum class Type { open_path, exact_loop, shifted_loop };
  Type type = Type::open_path;
  /// Eigenvalue index relabelling between the last and first sample:
  /// sorted(last)[i] matches sorted(first)[i + shift].
  int shift = 0;

  static Closure open() { return {}; }
  static Closure exact() { return {Type::exact_loop, 0}; }
  static Closure shifted(int s) { return {Type::shifted_loop, s}; }
  bool is_loop() const noexcept { return type != Type::open_path; }
};

std::string_view to_string(Closure::Type type) noexcept;
std::string_view to_string(GridKind kind) noexcept;

class ParameterGrid {
public:
  ParameterGrid(GridKind kind, std::vector<double> samples, Closure closure);

  static ParameterGrid linspace(double t0, double t1, std::size_t count,
                                Closure closure = Closure::open());

  GridKind kind() const noexcept { return kind_; }
  const std::vector<double>& samples() const noexcept { return samples_; }
  const Closure& closure() const noexcept { return closure_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_.at(i); }

private:
  GridKind kind_;
  std::vector<double> samples_;
  Closure closure_;
};

/// Frozen eigenvalues at -1 and +1 standing in for essential spectrum.
struct PolarizedBands {
  Eigen::Index minus = 0;
  Eigen::Index plus = 0;
};

struct FamilyOptions {
  std::optional<PolarizedBands> polarized_bands;
  /// Shifted-loop closure compares only eigenvalues with |lambda| below this.
  std::optional<double> interior_radius;
  /// Factor the family was divided by, recorded by spectral rescaling.
  double scale = 1.0;
  double family_tol = 1e-9;
};

class OperatorFamily {
public:
  /// Self-adjoint family: one Hermitian operator per grid sample.
  OperatorFamily(ParameterGrid grid, std::vector<HermitianOperator> ops,
                 FamilyOptions options = {});
  /// General family of (possibly rectangular) matrices.
  static OperatorFamily general(ParameterGrid grid, std::vector<ComplexMatrix> mats,
                                FamilyOptions options = {});

  const ParameterGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return mats_.size(); }
  bool self_adjoint() const noexcept { return !ops_.empty(); }
  Eigen::Index rows() const noexcept { return mats_.front().rows(); }
  Eigen::Index cols() const noexcept { return mats_.front().cols(); }
  Eigen::Index dim() const noexcept { return cols(); }

  const ComplexMatrix& matrix(std::size_t i) const { return mats_.at(i); }
  /// Throws a validation error for general families.
  const HermitianOperator& op(std::size_t i) const;
  SpectralDecomposition spectrum(std::size_t i) const { return hermitian_eig(op(i)); }
  std::vector<SpectralDecomposition> spectra() const;

  const std::optional<PolarizedBands>& polarized_bands() const noexcept {
    return options_.polarized_bands;
  }
  const FamilyOptions& options() const noexcept { return options_; }

  /// Samples first..last as an open path.
  OperatorFamily slice(std::size_t first, std::size_t last) const;
  /// A - level * I at every sample; polarization metadata is dropped.
  OperatorFamily shifted(double level) const;

private:
  OperatorFamily(ParameterGrid grid, std::vector<ComplexMatrix> mats,
                 std::vector<HermitianOperator> ops, FamilyOptions options);
  void validate() const;

  ParameterGrid grid_;
  std::vector<ComplexMatrix> mats_;
  std::vector<HermitianOperator> ops_;
  FamilyOptions options_;
};

// ---------------------------------------------------------------------------
// Generators

/// diag(branches, spectators) on [0, 1]. |k| branches sign(k)(t - c_j) with
/// c_j spread around 1/2 by 0.1, plus m spectators at +-2, +-3, ...
OperatorFamily crossing(int k, int m, std::size_t samples = 101);

/// Crossing branches inside [-1/2, 1/2] with frozen -1 and +1 bands.
OperatorFamily polarized_crossing(int k, int m_minus, int m_plus,
                                  std::size_t samples = 101);

/// Eigenvalues n + speed * t for n = -N..N over a unit parameter interval,
/// closed as a loop shifted by `speed`. The interval is [-1/2, 1/2] for odd
/// speed and is offset by 1/(4|speed|) for even speed so the endpoints stay
/// invertible.
OperatorFamily truncated_shift_flow(int n, int speed = 1, std::size_t samples = 101);

/// R(theta) D R(theta)* with R(theta) = exp(-i theta G), theta running over
/// [0, theta_max]. dim 2 uses G = sigma_y and D = diag(-1, 1); larger dims
/// draw G (integer spectrum) and a gapped D from `seed`. theta_max = 2 pi k
/// yields an exact loop.
OperatorFamily rotation(int dim, double theta_max, std::size_t samples = 101,
                        std::uint64_t seed = 0);

/// (1-t) H_a + t H_b + sin(pi t) H_c / 2 on [0, 1] with random Hermitian
/// H's. With `loop`, H_a + sin(2 pi t) H_b + (1 - cos(2 pi t)) H_c / 2 on an
/// exact loop instead.
OperatorFamily random_smooth(int dim, std::uint64_t seed, std::size_t samples = 200,
                             bool loop = false);

/// Name-based dispatch used by family specs. Unknown names and unknown or
/// out-of-range parameters are errors.
using GeneratorParams = std::map<std::string, double>;
OperatorFamily generate(const std::string& name, const GeneratorParams& params);

/// Random Hermitian matrix with spectrum roughly inside [-2, 2].
ComplexMatrix random_hermitian(int dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Diagnostics

struct ContinuityReport {
  double max_eigenvalue_step = 0.0;
  double max_band_subspace_step = 0.0;
  std::size_t worst_step_index = 0;
};

/// Largest per-step movement of the sorted spectrum and of the spectral
/// subspace of `band`, over consecutive samples.
ContinuityReport continuity_check(const OperatorFamily& f, Window band);

/// H_x(a, b): span of eigenvectors at sample `i` with a < lambda < b.
Subspace window_subspace(const OperatorFamily& f, std::size_t i, double a, double b);

}  // namespace fredholm
