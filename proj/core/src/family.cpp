#include "fredholm/family.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/QR>

namespace fredholm {

std::string_view to_string(Closure::Type type) noexcept {
  switch (type) {
    case Closure::Type::open_path: return "open_path";
    case Closure::Type::exact_loop: return "exact_loop";
    case Closure::Type::shifted_loop: return "shifted_loop";
  }
  return "unknown";
}

std::string_view to_string(GridKind kind) noexcept {
  return kind == GridKind::interval_path ? "interval_path" : "circle_loop";
}

// ---------------------------------------------------------------------------
// ParameterGrid

ParameterGrid::ParameterGrid(GridKind kind, std::vector<double> samples, Closure closure)
    : kind_(kind), samples_(std::move(samples)), closure_(closure) {
  if (samples_.size() < 2) {
    throw Error(ErrorKind::validation, "parameter grid: need at least two samples");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw Error(ErrorKind::validation, "parameter grid: samples must be finite");
    }
    if (i > 0 && !(samples_[i] > samples_[i - 1])) {
      throw Error(ErrorKind::validation, "parameter grid: samples must be strictly increasing");
    }
  }
  if ((kind_ == GridKind::circle_loop) != closure_.is_loop()) {
    throw Error(ErrorKind::validation,
                "parameter grid: circle_loop grids need a loop closure and vice versa");
  }
}

ParameterGrid ParameterGrid::linspace(double t0, double t1, std::size_t count, Closure closure) {
  if (count < 2) throw Error(ErrorKind::validation, "parameter grid: need at least two samples");
  std::vector<double> s(count);
  const double denom = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    s[i] = t0 + (t1 - t0) * static_cast<double>(i) / denom;
  }
  s.back() = t1;
  return ParameterGrid(closure.is_loop() ? GridKind::circle_loop : GridKind::interval_path,
                       std::move(s), closure);
}

// ---------------------------------------------------------------------------
// OperatorFamily

OperatorFamily::OperatorFamily(ParameterGrid grid, std::vector<HermitianOperator> ops,
                               FamilyOptions options)
    : grid_(std::move(grid)), ops_(std::move(ops)), options_(options) {
  mats_.reserve(ops_.size());
  for (const auto& op : ops_) mats_.push_back(op.matrix());
  validate();
}

OperatorFamily::OperatorFamily(ParameterGrid grid, std::vector<ComplexMatrix> mats,
                               std::vector<HermitianOperator> ops, FamilyOptions options)
    : grid_(std::move(grid)), mats_(std::move(mats)), ops_(std::move(ops)), options_(options) {
  validate();
}

OperatorFamily OperatorFamily::general(ParameterGrid grid, std::vector<ComplexMatrix> mats,
                                       FamilyOptions options) {
  if (options.polarized_bands) {
    throw Error(ErrorKind::validation, "family: polarized bands need a self-adjoint family");
  }
  return OperatorFamily(std::move(grid), std::move(mats), {}, options);
}

const HermitianOperator& OperatorFamily::op(std::size_t i) const {
  if (ops_.empty()) throw Error(ErrorKind::validation, "family: not self-adjoint");
  return ops_.at(i);
}

std::vector<SpectralDecomposition> OperatorFamily::spectra() const {
  std::vector<SpectralDecomposition> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(spectrum(i));
  return out;
}

void OperatorFamily::validate() const {
  if (mats_.size() != grid_.size()) {
    throw Error(ErrorKind::validation, "family: need exactly one operator per grid sample");
  }
  for (const auto& m : mats_) {
    validate_matrix(m, "family operator");
    if (m.rows() != mats_.front().rows() || m.cols() != mats_.front().cols()) {
      throw Error(ErrorKind::validation, "family: operators must share one shape");
    }
  }
  const Closure& closure = grid_.closure();
  const double tol = options_.family_tol;
  if (closure.type == Closure::Type::exact_loop) {
    const double gap = (mats_.front() - mats_.back()).cwiseAbs().maxCoeff();
    if (gap > tol) {
      std::ostringstream os;
      os << "family: exact loop endpoints differ by " << gap;
      throw Error(ErrorKind::validation, os.str());
    }
  }
  if (closure.type == Closure::Type::shifted_loop) {
    if (!self_adjoint()) {
      throw Error(ErrorKind::validation, "family: shifted loops need a self-adjoint family");
    }
    const RealVector first = spectrum(0).eigenvalues;
    const RealVector last = spectrum(size() - 1).eigenvalues;
    const double radius = options_.interior_radius.value_or(kInf);
    const auto n = static_cast<long>(first.size());
    for (long i = 0; i < n; ++i) {
      const long j = i + closure.shift;
      if (j < 0 || j >= n) continue;
      if (std::abs(last(i)) > radius || std::abs(first(j)) > radius) continue;
      if (std::abs(last(i) - first(j)) > 1e-8) {
        std::ostringstream os;
        os << "family: shifted loop spectra disagree at index " << i << " (" << last(i)
           << " vs " << first(j) << ")";
        throw Error(ErrorKind::validation, os.str());
      }
    }
  }
  if (options_.polarized_bands) {
    const PolarizedBands b = *options_.polarized_bands;
    if (b.minus < 0 || b.plus < 0 || b.minus + b.plus > dim()) {
      throw Error(ErrorKind::validation, "family: polarized band multiplicities out of range");
    }
    for (std::size_t i = 0; i < size(); ++i) {
      const RealVector ev = spectrum(i).eigenvalues;
      Eigen::Index at_minus = 0;
      Eigen::Index at_plus = 0;
      for (Eigen::Index j = 0; j < ev.size(); ++j) {
        if (std::abs(ev(j) + 1.0) <= 1e-9) ++at_minus;
        if (std::abs(ev(j) - 1.0) <= 1e-9) ++at_plus;
        if (std::abs(ev(j)) > 1.0 + 1e-9) {
          throw Error(ErrorKind::validation,
                      "family: polarized family has spectrum outside [-1, 1]");
        }
      }
      if (at_minus < b.minus || at_plus < b.plus) {
        std::ostringstream os;
        os << "family: sample " << i << " lacks the declared frozen bands";
        throw Error(ErrorKind::validation, os.str());
      }
    }
  }
}

OperatorFamily OperatorFamily::slice(std::size_t first, std::size_t last) const {
  if (first >= last || last >= size()) {
    throw Error(ErrorKind::validation, "family: invalid slice");
  }
  std::vector<double> s(grid_.samples().begin() + static_cast<long>(first),
                        grid_.samples().begin() + static_cast<long>(last) + 1);
  ParameterGrid grid(GridKind::interval_path, std::move(s), Closure::open());
  std::vector<ComplexMatrix> mats(mats_.begin() + static_cast<long>(first),
                                  mats_.begin() + static_cast<long>(last) + 1);
  std::vector<HermitianOperator> ops;
  if (self_adjoint()) {
    ops.assign(ops_.begin() + static_cast<long>(first), ops_.begin() + static_cast<long>(last) + 1);
  }
  FamilyOptions opts = options_;
  opts.interior_radius.reset();
  return OperatorFamily(std::move(grid), std::move(mats), std::move(ops), opts);
}

OperatorFamily OperatorFamily::shifted(double level) const {
  std::vector<HermitianOperator> ops;
  ops.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    ComplexMatrix m = op(i).matrix();
    m.diagonal().array() -= level;
    ops.emplace_back(std::move(m));
  }
  FamilyOptions opts;
  opts.family_tol = options_.family_tol;
  opts.scale = options_.scale;
  if (options_.interior_radius) opts.interior_radius = *options_.interior_radius + std::abs(level);
  return OperatorFamily(grid_, std::move(ops), opts);
}

// ---------------------------------------------------------------------------
// Generators

namespace {

std::vector<double> crossing_offsets(int k) {
  std::vector<double> c;
  const int n = std::abs(k);
  for (int j = 0; j < n; ++j) c.push_back(0.5 + (j - (n - 1) / 2.0) * 0.1);
  return c;
}

ComplexMatrix diag_matrix(const std::vector<double>& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
  return m;
}

ComplexMatrix random_unitary(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix x(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = Complex(normal(rng), normal(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(x);
  return qr.householderQ() * ComplexMatrix::Identity(dim, dim);
}

}  // namespace

ComplexMatrix random_hermitian(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix x(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = Complex(normal(rng), normal(rng));
  ComplexMatrix h = (x + x.adjoint()) / (2.0 * std::sqrt(static_cast<double>(dim)));
  return 0.5 * (h + h.adjoint());
}

OperatorFamily crossing(int k, int m, std::size_t samples) {
  if (m < 0 || std::abs(k) + m < 1) {
    throw Error(ErrorKind::invalid_params, "crossing: need m >= 0 and |k| + m >= 1");
  }
  ParameterGrid grid = ParameterGrid::linspace(0.0, 1.0, samples);
  const std::vector<double> offsets = crossing_offsets(k);
  const double sign = k < 0 ? -1.0 : 1.0;
  std::vector<HermitianOperator> ops;
  for (double t : grid.samples()) {
    std::vector<double> d;
    for (double c : offsets) d.push_back(sign * (t - c));
    for (int j = 0; j < m; ++j) d.push_back((j % 2 == 0 ? 1.0 : -1.0) * (2.0 + j / 2));
    ops.emplace_back(diag_matrix(d));
  }
  return OperatorFamily(std::move(grid), std::move(ops));
}

OperatorFamily polarized_crossing(int k, int m_minus, int m_plus, std::size_t samples) {
  if (m_minus < 0 || m_plus < 0 || std::abs(k) + m_minus + m_plus < 1) {
    throw Error(ErrorKind::invalid_params, "polarized_crossing: invalid multiplicities");
  }
  ParameterGrid grid = ParameterGrid::linspace(0.0, 1.0, samples);
  const std::vector<double> offsets = crossing_offsets(k);
  const double sign = k < 0 ? -1.0 : 1.0;
  std::vector<HermitianOperator> ops;
  for (double t : grid.samples()) {
    std::vector<double> d;
    for (double c : offsets) d.push_back(sign * (t - c));
    d.insert(d.end(), static_cast<std::size_t>(m_minus), -1.0);
    d.insert(d.end(), static_cast<std::size_t>(m_plus), 1.0);
    ops.emplace_back(diag_matrix(d));
  }
  FamilyOptions opts;
  opts.polarized_bands = PolarizedBands{m_minus, m_plus};
  return OperatorFamily(std::move(grid), std::move(ops), opts);
}

OperatorFamily truncated_shift_flow(int n, int speed, std::size_t samples) {
  if (n < 1 || speed == 0) {
    throw Error(ErrorKind::invalid_params, "truncated_shift_flow: need N >= 1 and speed != 0");
  }
  const double offset = speed % 2 == 0 ? 1.0 / (4.0 * std::abs(speed)) : 0.0;
  ParameterGrid grid =
      ParameterGrid::linspace(-0.5 + offset, 0.5 + offset, samples, Closure::shifted(speed));
  std::vector<HermitianOperator> ops;
  for (double t : grid.samples()) {
    std::vector<double> d;
    for (int j = -n; j <= n; ++j) d.push_back(j + speed * t);
    ops.emplace_back(diag_matrix(d));
  }
  FamilyOptions opts;
  opts.interior_radius = n - 1.0;
  return OperatorFamily(std::move(grid), std::move(ops), opts);
}

OperatorFamily rotation(int dim, double theta_max, std::size_t samples, std::uint64_t seed) {
  if (dim < 2 || !(theta_max > 0.0) || !std::isfinite(theta_max)) {
    throw Error(ErrorKind::invalid_params, "rotation: need dim >= 2 and theta_max > 0");
  }
  ComplexMatrix frame;  // eigenvectors of the generator G
  std::vector<double> gen_spectrum;
  std::vector<double> d;
  if (dim == 2) {
    const double r = 1.0 / std::sqrt(2.0);
    frame.resize(2, 2);
    // sigma_y = V diag(-1, 1) V*
    frame << Complex(r, 0), Complex(r, 0), Complex(0, -r), Complex(0, r);
    gen_spectrum = {-1.0, 1.0};
    d = {-1.0, 1.0};
  } else {
    frame = random_unitary(dim, seed);
    for (int j = 0; j < dim; ++j) {
      gen_spectrum.push_back(static_cast<double>(j % 3) - 1.0);
      d.push_back((j % 2 == 0 ? -1.0 : 1.0) * (0.5 + 0.25 * j));
    }
  }
  const ComplexMatrix base = diag_matrix(d);
  std::vector<ComplexMatrix> mats;
  const double denom = static_cast<double>(samples - 1);
  for (std::size_t i = 0; i < samples; ++i) {
    const double theta = theta_max * static_cast<double>(i) / denom;
    ComplexVector phases(dim);
    for (int j = 0; j < dim; ++j) {
      phases(j) = std::exp(Complex(0.0, -theta * gen_spectrum[static_cast<std::size_t>(j)]));
    }
    const ComplexMatrix r = frame * phases.asDiagonal() * frame.adjoint();
    mats.push_back(r * base * r.adjoint());
  }
  const bool closes = (mats.front() - mats.back()).cwiseAbs().maxCoeff() <= 1e-10;
  if (closes) mats.back() = mats.front();
  std::vector<HermitianOperator> ops;
  for (const auto& m : mats) ops.push_back(HermitianOperator::symmetrized(m));
  ParameterGrid grid = ParameterGrid::linspace(0.0, 1.0, samples,
                                               closes ? Closure::exact() : Closure::open());
  return OperatorFamily(std::move(grid), std::move(ops));
}

OperatorFamily random_smooth(int dim, std::uint64_t seed, std::size_t samples, bool loop) {
  if (dim < 1) throw Error(ErrorKind::invalid_params, "random_smooth: need dim >= 1");
  const ComplexMatrix ha = random_hermitian(dim, 3 * seed + 101);
  const ComplexMatrix hb = random_hermitian(dim, 3 * seed + 102);
  const ComplexMatrix hc = random_hermitian(dim, 3 * seed + 103);
  ParameterGrid grid =
      ParameterGrid::linspace(0.0, 1.0, samples, loop ? Closure::exact() : Closure::open());
  const double pi = std::numbers::pi;
  std::vector<HermitianOperator> ops;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    ComplexMatrix m;
    if (loop) {
      m = ha + 0.8 * std::sin(2 * pi * t) * hb + 0.5 * (1.0 - std::cos(2 * pi * t)) * hc;
    } else {
      m = (1.0 - t) * ha + t * hb + 0.5 * std::sin(pi * t) * hc;
    }
    ops.push_back(HermitianOperator::symmetrized(m));
  }
  if (loop) ops.back() = ops.front();
  return OperatorFamily(std::move(grid), std::move(ops));
}

namespace {

class ParamReader {
public:
  ParamReader(std::string generator, const GeneratorParams& params)
      : generator_(std::move(generator)), params_(params) {}

  double real(const std::string& key, double fallback) {
    used_.push_back(key);
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    if (!std::isfinite(it->second)) fail(key, "must be finite");
    return it->second;
  }

  long integer(const std::string& key, long fallback) {
    const double v = real(key, static_cast<double>(fallback));
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "must be an integer");
    return static_cast<long>(v);
  }

  std::size_t sample_count(long fallback) {
    const long n = integer("samples", fallback);
    if (n < 2 || n > 1000000) fail("samples", "must lie in [2, 1e6]");
    return static_cast<std::size_t>(n);
  }

  void finish() const {
    for (const auto& [key, value] : params_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw Error(ErrorKind::invalid_params,
                    generator_ + ": unknown parameter '" + key + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw Error(ErrorKind::invalid_params, generator_ + ": parameter '" + key + "' " + why);
  }

private:
  std::string generator_;
  const GeneratorParams& params_;
  std::vector<std::string> used_;
};

}  // namespace

OperatorFamily generate(const std::string& name, const GeneratorParams& params) {
  ParamReader p(name, params);
  if (name == "crossing") {
    const long k = p.integer("k", 1);
    const long m = p.integer("m", 1);
    const std::size_t samples = p.sample_count(101);
    p.finish();
    return crossing(static_cast<int>(k), static_cast<int>(m), samples);
  }
  if (name == "polarized_crossing") {
    const long k = p.integer("k", 1);
    const long mm = p.integer("m_minus", 1);
    const long mp = p.integer("m_plus", 1);
    const std::size_t samples = p.sample_count(101);
    p.finish();
    return polarized_crossing(static_cast<int>(k), static_cast<int>(mm), static_cast<int>(mp),
                              samples);
  }
  if (name == "truncated_shift_flow") {
    const long n = p.integer("N", 3);
    const long speed = p.integer("speed", 1);
    const std::size_t samples = p.sample_count(101);
    p.finish();
    return truncated_shift_flow(static_cast<int>(n), static_cast<int>(speed), samples);
  }
  if (name == "rotation") {
    const long dim = p.integer("dim", 2);
    const double theta = p.real("theta_max", 2.0 * std::numbers::pi);
    const std::size_t samples = p.sample_count(101);
    const long seed = p.integer("seed", 0);
    p.finish();
    if (seed < 0) p.fail("seed", "must be nonnegative");
    return rotation(static_cast<int>(dim), theta, samples, static_cast<std::uint64_t>(seed));
  }
  if (name == "random_smooth") {
    const long dim = p.integer("dim", 4);
    const long seed = p.integer("seed", 0);
    const std::size_t samples = p.sample_count(200);
    const long loop = p.integer("loop", 0);
    p.finish();
    if (seed < 0) p.fail("seed", "must be nonnegative");
    if (loop != 0 && loop != 1) p.fail("loop", "must be 0 or 1");
    return random_smooth(static_cast<int>(dim), static_cast<std::uint64_t>(seed), samples,
                         loop == 1);
  }
  throw Error(ErrorKind::unknown_generator, "unknown generator '" + name + "'");
}

// ---------------------------------------------------------------------------
// Diagnostics

ContinuityReport continuity_check(const OperatorFamily& f, Window band) {
  ContinuityReport report;
  const auto spectra = f.spectra();
  std::vector<Subspace> bands;
  bands.reserve(spectra.size());
  for (const auto& s : spectra) bands.push_back(spectral_projection(s, band));

  double worst_eig = -1.0;
  std::size_t worst_eig_step = 0;
  for (std::size_t i = 0; i + 1 < spectra.size(); ++i) {
    const double eig_step =
        (spectra[i].eigenvalues - spectra[i + 1].eigenvalues).cwiseAbs().maxCoeff();
    const double band_step = subspace_distance(bands[i], bands[i + 1]);
    if (eig_step > worst_eig) {
      worst_eig = eig_step;
      worst_eig_step = i;
    }
    report.max_eigenvalue_step = std::max(report.max_eigenvalue_step, eig_step);
    if (band_step > report.max_band_subspace_step) {
      report.max_band_subspace_step = band_step;
      report.worst_step_index = i;
    }
  }
  if (report.max_band_subspace_step == 0.0) report.worst_step_index = worst_eig_step;
  return report;
}

Subspace window_subspace(const OperatorFamily& f, std::size_t i, double a, double b) {
  if (!(a < b)) throw Error(ErrorKind::validation, "window_subspace: need a < b");
  return spectral_projection(f.spectrum(i), Window{a, b});
}

}  // namespace fredholm
