#include "fredholm/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace fredholm {

ComplexMatrix suspension_operator(const HermitianOperator& a, double t) {
  const Eigen::Index n = a.dim();
  return std::cos(t) * ComplexMatrix::Identity(n, n) + Complex(0.0, std::sin(t)) * a.matrix();
}

namespace {

double operator_norm(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double max_abs(const ComplexMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

SuspensionFamily suspend(const OperatorFamily& f, std::size_t t_count) {
  if (!f.self_adjoint()) throw Error(ErrorKind::validation, "suspend: base family is not self-adjoint");
  if (t_count < 3) throw Error(ErrorKind::validation, "suspend: t_count must be at least 3");

  SuspensionFamily sf{f, {}, 0, {}};
  const double pi = std::numbers::pi;
  for (std::size_t j = 0; j < t_count; ++j) {
    sf.t_samples.push_back(j + 1 == t_count ? pi : pi * static_cast<double>(j) /
                                                       static_cast<double>(t_count - 1));
  }
  auto eq = std::find_if(sf.t_samples.begin(), sf.t_samples.end(),
                         [&](double t) { return std::abs(t - pi / 2) < 1e-12; });
  if (eq == sf.t_samples.end()) {
    eq = sf.t_samples.insert(std::upper_bound(sf.t_samples.begin(), sf.t_samples.end(), pi / 2),
                             pi / 2);
  }
  *eq = pi / 2;
  sf.equator = static_cast<std::size_t>(eq - sf.t_samples.begin());

  const Eigen::Index n = f.dim();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  for (std::size_t x = 0; x < f.size(); ++x) {
    const HermitianOperator& a = f.op(x);
    const double scale = std::max(1.0, operator_norm(a.matrix()));
    std::vector<ComplexMatrix> row;
    row.reserve(sf.t_samples.size());
    for (double t : sf.t_samples) {
      ComplexMatrix b = suspension_operator(a, t);
      const double normality = max_abs(b * b.adjoint() - b.adjoint() * b);
      if (normality > 1e-10 * scale * scale) {
        throw Error(ErrorKind::model_violation,
                    "suspend: B is not normal at sample " + std::to_string(x));
      }
      row.push_back(std::move(b));
    }
    if (max_abs(row.front() - id) > 1e-12 * scale || max_abs(row.back() + id) > 1e-12 * scale) {
      throw Error(ErrorKind::model_violation,
                  "suspend: endpoint collapse fails at sample " + std::to_string(x));
    }
    sf.operators.push_back(std::move(row));
  }
  return sf;
}

double suspension_spectrum_check(const HermitianOperator& a, double t) {
  const ComplexMatrix b = suspension_operator(a, t);
  const SpectralDecomposition sq = hermitian_eig(HermitianOperator::symmetrized(b.adjoint() * b));
  const SpectralDecomposition base = hermitian_eig(a);
  const double c = std::cos(t);
  const double s = std::sin(t);
  std::vector<double> expected;
  for (Eigen::Index k = 0; k < base.dim(); ++k) {
    const double l = base.eigenvalues(k);
    expected.push_back(c * c + l * l * s * s);
  }
  std::sort(expected.begin(), expected.end());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < sq.dim(); ++k) {
    worst = std::max(worst, std::abs(sq.eigenvalues(k) - expected[static_cast<std::size_t>(k)]));
  }
  return worst;
}

LemmaBandReport lemma_band_check(const HermitianOperator& a, double eps, double t) {
  if (!(eps > 0.0)) throw Error(ErrorKind::validation, "lemma_band_check: eps must be positive");
  const double s = std::sin(t);
  const double c = std::cos(t);
  if (std::abs(s) < 1e-12) throw Error(ErrorKind::validation, "lemma_band_check: sin t = 0");
  const SpectralDecomposition base = hermitian_eig(a);
  for (Eigen::Index k = 0; k < base.dim(); ++k) {
    if (std::abs(std::abs(base.eigenvalues(k)) - eps) < 1e-9) {
      throw Error(ErrorKind::validation, "lemma_band_check: (A, eps) is not enhanced");
    }
  }
  LemmaBandReport rep;
  rep.delta = std::sqrt(c * c + eps * eps * s * s);
  const SpectralDecomposition abs_b = hermitian_eig(absolute_value(suspension_operator(a, t)));
  const SpectralDecomposition abs_a = hermitian_eig(absolute_value(a.matrix()));
  const Subspace band_b = spectral_projection(abs_b, Window::at_most(rep.delta));
  const Subspace band_a = spectral_projection(abs_a, Window::at_most(eps));
  rep.band_dim = band_b.dim();
  rep.distance = subspace_distance(band_b, band_a);
  rep.holds = rep.distance <= 1e-8;
  return rep;
}

Eigen::Index suspension_band_dim(const HermitianOperator& a, double delta, double t) {
  const SpectralDecomposition abs_b = hermitian_eig(absolute_value(suspension_operator(a, t)));
  return spectral_projection(abs_b, Window::at_most(delta)).dim();
}

double band_monotonicity_check(const HermitianOperator& a, double beta, double alpha,
                               const std::vector<double>& eps_values) {
  if (!(0.0 < beta && beta < alpha)) {
    throw Error(ErrorKind::validation, "band_monotonicity_check: need 0 < beta < alpha");
  }
  const SpectralDecomposition abs_a = hermitian_eig(absolute_value(a.matrix()));
  for (Eigen::Index k = 0; k < abs_a.dim(); ++k) {
    const double l = abs_a.eigenvalues(k);
    if (beta <= l && l <= alpha) {
      throw Error(ErrorKind::validation,
                  "band_monotonicity_check: |A| has spectrum inside [beta, alpha]");
    }
  }
  const Subspace top = spectral_projection(abs_a, Window::at_most(alpha));
  double worst = 0.0;
  for (double e : eps_values) {
    if (e < beta || e > alpha) {
      throw Error(ErrorKind::validation, "band_monotonicity_check: eps outside [beta, alpha]");
    }
    worst = std::max(worst, subspace_distance(spectral_projection(abs_a, Window::at_most(e)), top));
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

// Unwrapped phase change of det B_{x,t} for t running over [t0, t1], refined
// until every step moves the phase by less than pi/4.
std::optional<double> phase_change(const HermitianOperator& a, double t0, double t1,
                                   Complex d0, Complex d1, int depth) {
  if (std::abs(d0) == 0.0 || std::abs(d1) == 0.0) return std::nullopt;
  const double step = std::arg(d1 / d0);
  if (std::abs(step) < std::numbers::pi / 4) return step;
  if (depth == 0) return std::nullopt;
  const double tm = 0.5 * (t0 + t1);
  const Complex dm = suspension_operator(a, tm).determinant();
  const auto left = phase_change(a, t0, tm, d0, dm, depth - 1);
  const auto right = phase_change(a, tm, t1, dm, d1, depth - 1);
  if (!left || !right) return std::nullopt;
  return *left + *right;
}

std::optional<double> det_phase_over_t(const HermitianOperator& a,
                                       const std::vector<double>& t_samples) {
  double total = 0.0;
  Complex prev = suspension_operator(a, t_samples.front()).determinant();
  for (std::size_t j = 1; j < t_samples.size(); ++j) {
    const Complex cur = suspension_operator(a, t_samples[j]).determinant();
    const auto d = phase_change(a, t_samples[j - 1], t_samples[j], prev, cur, 40);
    if (!d) return std::nullopt;
    total += *d;
    prev = cur;
  }
  return total;
}

}  // namespace

SuspensionIndexReport suspension_index(const SuspensionFamily& sf, double tol) {
  SuspensionIndexReport rep;
  const double pi_half = std::numbers::pi / 2;
  long previous_lower = -1;
  for (std::size_t x = 0; x < sf.operators.size(); ++x) {
    for (std::size_t j = 0; j < sf.t_samples.size(); ++j) {
      if (j == sf.equator) continue;
      const double t = sf.t_samples[j];
      if (std::abs(std::cos(t)) <= tol) continue;
      Eigen::JacobiSVD<ComplexMatrix> svd(sf.at(x, j));
      const double smin = svd.singularValues().minCoeff();
      rep.min_off_equator_sigma = std::min(rep.min_off_equator_sigma, smin);
      if (smin < tol) {
        std::ostringstream os;
        os << "suspension_index: kernel off the equator at sample " << x << ", t = " << t;
        throw Error(ErrorKind::model_violation, os.str());
      }
    }

    Eigen::ComplexEigenSolver<ComplexMatrix> solver(sf.at(x, sf.equator), false);
    const ComplexVector mu = solver.eigenvalues();
    long lower = 0;
    Eigen::Index kernel = 0;
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      if (mu(k).imag() < 0.0) ++lower;
      if (std::abs(mu(k)) < tol) ++kernel;
    }
    if (kernel > 0) rep.kernels.push_back(KernelPoint{x, pi_half, kernel});
    if (x > 0) rep.index += previous_lower - lower;
    previous_lower = lower;
  }

  if (sf.base.grid().closure().type == Closure::Type::exact_loop) {
    const auto first = det_phase_over_t(sf.base.op(0), sf.t_samples);
    const auto last = det_phase_over_t(sf.base.op(sf.base.size() - 1), sf.t_samples);
    if (first && last) rep.det_winding = (*last - *first) / (2.0 * std::numbers::pi);
  }
  return rep;
}

std::string suspension_spectra_csv(const SuspensionFamily& sf) {
  std::ostringstream os;
  os.precision(17);
  os << "x_index,x,t_index,t,k,value\n";
  for (std::size_t x = 0; x < sf.operators.size(); ++x) {
    for (std::size_t j = 0; j < sf.t_samples.size(); ++j) {
      const ComplexMatrix& b = sf.at(x, j);
      const SpectralDecomposition sq =
          hermitian_eig(HermitianOperator::symmetrized(b.adjoint() * b));
      for (Eigen::Index k = 0; k < sq.dim(); ++k) {
        os << x << ',' << sf.base.grid()[x] << ',' << j << ',' << sf.t_samples[j] << ',' << k
           << ',' << sq.eigenvalues(k) << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace fredholm
