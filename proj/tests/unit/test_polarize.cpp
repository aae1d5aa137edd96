#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fredholm/index.hpp"
#include "fredholm/polarize.hpp"
#include "oracles.hpp"

using namespace fredholm;
using oracle::Vec;

namespace {

// Independent transcription of the three clauses plus oddness.
double chi_oracle(double r, double u) {
  const double a = std::abs(u);
  double v;
  if (a <= r / 2) {
    v = a;
  } else if (a <= r) {
    v = (2.0 / r - 1.0) * a + r - 1.0;
  } else {
    v = 1.0;
  }
  return u < 0 ? -v : v;
}

long chartwise(const OperatorFamily& f) {
  return spectral_flow_chartwise(index_chain(f, build_atlas(f)));
}

}  // namespace

TEST(Chi, ClauseExamples) {
  EXPECT_DOUBLE_EQ(chi_eval(0.5, 0.2), 0.2);
  EXPECT_NEAR(chi_eval(0.5, 0.3), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(chi_eval(0.5, -0.8), -1.0);
}

TEST(Chi, KnotsExactForRandomRadii) {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> dist(1e-3, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double r = dist(rng);
    EXPECT_EQ(chi_eval(r, r / 2), r / 2);
    EXPECT_EQ(chi_eval(r, r), 1.0);
    EXPECT_EQ(chi_eval(r, -r), -1.0);
    for (double u : {-1.3, -0.7 * r, -0.2 * r, 0.0, 0.3 * r, 0.75 * r, 2.0})
      EXPECT_NEAR(chi_eval(r, u), chi_oracle(r, u), 1e-15);
  }
}

TEST(Chi, OddMonotoneAndIdentityAtOne) {
  double prev = -kInf;
  for (int i = -200; i <= 200; ++i) {
    const double u = i / 100.0;
    const double v = chi_eval(0.37, u);
    EXPECT_GE(v, prev);
    EXPECT_EQ(chi_eval(0.37, -u), -v);
    prev = v;
    if (std::abs(u) <= 1.0) EXPECT_NEAR(chi_eval(1.0, u), u, 1e-15);
  }
}

TEST(Chi, RadiusOutOfRange) {
  for (double r : {0.0, -0.1, 1.5}) {
    try {
      chi_eval(r, 0.1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::range);
    }
  }
}

TEST(RadiusFunction, SingleChart) {
  Atlas a;
  a.charts = {{0, 9, 0.3}};
  const auto pou = PartitionOfUnity::subordinate(a, 10);
  for (double r : radius_function(a, pou)) EXPECT_DOUBLE_EQ(r, 0.3);
}

TEST(RadiusFunction, ConvexAtOverlap) {
  Atlas a;
  a.charts = {{0, 1, 0.2}, {1, 2, 0.4}};
  PartitionOfUnity pou;
  pou.t = {{1.0, 0.5, 0.0}, {0.0, 0.5, 1.0}};
  pou.s = {{1.0, 1.0, 0.0}, {0.0, 1.0, 1.0}};
  const auto r = radius_function(a, pou);
  EXPECT_NEAR(r[1], 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(r[0], 0.2);
  EXPECT_DOUBLE_EQ(r[2], 0.4);
}

TEST(RadiusFunction, EpsAtLeastOneIsRangeError) {
  Atlas a;
  a.charts = {{0, 4, 1.2}};
  const auto pou = PartitionOfUnity::subordinate(a, 5);
  try {
    radius_function(a, pou);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::range);
  }
}

TEST(RadiusFunction, LowerBoundOnBuiltAtlases) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = random_smooth(4, seed);
    const auto scaled = scaled_family(f, polarization_scale(f));
    const auto atlas = build_atlas(scaled.spectra(), AtlasOptions{.length_seed = seed}, true);
    const auto pou = PartitionOfUnity::subordinate(atlas, f.size());
    const auto r = radius_function(atlas, pou);
    for (std::size_t x = 0; x < f.size(); ++x) {
      double lo = kInf;
      for (const auto& c : atlas.charts)
        if (c.contains(x)) lo = std::min(lo, c.eps);
      EXPECT_GE(r[x], lo);
      EXPECT_GT(r[x], 0.0);
      EXPECT_LT(r[x], 1.0);
    }
  }
}

TEST(ApplyChi, PerEigenvalueMapping) {
  std::mt19937_64 rng(3);
  const std::vector<double> lam{-1.0, -0.4, -0.1, 0.025, 0.3, 1.0};
  const ComplexMatrix a = oracle::with_spectrum(lam, rng);
  const auto out = apply_chi(HermitianOperator::symmetrized(a), 0.5);
  const Vec got = oracle::eigenvalues(out.matrix());
  std::vector<double> expect;
  for (double l : lam) expect.push_back(chi_oracle(0.5, l));
  std::sort(expect.begin(), expect.end());
  for (std::size_t k = 0; k < lam.size(); ++k) EXPECT_NEAR(got(static_cast<Eigen::Index>(k)), expect[k], 1e-12);
  // Same eigenvectors: chi_r(A) commutes with A.
  EXPECT_LE((out.matrix() * a - a * out.matrix()).norm(), 1e-12);
}

TEST(ApplyChi, ScaledDiagonalExample) {
  const ComplexMatrix a = Eigen::Vector3d(-2.0, 0.05, 2.0).cast<Complex>().asDiagonal();
  std::vector<HermitianOperator> ops(3, HermitianOperator(a));
  const OperatorFamily f(ParameterGrid::linspace(0, 1, 3), ops);
  const double scale = polarization_scale(f);
  EXPECT_DOUBLE_EQ(scale, 2.0);
  const auto rep = apply_chi_family(scaled_family(f, scale), std::vector<double>(3, 0.5), scale);
  const Vec d = rep.replaced.matrix(1).diagonal().real();
  EXPECT_NEAR(d(0), -1.0, 1e-15);
  EXPECT_NEAR(d(1), 0.025, 1e-15);
  EXPECT_NEAR(d(2), 1.0, 1e-15);
  EXPECT_EQ(rep.frozen.minus, 1);
  EXPECT_EQ(rep.frozen.plus, 1);
  ASSERT_TRUE(rep.replaced.polarized_bands().has_value());
  EXPECT_DOUBLE_EQ(rep.replaced.options().scale, 2.0);
}

TEST(ApplyChi, AlreadyPolarizedUnchangedAtRadiusOne) {
  const auto f = polarized_crossing(1, 2, 1);
  const auto rep = apply_chi_family(f, std::vector<double>(f.size(), 1.0));
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_LE((rep.replaced.matrix(i) - f.matrix(i)).norm(), 1e-12);
}

TEST(ApplyChi, IdempotentOnSaturatedSpectrum) {
  std::vector<HermitianOperator> ops(5, HermitianOperator::diagonal({-1.0, 0.1, -0.2, 1.0}));
  const OperatorFamily f(ParameterGrid::linspace(0, 1, 5), ops);
  const auto once = apply_chi_family(f, std::vector<double>(5, 0.5));
  const auto twice = apply_chi_family(once.replaced, std::vector<double>(5, 0.5));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_LE((once.replaced.matrix(i) - f.matrix(i)).norm(), 1e-12);
    EXPECT_LE((twice.replaced.matrix(i) - once.replaced.matrix(i)).norm(), 1e-12);
  }
}

TEST(Replace, CrossingInteriorBranchPreserved) {
  const auto f = crossing(1, 1);
  const auto rep = finite_polarized_replace(f);
  EXPECT_DOUBLE_EQ(rep.scale, 2.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec before = oracle::eigenvalues(rep.original.matrix(i));
    const Vec after = oracle::eigenvalues(rep.replaced.matrix(i));
    for (Eigen::Index k = 0; k < before.size(); ++k) {
      EXPECT_NEAR(after(k), chi_oracle(rep.r[i], before(k)), 1e-12);
      if (std::abs(before(k)) <= rep.r[i] / 2) EXPECT_NEAR(after(k), before(k), 1e-12);
    }
  }
  EXPECT_LE(rep.band_identity_residual, 1e-9);
  EXPECT_TRUE(finite_polarized_check(rep.replaced).ok);
}

TEST(Replace, BandIdentityAgainstSignProjectors) {
  const auto f = random_smooth(4, 9, 80);
  const auto rep = finite_polarized_replace(f);
  for (std::size_t i = 0; i < f.size(); i += 8) {
    const Vec ev = oracle::eigenvalues(rep.original.matrix(i));
    // Admissible eps: midpoints of free gaps of |lambda| below r/2.
    std::vector<double> a;
    for (Eigen::Index k = 0; k < ev.size(); ++k) a.push_back(std::abs(ev(k)));
    a.push_back(0.0);
    a.push_back(rep.r[i] / 2);
    std::sort(a.begin(), a.end());
    for (std::size_t k = 0; k + 1 < a.size() && a[k + 1] <= rep.r[i] / 2; ++k) {
      if (a[k + 1] - a[k] < 1e-6) continue;
      const double eps = 0.5 * (a[k] + a[k + 1]);
      const ComplexMatrix p = oracle::window_projector(rep.original.matrix(i), eps, oracle::inf);
      const ComplexMatrix q = oracle::window_projector(rep.replaced.matrix(i), eps, oracle::inf);
      EXPECT_LE(oracle::opnorm(p - q), 1e-9);
    }
  }
}

TEST(Replace, OutputIsFinitePolarized) {
  for (const auto& f : {truncated_shift_flow(3), rotation(3, 2.0 * std::numbers::pi, 81, 1)}) {
    const auto rep = finite_polarized_replace(f);
    const auto chk = finite_polarized_check(rep.replaced);
    EXPECT_TRUE(chk.ok) << chk.violation;
    EXPECT_NEAR(chk.norm, 1.0, 1e-9);
  }
}

TEST(FlowPreservation, Examples) {
  struct Case {
    OperatorFamily f;
    long flow;
  };
  const std::vector<Case> cases{{crossing(1, 1), 1},
                                {rotation(2, 2.0 * std::numbers::pi), 0},
                                {truncated_shift_flow(3), 1},
                                {polarized_crossing(-1, 1, 1), -1}};
  for (const auto& c : cases) {
    ASSERT_EQ(chartwise(c.f), c.flow);
    const auto fp = flow_preservation_check(finite_polarized_replace(c.f));
    EXPECT_TRUE(fp.preserved);
    EXPECT_EQ(fp.flow_before, c.flow);
    EXPECT_EQ(fp.flow_after, c.flow);
  }
}

TEST(FlowPreservation, SharedAtlasRespectsHalfRadius) {
  const auto rep = finite_polarized_replace(crossing(2, 1));
  const auto fp = flow_preservation_check(rep);
  for (const auto& c : fp.shared.charts)
    for (std::size_t x = c.start; x <= c.end; ++x) EXPECT_LT(c.eps, rep.r[x] / 2);
}

TEST(FlowPreservation, StrictAdaptednessNotWorse) {
  const auto rep = finite_polarized_replace(random_smooth(4, 12));
  const auto fp = flow_preservation_check(rep);
  for (const auto& c : fp.shared.charts) {
    const double before = strictly_adapted_check(rep.original, c).steps.max_band_subspace_step;
    const double after = strictly_adapted_check(rep.replaced, c).steps.max_band_subspace_step;
    EXPECT_LE(after, before + 1e-9);
  }
}

TEST(FinitePolarizedCheck, DetectsViolations) {
  std::vector<HermitianOperator> ops(3, HermitianOperator::diagonal({-1.5, 0.2}));
  const OperatorFamily f(ParameterGrid::linspace(0, 1, 3), ops);
  EXPECT_FALSE(finite_polarized_check(f).ok);
  EXPECT_TRUE(finite_polarized_check(polarized_crossing(1, 1, 1)).ok);
}
