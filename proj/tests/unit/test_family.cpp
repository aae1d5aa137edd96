#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fredholm/family.hpp"
#include "oracles.hpp"

using namespace fredholm;
using oracle::Vec;

namespace {

OperatorFamily constant_family(std::initializer_list<double> diag, std::size_t n,
                               Closure closure = Closure::open()) {
  std::vector<HermitianOperator> ops(n, HermitianOperator::diagonal(diag));
  return OperatorFamily(ParameterGrid::linspace(0.0, 1.0, n, closure), std::move(ops));
}

}  // namespace

TEST(Generators, CrossingOneOne) {
  const auto f = crossing(1, 1);
  ASSERT_EQ(f.size(), 101u);
  ASSERT_EQ(f.dim(), 2);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = f.grid()[i];
    ComplexMatrix expect = ComplexMatrix::Zero(2, 2);
    expect(0, 0) = t - 0.5;
    expect(1, 1) = 2.0;
    EXPECT_LE((f.matrix(i) - expect).norm(), 1e-14) << "sample " << i;
  }
  EXPECT_DOUBLE_EQ(f.grid()[0], 0.0);
  EXPECT_DOUBLE_EQ(f.grid()[100], 1.0);
}

TEST(Generators, TruncatedShiftFlowEndpointsShiftByOne) {
  const auto f = truncated_shift_flow(3);
  ASSERT_EQ(f.dim(), 7);
  EXPECT_EQ(f.grid().closure().type, Closure::Type::shifted_loop);
  EXPECT_EQ(f.grid().closure().shift, 1);
  const Vec first = oracle::eigenvalues(f.matrix(0));
  const Vec last = oracle::eigenvalues(f.matrix(f.size() - 1));
  for (Eigen::Index i = 0; i + 1 < 7; ++i) EXPECT_NEAR(last(i), first(i + 1), 1e-12);
  // Eigenvectors are fixed: every sample is diagonal.
  for (std::size_t i = 0; i < f.size(); ++i) {
    const ComplexMatrix& m = f.matrix(i);
    EXPECT_LE((m - ComplexMatrix(m.diagonal().asDiagonal())).norm(), 0.0);
  }
}

TEST(Generators, RandomSmoothContinuity) {
  const auto f = random_smooth(5, 11);
  ASSERT_EQ(f.size(), 200u);
  const auto rep = continuity_check(f, Window::everything());
  EXPECT_LE(rep.max_eigenvalue_step, 0.1);
  // Independent oracle: sorted Sturm eigenvalues step by step.
  double worst = 0.0;
  Vec prev = oracle::eigenvalues(f.matrix(0));
  for (std::size_t i = 1; i < f.size(); ++i) {
    const Vec cur = oracle::eigenvalues(f.matrix(i));
    worst = std::max(worst, (cur - prev).cwiseAbs().maxCoeff());
    prev = cur;
  }
  EXPECT_NEAR(rep.max_eigenvalue_step, worst, 1e-9);
}

TEST(Generators, RotationAndLoopsCloseExactly) {
  const auto r = rotation(4, 2.0 * std::numbers::pi, 101, 5);
  EXPECT_EQ(r.grid().closure().type, Closure::Type::exact_loop);
  EXPECT_LE((r.matrix(0) - r.matrix(r.size() - 1)).norm(), 1e-9);
  const auto l = random_smooth(4, 2, 120, true);
  EXPECT_LE((l.matrix(0) - l.matrix(l.size() - 1)).norm(), 1e-9);
}

TEST(Generators, DispatchErrors) {
  try {
    generate("nope", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_generator);
  }
  try {
    generate("crossing", {{"k", 1}, {"bogus", 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_params);
  }
  try {
    generate("crossing", {{"k", 1.5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_params);
  }
  EXPECT_EQ(generate("truncated_shift_flow", {{"N", 2}}).dim(), 5);
}

TEST(Generators, PolarizedCrossingCarriesBands) {
  const auto f = polarized_crossing(1, 2, 1);
  ASSERT_TRUE(f.polarized_bands().has_value());
  EXPECT_EQ(f.polarized_bands()->minus, 2);
  EXPECT_EQ(f.polarized_bands()->plus, 1);
  for (std::size_t i = 0; i < f.size(); i += 10) {
    EXPECT_EQ(oracle::count_below(f.matrix(i), -1.0 + 1e-9), 2);
    EXPECT_EQ(oracle::count_positive(f.matrix(i) - ComplexMatrix::Identity(4, 4) * (1.0 - 1e-9)), 1);
  }
}

TEST(FamilyInvariants, ExactLoopMismatchRejected) {
  std::vector<HermitianOperator> ops{HermitianOperator::diagonal({1.0}),
                                     HermitianOperator::diagonal({2.0})};
  EXPECT_THROW(OperatorFamily(ParameterGrid::linspace(0, 1, 2, Closure::exact()), ops), Error);
}

TEST(FamilyInvariants, PolarizedBandsMustBePresent) {
  std::vector<HermitianOperator> ops(3, HermitianOperator::diagonal({-1.0, 0.2, 0.9}));
  FamilyOptions opt;
  opt.polarized_bands = PolarizedBands{1, 1};
  EXPECT_THROW(OperatorFamily(ParameterGrid::linspace(0, 1, 3), ops, opt), Error);
}

TEST(FamilyInvariants, GridNeedsIncreasingSamples) {
  EXPECT_THROW(ParameterGrid(GridKind::interval_path, {0.0, 0.0}, Closure::open()), Error);
  EXPECT_THROW(ParameterGrid(GridKind::interval_path, {0.0}, Closure::open()), Error);
}

TEST(ContinuityCheck, ConstantFamilyIsZero) {
  const auto rep = continuity_check(constant_family({-1.0, 2.0}, 11), Window::at_least(0.0));
  EXPECT_EQ(rep.max_eigenvalue_step, 0.0);
  EXPECT_EQ(rep.max_band_subspace_step, 0.0);
}

TEST(ContinuityCheck, CrossingBandStaysEmptyAwayFromCrossing) {
  const auto f = crossing(1, 1);
  // Samples with t <= 0.4: the branch stays below -0.05.
  const auto sub = f.slice(0, 40);
  const auto rep = continuity_check(sub, Window::between(-0.05, 0.05));
  EXPECT_EQ(rep.max_band_subspace_step, 0.0);
  EXPECT_NEAR(rep.max_eigenvalue_step, 0.01, 1e-12);
}

TEST(ContinuityCheck, BoundaryCollisionIsAmbiguous) {
  const auto f = crossing(1, 1);
  try {
    continuity_check(f, Window::at_least(0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ambiguous_boundary);
  }
}

TEST(ContinuityCheck, GridRefinementOracle) {
  const auto fine = random_smooth(5, 11, 401);
  const auto coarse = random_smooth(5, 11, 201);
  const auto ev0 = oracle::eigenvalues(fine.matrix(0));
  // Pick a cut inside a spectral gap that stays open: verify with Sturm counts.
  double cut = 1.0;
  for (; cut < 3.0; cut += 0.05) {
    bool clear = true;
    for (std::size_t i = 0; i < fine.size() && clear; ++i) {
      const Vec ev = oracle::eigenvalues(fine.matrix(i));
      for (Eigen::Index k = 0; k < ev.size(); ++k) clear = clear && std::abs(ev(k) - cut) > 0.05;
    }
    if (clear) break;
  }
  ASSERT_LT(cut, 3.0);
  (void)ev0;
  const auto rf = continuity_check(fine, Window::at_least(cut));
  const auto rc = continuity_check(coarse, Window::at_least(cut));
  // Halving the step roughly halves the per-step movement of a smooth family.
  EXPECT_LE(rf.max_eigenvalue_step, 0.6 * rc.max_eigenvalue_step + 1e-12);
  EXPECT_LE(rf.max_band_subspace_step, 0.6 * rc.max_band_subspace_step + 1e-12);
  EXPECT_LE(rf.max_eigenvalue_step, 1.1 * rc.max_eigenvalue_step);
}

TEST(WindowSubspace, Examples) {
  const auto f = constant_family({-2.0, 0.5, 3.0}, 3);
  const Subspace s = window_subspace(f, 1, -1.0, 1.0);
  ComplexVector e2 = ComplexVector::Zero(3);
  e2(1) = 1.0;
  EXPECT_NEAR(subspace_distance(s, Subspace::line(e2)), 0.0, 1e-12);
  EXPECT_EQ(window_subspace(f, 0, -kInf, kInf).dim(), 3);
}

TEST(WindowSubspace, TruncatedShiftFlowMidpoint) {
  const auto f = truncated_shift_flow(3);
  // Odd speed: grid is [-1/2, 1/2], so t = 0.5 is the last sample of the
  // unit parameter interval offset... find the sample where branch 0 sits at 0.5.
  std::size_t idx = f.size();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec ev = oracle::eigenvalues(f.matrix(i));
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (std::abs(ev(k) - 0.5) < 1e-12) idx = i;
  }
  ASSERT_LT(idx, f.size());
  const Vec ev = oracle::eigenvalues(f.matrix(idx));
  long expect = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) expect += (ev(k) > 0.0 && ev(k) < 2.0);
  EXPECT_EQ(window_subspace(f, idx, 0.0, 2.0).dim(), expect);
  EXPECT_EQ(expect, 2);
}

TEST(WindowSubspace, DimsAddOverPartition) {
  const auto f = random_smooth(6, 4, 50);
  for (std::size_t i = 0; i < f.size(); i += 7) {
    const Vec ev = oracle::eigenvalues(f.matrix(i));
    const double c1 = 0.5 * (ev(1) + ev(2));
    const double c2 = 0.5 * (ev(3) + ev(4));
    EXPECT_EQ(window_subspace(f, i, -kInf, c1).dim() + window_subspace(f, i, c1, c2).dim() +
                  window_subspace(f, i, c2, kInf).dim(),
              6);
  }
}

TEST(FamilyOps, SliceAndShift) {
  const auto f = crossing(1, 1);
  const auto s = f.slice(10, 20);
  EXPECT_EQ(s.size(), 11u);
  EXPECT_EQ(s.grid().closure().type, Closure::Type::open_path);
  EXPECT_LE((s.matrix(0) - f.matrix(10)).norm(), 0.0);
  const auto g = f.shifted(0.25);
  EXPECT_NEAR(g.matrix(0)(1, 1).real(), 1.75, 1e-15);
}

TEST(FamilyOps, GeneralFamilyIsNotSelfAdjoint) {
  std::vector<ComplexMatrix> mats(3, ComplexMatrix::Ones(2, 3));
  const auto f = OperatorFamily::general(ParameterGrid::linspace(0, 1, 3), mats);
  EXPECT_FALSE(f.self_adjoint());
  EXPECT_EQ(f.rows(), 2);
  EXPECT_EQ(f.cols(), 3);
  EXPECT_THROW(f.op(0), Error);
}
