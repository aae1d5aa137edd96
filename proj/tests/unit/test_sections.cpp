#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fredholm/index.hpp"
#include "fredholm/sections.hpp"
#include "oracles.hpp"

using namespace fredholm;
using oracle::Vec;

namespace {

constexpr double pi = std::numbers::pi;

OperatorFamily constant_family(std::initializer_list<double> diag, std::size_t n,
                               Closure closure = Closure::open()) {
  std::vector<HermitianOperator> ops(n, HermitianOperator::diagonal(diag));
  return OperatorFamily(ParameterGrid::linspace(0.0, 1.0, n, closure), std::move(ops));
}

WeakSpectralSection upper_section(const OperatorFamily& f, double cut) {
  WeakSpectralSection s;
  for (std::size_t i = 0; i < f.size(); ++i) s.subspaces.push_back(window_subspace(f, i, cut, kInf));
  return s;
}

// Sandwich oracle built from sign-function projectors: residual of
// P_[r, inf) outside S and of S outside P_[-r, inf).
double sandwich_residual(const ComplexMatrix& a, const Subspace& s, double r) {
  const Eigen::Index n = a.rows();
  const ComplexMatrix ps = oracle::frame_projector(s.frame());
  const ComplexMatrix top = oracle::window_projector(a, r, oracle::inf);
  const ComplexMatrix wide = oracle::window_projector(a, -r, oracle::inf);
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  return std::max(oracle::opnorm((id - ps) * top), oracle::opnorm((id - wide) * ps));
}

OperatorFamily sine_loop(std::size_t n = 101) {
  std::vector<HermitianOperator> ops;
  const auto grid = ParameterGrid::linspace(0.0, 1.0, n, Closure::exact());
  for (std::size_t i = 0; i < n; ++i) {
    const double v = i + 1 == n ? 0.0 : std::sin(2.0 * pi * grid[i]);
    ops.push_back(HermitianOperator::diagonal({v, 2.0}));
  }
  return OperatorFamily(grid, ops);
}

}  // namespace

TEST(PartitionOfUnityTest, InvariantsOnBuiltAtlas) {
  const auto f = random_smooth(4, 5);
  const auto atlas = build_atlas(f);
  const auto pou = PartitionOfUnity::subordinate(atlas, f.size());
  pou.validate(atlas);
  for (std::size_t x = 0; x < f.size(); ++x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
      const double t = pou.t[i][x];
      sum += t;
      EXPECT_GE(t, 0.0);
      if (!atlas.charts[i].contains(x)) EXPECT_EQ(t, 0.0);
      if (t > 0.0) EXPECT_EQ(pou.s[i][x], 1.0);
      EXPECT_GE(pou.s[i][x], 0.0);
      EXPECT_LE(pou.s[i][x], 1.0);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(PartitionOfUnityTest, SingleChartIsOne) {
  Atlas a;
  a.charts = {{0, 9, 0.3}};
  const auto pou = PartitionOfUnity::subordinate(a, 10);
  for (double t : pou.t[0]) EXPECT_EQ(t, 1.0);
}

TEST(WeakSection, ReportDefectsAndFloor) {
  const auto f = constant_family({-3.0, -1.0, 1.0, 2.0}, 5);
  WeakSpectralSection s = upper_section(f, 0.0);
  auto rep = weak_section_report(f, s);
  for (long d : rep.dim_defect) EXPECT_EQ(d, 0);
  for (double fl : rep.floor) EXPECT_NEAR(fl, 1.0, 1e-12);
  EXPECT_TRUE(rep.continuous);
  s = upper_section(f, -2.0);
  rep = weak_section_report(f, s);
  for (long d : rep.dim_defect) EXPECT_EQ(d, 1);
  for (double fl : rep.floor) EXPECT_NEAR(fl, -1.0, 1e-12);
  s.reference_cut = 1.0;
  EXPECT_THROW(weak_section_report(f, s), Error);
}

TEST(DiscreteSpectrum, TruncatedShiftFlowLevels) {
  const auto f = truncated_shift_flow(3);
  const auto rep = discrete_spectrum_check(f, {-1.5, -0.5, 0.5, 1.5});
  EXPECT_TRUE(rep.ok);
  ASSERT_EQ(rep.levels.size(), 4u);
  for (const auto& l : rep.levels) {
    EXPECT_TRUE(l.ok);
    EXPECT_GE(l.charts, 1u);
    // Levels hit sampled eigenvalues at the grid ends and are nudged.
    EXPECT_LE(std::abs(l.level - l.requested), 1e-3);
  }
}

TEST(DiscreteSpectrum, PinnedLevelFails) {
  const auto f = constant_family({0.5, -1.0}, 20);
  const auto rep = discrete_spectrum_check(f, {0.5});
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.levels.size(), 1u);
  EXPECT_FALSE(rep.levels[0].ok);
  EXPECT_FALSE(rep.levels[0].message.empty());
}

TEST(DiscreteSpectrum, ConstantFamilyAnyLevel) {
  const auto f = constant_family({-1.0, 1.0}, 20);
  EXPECT_TRUE(discrete_spectrum_check(f, {-3.0, 0.0, 0.25, 7.0}).ok);
}

TEST(IsSpectralSection, SpectralSubspace) {
  const auto f = rotation(3, 2.0 * pi, 61, 4);
  const auto s = upper_section(f, 0.1);
  const std::vector<double> r(f.size(), 0.2);
  const auto rep = is_spectral_section(f, s, r);
  EXPECT_TRUE(rep.ok);
  for (std::size_t i = 0; i < f.size(); i += 6) EXPECT_LE(sandwich_residual(f.matrix(i), s.subspaces[i], 0.2), 1e-8);
}

TEST(IsSpectralSection, DeepNegativeContentFails) {
  const auto f = constant_family({-5.0, 1.0}, 5);
  WeakSpectralSection s;
  s.subspaces.assign(5, Subspace::full(2));
  for (double r : {0.5, 2.0, 4.0}) {
    const auto rep = is_spectral_section(f, s, std::vector<double>(5, r));
    EXPECT_FALSE(rep.ok);
    EXPECT_GT(rep.lower_residual, 0.5);
    EXPECT_GT(sandwich_residual(f.matrix(0), s.subspaces[0], r), 0.5);
  }
}

TEST(IsSpectralSection, MissingTopFails) {
  const auto f = constant_family({-1.0, 1.0}, 5);
  WeakSpectralSection s;
  s.subspaces.assign(5, Subspace::zero(2));
  const auto rep = is_spectral_section(f, s, std::vector<double>(5, 0.5));
  EXPECT_FALSE(rep.ok);
  EXPECT_GT(rep.upper_residual, 0.5);
}

TEST(Deform, AlreadySpectralIsFixedPoint) {
  const auto f = rotation(2, 2.0 * pi);
  const auto s = upper_section(f, 0.0);
  const auto res = deform_to_spectral_section(f, s, build_atlas(f));
  EXPECT_TRUE(res.verification.ok);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_LE(subspace_distance(res.section.subspaces[i], s.subspaces[i]), 1e-8);
    for (double h : {0.0, 0.25, 0.5, 0.75, 1.0})
      EXPECT_LE(subspace_distance(res.homotopy.at(i, h), s.subspaces[i]), 1e-8);
  }
}

TEST(Deform, SineLoopMixedSection) {
  const auto f = sine_loop();
  ComplexVector v(2);
  v << std::sin(0.2), std::cos(0.2);
  WeakSpectralSection s;
  s.subspaces.assign(f.size(), Subspace::line(v));
  // One unbounded chart; see the chart-length note in the decisions ledger.
  const auto atlas = build_atlas(f, AtlasOptions{.max_chart_len = 0});
  const auto res = deform_to_spectral_section(f, s, atlas);
  EXPECT_TRUE(res.verification.ok);
  double r_max = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    r_max = std::max(r_max, res.r[i]);
    EXPECT_EQ(res.section.subspaces[i].dim(), 1);
    EXPECT_LE(sandwich_residual(f.matrix(i), res.section.subspaces[i], res.r[i]), 1e-8);
  }
  EXPECT_LE(r_max, 1.2);
}

TEST(Deform, SineLoopMixedSectionWithShortCharts) {
  const auto f = sine_loop();
  ComplexVector v(2);
  v << std::sin(0.2), std::cos(0.2);
  WeakSpectralSection s;
  s.subspaces.assign(f.size(), Subspace::line(v));
  const auto res = deform_to_spectral_section(f, s, build_atlas(f));
  EXPECT_TRUE(res.verification.ok);
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_LE(sandwich_residual(f.matrix(i), res.section.subspaces[i], res.r[i]), 1e-8);
}

TEST(Deform, TruncatedShiftFlowAlreadySandwiched) {
  const auto full = truncated_shift_flow(3);
  // The end samples put an eigenvalue exactly on 0.5, so the interior is used.
  const auto f = full.slice(1, full.size() - 2);
  const auto s = upper_section(f, 0.5);
  const auto res = deform_to_spectral_section(f, s, build_atlas(f));
  EXPECT_TRUE(res.verification.ok);
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_LE(subspace_distance(res.section.subspaces[i], s.subspaces[i]), 1e-8);
}

TEST(Deform, ProofInequalitiesAndHomotopyEnds) {
  const auto f = random_smooth(5, 40, 200, true);
  std::mt19937_64 rng(40);
  const ComplexMatrix g = oracle::random_hermitian(5, rng);
  const ComplexMatrix rot = oracle::unitary_exp(g, 0.2);
  WeakSpectralSection s;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto eig = f.spectrum(i);
    s.subspaces.push_back(Subspace::span_of(rot * eig.eigenvectors.rightCols(2)));
  }
  const auto atlas = build_atlas(f);
  const auto res = deform_to_spectral_section(f, s, atlas);
  EXPECT_TRUE(res.verification.ok);
  for (std::size_t x = 0; x < f.size(); ++x) {
    double min_nu = kInf, max_nu_perp = -kInf;
    for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
      if (res.pou.t[i][x] > 0.0) {
        min_nu = std::min(min_nu, res.nu[i]);
        max_nu_perp = std::max(max_nu_perp, res.nu_perp[i]);
      }
    }
    EXPECT_LE(res.mu[x], min_nu + 1e-12);
    EXPECT_GE(res.mu_perp[x], max_nu_perp - 1e-12);
    EXPECT_EQ(res.section.subspaces[x].dim(), 2);
    EXPECT_LE(subspace_distance(res.homotopy.at(x, 0.0), s.subspaces[x]), 1e-9);
    EXPECT_LE(subspace_distance(res.homotopy.at(x, 1.0), res.section.subspaces[x]), 1e-9);
    EXPECT_EQ(res.homotopy.at(x, 0.3).dim(), 2);
    EXPECT_LE(sandwich_residual(f.matrix(x), res.section.subspaces[x], res.r[x]), 1e-8);
  }
}

TEST(Existence, RotationLoopHasWitness) {
  const auto f = rotation(4, 2.0 * pi, 101, 2);
  const auto ex = section_existence(f);
  EXPECT_TRUE(ex.exists);
  EXPECT_EQ(ex.flow, 0);
  ASSERT_TRUE(ex.witness.has_value());
  EXPECT_TRUE(ex.witness->verification.ok);
  EXPECT_TRUE(ex.closure_ok);
}

TEST(Existence, TruncatedShiftFlowObstruction) {
  const auto ex = section_existence(truncated_shift_flow(3));
  EXPECT_FALSE(ex.exists);
  EXPECT_EQ(ex.flow, 1);
  EXPECT_FALSE(ex.witness.has_value());
}

TEST(Existence, ConstantLoopWitnessIsSpectralSubspace) {
  const auto f = constant_family({-1.0, 0.5, 2.0}, 30, Closure::exact());
  const auto ex = section_existence(f);
  ASSERT_TRUE(ex.exists);
  ASSERT_TRUE(ex.witness.has_value());
  const auto& sec = ex.witness->section.subspaces;
  for (const auto& s : sec) EXPECT_LE(subspace_distance(s, sec.front()), 1e-12);
  // The witness is an upper spectral subspace of the constant operator.
  const auto eig = f.spectrum(0);
  const auto k = sec.front().dim();
  EXPECT_NEAR(subspace_distance(sec.front(), Subspace::span_of(eig.eigenvectors.rightCols(k))), 0.0, 1e-9);
}

TEST(Existence, RequiresLoop) {
  EXPECT_THROW(section_existence(crossing(1, 1)), Error);
}
