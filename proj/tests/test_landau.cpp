#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "propcert/landau.hpp"

using namespace propcert;

namespace {

RealVector dense_spectrum(const LandauSpec& spec) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(landau_h0_sparse(spec)));
  return es.eigenvalues();
}

} // namespace

TEST(LandauSwitch, EndpointsAndMonotone) {
  const double l = 1.5;
  for (double x : {-10.0, -3.0, -1.5}) EXPECT_EQ(landau_switch(x, l), 0.0);
  for (double x : {1.5, 2.0, 9.0}) EXPECT_EQ(landau_switch(x, l), 1.0);
  EXPECT_NEAR(landau_switch(0.0, l), 0.5, 1e-15);
  double prev = 0.0;
  for (int k = 0; k <= 300; ++k) {
    const double v = landau_switch(-l + 2 * l * k / 300.0, l);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(LandauSwitch, DerivativeMatchesDifferences) {
  const double l = 2.0, h = 1e-6;
  for (double x : {-1.7, -0.4, 0.0, 0.9, 1.8}) {
    const double fd = (landau_switch(x + h, l) - landau_switch(x - h, l)) / (2 * h);
    EXPECT_NEAR(landau_switch_derivative(x, l), fd, 1e-7) << "x " << x;
  }
  EXPECT_EQ(landau_switch_derivative(-2.0, l), 0.0);
  EXPECT_EQ(landau_switch_derivative(3.0, l), 0.0);
}

TEST(LandauSwitch, GridSamplesExact) {
  LandauSpec spec;
  spec.grid_points = 20;
  spec.half_width = 4.0;
  spec.switch_width = 1.0;
  const RealVector lam = landau_switch_samples(spec);
  for (int j = 0; j < spec.grid_points; ++j)
    for (int i = 0; i < spec.grid_points; ++i) {
      const double x = spec.coordinate(i);
      if (x < -1.0) EXPECT_EQ(lam(spec.index(i, j)), 0.0);
      if (x > 1.0) EXPECT_EQ(lam(spec.index(i, j)), 1.0);
    }
}

TEST(LandauOperator, FreeDirichletSpectrum) {
  // B -> 0 limit is not allowed, so compare a weak field against the closed
  // form of the Dirichlet Laplacian with a first-order-in-B tolerance.
  LandauSpec spec;
  spec.grid_points = 12;
  spec.half_width = 2.0;
  spec.field_B = 1e-9;
  const RealVector ev = dense_spectrum(spec);
  const double h = spec.spacing();
  const int n = spec.grid_points;
  std::vector<double> closed;
  for (int a = 1; a <= n; ++a)
    for (int b = 1; b <= n; ++b)
      closed.push_back((2.0 - std::cos(std::numbers::pi * a / (n + 1)) - std::cos(std::numbers::pi * b / (n + 1))) /
                       (h * h));
  std::sort(closed.begin(), closed.end());
  for (int k = 0; k < ev.size(); ++k) EXPECT_NEAR(ev(k), closed[static_cast<std::size_t>(k)], 1e-6);
}

TEST(LandauOperator, HermitianWithPotential) {
  LandauSpec spec;
  spec.grid_points = 10;
  spec.half_width = 3.0;
  spec.lambda = 0.7;
  spec.potential.preset = PotentialPreset::gaussian;
  spec.potential.amplitude = 1.0;
  const Matrix h = Matrix(landau_h0_sparse(spec));
  EXPECT_LT((h - h.adjoint()).norm(), 1e-14);
  const Matrix p = Matrix(landau_momentum_x(spec));
  EXPECT_LT((p - p.adjoint()).norm(), 1e-14);
}

TEST(LandauOperator, GaugeShiftCovariance) {
  LandauSpec spec;
  spec.grid_points = 14;
  spec.half_width = 3.0;
  spec.field_B = 1.3;
  const RealVector base = dense_spectrum(spec);
  spec.gauge_offset_x = 0.37;
  spec.gauge_offset_y = -1.1;
  const RealVector moved = dense_spectrum(spec);
  EXPECT_LT((base - moved).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LandauModel, ShiftAndPerturbation) {
  LandauSpec spec;
  spec.grid_points = 8;
  spec.half_width = 2.5;
  spec.switch_width = 1.0;
  const auto m = build_landau_model(spec, 0.5);
  EXPECT_EQ(m.kind, ModelKind::landau);
  EXPECT_NEAR(m.H0.min_eigenvalue(), 1.5, 1e-10);
  EXPECT_NEAR(m.provenance["energy_shift"].get<double>(), 1.5 - m.provenance["ground_energy"].get<double>(), 1e-12);
  const Matrix h1 = m.H1.matrix();
  EXPECT_LT((h1 - Matrix(h1.diagonal().asDiagonal())).norm(), 1e-15);
  EXPECT_NEAR(h1.diagonal().real().maxCoeff(), landau_switch(spec.coordinate(7), 1.0), 1e-15);
}

TEST(LandauModel, NoShiftWhenGroundIsHigh) {
  EXPECT_EQ(landau_shift(3.0, 0.5), 0.0);
  EXPECT_EQ(landau_shift(1.0, 0.5), 0.5);
}

TEST(LandauModel, RejectsBadSpec) {
  LandauSpec spec;
  spec.grid_points = 1;
  EXPECT_THROW(build_landau_model(spec, 0.5), InputError);
  spec.grid_points = 8;
  spec.field_B = 0.0;
  EXPECT_THROW(build_landau_model(spec, 0.5), InputError);
  spec.field_B = 1.0;
  EXPECT_THROW(build_landau_model(spec, 0.0), InputError);
}

TEST(LandauLevels, ModerateGrid) {
  // h = 0.28 and magnetic length 1: the lowest levels sit near B (k + 1/2).
  // The inner box [-3.5, 3.5]^2 must hold 99% of a centred ground state.
  LandauSpec spec;
  spec.grid_points = 49;
  spec.half_width = 7.0;
  const auto r = landau_level_check(spec, 0.5, 120, 2, 0.02);
  ASSERT_EQ(r.clusters.size(), 2u);
  EXPECT_TRUE(r.passed);
  EXPECT_GT(r.clusters[0].states, 1);
  EXPECT_LT(r.clusters[0].mean, r.clusters[1].mean);
  EXPECT_NEAR(r.clusters[0].mean, 0.5, 0.02);
  EXPECT_NEAR(r.clusters[1].mean, 1.5, 0.05);
}

TEST(LandauCommutator, SecondOrderRefinement) {
  LandauSpec spec;
  spec.grid_points = 24;
  spec.half_width = 6.0;
  spec.switch_width = 2.0;
  const auto r = landau_commutator_check(spec, 1.0, 3.0);
  EXPECT_EQ(r.fine_points, 49);
  EXPECT_NEAR(r.fine_h, 0.5 * r.coarse_h, 1e-15);
  EXPECT_GE(r.ratio, 3.0);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.fine_residual, r.coarse_residual);
}
