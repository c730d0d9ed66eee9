#include <gtest/gtest.h>

#include "propcert/models.hpp"
#include "test_support.hpp"

using namespace propcert;
using testing_support::power_iteration_norm;

namespace {

ModelPair reference_model(double coupling = 1.0) { return build_spectral_model(16, 0.5, 3.0, coupling, 20240601); }

// ||H1 H0^{-1/2}|| from an independent eigensolver and power iteration.
double independent_relative_bound(const ModelPair& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.H0.matrix());
  const Matrix inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  return power_iteration_norm(m.H1.matrix() * inv_sqrt);
}

} // namespace

TEST(SpectralModel, DeterministicInSeed) {
  const auto a = reference_model();
  const auto b = reference_model();
  EXPECT_TRUE(a.H0.matrix() == b.H0.matrix());
  EXPECT_TRUE(a.H1.matrix() == b.H1.matrix());
  EXPECT_EQ(a.provenance.dump(), b.provenance.dump());
  const auto c = build_spectral_model(16, 0.5, 3.0, 1.0, 20240602);
  EXPECT_FALSE(a.H0.matrix() == c.H0.matrix());
}

TEST(SpectralModel, CouplingIsRelativeBound) {
  for (double coupling : {0.3, 1.0, 2.5}) {
    const auto m = build_spectral_model(12, 0.5, 4.0, coupling, 11);
    EXPECT_NEAR(relative_half_bound(m.H1, m.H0), coupling, 1e-12);
    EXPECT_NEAR(independent_relative_bound(m), coupling, 1e-9);
  }
}

TEST(SpectralModel, SpectrumInRangeAndHermitian) {
  const auto m = reference_model();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.H0.matrix());
  EXPECT_GE(es.eigenvalues().minCoeff(), 1.5 - 1e-12);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 3.0 + 1e-12);
  EXPECT_LT((m.H1.matrix() - m.H1.matrix().adjoint()).norm(), 1e-14);
  EXPECT_EQ(m.kind, ModelKind::spectral);
  EXPECT_EQ(m.provenance["seed"], 20240601);
}

TEST(SpectralModel, ZeroCoupling) {
  const auto m = reference_model(0.0);
  EXPECT_EQ(m.H1.matrix().norm(), 0.0);
}

TEST(SpectralModel, RejectsInvalidRanges) {
  EXPECT_THROW(build_spectral_model(1, 0.5, 3.0, 1.0, 1), InputError);
  EXPECT_THROW(build_spectral_model(4, 0.0, 3.0, 1.0, 1), InputError);
  EXPECT_THROW(build_spectral_model(4, 0.5, 1.5, 1.0, 1), InputError);
  EXPECT_THROW(build_spectral_model(4, 0.5, 3.0, -1.0, 1), InputError);
}

TEST(CommutingModel, Commutes) {
  const auto m = build_commuting_model(16, 0.5, 3.0, 1.0, 7);
  const double scale = power_iteration_norm(m.H0.matrix()) * power_iteration_norm(m.H1.matrix());
  EXPECT_LE(power_iteration_norm(m.H1.matrix() * m.H0.matrix() - m.H0.matrix() * m.H1.matrix()), 1e-12 * scale);
  EXPECT_NEAR(relative_half_bound(m.H1, m.H0), 1.0, 1e-12);
}

TEST(CommutingModel, ZeroCouplingMatchesSpectral) {
  const auto c = build_commuting_model(10, 0.5, 3.0, 0.0, 99);
  const auto s = build_spectral_model(10, 0.5, 3.0, 0.0, 99);
  EXPECT_TRUE(c.H0.matrix() == s.H0.matrix());
  EXPECT_EQ(c.H1.matrix().norm(), 0.0);
}

TEST(ModelPairChecks, FloorAndCommutator) {
  Matrix h0 = Matrix::Identity(2, 2) * 1.2;
  EXPECT_THROW(make_model_pair(HermitianOperator(h0), HermitianOperator::zero(2), 0.5, ModelKind::spectral, {}),
               InputError);
  Matrix h1(2, 2);
  h1 << 0, 1, 1, 0;
  RealVector ev(2);
  ev << 2.0, 3.0;
  auto diag = HermitianOperator::from_spectrum(ev, Matrix::Identity(2, 2));
  EXPECT_THROW(make_model_pair(diag, HermitianOperator(h1), 0.5, ModelKind::commuting, {}), InputError);
  EXPECT_NO_THROW(make_model_pair(diag, HermitianOperator(h1), 0.5, ModelKind::spectral, {}));
  EXPECT_THROW(make_model_pair(diag, HermitianOperator::zero(3), 0.5, ModelKind::spectral, {}), DimensionError);
}

TEST(Admissibility, ArithmeticExample) {
  RealVector ev0(2), ev1(2);
  ev0 << 2.0, 4.0;
  ev1 << 0.4, 0.0; // H1 H0^{-1} = diag(0.2, 0)
  const auto m = make_model_pair(HermitianOperator::from_spectrum(ev0, Matrix::Identity(2, 2)),
                                 HermitianOperator::from_spectrum(ev1, Matrix::Identity(2, 2)), 0.5,
                                 ModelKind::commuting, {});
  EXPECT_NEAR(eps_star_max(m, SwitchFunction::smoothstep()), 1.0, 1e-14);
  EXPECT_NO_THROW(DriveParams::admissible(m, 0.95, 1.0, SwitchFunction::smoothstep()));
  EXPECT_THROW(DriveParams::admissible(m, 0.96, 1.0, SwitchFunction::smoothstep()), InputError);

  const auto drive = DriveParams::admissible(m, 0.9, 2.0, SwitchFunction::smoothstep());
  const auto r = validate_model(m, drive, linspace(-0.5, 1.0, 31));
  EXPECT_NEAR(r.eps_star_max, 1.0, 1e-14);
  EXPECT_TRUE(r.epsilon_strict_ok);
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.min_eigenvalue, 1.0);
  EXPECT_NEAR(r.min_eigenvalue, 2.0, 1e-12);
}

TEST(Admissibility, UnboundedWithoutPerturbation) {
  const auto m = reference_model(0.0);
  EXPECT_TRUE(std::isinf(eps_star_max(m, SwitchFunction::smoothstep())));
  const auto r = validate_model(m, DriveParams::unchecked(5.0, 1.0, SwitchFunction::smoothstep()), {0.0, 0.5, 1.0});
  EXPECT_FALSE(r.eps_star_bounded);
  EXPECT_TRUE(r.passed());
}

TEST(Admissibility, ReferenceFloorHolds) {
  const auto m = reference_model();
  const auto drive = DriveParams::admissible(m, 0.1, 1.0, SwitchFunction::smoothstep());
  const auto r = validate_model(m, drive, linspace(-0.5, 1.5, 201));
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.min_eigenvalue, 1.0);
}

TEST(Drive, RangeErrors) {
  EXPECT_THROW(DriveParams::unchecked(-0.1, 1.0, SwitchFunction::smoothstep()), InputError);
  EXPECT_THROW(DriveParams::unchecked(0.1, 0.0, SwitchFunction::smoothstep()), InputError);
  EXPECT_THROW(DriveParams::unchecked(0.1, std::nan(""), SwitchFunction::smoothstep()), InputError);
  const auto d = DriveParams::unchecked(0.2, 4.0, SwitchFunction::smoothstep());
  EXPECT_DOUBLE_EQ(d.coupling_at(0.125), 0.2 * 0.5);
  EXPECT_DOUBLE_EQ(d.gauge_angle(2.0), 0.2 / 4.0 * 1.5);
}

TEST(Hamiltonian, AffineAndPiecewiseConstant) {
  const auto m = reference_model();
  const auto d = DriveParams::admissible(m, 0.1, 4.0, SwitchFunction::smoothstep());
  EXPECT_TRUE(hamiltonian_at(m, d, -1.0).matrix() == m.H0.matrix());
  const Matrix h_end = hamiltonian_at(m, d, 0.25).matrix();
  EXPECT_TRUE(hamiltonian_at(m, d, 3.0).matrix() == h_end);
  EXPECT_LT((h_end - m.H0.matrix() - 0.1 * m.H1.matrix()).norm(), 1e-15);
  for (double t : {0.01, 0.1, 0.2}) {
    const double g = SwitchFunction::smoothstep().g(4.0 * t);
    EXPECT_LT((hamiltonian_at(m, d, t).matrix() - m.H0.matrix() - 0.1 * g * m.H1.matrix()).norm(), 1e-14);
  }
  const auto zero = d.with(0.0, 4.0);
  for (double t : {-1.0, 0.1, 5.0}) EXPECT_TRUE(hamiltonian_at(m, zero, t).matrix() == m.H0.matrix());
}

TEST(InteractionHamiltonian, ConjugationProperties) {
  const auto m = reference_model();
  const auto d = DriveParams::admissible(m, 0.1, 0.25, SwitchFunction::smoothstep());
  EXPECT_TRUE(interaction_hamiltonian_at(m, d, 0.0).matrix() == m.H0.matrix());
  EXPECT_TRUE(interaction_hamiltonian_at(m, d, 0.0).matrix() == hamiltonian_at(m, d, 0.0).matrix());

  Eigen::SelfAdjointEigenSolver<Matrix> es0(m.H0.matrix());
  for (double s : {0.3, 0.8, 1.0, 2.0}) {
    const auto h = interaction_hamiltonian_at(m, d, s);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    EXPECT_LT((es.eigenvalues() - es0.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
    // independent exponential of H1 by its own eigensolver
    Eigen::SelfAdjointEigenSolver<Matrix> e1(m.H1.matrix());
    const double angle = 0.1 / 0.25 * SwitchFunction::smoothstep().phi(s);
    Eigen::VectorXcd phases(m.dim());
    for (Index i = 0; i < m.dim(); ++i) phases(i) = std::polar(1.0, angle * e1.eigenvalues()(i));
    const Matrix w = e1.eigenvectors() * phases.asDiagonal() * e1.eigenvectors().adjoint();
    EXPECT_LT((h.matrix() - w * m.H0.matrix() * w.adjoint()).norm(), 1e-12);
    // the supplied spectrum reconstructs the matrix
    const auto& sd = h.spectrum();
    EXPECT_LT((sd.eigenvectors * sd.eigenvalues.cast<Complex>().asDiagonal() * sd.eigenvectors.adjoint() - h.matrix())
                  .norm(),
              1e-11);
  }
}

TEST(InteractionHamiltonian, CommutingModelIsStatic) {
  const auto m = build_commuting_model(12, 0.5, 3.0, 1.0, 7);
  const auto d = DriveParams::admissible(m, 0.1, 1.0, SwitchFunction::smoothstep());
  for (double s : {0.2, 0.7, 1.0})
    EXPECT_LT((interaction_hamiltonian_at(m, d, s).matrix() - m.H0.matrix()).norm(), 1e-12);
}

TEST(Grids, Linspace) {
  const auto g = linspace(0.0, 2.0, 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 2.0);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  const auto w = switching_window_grid(DriveParams::unchecked(0.1, 4.0, SwitchFunction::smoothstep()), 3);
  EXPECT_EQ(w.back(), 0.25);
}
