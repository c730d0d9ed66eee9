#include <gtest/gtest.h>

#include "propcert/certification.hpp"
#include "test_support.hpp"

using namespace propcert;
using testing_support::power_iteration_norm;

namespace {

const ModelPair& reference_model() {
  static const ModelPair m = build_spectral_model(16, 0.5, 3.0, 1.0, 20240601);
  return m;
}

const ModelPair& commuting_model() {
  static const ModelPair m = build_commuting_model(16, 0.5, 3.0, 1.0, 7);
  return m;
}

DriveParams drive_for(const ModelPair& m, double eps, double eta) {
  return DriveParams::admissible(m, eps, eta, SwitchFunction::smoothstep());
}

// H^p for Hermitian positive H, from Eigen's eigensolver.
Matrix oracle_power(const Matrix& h, double p) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  return es.eigenvectors() * es.eigenvalues().array().pow(p).matrix().cast<Complex>().asDiagonal() *
         es.eigenvectors().adjoint();
}

// Closed-form sandwich supremum for a commuting pair: U is diagonal in the
// joint basis, so only the eigenvalue ratios (lambda + c_r mu)/(lambda + c_t mu)
// survive. g is monotone, so the extremes sit at c in {0, eps g(1)}.
double commuting_closed_form(const ModelPair& m, double eps, int n) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.H0.matrix());
  const Matrix h1 = es.eigenvectors().adjoint() * m.H1.matrix() * es.eigenvectors();
  double best = 1.0;
  for (Index i = 0; i < m.dim(); ++i) {
    const double lambda = es.eigenvalues()(i), mu = h1(i, i).real();
    const double x = (lambda + eps * mu) / lambda;
    best = std::max({best, std::pow(x, 0.5 * n), std::pow(x, -0.5 * n)});
  }
  return best;
}

struct WarningCapture {
  std::vector<std::string> messages;
  WarningHandler saved = warning_handler();
  WarningCapture() {
    set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_handler(saved); }
};

} // namespace

TEST(Sandwich, UnitNormAtZeroPower) {
  for (double eta : {0.25, 4.0}) {
    const auto s = sandwich_sup(reference_model(), drive_for(reference_model(), 0.1, eta), 0, 9, 1e-9);
    EXPECT_NEAR(s.sup, 1.0, 1e-8);
  }
}

TEST(Sandwich, UnitNormWithoutPerturbation) {
  for (int n : {-4, -1, 2, 4}) {
    const auto s = sandwich_sup(reference_model(), drive_for(reference_model(), 0.0, 1.0), n, 9, 1e-9);
    EXPECT_NEAR(s.sup, 1.0, 1e-8) << "n " << n;
  }
}

TEST(Sandwich, CommutingClosedForm) {
  const auto& m = commuting_model();
  const auto d = drive_for(m, 0.1, 1.0);
  for (int n = -4; n <= 4; ++n) {
    const auto s = sandwich_sup(m, d, n, 9, 1e-10);
    EXPECT_NEAR(s.sup, commuting_closed_form(m, 0.1, n), 1e-8) << "n " << n;
  }
}

TEST(Sandwich, DirectOracleAtArgmax) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const auto s = sandwich_sup(m, d, 2, 9, 1e-10);
  const Matrix u = evolve(m, d, s.r, s.t, 1e-12).matrix();
  const Matrix ht = hamiltonian_at(m, d, s.t).matrix(), hr = hamiltonian_at(m, d, s.r).matrix();
  const double direct = power_iteration_norm(oracle_power(ht, -1.0) * u * oracle_power(hr, 1.0));
  EXPECT_NEAR(s.sup, direct, 1e-8);
  EXPECT_GE(s.sup, s.grid_sup);
  EXPECT_GT(s.sup, 1.0);
}

TEST(Sandwich, AdjointSymmetry) {
  // ||H^{-n/2}(t) U(t,r) H^{n/2}(r)|| equals the (-n) sandwich at (r, t)
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 1.0);
  for (int n : {1, 3}) {
    const auto plus = sandwich_sup(m, d, n, 9, 1e-10);
    const auto minus = sandwich_sup(m, d, -n, 9, 1e-10);
    EXPECT_NEAR(plus.grid_sup, minus.grid_sup, 1e-10) << "n " << n;
  }
}

TEST(Sandwich, ExtendedWindowAddsNothing) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 2.0);
  const auto base = build_propagator_grid(m, d, Picture::physical, linspace(0.0, 0.5, 9), 1e-10);
  const auto ext = extend_physical_grid(base, m, d, 4, 4);
  SandwichField bf(m, d, base), ef(m, d, ext);
  for (int n : {-2, 2}) {
    bf.set_power(n);
    ef.set_power(n);
    std::size_t ai, aj;
    int count = 0;
    const double inside = bf.max_over(1, ai, aj, count).value;
    const double outside = ef.max_over(1, ai, aj, count).value;
    EXPECT_NEAR(outside, inside, 1e-8) << "n " << n;
  }
}

TEST(CommutatorConstants, ZeroForCommutingModel) {
  const auto& m = commuting_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const auto e = commutator_constants(m, d, -4, 2, constants_t_grid(d, 9));
  for (const auto& [k, v] : e) EXPECT_LT(v, 1e-11) << "k " << k;
}

TEST(CommutatorConstants, DenseGridOracle) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const auto e = commutator_constants(m, d, -3, 1, constants_t_grid(d, 33));
  const Matrix c = m.H1.matrix() * m.H0.matrix() - m.H0.matrix() * m.H1.matrix();
  for (int k = -3; k <= 1; ++k) {
    double dense = 0.0;
    for (double t : linspace(0.0, 1.0, 321)) {
      const Matrix h = hamiltonian_at(m, d, t).matrix();
      dense = std::max(dense, power_iteration_norm(oracle_power(h, 0.5 * k) * c * oracle_power(h, -0.5 * (k + 2))));
    }
    EXPECT_GE(e.at(k), dense * (1.0 - 1e-9)) << "k " << k;
    EXPECT_LE(e.at(k), dense * (1.0 + 1e-4)) << "k " << k;
  }
}

TEST(CommutatorConstants, LinearInH1AtZeroCoupling) {
  const auto& m = reference_model();
  const auto doubled = make_model_pair(m.H0, HermitianOperator(2.0 * m.H1.matrix()), m.gamma0, m.kind, {});
  const auto d = DriveParams::unchecked(0.0, 1.0, SwitchFunction::smoothstep());
  const auto grid = constants_t_grid(d, 5);
  const auto e1 = commutator_constants(m, d, -2, 0, grid);
  const auto e2 = commutator_constants(doubled, d, -2, 0, grid);
  for (int k = -2; k <= 0; ++k) EXPECT_NEAR(e2.at(k), 2.0 * e1.at(k), 1e-12 * e1.at(k));
}

TEST(Lemma, ZeroPerturbation) {
  const auto m = build_spectral_model(8, 0.5, 3.0, 0.0, 3);
  const auto r = lemma_constants(m, DriveParams::unchecked(0.1, 1.0, SwitchFunction::smoothstep()), linspace(0, 1, 9));
  EXPECT_EQ(r.a, 0.0);
  EXPECT_EQ(r.measured_max, 0.0);
  EXPECT_TRUE(r.verified);
}

TEST(Lemma, ReferenceBoundHolds) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const auto r = lemma_constants(m, d, constants_t_grid(d, 33));
  EXPECT_NEAR(r.a, 1.0, 1e-12);
  EXPECT_NEAR(r.b_eps, 0.3, 1e-12);
  EXPECT_TRUE(r.verified);
  const Matrix h = hamiltonian_at(m, d, r.argmax_t).matrix();
  EXPECT_NEAR(r.measured_max, power_iteration_norm(m.H1.matrix() * oracle_power(h, -0.5)), 1e-9);
}

TEST(TheoreticalCn, RecursionAndMirror) {
  ConstantSet k;
  k.alpha = 1.5;
  k.beta = 4.5;
  k.gamma = {{0, 0.0}, {1, 0.2}, {2, 0.7}, {3, 1.1}};
  const double eps = 0.1;
  const auto c = theoretical_Cn(k, eps, 3);
  EXPECT_EQ(c.at(0), 1.0);
  double prev = 1.0;
  for (int n = 1; n <= 3; ++n) {
    const double expected = prev * std::exp(prev * (1.5 + 4.5 * eps + k.gamma.at(n)) * eps);
    EXPECT_NEAR(c.at(n), expected, 1e-14 * expected) << "n " << n;
    EXPECT_EQ(c.at(-n), c.at(n));
    prev = expected;
  }
  const auto none = theoretical_Cn(k, 0.0, 3);
  for (const auto& [n, v] : none) EXPECT_EQ(v, 1.0);
}

TEST(TheoreticalCn, OverflowIsInfiniteWithWarning) {
  WarningCapture capture;
  ConstantSet k;
  k.alpha = 1.0;
  k.gamma = {{0, 0.0}, {1, 5.0}, {2, 5000.0}, {3, 5000.0}};
  const auto c = theoretical_Cn(k, 1.0, 3);
  EXPECT_TRUE(std::isfinite(c.at(1)));
  EXPECT_TRUE(std::isinf(c.at(2)));
  EXPECT_TRUE(std::isinf(c.at(-3)));
  ASSERT_FALSE(capture.messages.empty());
  EXPECT_NE(capture.messages.front().find("C_2"), std::string::npos);
  EXPECT_THROW(theoretical_Cn(k, 1.0, 4), InputError);
}

TEST(CorollaryBound, Algebra) {
  std::map<int, double> cn{{-1, 2.0}, {0, 1.0}, {1, 2.0}};
  std::map<int, double> a{{-1, 0.5}, {0, 0.0}, {1, 3.0}};
  std::map<int, double> b{{-1, 1.0}, {0, 0.0}, {1, 0.25}};
  std::map<int, double> d;
  const auto out = corollary_bound(cn, a, b, 0.2, &d);
  for (int n : {-1, 0, 1}) {
    EXPECT_NEAR(d.at(n), a.at(n) + b.at(n) + 0.2 * a.at(n) * b.at(n), 1e-15);
    EXPECT_NEAR(out.at(n), cn.at(n) * (1 + 0.2 * a.at(n)) * (1 + 0.2 * b.at(n)), 1e-14);
  }
  EXPECT_EQ(out.at(0), 1.0);
}

TEST(Proposition, FirstOrderScalingOnReference) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const auto r = proposition_constants(m, d, -2, 2, constants_t_grid(d, 17), {0.2, 0.1, 0.05});
  EXPECT_TRUE(r.finite);
  EXPECT_EQ(r.eps_values, (std::vector<double>{0.2, 0.1, 0.05}));
  for (int n : {-2, -1, 1, 2}) {
    EXPECT_LE(r.A_variation.at(n), 0.25);
    EXPECT_LE(r.B_variation.at(n), 0.25);
    EXPECT_GT(r.A.at(n), 0.0);
  }
  // direct check of one entry at t = 1/eta where the coupling is largest
  const auto d2 = d.with(0.05, 1.0);
  const Matrix h = hamiltonian_at(m, d2, 1.0).matrix();
  const double direct = (power_iteration_norm(oracle_power(m.H0.matrix(), 0.5) * oracle_power(h, -0.5)) - 1.0) / 0.05;
  EXPECT_GE(r.A_by_eps.at(1).back(), direct - 1e-8);
}

TEST(Proposition, DriveEpsilonJoinsProbe) {
  const auto& m = reference_model();
  const auto d = drive_for(m, 0.07, 1.0);
  const auto r = proposition_constants(m, d, -1, 1, constants_t_grid(d, 9), {0.1, 0.05});
  EXPECT_EQ(r.eps_values, (std::vector<double>{0.1, 0.07, 0.05}));
  EXPECT_EQ(r.in_probe, (std::vector<bool>{true, false, true}));
  EXPECT_THROW(proposition_constants(m, d, -1, 1, {0.0}, {0.0}), InputError);
}

TEST(Derivative, QuadratureAgainstFiniteDifference) {
  const auto& m = reference_model();
  for (double eta : {0.25, 4.0}) {
    const auto d = drive_for(m, 0.1, eta);
    const auto lemma = lemma_constants(m, d, constants_t_grid(d, 17));
    const auto rep = derivative_bound_check(m, d, default_tau_samples(eta), 1e-10, lemma);
    ASSERT_EQ(rep.samples.size(), 7u);
    int interior = 0;
    for (const auto& s : rep.samples) {
      if (s.interior) {
        ++interior;
        EXPECT_LE(s.relative_error, 1e-4) << "tau " << s.tau;
      } else {
        EXPECT_TRUE(s.exact_zero) << "tau " << s.tau;
      }
      EXPECT_LE(s.lhs, s.bound + 1e-9);
    }
    EXPECT_EQ(interior, 5);
    EXPECT_TRUE(rep.passed());
  }
}

TEST(Derivative, CommutingClosedForm) {
  // commuting pair: d/dtau (lambda + c mu)^{1/2} = c' mu / (2 sqrt(lambda + c mu))
  const auto& m = commuting_model();
  const auto d = drive_for(m, 0.1, 1.0);
  const double tau = 0.4;
  const Matrix q = sqrt_derivative_quadrature(m, d, tau, 1e-11);
  const double c = 0.1 * d.switching().g(tau), cp = 0.1 * d.switching().g_prime(tau);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.H0.matrix());
  const Matrix v = es.eigenvectors();
  const Matrix h1 = v.adjoint() * m.H1.matrix() * v;
  Eigen::VectorXcd diag(m.dim());
  for (Index i = 0; i < m.dim(); ++i) {
    const double lambda = es.eigenvalues()(i), mu = h1(i, i).real();
    diag(i) = cp * mu / (2.0 * std::sqrt(lambda + c * mu));
  }
  EXPECT_LT(power_iteration_norm(q - v * diag.asDiagonal() * v.adjoint()), 1e-9);
}

TEST(Certify, SmallReferenceRunPasses) {
  const auto& m = reference_model();
  CertifyOptions opt;
  opt.eta_sweep = {1.0, 4.0};
  opt.n_max = 2;
  opt.grid_size = 9;
  opt.constant_points = 17;
  const auto cert = certify(m, drive_for(m, 0.1, 1.0), opt);
  for (const auto& v : cert.verdicts) EXPECT_TRUE(v.pass) << v.claim << ": " << v.detail;
  EXPECT_EQ(cert.cells.size(), 10u);
  EXPECT_EQ(cert.theoretical_Cn.at(0), 1.0);
  for (const auto& c : cert.cells) {
    EXPECT_LE(c.physical.sup, cert.theoretical_Cn.at(c.n) + kVerdictSlack);
    if (c.n == 0) EXPECT_NEAR(c.physical.sup, 1.0, 1e-8);
  }
  EXPECT_EQ(cert.constants.E.size(), 3u); // k in [-2, 0]
}

TEST(Certify, ThreadCountDoesNotChangeResult) {
  const auto& m = commuting_model();
  CertifyOptions opt;
  opt.eta_sweep = {0.5, 2.0};
  opt.n_max = 1;
  opt.grid_size = 9;
  opt.constant_points = 9;
  opt.derivative_check = false;
  const auto one = certify(m, drive_for(m, 0.1, 1.0), opt);
  opt.threads = 2;
  const auto two = certify(m, drive_for(m, 0.1, 1.0), opt);
  ASSERT_EQ(one.cells.size(), two.cells.size());
  for (std::size_t i = 0; i < one.cells.size(); ++i) EXPECT_EQ(one.cells[i].physical.sup, two.cells[i].physical.sup);
}

TEST(Certify, RejectsBadOptions) {
  const auto& m = reference_model();
  CertifyOptions opt;
  opt.eta_sweep = {};
  EXPECT_THROW(certify(m, drive_for(m, 0.1, 1.0), opt), InputError);
  opt.eta_sweep = {1.0};
  opt.grid_size = 5;
  EXPECT_THROW(certify(m, drive_for(m, 0.1, 1.0), opt), InputError);
}
