#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "propcert/propagator.hpp"

namespace propcert {

/// Measured and derived constants of the energy bounds. `b_eps` follows the
/// relative-bound selection (a, 0): b(eps) = 3 eps M a^2.
struct ConstantSet {
  double epsilon = 0.0;
  double a = 0.0;
  double b_eps = 0.0;
  double M = 0.0;
  double M_prime = 0.0;
  double alpha = 0.0; // M' a
  double beta = 0.0;  // 3 M' M a^2, so alpha + eps beta = M' (a + b(eps))
  std::map<int, double> E;     // commutator constants, k in [-n_max, n_max - 2]
  std::map<int, double> gamma; // gamma_n = M' sum_{k=1..n} E_{-k}
  std::map<int, double> A;
  std::map<int, double> B;
  std::map<int, double> D; // A + B + eps A B
};

struct GridMax {
  double value = -std::numeric_limits<double>::infinity();
  double at = 0.0;
};

namespace detail {

// Golden-section maximization of f on [lo, hi]; returns the best sample seen.
template <class F>
GridMax golden_max(F&& f, double lo, double hi, int iterations = 40) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  GridMax best{std::max(f1, f2), f1 >= f2 ? x1 : x2};
  for (int i = 0; i < iterations && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++i) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
      if (f1 > best.value) best = {f1, x1};
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
      if (f2 > best.value) best = {f2, x2};
    }
  }
  return best;
}

// Max over grid samples plus one golden-section pass in the cells adjacent to
// the grid argmax.
template <class F>
GridMax refine_max(F&& f, const std::vector<double>& grid, const std::vector<double>& values) {
  GridMax best;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > best.value) {
      best = {values[i], grid[i]};
      arg = i;
    }
  if (grid.size() < 2) return best;
  const double lo = grid[arg == 0 ? 0 : arg - 1];
  const double hi = grid[std::min(arg + 1, grid.size() - 1)];
  GridMax local = golden_max(f, lo, hi);
  if (local.value > best.value) best = local;
  return best;
}

} // namespace detail

/// t grid for measuring constants: `points` equispaced s in [0, 1], t = s/eta.
inline std::vector<double> constants_t_grid(const DriveParams& drive, int points) {
  auto s = linspace(0.0, 1.0, points);
  for (double& x : s) x /= drive.eta();
  return s;
}

/// E_k = max over t of ||H^{k/2}(t) [H1, H0] H^{-(k+2)/2}(t)|| for k in [k_lo, k_hi].
inline std::map<int, double> commutator_constants(const ModelPair& model, const DriveParams& drive, int k_lo,
                                                  int k_hi, const std::vector<double>& t_grid) {
  const Matrix c = commutator(model.H1, model.H0);
  auto value = [&](const SpectralDecomposition& sd, int k) {
    return operator_norm(half_power_matrix(sd, k) * c * half_power_matrix(sd, -(k + 2)));
  };
  std::map<int, std::vector<double>> samples;
  for (double t : t_grid) {
    const auto sd = hamiltonian_at(model, drive, t).spectrum();
    for (int k = k_lo; k <= k_hi; ++k) samples[k].push_back(value(sd, k));
  }
  std::map<int, double> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    auto f = [&](double t) { return value(hamiltonian_at(model, drive, t).spectrum(), k); };
    out[k] = detail::refine_max(f, t_grid, samples[k]).value;
  }
  return out;
}

struct LemmaReport {
  double a = 0.0;
  double b_eps = 0.0;
  double measured_max = 0.0; // max_t ||H1 H^{-1/2}(t)||
  double argmax_t = 0.0;
  bool verified = false;
};

inline LemmaReport lemma_constants(const ModelPair& model, const DriveParams& drive,
                                   const std::vector<double>& t_grid) {
  LemmaReport r;
  const double m = switch_constants(drive.switching()).M;
  r.a = relative_half_bound(model.H1, model.H0);
  r.b_eps = 3.0 * drive.epsilon() * m * r.a * r.a;
  auto f = [&](double t) {
    return operator_norm(model.H1.matrix() * half_power_matrix(hamiltonian_at(model, drive, t).spectrum(), -1));
  };
  std::vector<double> values;
  for (double t : t_grid) values.push_back(f(t));
  GridMax best = detail::refine_max(f, t_grid, values);
  r.measured_max = best.value;
  r.argmax_t = best.at;
  r.verified = r.measured_max <= r.a + r.b_eps + 1e-10;
  return r;
}

/// C_0 = 1, log C_n = log C_{n-1} + C_{n-1} (alpha + beta eps + gamma_n) eps,
/// C_{-n} = C_n. Values above 1e300 become +inf with a warning.
inline std::map<int, double> theoretical_Cn(const ConstantSet& k, double epsilon, int n_max) {
  std::map<int, double> out{{0, 1.0}};
  const double cap = std::log(1e300);
  double log_c = 0.0;
  double c = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    auto g = k.gamma.find(n);
    if (g == k.gamma.end()) throw InputError("theoretical_Cn: gamma_" + std::to_string(n) + " missing");
    if (std::isinf(c)) {
      out[n] = out[-n] = c;
      continue;
    }
    log_c += c * (k.alpha + k.beta * epsilon + g->second) * epsilon;
    if (log_c > cap) {
      c = std::numeric_limits<double>::infinity();
      warn("C_" + std::to_string(n) + " exceeds 1e300; the bound for |n| >= " + std::to_string(n) +
           " is vacuous");
    } else {
      c = std::exp(log_c);
    }
    out[n] = out[-n] = c;
  }
  return out;
}

// Smallest resolvable deviation of an operator norm from 1.
inline constexpr double kNormResolution = 1e-10;

struct PropositionReport {
  std::vector<double> eps_values;            // probe values plus the drive epsilon
  std::vector<bool> in_probe;
  std::map<int, std::vector<double>> A_by_eps; // max_t (||H0^{n/2} H^{-n/2}|| - 1)/eps
  std::map<int, std::vector<double>> B_by_eps; // max_t (||H^{n/2} H0^{-n/2}|| - 1)/eps
  std::map<int, double> A, B;
  std::map<int, double> A_variation, B_variation; // (max - min)/max over the probe
  bool finite = true;
};

inline PropositionReport proposition_constants(const ModelPair& model, const DriveParams& drive, int n_lo,
                                               int n_hi, const std::vector<double>& t_grid,
                                               const std::vector<double>& eps_probe) {
  PropositionReport r;
  std::set<double> eps_set;
  for (double e : eps_probe) {
    if (!(e > 0.0)) throw InputError("proposition: probe epsilons must be positive");
    eps_set.insert(e);
  }
  if (drive.epsilon() > 0.0) eps_set.insert(drive.epsilon());
  for (auto it = eps_set.rbegin(); it != eps_set.rend(); ++it) {
    r.eps_values.push_back(*it);
    r.in_probe.push_back(std::find(eps_probe.begin(), eps_probe.end(), *it) != eps_probe.end());
  }
  const auto& sd0 = model.H0.spectrum();
  std::map<int, Matrix> h0_pow;
  for (int n = n_lo; n <= n_hi; ++n) h0_pow[n] = half_power_matrix(sd0, n);

  for (double e : r.eps_values) {
    const DriveParams d = drive.with(e, drive.eta());
    auto a_term = [&](const SpectralDecomposition& sd, int n) {
      return (operator_norm(h0_pow[n] * half_power_matrix(sd, -n)) - 1.0) / e;
    };
    auto b_term = [&](const SpectralDecomposition& sd, int n) {
      return (operator_norm(half_power_matrix(sd, n) * h0_pow[-n]) - 1.0) / e;
    };
    std::map<int, std::vector<double>> av, bv;
    for (double t : t_grid) {
      const auto sd = hamiltonian_at(model, d, t).spectrum();
      for (int n = n_lo; n <= n_hi; ++n) {
        if (!h0_pow.count(-n)) h0_pow[-n] = half_power_matrix(sd0, -n);
        av[n].push_back(a_term(sd, n));
        bv[n].push_back(b_term(sd, n));
      }
    }
    for (int n = n_lo; n <= n_hi; ++n) {
      if (n == 0) {
        r.A_by_eps[n].push_back(0.0);
        r.B_by_eps[n].push_back(0.0);
        continue;
      }
      auto fa = [&](double t) { return a_term(hamiltonian_at(model, d, t).spectrum(), n); };
      auto fb = [&](double t) { return b_term(hamiltonian_at(model, d, t).spectrum(), n); };
      r.A_by_eps[n].push_back(std::max(0.0, detail::refine_max(fa, t_grid, av[n]).value));
      r.B_by_eps[n].push_back(std::max(0.0, detail::refine_max(fb, t_grid, bv[n]).value));
    }
  }

  auto variation = [&](const std::vector<double>& v) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (r.in_probe[i]) {
        // ||.|| - 1 below kNormResolution is roundoff, not a first-order term
        const double x = v[i] * r.eps_values[i] <= kNormResolution ? 0.0 : v[i];
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    if (!(hi > 1e-14)) return 0.0;
    return (hi - lo) / hi;
  };
  for (int n = n_lo; n <= n_hi; ++n) {
    const auto& av = r.A_by_eps[n];
    const auto& bv = r.B_by_eps[n];
    r.A[n] = av.empty() ? 0.0 : *std::max_element(av.begin(), av.end());
    r.B[n] = bv.empty() ? 0.0 : *std::max_element(bv.begin(), bv.end());
    r.A_variation[n] = variation(av);
    r.B_variation[n] = variation(bv);
    if (!std::isfinite(r.A[n]) || !std::isfinite(r.B[n])) r.finite = false;
  }
  return r;
}

/// D_n = A_n + B_n + eps A_n B_n, so (1 + eps A)(1 + eps B) = 1 + eps D, and
/// the bound C_n (1 + eps D_n).
inline std::map<int, double> corollary_bound(const std::map<int, double>& cn, const std::map<int, double>& A,
                                             const std::map<int, double>& B, double epsilon,
                                             std::map<int, double>* d_out = nullptr) {
  std::map<int, double> out;
  for (const auto& [n, c] : cn) {
    const double a = A.at(n), b = B.at(n);
    const double d = a + b + epsilon * a * b;
    if (d_out) (*d_out)[n] = d;
    out[n] = c * (1.0 + epsilon * d);
  }
  return out;
}

struct DerivativeSample {
  double tau = 0.0;
  bool interior = false;
  double quadrature_norm = 0.0;
  double fd_norm = 0.0;
  double relative_error = 0.0; // quadrature vs central difference
  bool exact_zero = false;     // derivative identically zero (outside the window)
  double lhs = 0.0;            // ||(d/dtau H^{1/2}) H^{-1/2}||
  double bound = 0.0;          // eps eta (alpha + eps beta)
  bool ok = false;
};

struct DerivativeReport {
  std::vector<DerivativeSample> samples;
  bool passed() const {
    return std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.ok; });
  }
};

/// d/dtau H^{1/2}(tau) = (2 eps eta g'(eta tau)/pi) int_0^inf x^2 (x^2+H)^{-1} H1 (x^2+H)^{-1} dx,
/// integrated after x = tan(theta); zero wherever g' vanishes.
inline Matrix sqrt_derivative_quadrature(const ModelPair& model, const DriveParams& drive, double tau,
                                         double tol) {
  const double gp = drive.switching().g_prime(drive.eta() * tau);
  const Index d = model.dim();
  if (gp == 0.0 || drive.epsilon() == 0.0) return Matrix::Zero(d, d);
  const Matrix h = hamiltonian_at(model, drive, tau).matrix();
  const Matrix& h1 = model.H1.matrix();
  auto integrand = [&](double theta) -> Matrix {
    const double s2 = std::sin(theta) * std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    Matrix shifted = c2 * h;
    shifted.diagonal().array() += s2;
    Eigen::LLT<Matrix> llt(shifted);
    const Matrix x = llt.solve(h1);        // R H1
    return s2 * llt.solve(x.adjoint()); // R H1 R
  };
  auto q = integrate_matrix(integrand, 0.0, 0.5 * std::numbers::pi, tol);
  return q.value * (2.0 * drive.epsilon() * drive.eta() * gp / std::numbers::pi);
}

inline DerivativeReport derivative_bound_check(const ModelPair& model, const DriveParams& drive,
                                               const std::vector<double>& tau_samples, double tol,
                                               const LemmaReport& lemma) {
  DerivativeReport rep;
  const auto sc = switch_constants(drive.switching());
  const double eps = drive.epsilon(), eta = drive.eta();
  const double bound = eps * eta * sc.M_prime * (lemma.a + lemma.b_eps);
  const double fd_step = 1e-4 / eta;
  for (double tau : tau_samples) {
    DerivativeSample s;
    s.tau = tau;
    s.interior = tau > 0.0 && tau < 1.0 / eta;
    const Matrix q = sqrt_derivative_quadrature(model, drive, tau, tol);
    const Matrix fd = (half_power(hamiltonian_at(model, drive, tau + fd_step), 1).matrix() -
                       half_power(hamiltonian_at(model, drive, tau - fd_step), 1).matrix()) /
                      (2.0 * fd_step);
    s.quadrature_norm = operator_norm(q);
    s.fd_norm = operator_norm(fd);
    s.relative_error = s.quadrature_norm > 0.0 ? operator_norm(q - fd) / s.quadrature_norm : s.fd_norm;
    s.lhs = operator_norm(q * half_power_matrix(hamiltonian_at(model, drive, tau).spectrum(), -1));
    s.bound = bound;
    s.exact_zero = (q.array() == Complex(0.0)).all();
    const bool bound_ok = s.lhs <= s.bound + 1e-9;
    if (s.interior && eps > 0.0)
      s.ok = bound_ok && s.relative_error <= 1e-4;
    else if (!s.interior)
      s.ok = bound_ok && s.exact_zero;
    else
      s.ok = bound_ok;
    rep.samples.push_back(s);
  }
  return rep;
}

/// Five interior samples and one on each side of the switching window.
inline std::vector<double> default_tau_samples(double eta) {
  return {-0.25 / eta, 0.1 / eta, 0.3 / eta, 0.5 / eta, 0.7 / eta, 0.9 / eta, 1.25 / eta};
}

struct SandwichSup {
  double sup = 0.0;      // after refinement
  double grid_sup = 0.0; // coarse grid only
  double t = 0.0, r = 0.0;
  int evaluations = 0;
};

/// Spectral data of the picture's Hamiltonian on every point of a propagator
/// grid; evaluates ||K^{-n/2}(x_i) U(x_i, x_j) K^{n/2}(x_j)||.
class SandwichField {
public:
  SandwichField(const ModelPair& model, const DriveParams& drive, const PropagatorGrid& grid) : grid_(&grid) {
    for (double x : grid.points())
      spectra_.push_back(grid.picture() == Picture::physical
                             ? hamiltonian_at(model, drive, x).spectrum()
                             : interaction_hamiltonian_at(model, drive, x).spectrum());
  }

  const PropagatorGrid& grid() const { return *grid_; }

  void set_power(int n) {
    left_.clear();
    right_.clear();
    for (std::size_t i = 0; i < spectra_.size(); ++i) {
      left_.push_back(half_power_matrix(spectra_[i], -n) * grid_->cumulative(i));
      right_.push_back(grid_->cumulative(i).adjoint() * half_power_matrix(spectra_[i], n));
    }
  }

  double value(std::size_t i, std::size_t j) const { return operator_norm(left_[i] * right_[j]); }

  /// Max over all point pairs whose indices are multiples of `stride`.
  GridMax max_over(std::size_t stride, std::size_t& ai, std::size_t& aj, int& count) const {
    GridMax best;
    for (std::size_t i = 0; i < spectra_.size(); i += stride)
      for (std::size_t j = 0; j < spectra_.size(); j += stride) {
        const double v = value(i, j);
        ++count;
        if (v > best.value) {
          best.value = v;
          ai = i;
          aj = j;
        }
      }
    return best;
  }

private:
  const PropagatorGrid* grid_;
  std::vector<SpectralDecomposition> spectra_;
  std::vector<Matrix> left_, right_;
};

/// Sup over the coarse grid (even indices of the field's grid) followed by
/// one refinement pass over the fine points within one coarse cell of the
/// argmax. The refined set contains the coarse set, so refinement never
/// lowers the result.
inline SandwichSup refined_sandwich_sup(const SandwichField& field) {
  SandwichSup out;
  std::size_t ai = 0, aj = 0;
  out.grid_sup = field.max_over(2, ai, aj, out.evaluations).value;
  out.sup = out.grid_sup;
  const auto& pts = field.grid().points();
  out.t = pts[ai];
  out.r = pts[aj];
  const std::size_t last = pts.size() - 1;
  const std::size_t i0 = ai >= 2 ? ai - 2 : 0, i1 = std::min(ai + 2, last);
  const std::size_t j0 = aj >= 2 ? aj - 2 : 0, j1 = std::min(aj + 2, last);
  for (std::size_t i = i0; i <= i1; ++i)
    for (std::size_t j = j0; j <= j1; ++j) {
      if (i % 2 == 0 && j % 2 == 0) continue;
      const double v = field.value(i, j);
      ++out.evaluations;
      if (v > out.sup) {
        out.sup = v;
        out.t = pts[i];
        out.r = pts[j];
      }
    }
  return out;
}

/// Refinement grid: 2 * grid_size - 1 points on [0, span].
inline std::vector<double> fine_grid(double span, int grid_size) { return linspace(0.0, span, 2 * grid_size - 1); }

/// sup over a grid_size x grid_size grid on [0, 1/eta]^2 of
/// ||H^{-n/2}(t) U(t, r) H^{n/2}(r)||, with one refinement pass.
inline SandwichSup sandwich_sup(const ModelPair& model, const DriveParams& drive, int n, int grid_size,
                                double tol) {
  if (grid_size < 9) throw InputError("sandwich_sup: grid_size must be >= 9");
  auto grid = build_propagator_grid(model, drive, Picture::physical, fine_grid(1.0 / drive.eta(), grid_size), tol);
  SandwichField field(model, drive, grid);
  field.set_power(n);
  return refined_sandwich_sup(field);
}

struct CellResult {
  int n = 0;
  double eta = 0.0;
  SandwichSup physical;
  double extended_sup = 0.0;
  double window_delta = 0.0; // |extended grid sup - base grid sup|
  SandwichSup interaction;   // over [0, 1]^2 in macroscopic time
};

struct EtaDiagnostics {
  double eta = 0.0;
  long steps_physical = 0, steps_interaction = 0;
  double error_physical = 0.0, error_interaction = 0.0;
  double drift_physical = 0.0, drift_interaction = 0.0;
  double gauge_residual = 0.0;
  DerivativeReport derivative;
};

struct Verdict {
  std::string claim;
  bool pass = false;
  std::string detail;
};

struct CertifyOptions {
  std::vector<double> eta_sweep{0.25, 1.0, 4.0, 16.0};
  int n_max = 4;
  int grid_size = 33;
  double tol = 1e-8;
  std::vector<double> eps_probe{0.2, 0.1, 0.05};
  int constant_points = 65;
  unsigned threads = 1;
  bool derivative_check = true;
  long max_steps = 10'000'000;
};

/// Absolute slack for comparing a measured supremum with a bound, covering
/// integration error on quantities that are exactly 1 in theory.
inline constexpr double kVerdictSlack = 1e-8;

struct BoundCertificate {
  Json provenance;
  double epsilon = 0.0;
  std::string switching;
  CertifyOptions options;
  ConstantSet constants;
  AdmissibilityReport admissibility;
  LemmaReport lemma;
  PropositionReport proposition;
  std::map<int, double> theoretical_Cn;
  std::map<int, double> corollary_bound;
  std::vector<CellResult> cells; // eta-major, then n ascending
  std::vector<EtaDiagnostics> per_eta;
  std::vector<Verdict> verdicts;

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.pass; });
  }
};

namespace detail {

struct EtaOutcome {
  EtaDiagnostics diag;
  std::vector<CellResult> cells;
};

inline EtaOutcome certify_eta(const ModelPair& model, const DriveParams& drive, const CertifyOptions& opt,
                              const LemmaReport& lemma) {
  EtaOutcome out;
  const double eta = drive.eta();
  const int g = opt.grid_size;
  const auto s_fine = fine_grid(1.0, g);
  std::vector<double> t_fine(s_fine);
  for (double& t : t_fine) t /= eta;
  t_fine.back() = 1.0 / eta;

  EvolveOptions evolve_opt;
  evolve_opt.max_steps = opt.max_steps;
  auto phys = build_propagator_grid(model, drive, Picture::physical, t_fine, opt.tol, evolve_opt);
  auto inter = build_propagator_grid(model, drive, Picture::interaction, s_fine, opt.tol, evolve_opt);
  const int pad = (g - 1) / 2;
  auto extended = extend_physical_grid(phys.subsample(2), model, drive, pad, pad);

  out.diag.eta = eta;
  out.diag.steps_physical = phys.steps();
  out.diag.steps_interaction = inter.steps();
  out.diag.error_physical = phys.error_estimate();
  out.diag.error_interaction = inter.error_estimate();
  out.diag.drift_physical = phys.max_drift();
  out.diag.drift_interaction = inter.max_drift();

  // gauge identity on the coarse grid
  {
    std::vector<Matrix> lhs, rhs;
    for (std::size_t i = 0; i < s_fine.size(); i += 2) {
      lhs.push_back(h1_exponential(model, drive.gauge_angle(s_fine[i])) * phys.cumulative(i));
      rhs.push_back(inter.cumulative(i));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i)
      for (std::size_t j = 0; j < lhs.size(); ++j)
        worst = std::max(worst, operator_norm(lhs[i] * lhs[j].adjoint() - rhs[i] * rhs[j].adjoint()));
    out.diag.gauge_residual = worst;
  }

  if (opt.derivative_check)
    out.diag.derivative = derivative_bound_check(model, drive, default_tau_samples(eta), 1e-10, lemma);

  SandwichField pf(model, drive, phys), ef(model, drive, extended), qf(model, drive, inter);
  for (int n = -opt.n_max; n <= opt.n_max; ++n) {
    CellResult c;
    c.n = n;
    c.eta = eta;
    pf.set_power(n);
    c.physical = refined_sandwich_sup(pf);
    ef.set_power(n);
    std::size_t ai = 0, aj = 0;
    int count = 0;
    c.extended_sup = ef.max_over(1, ai, aj, count).value;
    c.window_delta = std::abs(c.extended_sup - c.physical.grid_sup);
    qf.set_power(n);
    c.interaction = refined_sandwich_sup(qf);
    out.cells.push_back(c);
  }
  return out;
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

} // namespace detail

/// Full pipeline: admissibility, constants, C_n recursion and corollary
/// bound, then per-eta propagator grids in both pictures, sandwich suprema,
/// window reduction, gauge identity and derivative checks. Eta cells run on
/// up to `threads` workers; results do not depend on the thread count.
inline BoundCertificate certify(const ModelPair& model, const DriveParams& drive, const CertifyOptions& opt) {
  if (opt.eta_sweep.empty()) throw InputError("certify: eta sweep is empty");
  for (double eta : opt.eta_sweep)
    if (!(eta > 0.0)) throw InputError("certify: eta values must be positive");
  if (opt.n_max < 0) throw InputError("certify: n_max must be >= 0");
  if (opt.grid_size < 9) throw InputError("certify: grid_size must be >= 9");
  if (!(opt.tol > 0.0)) throw InputError("certify: tol must be positive");

  BoundCertificate cert;
  cert.provenance = model.provenance;
  cert.epsilon = drive.epsilon();
  cert.switching = drive.switching().describe();
  cert.options = opt;

  const double eps = drive.epsilon();
  const auto t_grid = constants_t_grid(drive, opt.constant_points);
  cert.admissibility = validate_model(model, drive, t_grid);

  auto& k = cert.constants;
  const auto sc = switch_constants(drive.switching());
  k.epsilon = eps;
  k.M = sc.M;
  k.M_prime = sc.M_prime;
  cert.lemma = lemma_constants(model, drive, t_grid);
  k.a = cert.lemma.a;
  k.b_eps = cert.lemma.b_eps;
  k.alpha = k.M_prime * k.a;
  k.beta = 3.0 * k.M_prime * k.M * k.a * k.a;
  k.E = commutator_constants(model, drive, -opt.n_max, opt.n_max - 2, t_grid);
  k.gamma[0] = 0.0;
  for (int n = 1; n <= opt.n_max; ++n) k.gamma[n] = k.gamma[n - 1] + k.M_prime * k.E.at(-n);
  cert.proposition = proposition_constants(model, drive, -opt.n_max, opt.n_max, t_grid, opt.eps_probe);
  k.A = cert.proposition.A;
  k.B = cert.proposition.B;
  cert.theoretical_Cn = theoretical_Cn(k, eps, opt.n_max);
  cert.corollary_bound = corollary_bound(cert.theoretical_Cn, k.A, k.B, eps, &k.D);

  const std::size_t cells = opt.eta_sweep.size();
  std::vector<detail::EtaOutcome> outcomes(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      try {
        outcomes[i] = detail::certify_eta(model, drive.with(eps, opt.eta_sweep[i]), opt, cert.lemma);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(cells)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& o : outcomes) {
    cert.per_eta.push_back(std::move(o.diag));
    for (auto& c : o.cells) cert.cells.push_back(c);
  }

  // verdicts
  using detail::fmt;
  auto& v = cert.verdicts;
  v.push_back({"admissibility", cert.admissibility.passed(),
               "eps*_max = " + fmt(cert.admissibility.eps_star_max) + ", min eigenvalue " +
                   fmt(cert.admissibility.min_eigenvalue)});

  bool sandwich_ok = true, inter_ok = true, unit_ok = true, window_ok = true;
  double worst_margin = std::numeric_limits<double>::infinity(), worst_unit = 0.0, worst_window = 0.0;
  for (const auto& c : cert.cells) {
    const double cn = cert.theoretical_Cn.at(c.n);
    const double cb = cert.corollary_bound.at(c.n);
    if (!(c.physical.sup <= cn + kVerdictSlack)) sandwich_ok = false;
    if (!(c.interaction.sup <= cb + kVerdictSlack)) inter_ok = false;
    worst_margin = std::min(worst_margin, cn - c.physical.sup);
    if (c.n == 0) {
      const double dev = std::max(std::abs(c.physical.sup - 1.0), std::abs(c.interaction.sup - 1.0));
      worst_unit = std::max(worst_unit, dev);
      if (!(dev <= 1e-8)) unit_ok = false;
    }
    worst_window = std::max(worst_window, c.window_delta);
    if (!(c.window_delta <= 1e-8)) window_ok = false;
  }
  v.push_back({"sandwich_bound", sandwich_ok,
               "every (n, eta) supremum <= C_n(eps); smallest margin " + fmt(worst_margin)});
  v.push_back({"unit_norm_n0", unit_ok, "max |sup - 1| at n = 0: " + fmt(worst_unit)});
  v.push_back({"window_reduction", window_ok, "max change on the extended grid " + fmt(worst_window)});
  v.push_back({"interaction_sandwich_bound", inter_ok, "every (n, eta) supremum <= C_n(eps)(1 + eps D_n)"});

  double worst_gauge = 0.0;
  for (const auto& d : cert.per_eta) worst_gauge = std::max(worst_gauge, d.gauge_residual);
  v.push_back({"gauge_identity", worst_gauge <= 20.0 * opt.tol, "max residual " + fmt(worst_gauge)});

  v.push_back({"relative_bound", cert.lemma.verified,
               "max_t ||H1 H^{-1/2}|| = " + fmt(cert.lemma.measured_max) + " vs a + b(eps) = " +
                   fmt(cert.lemma.a + cert.lemma.b_eps)});

  double worst_var = 0.0;
  for (int n = -opt.n_max; n <= opt.n_max; ++n)
    worst_var = std::max({worst_var, cert.proposition.A_variation.at(n), cert.proposition.B_variation.at(n)});
  v.push_back({"power_comparison", cert.proposition.finite && worst_var <= 0.25,
               "A_n, B_n finite; max variation across the epsilon probe " + fmt(worst_var)});

  if (opt.derivative_check) {
    bool ok = true;
    for (const auto& d : cert.per_eta) ok = ok && d.derivative.passed();
    v.push_back({"derivative_formula", ok, "quadrature vs finite difference, support, and bound"});
  }
  return cert;
}

} // namespace propcert
