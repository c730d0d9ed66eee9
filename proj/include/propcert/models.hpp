#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "propcert/operator_core.hpp"
#include "propcert/switching.hpp"

namespace propcert {

using Json = nlohmann::ordered_json;

enum class ModelKind { spectral, commuting, landau };

inline std::string to_string(ModelKind k) {
  switch (k) {
  case ModelKind::spectral: return "spectral";
  case ModelKind::commuting: return "commuting";
  case ModelKind::landau: return "landau";
  }
  return "unknown";
}

/// (H0, H1, gamma0) with builder metadata. Use make_model_pair (or one of the
/// builders) so the invariants are checked.
struct ModelPair {
  HermitianOperator H0;
  HermitianOperator H1;
  double gamma0;
  ModelKind kind;
  Json provenance;

  Index dim() const { return H0.dim(); }
};

/// Validates H0 >= 1 + gamma0 (to kFloorSlack) and, for commuting models,
/// ||[H1, H0]|| <= 1e-12 ||H0|| ||H1||. `known_min_eigenvalue` skips the full
/// eigensolve when the caller already measured the bottom of the spectrum.
inline ModelPair make_model_pair(HermitianOperator h0, HermitianOperator h1, double gamma0, ModelKind kind,
                                 Json provenance, std::optional<double> known_min_eigenvalue = {}) {
  if (h0.dim() != h1.dim()) throw DimensionError("model: H0 and H1 dimensions differ");
  if (!(gamma0 > 0.0)) throw InputError("model: gamma0 must be positive");
  const double lowest = known_min_eigenvalue ? *known_min_eigenvalue : h0.min_eigenvalue();
  if (lowest < (1.0 + gamma0) * (1.0 - kFloorSlack))
    throw InputError("model: smallest eigenvalue of H0 is " + std::to_string(lowest) + " < 1 + gamma0");
  if (kind == ModelKind::commuting) {
    const double scale = operator_norm(h0.matrix()) * operator_norm(h1.matrix());
    if (scale > 0.0 && operator_norm(commutator(h1, h0)) > 1e-12 * scale)
      throw InputError("model: commuting model has a non-vanishing commutator");
  }
  return ModelPair{std::move(h0), std::move(h1), gamma0, kind, std::move(provenance)};
}

/// mt19937_64 raw output turned into doubles by hand (53-bit uniforms and
/// Box-Muller normals) so draws do not depend on the standard library's
/// distribution implementations.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return Complex(re, im) * std::sqrt(0.5);
  }

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of R's diagonal absorbed into Q.
inline Matrix random_unitary(Index dim, SeededRng& rng) {
  Matrix z(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) z(i, j) = rng.complex_normal();
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    const Complex d = r(j, j);
    const double mag = std::abs(d);
    q.col(j) *= (mag > 0.0) ? d / mag : Complex(1.0);
  }
  return q;
}

/// Gaussian unitary ensemble draw, (X + X^dagger) / 2.
inline Matrix random_gue(Index dim, SeededRng& rng) {
  Matrix x(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) x(i, j) = rng.complex_normal();
  return 0.5 * (x + x.adjoint());
}

namespace detail {

inline void check_builder_ranges(Index dim, double gamma0, double spectrum_max, double coupling) {
  if (dim < 2) throw InputError("model builder: dim must be >= 2");
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw InputError("model builder: gamma0 must be positive");
  if (!(spectrum_max > 1.0 + gamma0) || !std::isfinite(spectrum_max))
    throw InputError("model builder: spectrum_max must exceed 1 + gamma0");
  if (!(coupling >= 0.0) || !std::isfinite(coupling)) throw InputError("model builder: coupling must be >= 0");
}

// Shared by both random builders so that equal seeds give equal H0.
inline HermitianOperator draw_h0(Index dim, double gamma0, double spectrum_max, SeededRng& rng,
                                 Matrix& basis) {
  RealVector lambda(dim);
  const double lo = 1.0 + gamma0;
  for (Index i = 0; i < dim; ++i) lambda(i) = lo + (spectrum_max - lo) * rng.uniform();
  basis = random_unitary(dim, rng);
  return HermitianOperator::from_spectrum(lambda, basis);
}

inline Json builder_provenance(const char* builder, Index dim, double gamma0, double spectrum_max,
                               double coupling, std::uint64_t seed) {
  Json p;
  p["builder"] = builder;
  p["dim"] = dim;
  p["gamma0"] = gamma0;
  p["spectrum_max"] = spectrum_max;
  p["coupling"] = coupling;
  p["seed"] = seed;
  p["rng"] = "mt19937_64; 53-bit uniforms; Box-Muller normals";
  return p;
}

} // namespace detail

/// H0 with eigenvalues uniform in [1 + gamma0, spectrum_max] in a Haar basis;
/// H1 a GUE draw scaled so that ||H1 H0^(-1/2)|| = coupling.
inline ModelPair build_spectral_model(Index dim, double gamma0, double spectrum_max, double coupling,
                                      std::uint64_t seed) {
  detail::check_builder_ranges(dim, gamma0, spectrum_max, coupling);
  SeededRng rng(seed);
  Matrix basis;
  HermitianOperator h0 = detail::draw_h0(dim, gamma0, spectrum_max, rng, basis);
  HermitianOperator h1 = HermitianOperator::zero(dim);
  if (coupling > 0.0) {
    HermitianOperator g(random_gue(dim, rng));
    const double raw = relative_half_bound(g, h0);
    h1 = HermitianOperator(g.matrix() * (coupling / raw));
  }
  return make_model_pair(h0, h1, gamma0, ModelKind::spectral,
                         detail::builder_provenance("spectral", dim, gamma0, spectrum_max, coupling, seed));
}

/// H0 and H1 diagonal in the same Haar basis; H1 eigenvalues Gaussian,
/// scaled so that ||H1 H0^(-1/2)|| = coupling.
inline ModelPair build_commuting_model(Index dim, double gamma0, double spectrum_max, double coupling,
                                       std::uint64_t seed) {
  detail::check_builder_ranges(dim, gamma0, spectrum_max, coupling);
  SeededRng rng(seed);
  Matrix basis;
  HermitianOperator h0 = detail::draw_h0(dim, gamma0, spectrum_max, rng, basis);
  HermitianOperator h1 = HermitianOperator::zero(dim);
  if (coupling > 0.0) {
    // eigenvalues of H0 in the basis order they were drawn in
    RealVector lambda = (basis.adjoint() * h0.matrix() * basis).diagonal().real();
    RealVector mu(dim);
    for (Index i = 0; i < dim; ++i) mu(i) = rng.normal();
    const double raw = (mu.array().abs() / lambda.array().sqrt()).maxCoeff();
    h1 = HermitianOperator::from_spectrum(mu * (coupling / raw), basis);
  }
  return make_model_pair(h0, h1, gamma0, ModelKind::commuting,
                         detail::builder_provenance("commuting", dim, gamma0, spectrum_max, coupling, seed));
}

/// Supremum of admissible epsilon: gamma0 / ((3 gamma0 + 1) M ||H1 H0^(-1)||);
/// infinite when the denominator vanishes.
inline double eps_star_max(const ModelPair& model, const SwitchFunction& sw) {
  const double m = switch_constants(sw).M;
  const double h1_h0inv = operator_norm(model.H1.matrix() * half_power_matrix(model.H0.spectrum(), -2));
  const double denom = (3.0 * model.gamma0 + 1.0) * m * h1_h0inv;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return model.gamma0 / denom;
}

/// Fraction of eps_star_max that a drive may use.
inline constexpr double kEpsilonMargin = 0.95;

/// (epsilon, eta, g). `admissible` enforces epsilon <= 0.95 eps*_max for the
/// given model; `unchecked` only validates ranges (audits, epsilon probes).
class DriveParams {
public:
  static DriveParams admissible(const ModelPair& model, double epsilon, double eta, SwitchFunction sw) {
    DriveParams d = unchecked(epsilon, eta, std::move(sw));
    const double bound = eps_star_max(model, d.switching_);
    if (epsilon > kEpsilonMargin * bound)
      throw InputError("drive: epsilon = " + std::to_string(epsilon) + " exceeds 0.95 * eps*_max = " +
                       std::to_string(kEpsilonMargin * bound));
    return d;
  }

  static DriveParams unchecked(double epsilon, double eta, SwitchFunction sw) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InputError("drive: epsilon must be >= 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("drive: eta must be positive");
    return DriveParams(epsilon, eta, std::move(sw));
  }

  double epsilon() const { return epsilon_; }
  double eta() const { return eta_; }
  const SwitchFunction& switching() const { return switching_; }

  /// Same switch, different (epsilon, eta).
  DriveParams with(double epsilon, double eta) const { return unchecked(epsilon, eta, switching_); }

  /// epsilon * g(eta t)
  double coupling_at(double t) const { return epsilon_ * switching_.g(eta_ * t); }

  /// (epsilon / eta) phi(s), the gauge angle at macroscopic time s.
  double gauge_angle(double s) const { return epsilon_ / eta_ * switching_.phi(s); }

private:
  DriveParams(double epsilon, double eta, SwitchFunction sw)
      : epsilon_(epsilon), eta_(eta), switching_(std::move(sw)) {}
  double epsilon_;
  double eta_;
  SwitchFunction switching_;
};

/// H(eps, eta, t) = H0 + eps g(eta t) H1. Returns H0 itself (shared cache)
/// wherever the coupling vanishes.
inline HermitianOperator hamiltonian_at(const ModelPair& model, const DriveParams& drive, double t) {
  const double c = drive.coupling_at(t);
  if (c == 0.0) return model.H0;
  return HermitianOperator(model.H0.matrix() + c * model.H1.matrix());
}

/// exp(+i angle H1) (sign = +1) or exp(-i angle H1) (sign = -1).
inline Matrix h1_exponential(const ModelPair& model, double angle) {
  if (angle == 0.0) return Matrix::Identity(model.dim(), model.dim());
  return unitary_exponential(model.H1.spectrum(), -angle);
}

/// H^(s) = e^{i (eps/eta) phi(s) H1} H0 e^{-i (eps/eta) phi(s) H1}. The
/// spectral cache is the conjugated H0 eigenbasis.
inline HermitianOperator interaction_hamiltonian_at(const ModelPair& model, const DriveParams& drive, double s) {
  const double angle = drive.gauge_angle(s);
  if (angle == 0.0) return model.H0;
  const Matrix w = h1_exponential(model, angle);
  const auto& sd0 = model.H0.spectrum();
  SpectralDecomposition sd{sd0.eigenvalues, w * sd0.eigenvectors};
  return HermitianOperator(w * model.H0.matrix() * w.adjoint(), std::move(sd));
}

struct AdmissibilityReport {
  double epsilon = 0.0;
  double eps_star_max = 0.0; // +inf when H1 = 0 or M = 0
  bool eps_star_bounded = true;
  double M = 0.0;
  double h1_h0inv_norm = 0.0;
  bool epsilon_strict_ok = false; // eps < eps*_max
  bool epsilon_margin_ok = false; // eps <= 0.95 eps*_max
  double min_eigenvalue = 0.0;    // over the t grid
  double argmin_t = 0.0;
  bool floor_ok = false;          // min eigenvalue >= 1
  bool passed() const { return epsilon_margin_ok && floor_ok; }
};

inline AdmissibilityReport validate_model(const ModelPair& model, const DriveParams& drive,
                                          const std::vector<double>& t_grid) {
  AdmissibilityReport r;
  r.epsilon = drive.epsilon();
  r.M = switch_constants(drive.switching()).M;
  r.h1_h0inv_norm = operator_norm(model.H1.matrix() * half_power_matrix(model.H0.spectrum(), -2));
  r.eps_star_max = eps_star_max(model, drive.switching());
  r.eps_star_bounded = std::isfinite(r.eps_star_max);
  r.epsilon_strict_ok = !r.eps_star_bounded || r.epsilon < r.eps_star_max;
  r.epsilon_margin_ok = !r.eps_star_bounded || r.epsilon <= kEpsilonMargin * r.eps_star_max;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    const double lo = hamiltonian_at(model, drive, t).min_eigenvalue();
    if (lo < r.min_eigenvalue) {
      r.min_eigenvalue = lo;
      r.argmin_t = t;
    }
  }
  if (t_grid.empty()) r.min_eigenvalue = model.H0.min_eigenvalue();
  r.floor_ok = r.min_eigenvalue >= 1.0 - kFloorSlack;
  return r;
}

/// `points` equispaced points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int points) {
  std::vector<double> out(static_cast<std::size_t>(points));
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  out.back() = hi;
  return out;
}

/// t grid covering the switching window [0, 1/eta].
inline std::vector<double> switching_window_grid(const DriveParams& drive, int points) {
  return linspace(0.0, 1.0 / drive.eta(), points);
}

} // namespace propcert
