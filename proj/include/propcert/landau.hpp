#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "propcert/models.hpp"

namespace propcert {

enum class PotentialPreset { zero, gaussian, cosine };

inline std::string to_string(PotentialPreset p) {
  switch (p) {
  case PotentialPreset::zero: return "zero";
  case PotentialPreset::gaussian: return "gaussian";
  case PotentialPreset::cosine: return "cosine";
  }
  return "unknown";
}

/// Bounded smooth test potential.
struct Potential {
  PotentialPreset preset = PotentialPreset::zero;
  double amplitude = 0.0;
  double width = 1.0;  // gaussian
  double x0 = 0.0, y0 = 0.0;
  double period = 4.0; // cosine lattice

  double operator()(double x, double y) const {
    switch (preset) {
    case PotentialPreset::zero: return 0.0;
    case PotentialPreset::gaussian: {
      const double r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
      return amplitude * std::exp(-r2 / (2.0 * width * width));
    }
    case PotentialPreset::cosine: {
      const double k = 2.0 * std::numbers::pi / period;
      return amplitude * (std::cos(k * x) + std::cos(k * y));
    }
    }
    return 0.0;
  }

  double sup_abs() const {
    switch (preset) {
    case PotentialPreset::zero: return 0.0;
    case PotentialPreset::gaussian: return std::abs(amplitude);
    case PotentialPreset::cosine: return 2.0 * std::abs(amplitude);
    }
    return 0.0;
  }
};

/// Magnetic Schroedinger operator 1/2 p_A^2 + lambda V on [-L, L]^2 with
/// Dirichlet boundaries, symmetric gauge A = B/2 (-x2, x1) (+ constant offset).
struct LandauSpec {
  int grid_points = 64; // per axis, interior points
  double half_width = 8.0;
  double field_B = 1.0;
  double lambda = 0.0;
  Potential potential;
  double switch_width = 2.0;                     // l1
  double gauge_offset_x = 0.0, gauge_offset_y = 0.0; // constant added to A

  double spacing() const { return 2.0 * half_width / (grid_points + 1); }
  double coordinate(int j) const { return -half_width + (j + 1) * spacing(); }
  Index dim() const { return static_cast<Index>(grid_points) * grid_points; }
  Index index(int i, int j) const { return static_cast<Index>(i) + static_cast<Index>(grid_points) * j; }

  /// B L^2 / N; above 1 the magnetic length is poorly resolved.
  double flux_ratio() const { return field_B * half_width * half_width / grid_points; }

  void validate() const {
    if (grid_points < 2) throw InputError("landau: grid_points must be >= 2");
    if (!(half_width > 0.0)) throw InputError("landau: half_width must be positive");
    if (!(field_B > 0.0)) throw InputError("landau: field_B must be positive");
    if (!(switch_width > 0.0)) throw InputError("landau: switch_width must be positive");
    if (!std::isfinite(lambda)) throw InputError("landau: lambda must be finite");
  }
};

namespace detail {

// e^{-1/u} for u > 0
inline double bump_tail(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

} // namespace detail

/// Smooth switch Lambda_1(x1): 0 for x1 <= -l, 1 for x1 >= l, C-infinity
/// in between.
inline double landau_switch(double x, double l) {
  const double u = (x + l) / (2.0 * l);
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double f = detail::bump_tail(u), g = detail::bump_tail(1.0 - u);
  return f / (f + g);
}

inline double landau_switch_derivative(double x, double l) {
  const double u = (x + l) / (2.0 * l);
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double f = detail::bump_tail(u), g = detail::bump_tail(1.0 - u);
  const double fp = f / (u * u), gp = g / ((1.0 - u) * (1.0 - u)); // d/du f(u), -d/du f(1-u)
  return (fp * g + f * gp) / ((f + g) * (f + g)) / (2.0 * l);
}

using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// Unshifted 1/2 p_A^2 + lambda V as a sparse 5-point stencil. The hopping
/// x -> x + h e_k carries the Peierls factor e^{-i A_k h} (A_k at the link
/// midpoint), so that plane waves see (k - A)^2 / 2 in the continuum limit.
inline SparseMatrix landau_h0_sparse(const LandauSpec& spec) {
  spec.validate();
  const int n = spec.grid_points;
  const double h = spec.spacing();
  const double hop = -0.5 / (h * h);
  const double b2 = 0.5 * spec.field_B;
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(static_cast<std::size_t>(5 * spec.dim()));
  for (int j = 0; j < n; ++j) {
    const double y = spec.coordinate(j);
    for (int i = 0; i < n; ++i) {
      const double x = spec.coordinate(i);
      const Index p = spec.index(i, j);
      trips.emplace_back(p, p, 2.0 / (h * h) + spec.lambda * spec.potential(x, y));
      if (i + 1 < n) {
        const double a1 = -b2 * y + spec.gauge_offset_x;
        const Complex w = hop * std::exp(Complex(0.0, -a1 * h));
        trips.emplace_back(p, spec.index(i + 1, j), w);
        trips.emplace_back(spec.index(i + 1, j), p, std::conj(w));
      }
      if (j + 1 < n) {
        const double a2 = b2 * x + spec.gauge_offset_y;
        const Complex w = hop * std::exp(Complex(0.0, -a2 * h));
        trips.emplace_back(p, spec.index(i, j + 1), w);
        trips.emplace_back(spec.index(i, j + 1), p, std::conj(w));
      }
    }
  }
  SparseMatrix m(spec.dim(), spec.dim());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

/// Covariant central difference p_{A,1} = -i (e^{-i A_1 h} T_+ - e^{+i A_1 h} T_-) / (2h).
inline SparseMatrix landau_momentum_x(const LandauSpec& spec) {
  const int n = spec.grid_points;
  const double h = spec.spacing();
  std::vector<Eigen::Triplet<Complex>> trips;
  for (int j = 0; j < n; ++j) {
    const double a1 = -0.5 * spec.field_B * spec.coordinate(j) + spec.gauge_offset_x;
    const Complex fwd = Complex(0.0, -1.0) * std::exp(Complex(0.0, -a1 * h)) / (2.0 * h);
    for (int i = 0; i < n; ++i) {
      const Index p = spec.index(i, j);
      if (i + 1 < n) trips.emplace_back(p, spec.index(i + 1, j), fwd);
      if (i > 0) trips.emplace_back(p, spec.index(i - 1, j), std::conj(fwd)); // i e^{+i A_1 h} / (2h)
    }
  }
  SparseMatrix m(spec.dim(), spec.dim());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

/// Lambda_1 and Lambda_1' sampled on the grid (functions of x1 only).
inline RealVector landau_switch_samples(const LandauSpec& spec, bool derivative = false) {
  RealVector v(spec.dim());
  for (int j = 0; j < spec.grid_points; ++j)
    for (int i = 0; i < spec.grid_points; ++i) {
      const double x = spec.coordinate(i);
      v(spec.index(i, j)) = derivative ? landau_switch_derivative(x, spec.switch_width)
                                       : landau_switch(x, spec.switch_width);
    }
  return v;
}

/// Shift = max(0, 1 + gamma0 - ground energy).
inline double landau_shift(double ground_energy, double gamma0) {
  return std::max(0.0, 1.0 + gamma0 - ground_energy);
}

/// Dense model pair (H0 + shift, Lambda_1). The ground energy of the unshifted
/// operator is measured unless supplied.
inline ModelPair build_landau_model(const LandauSpec& spec, double gamma0,
                                   std::optional<double> ground_energy = {}) {
  spec.validate();
  if (!(gamma0 > 0.0)) throw InputError("landau: gamma0 must be positive");
  const Matrix h0 = Matrix(landau_h0_sparse(spec));
  const double ground = ground_energy ? *ground_energy : lowest_eigenpairs(h0, 1).eigenvalues(0);
  const double shift = landau_shift(ground, gamma0);
  Matrix shifted = h0;
  shifted.diagonal().array() += shift;
  const RealVector lam = landau_switch_samples(spec);

  Json p;
  p["builder"] = "landau";
  p["grid_points"] = spec.grid_points;
  p["half_width"] = spec.half_width;
  p["field_B"] = spec.field_B;
  p["lambda"] = spec.lambda;
  p["potential"] = {{"preset", to_string(spec.potential.preset)},
                    {"amplitude", spec.potential.amplitude},
                    {"width", spec.potential.width},
                    {"center", {spec.potential.x0, spec.potential.y0}},
                    {"period", spec.potential.period}};
  p["switch_width"] = spec.switch_width;
  p["gauge_offset"] = {spec.gauge_offset_x, spec.gauge_offset_y};
  p["gamma0"] = gamma0;
  p["ground_energy"] = ground;
  p["energy_shift"] = shift;
  p["flux_ratio"] = spec.flux_ratio();
  p["coarse_grid_warning"] = spec.flux_ratio() > 1.0;
  if (spec.flux_ratio() > 1.0)
    warn("landau: B L^2 / N = " + std::to_string(spec.flux_ratio()) + " > 1; magnetic length under-resolved");

  // H1 is diagonal in the standard basis
  SpectralDecomposition sd1 = detail::sorted_spectrum(lam, Matrix::Identity(spec.dim(), spec.dim()));
  HermitianOperator h1(Matrix(lam.cast<Complex>().asDiagonal()), std::move(sd1));
  return make_model_pair(HermitianOperator(shifted), std::move(h1), gamma0, ModelKind::landau, std::move(p),
                         ground + shift);
}

struct LevelCluster {
  int k = 0;
  int states = 0;
  double mean = 0.0; // unshifted
  double expected = 0.0;         // B (k + 1/2)
  double relative_error = 0.0;   // |mean + shift - (shift + expected)| / (shift + expected)
  double unshifted_error = 0.0;  // |mean - expected| / expected
};

struct LevelReport {
  double shift = 0.0;
  double ground = 0.0;
  int computed = 0;
  int bulk = 0;
  std::vector<double> bulk_energies; // unshifted, ascending
  std::vector<LevelCluster> clusters;
  bool passed = false;
};

/// Lowest `states` eigenpairs of the unshifted operator; keeps states with at
/// least 99% of their mass in the inner half |x1|, |x2| <= L/2, groups them into
/// clusters split by gaps above 0.25 B, and compares the lowest `levels`
/// clusters with B (k + 1/2) after the shift.
inline LevelReport landau_level_check(const LandauSpec& spec, double gamma0, int states = 300, int levels = 3,
                                      double tolerance = 0.02) {
  const Matrix h0 = Matrix(landau_h0_sparse(spec));
  const auto sd = lowest_eigenpairs(h0, states);
  LevelReport r;
  r.computed = static_cast<int>(sd.eigenvalues.size());
  r.ground = sd.eigenvalues(0);
  r.shift = landau_shift(r.ground, gamma0);
  const double inner = 0.5 * spec.half_width;
  for (Index c = 0; c < sd.eigenvalues.size(); ++c) {
    double mass = 0.0;
    for (int j = 0; j < spec.grid_points; ++j)
      for (int i = 0; i < spec.grid_points; ++i)
        if (std::abs(spec.coordinate(i)) <= inner && std::abs(spec.coordinate(j)) <= inner)
          mass += std::norm(sd.eigenvectors(spec.index(i, j), c));
    if (mass >= 0.99 * sd.eigenvectors.col(c).squaredNorm()) r.bulk_energies.push_back(sd.eigenvalues(c));
  }
  r.bulk = static_cast<int>(r.bulk_energies.size());
  std::vector<std::vector<double>> groups;
  for (double e : r.bulk_energies) {
    if (groups.empty() || e - groups.back().back() > 0.25 * spec.field_B) groups.emplace_back();
    groups.back().push_back(e);
  }
  r.passed = static_cast<int>(groups.size()) >= levels;
  for (int k = 0; k < levels && k < static_cast<int>(groups.size()); ++k) {
    const auto& g = groups[static_cast<std::size_t>(k)];
    LevelCluster c;
    c.k = k;
    c.states = static_cast<int>(g.size());
    for (double e : g) c.mean += e;
    c.mean /= static_cast<double>(g.size());
    c.expected = spec.field_B * (k + 0.5);
    c.relative_error = std::abs(c.mean - c.expected) / (r.shift + c.expected);
    c.unshifted_error = std::abs(c.mean - c.expected) / c.expected;
    if (!(c.relative_error <= tolerance)) r.passed = false;
    r.clusters.push_back(c);
  }
  return r;
}

struct CommutatorRefinement {
  int coarse_points = 0, fine_points = 0;
  double coarse_h = 0.0, fine_h = 0.0;
  double coarse_residual = 0.0, fine_residual = 0.0;
  double ratio = 0.0;
  bool passed = false;
};

/// Discrete L2 norm of ([Lambda_1, H0] - (i/2)(p_{A,1} Lambda_1' + Lambda_1' p_{A,1})) psi
/// for a Gaussian psi of width `sigma` centred at the origin.
inline double landau_commutator_residual(const LandauSpec& spec, double sigma = 1.0) {
  const SparseMatrix h0 = landau_h0_sparse(spec);
  const SparseMatrix p = landau_momentum_x(spec);
  const RealVector lam = landau_switch_samples(spec);
  const RealVector dlam = landau_switch_samples(spec, true);
  Eigen::VectorXcd psi(spec.dim());
  for (int j = 0; j < spec.grid_points; ++j)
    for (int i = 0; i < spec.grid_points; ++i) {
      const double x = spec.coordinate(i), y = spec.coordinate(j);
      psi(spec.index(i, j)) = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
    }
  const Eigen::VectorXcd lc = lam.cast<Complex>(), dc = dlam.cast<Complex>();
  const Eigen::VectorXcd h0psi = h0 * psi;
  const Eigen::VectorXcd comm = lc.cwiseProduct(h0psi) - h0 * lc.cwiseProduct(psi).eval();
  const Eigen::VectorXcd pp = p * dc.cwiseProduct(psi).eval();
  const Eigen::VectorXcd dp = dc.cwiseProduct(p * psi);
  const Eigen::VectorXcd sym = Complex(0.0, 0.5) * (pp + dp);
  return spec.spacing() * (comm - sym).norm();
}

/// Residual on `spec` and on the grid with N -> 2N + 1 (spacing halved).
inline CommutatorRefinement landau_commutator_check(const LandauSpec& spec, double sigma = 1.0,
                                                    double min_ratio = 3.0) {
  CommutatorRefinement r;
  LandauSpec fine = spec;
  fine.grid_points = 2 * spec.grid_points + 1;
  r.coarse_points = spec.grid_points;
  r.fine_points = fine.grid_points;
  r.coarse_h = spec.spacing();
  r.fine_h = fine.spacing();
  r.coarse_residual = landau_commutator_residual(spec, sigma);
  r.fine_residual = landau_commutator_residual(fine, sigma);
  r.ratio = r.coarse_residual / r.fine_residual;
  r.passed = r.ratio >= min_ratio;
  return r;
}

} // namespace propcert
