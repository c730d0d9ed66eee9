#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>

#include "propcert/errors.hpp"
#include "propcert/quadrature.hpp"

namespace propcert {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;
};

/// Relative tolerance below 1 that negative powers still accept; values in
/// [1 - kFloorSlack, 1) are clamped to 1.
inline constexpr double kFloorSlack = 1e-9;

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw DimensionError(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

inline SpectralDecomposition sorted_spectrum(RealVector values, Matrix vectors) {
  const Index n = values.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) < values(b); });
  SpectralDecomposition out{RealVector(n), Matrix(vectors.rows(), n)};
  for (Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = values(order[static_cast<std::size_t>(i)]);
    out.eigenvectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline Matrix reconstruct(const RealVector& values, const Matrix& vectors) {
  return vectors * values.asDiagonal() * vectors.adjoint();
}

} // namespace detail

/// Dense Hermitian matrix with a lazily computed, shared spectral cache.
/// Copies share the entries and the cache; nothing is mutated after the
/// cache has been filled.
class HermitianOperator {
public:
  explicit HermitianOperator(const Matrix& entries) : state_(std::make_shared<State>()) {
    detail::require_square(entries, "HermitianOperator");
    detail::require_finite(entries, "HermitianOperator");
    const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
    const double asymmetry = entries.size() == 0 ? 0.0 : (entries - entries.adjoint()).cwiseAbs().maxCoeff();
    if (asymmetry > 1e-10 * scale)
      warn("HermitianOperator: asymmetry " + std::to_string(asymmetry) + " symmetrized away");
    state_->entries = 0.5 * (entries + entries.adjoint());
  }

  /// Trusted construction with a known spectral decomposition.
  HermitianOperator(const Matrix& entries, SpectralDecomposition spectrum)
      : HermitianOperator(entries) {
    state_->spectrum = std::move(spectrum);
    std::call_once(state_->once, [] {});
    state_->ready.store(true, std::memory_order_release);
  }

  static HermitianOperator from_spectrum(const RealVector& values, const Matrix& vectors) {
    auto sd = detail::sorted_spectrum(values, vectors);
    Matrix m = detail::reconstruct(sd.eigenvalues, sd.eigenvectors);
    return HermitianOperator(m, std::move(sd));
  }

  static HermitianOperator zero(Index dim) {
    return HermitianOperator(Matrix::Zero(dim, dim),
                             SpectralDecomposition{RealVector::Zero(dim), Matrix::Identity(dim, dim)});
  }

  static HermitianOperator identity(Index dim) {
    return HermitianOperator(Matrix::Identity(dim, dim),
                             SpectralDecomposition{RealVector::Ones(dim), Matrix::Identity(dim, dim)});
  }

  Index dim() const { return state_->entries.rows(); }
  const Matrix& matrix() const { return state_->entries; }

  const SpectralDecomposition& spectrum() const {
    std::call_once(state_->once, [this] {
      Eigen::SelfAdjointEigenSolver<Matrix> solver(state_->entries);
      if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
      state_->spectrum = SpectralDecomposition{solver.eigenvalues(), solver.eigenvectors()};
      state_->ready.store(true, std::memory_order_release);
    });
    return *state_->spectrum;
  }

  double min_eigenvalue() const { return spectrum().eigenvalues(0); }
  double max_eigenvalue() const { return spectrum().eigenvalues(dim() - 1); }

  /// H + c*Id, reusing the cached eigenvectors when present.
  HermitianOperator shifted(double c) const {
    Matrix m = matrix();
    m.diagonal().array() += c;
    if (state_->ready.load(std::memory_order_acquire)) {
      SpectralDecomposition sd = *state_->spectrum;
      sd.eigenvalues.array() += c;
      return HermitianOperator(m, std::move(sd));
    }
    return HermitianOperator(m);
  }

private:
  struct State {
    Matrix entries;
    std::once_flag once;
    std::optional<SpectralDecomposition> spectrum;
    std::atomic<bool> ready{false};
  };
  std::shared_ptr<State> state_;
};

inline SpectralDecomposition eigendecompose(const Matrix& h) {
  detail::require_square(h, "eigendecompose");
  detail::require_finite(h, "eigendecompose");
  return HermitianOperator(h).spectrum();
}

inline const SpectralDecomposition& eigendecompose(const HermitianOperator& h) { return h.spectrum(); }

/// Lowest `count` eigenpairs via LAPACK's MRRR driver; meant for dimensions
/// where a full dense solve is too slow.
inline SpectralDecomposition lowest_eigenpairs(const Matrix& h, Index count) {
  detail::require_square(h, "lowest_eigenpairs");
  detail::require_finite(h, "lowest_eigenpairs");
  const Index n = h.rows();
  count = std::clamp<Index>(count, 1, n);
  Matrix work = h;
  RealVector w(n);
  Matrix z(n, count);
  std::vector<lapack_int> support(static_cast<std::size_t>(2 * count));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n),
      reinterpret_cast<lapack_complex_double*>(work.data()), static_cast<lapack_int>(n), 0.0, 0.0, 1,
      static_cast<lapack_int>(count), 0.0, &found, w.data(),
      reinterpret_cast<lapack_complex_double*>(z.data()), static_cast<lapack_int>(n), support.data());
  if (info != 0 || found != count)
    throw NumericalError("zheevr failed (info " + std::to_string(info) + ")");
  return SpectralDecomposition{w.head(count), z};
}

/// lambda^(n/2) with the spectral-floor rule for negative n.
inline RealVector half_power_values(const RealVector& lambda, int n) {
  RealVector out(lambda.size());
  if (n == 0) return RealVector::Ones(lambda.size());
  const double lowest = lambda.size() ? lambda.minCoeff() : 1.0;
  if (n < 0 && lowest < 1.0 - kFloorSlack)
    throw SpectralFloorError("spectral floor violated: eigenvalue " + std::to_string(lowest) +
                                 " < 1 for power " + std::to_string(n) + "/2",
                             lowest);
  if (n > 0 && (n % 2 != 0) && lowest < 0.0)
    throw SpectralFloorError("fractional power of an operator with negative eigenvalue " +
                                 std::to_string(lowest),
                             lowest);
  const double exponent = 0.5 * n;
  for (Index i = 0; i < lambda.size(); ++i) {
    double l = lambda(i);
    if (n < 0 && l < 1.0) l = 1.0;
    out(i) = (n % 2 == 0) ? std::pow(l, n / 2) : std::pow(l, exponent);
  }
  return out;
}

/// H^(n/2) by spectral calculus.
inline HermitianOperator half_power(const HermitianOperator& h, int n) {
  const auto& sd = h.spectrum();
  return HermitianOperator::from_spectrum(half_power_values(sd.eigenvalues, n), sd.eigenvectors);
}

/// Same as half_power but returns the bare matrix (no cache bookkeeping).
inline Matrix half_power_matrix(const SpectralDecomposition& sd, int n) {
  return detail::reconstruct(half_power_values(sd.eigenvalues, n), sd.eigenvectors);
}

/// exp(-i tau H).
inline Matrix unitary_exponential(const SpectralDecomposition& sd, double tau) {
  Eigen::VectorXcd phases = (sd.eigenvalues * Complex(0.0, -tau)).array().exp();
  return sd.eigenvectors * phases.asDiagonal() * sd.eigenvectors.adjoint();
}

inline Matrix unitary_exponential(const HermitianOperator& h, double tau) {
  return unitary_exponential(h.spectrum(), tau);
}

/// Largest singular value.
inline double operator_norm(const Matrix& a) {
  detail::require_finite(a, "operator_norm");
  if (a.size() == 0) return 0.0;
  // singular values only; gesdd overwrites its input
  Matrix work = a;
  const auto m = static_cast<lapack_int>(a.rows()), n = static_cast<lapack_int>(a.cols());
  std::vector<double> s(static_cast<std::size_t>(std::min(m, n)));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n,
                                         reinterpret_cast<lapack_complex_double*>(work.data()), m, s.data(),
                                         nullptr, 1, nullptr, 1);
  if (info != 0) throw NumericalError("operator_norm: zgesdd failed, info = " + std::to_string(info));
  return s[0];
}

inline Matrix commutator(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw DimensionError("commutator: dimension mismatch");
  return a * b - b * a;
}

inline Matrix commutator(const HermitianOperator& a, const HermitianOperator& b) {
  return commutator(a.matrix(), b.matrix());
}

/// a = ||H1 H0^(-1/2)||, the relative bound of H1 with respect to H0^(1/2)
/// with zero constant term.
inline double relative_half_bound(const HermitianOperator& h1, const HermitianOperator& h0) {
  if (h1.dim() != h0.dim()) throw DimensionError("relative_half_bound: dimension mismatch");
  return operator_norm(h1.matrix() * half_power_matrix(h0.spectrum(), -1));
}

namespace detail {

inline void require_positive_definite(const Matrix& h, const char* what) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw InputError(std::string(what) + ": operator is not positive definite");
}

} // namespace detail

/// sqrt(H) = (2/pi) int_0^inf H (x^2 + H)^(-1) dx, integrated after x = tan(theta).
/// Resolvents come from Cholesky solves, never from the eigensolver, so the
/// result is an independent check of half_power(H, 1).
inline HermitianOperator sqrt_quadrature(const HermitianOperator& h, double tol) {
  const Matrix& a = h.matrix();
  detail::require_positive_definite(a, "sqrt_quadrature");
  auto integrand = [&](double theta) -> Matrix {
    const double s2 = std::sin(theta) * std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    Matrix shifted = c2 * a;
    shifted.diagonal().array() += s2;
    return shifted.llt().solve(a);
  };
  auto result = integrate_matrix(integrand, 0.0, 0.5 * std::numbers::pi, tol);
  return HermitianOperator(result.value * (2.0 / std::numbers::pi));
}

/// (2/pi) int_0^inf H^(1/2) (x^2 + H)^(-1) dx, which equals the identity.
inline Matrix identity_quadrature(const HermitianOperator& h, double tol) {
  const Matrix& a = h.matrix();
  detail::require_positive_definite(a, "identity_quadrature");
  const Matrix root = half_power(h, 1).matrix();
  auto integrand = [&](double theta) -> Matrix {
    const double s2 = std::sin(theta) * std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    Matrix shifted = c2 * a;
    shifted.diagonal().array() += s2;
    return shifted.llt().solve(root);
  };
  auto result = integrate_matrix(integrand, 0.0, 0.5 * std::numbers::pi, tol);
  return result.value * (2.0 / std::numbers::pi);
}

} // namespace propcert
