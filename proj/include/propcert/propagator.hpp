#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "propcert/models.hpp"

namespace propcert {

enum class Picture { physical, interaction };

inline std::string to_string(Picture p) { return p == Picture::physical ? "physical" : "interaction"; }

/// Two-parameter unitary U(to, from) with its integration diagnostics.
/// Construction rejects matrices whose unitarity drift exceeds 1e-8.
class UnitaryPropagator {
public:
  UnitaryPropagator(Matrix matrix, Picture picture, double from, double to, DriveParams drive,
                    double error_estimate, long steps)
      : matrix_(std::move(matrix)), picture_(picture), from_(from), to_(to), drive_(std::move(drive)),
        error_estimate_(error_estimate), steps_(steps) {
    drift_ = unitarity_drift(matrix_);
    if (!(drift_ <= 1e-8))
      throw NumericalError("propagator: unitarity drift " + std::to_string(drift_) + " exceeds 1e-8");
  }

  static double unitarity_drift(const Matrix& u) {
    return operator_norm(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()));
  }

  const Matrix& matrix() const { return matrix_; }
  Picture picture() const { return picture_; }
  double from() const { return from_; }
  double to() const { return to_; }
  const DriveParams& drive() const { return drive_; }
  double error_estimate() const { return error_estimate_; }
  long steps() const { return steps_; }
  double drift() const { return drift_; }

private:
  Matrix matrix_;
  Picture picture_;
  double from_, to_;
  DriveParams drive_;
  double error_estimate_;
  long steps_;
  double drift_;
};

struct EvolveOptions {
  long max_steps = 10'000'000;
  /// Forced uniform step (no error control); used for convergence-order studies.
  std::optional<double> fixed_step;
  /// Replace the accumulated product by its polar factor after every step.
  bool polar_projection = false;
};

namespace detail {

inline Matrix polar_factor(const Matrix& u) {
  Eigen::JacobiSVD<Matrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

struct SegmentResult {
  Matrix u;
  double error = 0.0;
  long steps = 0;
};

// The two pictures differ only in the exponential of one midpoint step and in
// where the generator is constant.
struct StepRule {
  const ModelPair* model;
  const DriveParams* drive;
  Picture picture;

  // exp(-i delta G(mid)); G = H(t) or Hhat(s)/eta
  Matrix step(double mid, double delta) const {
    if (picture == Picture::physical) return unitary_exponential(hamiltonian_at(*model, *drive, mid), delta);
    const Matrix inner = unitary_exponential(model->H0.spectrum(), delta / drive->eta());
    const double angle = drive->gauge_angle(mid);
    if (angle == 0.0) return inner;
    const Matrix w = h1_exponential(*model, angle);
    return w * inner * w.adjoint();
  }

  // Points where the generator's smoothness changes.
  std::vector<double> breakpoints() const {
    if (picture == Picture::physical) return {0.0, 1.0 / drive->eta()};
    return {0.0, 1.0};
  }

  // Exact propagator on [a, b] if the generator is constant there.
  std::optional<Matrix> constant_piece(double a, double b) const {
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (picture == Picture::physical) {
      if (hi <= 0.0) return unitary_exponential(model->H0.spectrum(), b - a);
      if (lo >= 1.0 / drive->eta())
        return unitary_exponential(hamiltonian_at(*model, *drive, 1.0 / drive->eta()), b - a);
      return std::nullopt;
    }
    if (hi <= 0.0) return unitary_exponential(model->H0.spectrum(), (b - a) / drive->eta());
    return std::nullopt;
  }

  double initial_step() const {
    const auto& ev = model->H0.spectrum().eigenvalues;
    const double h0_norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    const double dt = std::min(0.01 / drive->eta(), 0.01) / (1.0 + h0_norm);
    return picture == Picture::physical ? dt : dt * drive->eta();
  }
};

inline SegmentResult integrate_piece(const StepRule& rule, double a, double b, double tol_rate,
                                     const EvolveOptions& opt, long& budget_used) {
  const Index d = rule.model->dim();
  SegmentResult out{Matrix::Identity(d, d), 0.0, 0};
  if (a == b) return out;
  if (auto exact = rule.constant_piece(a, b)) {
    out.u = std::move(*exact);
    out.steps = 1;
    return out;
  }
  const double dir = b > a ? 1.0 : -1.0;
  const double length = std::abs(b - a);

  if (opt.fixed_step) {
    const long n = std::max<long>(1, static_cast<long>(std::ceil(length / *opt.fixed_step - 1e-12)));
    const double delta = dir * length / static_cast<double>(n);
    for (long k = 0; k < n; ++k) {
      if (++budget_used > opt.max_steps)
        throw BudgetError("propagator: step budget exhausted", budget_used, a + delta * k);
      out.u = rule.step(a + delta * (k + 0.5), delta) * out.u;
      if (opt.polar_projection) out.u = polar_factor(out.u);
    }
    out.steps = n;
    return out;
  }

  double t = a;
  double h = std::min(rule.initial_step(), length);
  while (dir * (b - t) > 0.0) {
    double delta = dir * std::min(h, std::abs(b - t));
    // avoid a sliver of a final step
    if (std::abs(b - t) - std::abs(delta) < 1e-3 * std::abs(delta)) delta = b - t;
    if (++budget_used > opt.max_steps)
      throw BudgetError("propagator: step budget of " + std::to_string(opt.max_steps) +
                            " exhausted at " + std::to_string(t),
                        budget_used, t);
    const Matrix full = rule.step(t + 0.5 * delta, delta);
    const Matrix half = rule.step(t + 0.75 * delta, 0.5 * delta) * rule.step(t + 0.25 * delta, 0.5 * delta);
    const double err = operator_norm(half - full) / 3.0;
    // below this the estimate is roundoff in the two products, not truncation
    const double floor = 64.0 * std::numeric_limits<double>::epsilon();
    const double allowed = std::max(tol_rate * std::abs(delta), floor);
    if (err <= allowed) {
      out.u = half * out.u;
      if (opt.polar_projection) out.u = polar_factor(out.u);
      out.error += err;
      ++out.steps;
      t = (delta == b - t) ? b : t + delta;
    }
    const double factor = err > 0.0 ? 0.9 * std::sqrt(allowed / err) : 2.0;
    h = std::abs(delta) * std::clamp(factor, 0.3, 2.0);
  }
  return out;
}

inline SegmentResult integrate(const StepRule& rule, double from, double to, double tol,
                               const EvolveOptions& opt, long& budget_used) {
  if (!(tol > 0.0)) throw InputError("propagator: tol must be positive");
  const Index d = rule.model->dim();
  SegmentResult total{Matrix::Identity(d, d), 0.0, 0};
  if (from == to) return total;
  std::vector<double> cuts{from};
  const double lo = std::min(from, to), hi = std::max(from, to);
  auto bps = rule.breakpoints();
  if (to < from) std::reverse(bps.begin(), bps.end());
  for (double p : bps)
    if (p > lo && p < hi) cuts.push_back(p);
  cuts.push_back(to);
  const double rate = tol / (hi - lo);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    SegmentResult piece = integrate_piece(rule, cuts[i], cuts[i + 1], rate, opt, budget_used);
    total.u = piece.u * total.u;
    total.error += piece.error;
    total.steps += piece.steps;
  }
  return total;
}

} // namespace detail

/// U(t_to, t_from) for i dU/dt = H(eps, eta, t) U by midpoint exponentials
/// with step-doubling error control; constant stretches are exponentiated
/// exactly.
inline UnitaryPropagator evolve(const ModelPair& model, const DriveParams& drive, double t_from, double t_to,
                                double tol, const EvolveOptions& opt = {}) {
  long used = 0;
  detail::StepRule rule{&model, &drive, Picture::physical};
  auto r = detail::integrate(rule, t_from, t_to, tol, opt, used);
  return UnitaryPropagator(std::move(r.u), Picture::physical, t_from, t_to, drive, r.error, r.steps);
}

/// Uhat(s_to, s_from) for i eta dUhat/ds = Hhat(eps, eta, s) Uhat, in
/// macroscopic time.
inline UnitaryPropagator evolve_interaction(const ModelPair& model, const DriveParams& drive, double s_from,
                                            double s_to, double tol, const EvolveOptions& opt = {}) {
  long used = 0;
  detail::StepRule rule{&model, &drive, Picture::interaction};
  auto r = detail::integrate(rule, s_from, s_to, tol, opt, used);
  return UnitaryPropagator(std::move(r.u), Picture::interaction, s_from, s_to, drive, r.error, r.steps);
}

/// e^{i(eps/eta)phi(s)H1} U(s/eta, u/eta) e^{-i(eps/eta)phi(u)H1}: the
/// interaction-picture propagator predicted from a physical one.
inline UnitaryPropagator gauge_transport(const UnitaryPropagator& u_phys, const ModelPair& model,
                                         const DriveParams& drive, double s, double u) {
  if (u_phys.picture() != Picture::physical)
    throw InputError("gauge_transport: expected a physical-picture propagator");
  const double eta = drive.eta();
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y)); };
  if (!close(u_phys.from(), u / eta) || !close(u_phys.to(), s / eta))
    throw InputError("gauge_transport: propagator endpoints do not match (u/eta, s/eta)");
  Matrix m = h1_exponential(model, drive.gauge_angle(s)) * u_phys.matrix() *
             h1_exponential(model, drive.gauge_angle(u)).adjoint();
  return UnitaryPropagator(std::move(m), Picture::interaction, u, s, drive, u_phys.error_estimate(),
                           u_phys.steps());
}

/// Cumulative propagators P_i = U(x_i, x_0) on an increasing grid;
/// U(x_i, x_j) = P_i P_j^dagger.
class PropagatorGrid {
public:
  PropagatorGrid(Picture picture, std::vector<double> points, std::vector<Matrix> cumulative,
                 std::vector<double> segment_errors, long steps)
      : picture_(picture), points_(std::move(points)), cumulative_(std::move(cumulative)),
        segment_errors_(std::move(segment_errors)), steps_(steps) {}

  Picture picture() const { return picture_; }
  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Matrix& cumulative(std::size_t i) const { return cumulative_[i]; }
  Matrix between(std::size_t i, std::size_t j) const { return cumulative_[i] * cumulative_[j].adjoint(); }
  const std::vector<double>& segment_errors() const { return segment_errors_; }
  double error_estimate() const {
    double e = 0.0;
    for (double x : segment_errors_) e += x;
    return e;
  }
  long steps() const { return steps_; }

  /// Every `stride`-th point (the last point must be kept).
  PropagatorGrid subsample(std::size_t stride) const {
    if (stride == 0 || (points_.size() - 1) % stride != 0)
      throw InputError("propagator grid: stride does not divide the grid");
    std::vector<double> pts;
    std::vector<Matrix> cum;
    std::vector<double> errs;
    for (std::size_t i = 0; i < points_.size(); i += stride) {
      pts.push_back(points_[i]);
      cum.push_back(cumulative_[i]);
      if (i > 0) {
        double e = 0.0;
        for (std::size_t k = i - stride; k < i; ++k) e += segment_errors_[k];
        errs.push_back(e);
      }
    }
    return PropagatorGrid(picture_, std::move(pts), std::move(cum), std::move(errs), steps_);
  }

  /// Largest unitarity drift over the cached products.
  double max_drift() const {
    double d = 0.0;
    for (const auto& p : cumulative_) d = std::max(d, UnitaryPropagator::unitarity_drift(p));
    return d;
  }

private:
  Picture picture_;
  std::vector<double> points_;
  std::vector<Matrix> cumulative_;
  std::vector<double> segment_errors_;
  long steps_;
};

/// Integrates the grid's elementary segments, each with its share
/// tol * |segment| / |span| of the tolerance, and chains them.
inline PropagatorGrid build_propagator_grid(const ModelPair& model, const DriveParams& drive, Picture picture,
                                            std::vector<double> points, double tol,
                                            const EvolveOptions& opt = {}) {
  if (points.size() < 2) throw InputError("propagator grid: need at least two points");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1])) throw InputError("propagator grid: points must increase");
  const double span = points.back() - points.front();
  detail::StepRule rule{&model, &drive, picture};
  std::vector<Matrix> cumulative{Matrix::Identity(model.dim(), model.dim())};
  std::vector<double> errors;
  long steps = 0, used = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double seg_tol = tol * (points[i] - points[i - 1]) / span;
    auto r = detail::integrate(rule, points[i - 1], points[i], seg_tol, opt, used);
    cumulative.push_back(r.u * cumulative.back());
    errors.push_back(r.error);
    steps += r.steps;
  }
  auto grid = PropagatorGrid(picture, std::move(points), std::move(cumulative), std::move(errors), steps);
  const double drift = grid.max_drift();
  if (!(drift <= 1e-8))
    throw NumericalError("propagator grid: unitarity drift " + std::to_string(drift) + " exceeds 1e-8");
  return grid;
}

/// Physical-picture grid extended by `before` points below and `after` points
/// above the base grid (same spacing). The generator is constant out there, so
/// the new segments are exact exponentials and the base segments are reused.
inline PropagatorGrid extend_physical_grid(const PropagatorGrid& base, const ModelPair& model,
                                           const DriveParams& drive, int before, int after) {
  if (base.picture() != Picture::physical) throw InputError("extend grid: physical picture only");
  const auto& pts = base.points();
  const double first = pts.front(), last = pts.back();
  if (first > 0.0 || last < 1.0 / drive.eta() * (1.0 - 1e-12))
    throw InputError("extend grid: base grid must cover [0, 1/eta]");
  const double spacing = (last - first) / static_cast<double>(pts.size() - 1);
  const auto& h0 = model.H0.spectrum();
  const auto h_end = hamiltonian_at(model, drive, last).spectrum();

  std::vector<double> points;
  std::vector<Matrix> cumulative;
  // below: P(x) = U(x, x_first) = exp(-i (x - x_first) H0), relative to the new origin
  for (int k = before; k >= 1; --k) points.push_back(first - k * spacing);
  for (double p : pts) points.push_back(p);
  for (int k = 1; k <= after; ++k) points.push_back(last + k * spacing);

  // new origin is points[0]; P_new(x) = U(x, x_first) U(x_first, points[0])
  const Matrix to_first = unitary_exponential(h0, first - points.front());
  for (int k = 0; k < before; ++k)
    cumulative.push_back(unitary_exponential(h0, points[static_cast<std::size_t>(k)] - first) * to_first);
  for (std::size_t i = 0; i < pts.size(); ++i) cumulative.push_back(base.cumulative(i) * to_first);
  for (int k = 1; k <= after; ++k)
    cumulative.push_back(unitary_exponential(h_end, k * spacing) * base.cumulative(pts.size() - 1) * to_first);

  std::vector<double> errors(static_cast<std::size_t>(before), 0.0);
  for (double e : base.segment_errors()) errors.push_back(e);
  errors.resize(points.size() - 1, 0.0);
  return PropagatorGrid(Picture::physical, std::move(points), std::move(cumulative), std::move(errors),
                        base.steps() + before + after);
}

} // namespace propcert
