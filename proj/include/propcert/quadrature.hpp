#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "propcert/errors.hpp"

namespace propcert {

struct QuadratureResult {
  Eigen::MatrixXcd value;
  double error_estimate = 0.0; // Frobenius norm of the summed Kronrod-Gauss differences
  int nodes = 0;
};

namespace detail {

// Kronrod 15-point abscissae (positive half, descending) and weights; the
// embedded 7-point Gauss rule uses every other abscissa.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  Eigen::MatrixXcd kronrod;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod_panel(F& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  Eigen::MatrixXcd centre = f(mid);
  Eigen::MatrixXcd kronrod = kKronrodWeights[7] * centre;
  Eigen::MatrixXcd gauss = kGaussWeights[3] * centre;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    Eigen::MatrixXcd pair = f(mid - dx) + f(mid + dx);
    kronrod += kKronrodWeights[i] * pair;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  const double err = (kronrod - gauss).norm();
  return Panel{a, b, std::move(kronrod), err};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of a matrix-valued
/// integrand on [a, b]. Bisects the panel with the largest error until the
/// summed error is below rel_tol times the norm of the estimate, or throws
/// ConvergenceError once the node budget would be exceeded.
template <class F>
QuadratureResult integrate_matrix(F&& f, double a, double b, double rel_tol,
                                  int max_nodes = 1 << 16, int initial_panels = 4) {
  std::priority_queue<detail::Panel> panels;
  int nodes = 0;
  const double width = (b - a) / initial_panels;
  for (int i = 0; i < initial_panels; ++i) {
    const double lo = a + i * width;
    const double hi = (i + 1 == initial_panels) ? b : lo + width;
    panels.push(detail::gauss_kronrod_panel(f, lo, hi));
    nodes += 15;
  }

  auto totals = [&panels]() {
    auto copy = panels;
    Eigen::MatrixXcd sum = copy.top().kronrod;
    double err = copy.top().error;
    copy.pop();
    while (!copy.empty()) {
      sum += copy.top().kronrod;
      err += copy.top().error;
      copy.pop();
    }
    return std::pair{sum, err};
  };

  auto [value, error] = totals();
  while (error > rel_tol * value.norm()) {
    if (nodes + 30 > max_nodes) {
      const double residual = error / std::max(value.norm(), 1e-300);
      throw ConvergenceError("quadrature did not converge within " + std::to_string(max_nodes) +
                                 " nodes (relative residual " + std::to_string(residual) + ")",
                             residual);
    }
    detail::Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    detail::Panel left = detail::gauss_kronrod_panel(f, worst.a, mid);
    detail::Panel right = detail::gauss_kronrod_panel(f, mid, worst.b);
    nodes += 30;
    value += left.kronrod + right.kronrod - worst.kronrod;
    error += left.error + right.error - worst.error;
    panels.push(std::move(left));
    panels.push(std::move(right));
    // the running sums drift after many updates; resynchronise occasionally
    if (nodes % 1920 == 0) std::tie(value, error) = totals();
  }
  std::tie(value, error) = totals();
  return QuadratureResult{std::move(value), error, nodes};
}

} // namespace propcert
