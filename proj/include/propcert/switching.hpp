#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "propcert/errors.hpp"

namespace propcert {

enum class SwitchFamily { smoothstep, sampled, zero };

inline std::string to_string(SwitchFamily f) {
  switch (f) {
  case SwitchFamily::smoothstep: return "smoothstep";
  case SwitchFamily::sampled: return "sampled";
  case SwitchFamily::zero: return "zero";
  }
  return "unknown";
}

struct SwitchValue {
  double g = 0.0;
  double g_prime = 0.0;
  double phi = 0.0;
};

struct SwitchConstants {
  double M = 0.0;       // max |g| on [0, 1]
  double M_prime = 0.0; // max |g'| on [0, 1]
};

/// The switching ramp g: zero for s < 0, g' supported in (0, 1), constant
/// g(1) for s >= 1. phi is the primitive of g with phi(0) = 0.
class SwitchFunction {
public:
  /// Smoothstep of order k (C^k, polynomial degree 2k + 1); k = 1 is
  /// s^2 (3 - 2s), k = 2 is s^3 (10 - 15 s + 6 s^2).
  static SwitchFunction smoothstep(int order = 1, double amplitude = 1.0) {
    if (order < 1) throw InputError("smoothstep order must be >= 1");
    if (!(amplitude > 0.0) || !std::isfinite(amplitude))
      throw InputError("switch amplitude must be positive");
    SwitchFunction sw;
    sw.family_ = SwitchFamily::smoothstep;
    sw.order_ = order;
    sw.amplitude_ = amplitude;
    // S_k(s) = s^(k+1) sum_j C(k+j, j) C(2k+1, k-j) (-s)^j
    std::vector<double> coeff(static_cast<std::size_t>(2 * order + 2), 0.0);
    for (int j = 0; j <= order; ++j) {
      const double c = binomial(order + j, j) * binomial(2 * order + 1, order - j) * ((j % 2) ? -1.0 : 1.0);
      coeff[static_cast<std::size_t>(order + 1 + j)] = amplitude * c;
    }
    sw.poly_ = std::make_shared<const std::vector<double>>(std::move(coeff));
    sw.plateau_ = sw.eval_poly(1.0);
    sw.phi_one_ = sw.poly_primitive(1.0);
    return sw;
  }

  /// Clamped cubic spline through (s_i, g_i) with g'(0) = g'(1) = 0. The
  /// samples must start at s = 0 with g = 0, end at s = 1 and increase in s.
  static SwitchFunction sampled(std::vector<double> s, std::vector<double> g) {
    if (s.size() != g.size() || s.size() < 2) throw InputError("sampled switch: need >= 2 (s, g) pairs");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i]) || !std::isfinite(g[i])) throw InputError("sampled switch: non-finite sample");
      if (s[i] < 0.0 || s[i] > 1.0)
        throw InputError("sampled switch: s = " + std::to_string(s[i]) + " outside [0, 1]");
      if (i > 0 && !(s[i] > s[i - 1])) throw InputError("sampled switch: s must be strictly increasing");
    }
    if (s.front() != 0.0 || s.back() != 1.0) throw InputError("sampled switch: samples must span s = 0 to s = 1");
    if (std::abs(g.front()) > 1e-12) throw InputError("sampled switch: g(0) must be 0");
    if (!(g.back() > 0.0)) throw InputError("sampled switch: g(1) must be positive");

    SwitchFunction sw;
    sw.family_ = SwitchFamily::sampled;
    sw.order_ = 1;
    auto spline = std::make_shared<Spline>();
    spline->knots = std::move(s);
    spline->values = std::move(g);
    spline->values.front() = 0.0;
    spline->fit();
    sw.spline_ = spline;
    sw.amplitude_ = spline->values.back();
    sw.plateau_ = spline->values.back();
    sw.phi_one_ = spline->primitive(1.0);
    return sw;
  }

  /// Two whitespace-separated columns (s, g); '#' starts a comment.
  static SwitchFunction from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open switch profile " + path.string());
    std::vector<double> s, g;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      double a, b;
      if (!(fields >> a)) continue;
      if (!(fields >> b))
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
      s.push_back(a);
      g.push_back(b);
    }
    try {
      return sampled(std::move(s), std::move(g));
    } catch (const InputError& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }

  static SwitchFunction zero() {
    SwitchFunction sw;
    sw.family_ = SwitchFamily::zero;
    sw.order_ = 1;
    sw.amplitude_ = 0.0;
    return sw;
  }

  SwitchFamily family() const { return family_; }
  int order() const { return order_; }
  double amplitude() const { return amplitude_; }

  double g(double s) const {
    if (family_ == SwitchFamily::zero || s <= 0.0) return 0.0;
    if (s >= 1.0) return plateau_;
    return family_ == SwitchFamily::smoothstep ? eval_poly(s) : spline_->value(s);
  }

  double g_prime(double s) const {
    if (family_ == SwitchFamily::zero || s <= 0.0 || s >= 1.0) return 0.0;
    return family_ == SwitchFamily::smoothstep ? eval_poly_derivative(s) : spline_->derivative(s);
  }

  double phi(double s) const {
    if (family_ == SwitchFamily::zero || s <= 0.0) return 0.0;
    if (s >= 1.0) return phi_one_ + plateau_ * (s - 1.0);
    return family_ == SwitchFamily::smoothstep ? poly_primitive(s) : spline_->primitive(s);
  }

  SwitchValue operator()(double s) const { return {g(s), g_prime(s), phi(s)}; }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(family_) << "(order=" << order_ << ", amplitude=" << amplitude_ << ")";
    return os.str();
  }

private:
  struct Spline {
    std::vector<double> knots, values, second; // second derivatives at knots
    std::vector<double> cumulative;            // integral from 0 to knot i

    std::size_t segment(double s) const {
      auto it = std::upper_bound(knots.begin(), knots.end(), s);
      std::size_t i = static_cast<std::size_t>(std::distance(knots.begin(), it));
      return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, knots.size() - 2);
    }

    // Clamped end conditions: first derivative zero at both ends.
    void fit() {
      const std::size_t n = knots.size();
      second.assign(n, 0.0);
      std::vector<double> u(n, 0.0);
      auto h = [&](std::size_t i) { return knots[i + 1] - knots[i]; };
      second[0] = -0.5;
      u[0] = (3.0 / h(0)) * ((values[1] - values[0]) / h(0));
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const double sig = (knots[i] - knots[i - 1]) / (knots[i + 1] - knots[i - 1]);
        const double p = sig * second[i - 1] + 2.0;
        second[i] = (sig - 1.0) / p;
        const double d = (values[i + 1] - values[i]) / h(i) - (values[i] - values[i - 1]) / h(i - 1);
        u[i] = (6.0 * d / (knots[i + 1] - knots[i - 1]) - sig * u[i - 1]) / p;
      }
      const double qn = 0.5;
      const double un = (3.0 / h(n - 2)) * (0.0 - (values[n - 1] - values[n - 2]) / h(n - 2));
      second[n - 1] = (un - qn * u[n - 2]) / (qn * second[n - 2] + 1.0);
      for (std::size_t k = n - 1; k-- > 0;) second[k] = second[k] * second[k + 1] + u[k];

      cumulative.assign(n, 0.0);
      for (std::size_t i = 0; i + 1 < n; ++i) cumulative[i + 1] = cumulative[i] + segment_integral(i, knots[i + 1]);
    }

    // On [x_i, x_{i+1}] with t = (s - x_i) / h:
    // S = (1-t) y_i + t y_{i+1} + h^2/6 [((1-t)^3 - (1-t)) m_i + (t^3 - t) m_{i+1}]
    double value(double s) const {
      const std::size_t i = segment(s);
      const double h = knots[i + 1] - knots[i];
      const double t = (s - knots[i]) / h;
      const double a = 1.0 - t;
      return a * values[i] + t * values[i + 1] +
             h * h / 6.0 * ((a * a * a - a) * second[i] + (t * t * t - t) * second[i + 1]);
    }

    double derivative(double s) const {
      const std::size_t i = segment(s);
      const double h = knots[i + 1] - knots[i];
      const double t = (s - knots[i]) / h;
      const double a = 1.0 - t;
      return (values[i + 1] - values[i]) / h +
             h / 6.0 * (-(3.0 * a * a - 1.0) * second[i] + (3.0 * t * t - 1.0) * second[i + 1]);
    }

    double segment_integral(std::size_t i, double s) const {
      const double h = knots[i + 1] - knots[i];
      const double t = (s - knots[i]) / h;
      const double a = 1.0 - t;
      // integral over [x_i, s] in terms of t, using d(s) = h dt
      const double lin = values[i] * (1.0 - a * a) / 2.0 + values[i + 1] * t * t / 2.0;
      const double cub_i = -(a * a * a * a / 4.0 - a * a / 2.0) + (1.0 / 4.0 - 1.0 / 2.0);
      const double cub_j = t * t * t * t / 4.0 - t * t / 2.0;
      return h * (lin + h * h / 6.0 * (cub_i * second[i] + cub_j * second[i + 1]));
    }

    double primitive(double s) const {
      const std::size_t i = segment(s);
      return cumulative[i] + segment_integral(i, s);
    }
  };

  SwitchFunction() = default;

  static double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  double eval_poly(double s) const {
    double r = 0.0;
    for (auto it = poly_->rbegin(); it != poly_->rend(); ++it) r = r * s + *it;
    return r;
  }

  double eval_poly_derivative(double s) const {
    double r = 0.0;
    for (std::size_t k = poly_->size() - 1; k >= 1; --k) r = r * s + static_cast<double>(k) * (*poly_)[k];
    return r;
  }

  double poly_primitive(double s) const {
    double r = 0.0;
    for (std::size_t k = poly_->size(); k-- > 0;) r = r * s + (*poly_)[k] / static_cast<double>(k + 1);
    return r * s;
  }

  SwitchFamily family_ = SwitchFamily::zero;
  int order_ = 1;
  double amplitude_ = 0.0;
  double plateau_ = 0.0;
  double phi_one_ = 0.0;
  std::shared_ptr<const std::vector<double>> poly_;
  std::shared_ptr<const Spline> spline_;
};

inline SwitchValue switch_eval(const SwitchFunction& sw, double s) { return sw(s); }

namespace detail {

// Grid maximum of |f| on [0, 1] followed by golden-section refinement in the
// two cells around the grid argmax.
template <class F>
double grid_max_abs(F&& f, int points = 100001) {
  double best = 0.0;
  int best_i = 0;
  const double h = 1.0 / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double v = std::abs(f(i * h));
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  double lo = std::max(0.0, (best_i - 1) * h);
  double hi = std::min(1.0, (best_i + 1) * h);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = std::abs(f(x2));
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = std::abs(f(x1));
    }
  }
  return std::max({best, f1, f2});
}

} // namespace detail

/// M = max |g| and M' = max |g'| over [0, 1].
inline SwitchConstants switch_constants(const SwitchFunction& sw) {
  if (sw.family() == SwitchFamily::zero) return {0.0, 0.0};
  // g' vanishes at the closed ends for every family, so sampling inside
  // (0, 1) via the public evaluators is enough.
  const double m = detail::grid_max_abs([&](double s) { return sw.g(s); });
  const double mp = detail::grid_max_abs([&](double s) { return sw.g_prime(s); });
  return {m, mp};
}

} // namespace propcert
