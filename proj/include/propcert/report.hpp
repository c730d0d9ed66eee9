#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "propcert/certification.hpp"

namespace propcert {

namespace detail {

// Finite numbers as-is; infinities as null (callers add a flag beside them).
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json int_map(const std::map<int, double>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = number(v);
  return j;
}

inline std::string csv_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
  if (!out) throw InputError("failed writing " + p.string());
}

} // namespace detail

inline Json sandwich_json(const SandwichSup& s) {
  return {{"sup", s.sup}, {"grid_sup", s.grid_sup}, {"argmax", {s.t, s.r}}, {"evaluations", s.evaluations}};
}

inline Json derivative_json(const DerivativeReport& r) {
  Json arr = Json::array();
  for (const auto& s : r.samples)
    arr.push_back({{"tau", s.tau},
                   {"interior", s.interior},
                   {"quadrature_norm", s.quadrature_norm},
                   {"fd_norm", s.fd_norm},
                   {"relative_error", s.relative_error},
                   {"exact_zero", s.exact_zero},
                   {"lhs", s.lhs},
                   {"bound", s.bound},
                   {"ok", s.ok}});
  return arr;
}

/// Certificate document. `config` is the resolved run configuration.
inline Json certificate_json(const BoundCertificate& c, const Json& config) {
  using detail::int_map;
  using detail::number;
  Json j;
  j["schema"] = "propcert.certificate/1";
  j["config"] = config;
  j["model"] = c.provenance;
  j["drive"] = {{"epsilon", c.epsilon}, {"switch", c.switching}};
  j["eta_sweep"] = c.options.eta_sweep;
  j["n_range"] = {-c.options.n_max, c.options.n_max};
  j["grid"] = {{"grid_size", c.options.grid_size},
               {"refinement_points", 2 * c.options.grid_size - 1},
               {"window", "[0, 1/eta]^2 physical, [0, 1]^2 interaction"},
               {"extended_window", "[-0.5/eta, 1.5/eta]^2"},
               {"constant_points", c.options.constant_points},
               {"tol", c.options.tol}};

  const auto& a = c.admissibility;
  j["admissibility"] = {{"eps_star_max", number(a.eps_star_max)},
                        {"eps_star_unbounded", !a.eps_star_bounded},
                        {"M", a.M},
                        {"h1_h0inv_norm", a.h1_h0inv_norm},
                        {"epsilon_strict_ok", a.epsilon_strict_ok},
                        {"epsilon_margin_ok", a.epsilon_margin_ok},
                        {"min_eigenvalue", a.min_eigenvalue},
                        {"argmin_t", a.argmin_t},
                        {"floor_ok", a.floor_ok}};

  const auto& k = c.constants;
  std::map<int, double> e_theorem, e_corollary;
  for (const auto& [kk, v] : k.E) {
    if (kk <= -1) e_theorem[kk] = v;
    e_corollary[kk] = v;
  }
  j["constants"] = {{"relative_bound_selection", {{"a_tilde", "a = ||H1 H0^{-1/2}||"}, {"b_tilde", 0.0}}},
                    {"a", k.a},
                    {"b_eps", k.b_eps},
                    {"M", k.M},
                    {"M_prime", k.M_prime},
                    {"alpha", k.alpha},
                    {"beta", k.beta},
                    {"E", int_map(k.E)},
                    {"E_used_by_sandwich_bound", int_map(e_theorem)},
                    {"E_used_by_interaction_bound", int_map(e_corollary)},
                    {"gamma", int_map(k.gamma)},
                    {"A", int_map(k.A)},
                    {"B", int_map(k.B)},
                    {"D", int_map(k.D)}};

  j["lemma"] = {{"a", c.lemma.a},
                {"b_eps", c.lemma.b_eps},
                {"measured_max", c.lemma.measured_max},
                {"argmax_t", c.lemma.argmax_t},
                {"verified", c.lemma.verified}};

  Json prop;
  prop["eps_values"] = c.proposition.eps_values;
  prop["in_probe"] = c.proposition.in_probe;
  Json by_n = Json::object();
  for (const auto& [n, v] : c.proposition.A_by_eps)
    by_n[std::to_string(n)] = {{"A_by_eps", v},
                               {"B_by_eps", c.proposition.B_by_eps.at(n)},
                               {"A_variation", c.proposition.A_variation.at(n)},
                               {"B_variation", c.proposition.B_variation.at(n)}};
  prop["per_n"] = by_n;
  prop["finite"] = c.proposition.finite;
  j["proposition"] = prop;

  Json bounds = Json::array();
  for (const auto& [n, cn] : c.theoretical_Cn)
    bounds.push_back({{"n", n},
                      {"theoretical_Cn", number(cn)},
                      {"corollary_bound", number(c.corollary_bound.at(n))},
                      {"vacuous", !std::isfinite(cn)}});
  j["bounds"] = bounds;

  Json cells = Json::array();
  for (const auto& cell : c.cells) {
    const double cn = c.theoretical_Cn.at(cell.n);
    cells.push_back({{"n", cell.n},
                     {"eta", cell.eta},
                     {"empirical_sup", cell.physical.sup},
                     {"physical", sandwich_json(cell.physical)},
                     {"extended_sup", cell.extended_sup},
                     {"window_delta", cell.window_delta},
                     {"interaction", sandwich_json(cell.interaction)},
                     {"theoretical_Cn", number(cn)},
                     {"corollary_bound", number(c.corollary_bound.at(cell.n))},
                     {"margin", number(cn - cell.physical.sup)}});
  }
  j["cells"] = cells;

  Json diags = Json::array();
  for (const auto& d : c.per_eta)
    diags.push_back({{"eta", d.eta},
                     {"steps_physical", d.steps_physical},
                     {"steps_interaction", d.steps_interaction},
                     {"error_estimate_physical", d.error_physical},
                     {"error_estimate_interaction", d.error_interaction},
                     {"unitarity_drift_physical", d.drift_physical},
                     {"unitarity_drift_interaction", d.drift_interaction},
                     {"gauge_residual", d.gauge_residual},
                     {"derivative", derivative_json(d.derivative)}});
  j["integrator"] = diags;

  Json verdicts = Json::array();
  for (const auto& v : c.verdicts)
    verdicts.push_back({{"claim", v.claim}, {"verdict", v.pass ? "PASS" : "FAIL"}, {"detail", v.detail}});
  j["verdicts"] = verdicts;
  j["passed"] = c.passed();
  j["notes"] = {"Bounds reported as null with vacuous = true exceeded 1e300 and hold trivially.",
                "The remark that the propagator norm is uniformly bounded by more than 1/2 has no computed "
                "counterpart here and is not asserted."};
  return j;
}

inline const char* kCsvHeader = "n,eta,empirical_sup,theoretical_Cn,corollary_bound,margin";

/// Flat table, one row per (n, eta), numbers with 12 significant digits.
inline std::string certificate_csv(const BoundCertificate& c, const Json& config) {
  using detail::csv_number;
  std::ostringstream os;
  os << "# config: " << config.dump() << '\n';
  os << "# model: " << c.provenance.dump() << '\n';
  os << kCsvHeader << '\n';
  for (const auto& cell : c.cells) {
    const double cn = c.theoretical_Cn.at(cell.n);
    os << cell.n << ',' << csv_number(cell.eta) << ',' << csv_number(cell.physical.sup) << ','
       << csv_number(cn) << ',' << csv_number(c.corollary_bound.at(cell.n)) << ','
       << csv_number(cn - cell.physical.sup) << '\n';
  }
  return os.str();
}

/// gnuplot-style blocks, one per n (select with `index`), x = eta.
inline std::string certificate_plot_data(const BoundCertificate& c, const Json& config) {
  using detail::csv_number;
  std::ostringstream os;
  os << "# config: " << config.dump() << '\n';
  os << "# model: " << c.provenance.dump() << '\n';
  os << "# x axis: eta (log scale); one block per n\n";
  os << "# columns: eta empirical_sup theoretical_Cn interaction_sup corollary_bound\n";
  bool first = true;
  for (int n = -c.options.n_max; n <= c.options.n_max; ++n) {
    if (!first) os << "\n\n";
    first = false;
    os << "# n = " << n << '\n';
    for (const auto& cell : c.cells)
      if (cell.n == n)
        os << csv_number(cell.eta) << ' ' << csv_number(cell.physical.sup) << ' '
           << csv_number(c.theoretical_Cn.at(n)) << ' ' << csv_number(cell.interaction.sup) << ' '
           << csv_number(c.corollary_bound.at(n)) << '\n';
  }
  return os.str();
}

} // namespace propcert
