#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "propcert/config.hpp"
#include "propcert/report.hpp"

namespace propcert {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitBudget = 3 };

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out_dir; // overrides output.directory
  unsigned threads = 1;
  bool verbose = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

namespace detail {

inline std::filesystem::path output_dir(const RunOptions& o, const RunConfig& c) {
  return o.out_dir ? *o.out_dir : std::filesystem::path(c.output.directory);
}

inline DriveParams make_drive(const ModelPair& model, const RunConfig& c, double eta) {
  try {
    return DriveParams::admissible(model, c.drive.epsilon, eta, make_switch(c));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(c.epsilon_location + ": " + e.what());
  }
}

// Maps exceptions to exit codes; `body` returns the verdict code.
template <class F>
int guarded(const RunOptions& o, F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    *o.err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BudgetError& e) {
    *o.err << "numerical budget exhausted: " << e.what() << " (steps " << e.steps() << ", reached "
           << e.reached() << ")\n";
    return kExitBudget;
  } catch (const Error& e) {
    *o.err << "numerical failure: " << e.what() << '\n';
    return kExitBudget;
  }
}

inline void print_verdicts(std::ostream& os, const std::vector<Verdict>& vs) {
  for (const auto& v : vs) os << (v.pass ? "PASS " : "FAIL ") << v.claim << ": " << v.detail << '\n';
}

inline void write_certificate(const BoundCertificate& cert, const RunConfig& c, const std::filesystem::path& dir,
                              const std::string& stem, std::ostream& log) {
  if (c.output.wants("json")) {
    write_file(dir / (stem + ".json"), certificate_json(cert, c.resolved).dump(2) + "\n");
    log << "wrote " << (dir / (stem + ".json")).string() << '\n';
  }
  if (c.output.wants("csv")) {
    write_file(dir / (stem + ".csv"), certificate_csv(cert, c.resolved));
    log << "wrote " << (dir / (stem + ".csv")).string() << '\n';
  }
  if (c.output.wants("plot")) {
    write_file(dir / (stem + "_plot.dat"), certificate_plot_data(cert, c.resolved));
    log << "wrote " << (dir / (stem + "_plot.dat")).string() << '\n';
  }
}

} // namespace detail

/// certify: model + drive from the configuration, full certificate, artifacts
/// under the output directory. Exit 0 iff every verdict passes.
inline int run_certify(const RunOptions& o) {
  return detail::guarded(o, [&] {
    const RunConfig c = load_config(o.config);
    if (c.model.kind == "landau") throw ConfigError(o.config.string() + ": use the landau command for landau models");
    const ModelPair model = make_model(c);
    const DriveParams drive = detail::make_drive(model, c, c.drive.eta_sweep.front());
    if (o.verbose) *o.err << "certifying " << model.provenance.dump() << '\n';
    const BoundCertificate cert = certify(model, drive, make_certify_options(c, o.threads));
    detail::write_certificate(cert, c, detail::output_dir(o, c), "certificate", *o.out);
    detail::print_verdicts(*o.out, cert.verdicts);
    return cert.passed() ? kExitPass : kExitFail;
  });
}

struct GaugeReport {
  double tol = 0.0;
  double threshold = 0.0;
  double max_residual = 0.0;
  double diagonal_residual = 0.0; // s = u points
  std::vector<std::pair<double, double>> per_eta; // (eta, max residual)
  bool passed = false;
};

/// Max over a (s, u) grid on [0, 1]^2 of ||gauge_transport(U) - Uhat(s, u)||,
/// with both propagators integrated independently.
inline GaugeReport gauge_check(const ModelPair& model, const DriveParams& drive_template,
                               const std::vector<double>& etas, int grid_size, double tol) {
  GaugeReport r;
  r.tol = tol;
  r.threshold = 20.0 * tol;
  const auto s_grid = linspace(0.0, 1.0, grid_size);
  for (double eta : etas) {
    const DriveParams drive = drive_template.with(drive_template.epsilon(), eta);
    std::vector<double> t_grid(s_grid);
    for (double& t : t_grid) t /= eta;
    t_grid.back() = 1.0 / eta;
    auto phys = build_propagator_grid(model, drive, Picture::physical, t_grid, tol);
    auto inter = build_propagator_grid(model, drive, Picture::interaction, s_grid, tol);
    double worst = 0.0;
    for (std::size_t i = 0; i < s_grid.size(); ++i)
      for (std::size_t j = 0; j < s_grid.size(); ++j) {
        UnitaryPropagator u(phys.between(i, j), Picture::physical, t_grid[j], t_grid[i], drive, 0.0, 0);
        const auto predicted = gauge_transport(u, model, drive, s_grid[i], s_grid[j]);
        const double res = operator_norm(predicted.matrix() - inter.between(i, j));
        worst = std::max(worst, res);
        if (i == j) r.diagonal_residual = std::max(r.diagonal_residual, res);
      }
    r.per_eta.emplace_back(eta, worst);
    r.max_residual = std::max(r.max_residual, worst);
  }
  r.passed = r.max_residual <= r.threshold;
  return r;
}

inline int run_gauge_check(const RunOptions& o) {
  return detail::guarded(o, [&] {
    const RunConfig c = load_config(o.config);
    if (c.model.kind == "landau") throw ConfigError(o.config.string() + ": gauge-check needs a spectral or commuting model");
    const ModelPair model = make_model(c);
    const DriveParams drive = detail::make_drive(model, c, c.drive.eta_sweep.front());
    const auto r = gauge_check(model, drive, c.drive.eta_sweep, c.certification.grid_size, c.certification.tol);
    Json j;
    j["schema"] = "propcert.gauge/1";
    j["config"] = c.resolved;
    j["model"] = model.provenance;
    j["tol"] = r.tol;
    j["threshold"] = r.threshold;
    j["max_residual"] = r.max_residual;
    j["diagonal_residual"] = r.diagonal_residual;
    Json per = Json::array();
    for (const auto& [eta, res] : r.per_eta) per.push_back({{"eta", eta}, {"max_residual", res}});
    j["per_eta"] = per;
    j["verdict"] = r.passed ? "PASS" : "FAIL";
    const auto dir = detail::output_dir(o, c);
    detail::write_file(dir / "gauge_report.json", j.dump(2) + "\n");
    *o.out << "wrote " << (dir / "gauge_report.json").string() << '\n';
    *o.out << (r.passed ? "PASS" : "FAIL") << " gauge_identity: max residual " << detail::fmt(r.max_residual)
           << " (threshold " << detail::fmt(r.threshold) << ")\n";
    return r.passed ? kExitPass : kExitFail;
  });
}

struct LandauRunReport {
  LevelReport levels;
  CommutatorRefinement commutator;
  std::vector<std::pair<double, double>> switch_column; // (x1, Lambda_1) along the certification grid
  bool switch_endpoints_ok = false;
  BoundCertificate certificate;
  bool passed() const {
    return levels.passed && commutator.passed && switch_endpoints_ok && certificate.passed();
  }
};

/// Level check and commutator refinement on the spectrum grid, then a reduced
/// certification on the (smaller) certification grid.
inline LandauRunReport landau_run(const RunConfig& c, unsigned threads, std::ostream* progress = nullptr) {
  if (!c.landau) throw ConfigError(c.source.string() + ": missing 'landau' section");
  const auto& lc = *c.landau;
  LandauRunReport r;
  if (progress) *progress << "landau: level check\n";
  r.levels = landau_level_check(lc.spectrum, c.model.gamma0, lc.level_states, lc.levels, lc.level_tolerance);
  if (progress) *progress << "landau: commutator refinement\n";
  r.commutator = landau_commutator_check(lc.spectrum, lc.commutator_sigma, lc.commutator_min_ratio);

  const auto& cs = lc.certification;
  const double l = cs.switch_width;
  r.switch_endpoints_ok = true;
  for (int i = 0; i < cs.grid_points; ++i) {
    const double x = cs.coordinate(i);
    const double v = landau_switch(x, l);
    r.switch_column.emplace_back(x, v);
    if (x < -l && v != 0.0) r.switch_endpoints_ok = false;
    if (x > l && v != 1.0) r.switch_endpoints_ok = false;
  }

  if (progress) *progress << "landau: reduced certification\n";
  const ModelPair model = build_landau_model(cs, c.model.gamma0);
  const DriveParams drive = detail::make_drive(model, c, c.drive.eta_sweep.front());
  r.certificate = certify(model, drive, make_certify_options(c, threads));
  return r;
}

inline int run_landau(const RunOptions& o) {
  return detail::guarded(o, [&] {
    const RunConfig c = load_config(o.config);
    if (c.model.kind != "landau") throw ConfigError(o.config.string() + ": landau command needs model kind landau");
    const LandauRunReport r = landau_run(c, o.threads, o.verbose ? o.err : nullptr);
    const auto dir = detail::output_dir(o, c);

    Json j;
    j["schema"] = "propcert.landau/1";
    j["config"] = c.resolved;
    Json lv;
    lv["ground_energy"] = r.levels.ground;
    lv["energy_shift"] = r.levels.shift;
    lv["computed_states"] = r.levels.computed;
    lv["bulk_states"] = r.levels.bulk;
    Json cl = Json::array();
    for (const auto& k : r.levels.clusters)
      cl.push_back({{"k", k.k},
                    {"states", k.states},
                    {"energy", k.mean + r.levels.shift},
                    {"expected", k.expected + r.levels.shift},
                    {"relative_error", k.relative_error},
                    {"unshifted_relative_error", k.unshifted_error}});
    lv["clusters"] = cl;
    lv["verdict"] = r.levels.passed ? "PASS" : "FAIL";
    lv["flux_ratio"] = c.landau->spectrum.flux_ratio();
    lv["coarse_grid_warning"] = c.landau->spectrum.flux_ratio() > 1.0;
    j["levels"] = lv;
    const auto& cm = r.commutator;
    j["commutator"] = {{"grid_points", {cm.coarse_points, cm.fine_points}},
                       {"h", {cm.coarse_h, cm.fine_h}},
                       {"residual", {cm.coarse_residual, cm.fine_residual}},
                       {"ratio", cm.ratio},
                       {"verdict", cm.passed ? "PASS" : "FAIL"}};
    Json col = Json::array();
    for (const auto& [x, v] : r.switch_column) col.push_back({x, v});
    j["switch_column"] = {{"x1_lambda1", col}, {"endpoints_ok", r.switch_endpoints_ok}};
    j["certification_model"] = r.certificate.provenance;
    j["certification_passed"] = r.certificate.passed();
    j["passed"] = r.passed();
    detail::write_file(dir / "landau_report.json", j.dump(2) + "\n");
    *o.out << "wrote " << (dir / "landau_report.json").string() << '\n';
    detail::write_certificate(r.certificate, c, dir, "landau_certificate", *o.out);

    *o.out << (r.levels.passed ? "PASS" : "FAIL") << " landau_levels:";
    for (const auto& k : r.levels.clusters) *o.out << " k=" << k.k << " err " << detail::fmt(k.relative_error);
    *o.out << '\n';
    *o.out << (cm.passed ? "PASS" : "FAIL") << " landau_commutator: residual ratio " << detail::fmt(cm.ratio)
           << '\n';
    *o.out << (r.switch_endpoints_ok ? "PASS" : "FAIL") << " landau_switch_endpoints\n";
    detail::print_verdicts(*o.out, r.certificate.verdicts);
    return r.passed() ? kExitPass : kExitFail;
  });
}

} // namespace propcert
