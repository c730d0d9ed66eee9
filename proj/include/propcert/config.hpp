#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "propcert/certification.hpp"
#include "propcert/landau.hpp"

namespace propcert {

/// Configuration problem; the message starts with "path:line:column:" when
/// the offending node is known.
class ConfigError : public InputError {
public:
  using InputError::InputError;
};

struct ModelConfig {
  std::string kind = "spectral";
  int dim = 16;
  double gamma0 = 0.5;
  double spectrum_max = 3.0;
  double coupling = 1.0;
  std::uint64_t seed = 1;
};

struct SwitchConfig {
  std::string profile = "smoothstep"; // smoothstep | sampled
  int order = 1;
  double amplitude = 1.0;
  std::string file; // sampled profiles, relative to the config file
};

struct DriveConfig {
  double epsilon = 0.1;
  std::vector<double> eta_sweep{0.25, 1.0, 4.0, 16.0};
  SwitchConfig switching;
  bool epsilon_equals_eta = false;
};

struct CertificationConfig {
  int n_min = -4, n_max = 4;
  int grid_size = 33;
  double tol = 1e-8;
  std::vector<double> eps_probe{0.2, 0.1, 0.05};
  int constant_points = 65;
  bool derivative_check = true;
  long max_steps = 10'000'000; // integrator step budget per propagator grid
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"json", "csv", "plot"};
  bool wants(const std::string& f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }
};

struct LandauRunConfig {
  LandauSpec spectrum;      // level and commutator checks
  LandauSpec certification; // reduced grid for the time-dependent run
  int level_states = 300;
  int levels = 3;
  double level_tolerance = 0.02;
  double commutator_sigma = 1.0;
  double commutator_min_ratio = 3.0;
};

struct RunConfig {
  std::filesystem::path source;
  ModelConfig model;
  DriveConfig drive;
  CertificationConfig certification;
  OutputConfig output;
  std::optional<LandauRunConfig> landau;
  std::string epsilon_location; // "path:line:col" of drive.epsilon, for later messages
  Json resolved;                // every setting after defaults, embedded in artifacts
};

namespace detail {

class ConfigReader {
public:
  explicit ConfigReader(std::string path) : path_(std::move(path)) {}

  std::string where(const YAML::Node& n) const {
    const auto m = n.Mark();
    if (m.line < 0) return path_;
    return path_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(where(n) + ": " + msg);
  }

  void only_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& section) const {
    if (!map.IsMap()) fail(map, "section '" + section + "' must be a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in section '" + section + "'");
    }
  }

  template <class T>
  T get(const YAML::Node& map, const char* key, T fallback) const {
    const YAML::Node n = map[key];
    if (!n) return fallback;
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, std::string("invalid value for '") + key + "'");
    }
  }

  std::vector<double> get_list(const YAML::Node& map, const char* key, std::vector<double> fallback) const {
    const YAML::Node n = map[key];
    if (!n) return fallback;
    if (!n.IsSequence()) fail(n, std::string("'") + key + "' must be a list");
    std::vector<double> out;
    for (const auto& x : n) {
      try {
        out.push_back(x.as<double>());
      } catch (const YAML::Exception&) {
        fail(x, std::string("invalid number in '") + key + "'");
      }
    }
    return out;
  }

  LandauSpec landau_spec(const YAML::Node& n, const char* section) const {
    LandauSpec s;
    if (!n) return s;
    only_keys(n, {"grid_points", "half_width", "field_B", "lambda", "potential", "switch_width", "gauge_offset"},
              section);
    s.grid_points = get(n, "grid_points", s.grid_points);
    s.half_width = get(n, "half_width", s.half_width);
    s.field_B = get(n, "field_B", s.field_B);
    s.lambda = get(n, "lambda", s.lambda);
    s.switch_width = get(n, "switch_width", s.switch_width);
    if (const auto g = n["gauge_offset"]) {
      auto v = get_list(n, "gauge_offset", {});
      if (v.size() != 2) fail(g, "gauge_offset must have two entries");
      s.gauge_offset_x = v[0];
      s.gauge_offset_y = v[1];
    }
    if (const auto p = n["potential"]) {
      only_keys(p, {"preset", "amplitude", "width", "center", "period"}, "potential");
      const auto preset = get<std::string>(p, "preset", "zero");
      if (preset == "zero") s.potential.preset = PotentialPreset::zero;
      else if (preset == "gaussian") s.potential.preset = PotentialPreset::gaussian;
      else if (preset == "cosine") s.potential.preset = PotentialPreset::cosine;
      else fail(p["preset"], "unknown potential preset '" + preset + "' (zero, gaussian, cosine)");
      s.potential.amplitude = get(p, "amplitude", s.potential.amplitude);
      s.potential.width = get(p, "width", s.potential.width);
      s.potential.period = get(p, "period", s.potential.period);
      if (const auto c = p["center"]) {
        auto v = get_list(p, "center", {});
        if (v.size() != 2) fail(c, "center must have two entries");
        s.potential.x0 = v[0];
        s.potential.y0 = v[1];
      }
      if (!(s.potential.width > 0.0)) fail(p, "potential width must be positive");
      if (!(s.potential.period > 0.0)) fail(p, "potential period must be positive");
    }
    try {
      s.validate();
    } catch (const InputError& e) {
      fail(n, e.what());
    }
    return s;
  }

private:
  std::string path_;
};

inline Json landau_spec_json(const LandauSpec& s) {
  Json j;
  j["grid_points"] = s.grid_points;
  j["half_width"] = s.half_width;
  j["field_B"] = s.field_B;
  j["lambda"] = s.lambda;
  j["potential"] = {{"preset", to_string(s.potential.preset)},
                    {"amplitude", s.potential.amplitude},
                    {"width", s.potential.width},
                    {"center", {s.potential.x0, s.potential.y0}},
                    {"period", s.potential.period}};
  j["switch_width"] = s.switch_width;
  j["gauge_offset"] = {s.gauge_offset_x, s.gauge_offset_y};
  return j;
}

} // namespace detail

/// Reads and validates a run configuration (YAML). Sections: model, drive,
/// certification, output, and landau (landau runs only).
inline RunConfig load_config(const std::filesystem::path& path) {
  const std::string name = path.string();
  if (!std::filesystem::exists(path)) throw ConfigError(name + ": configuration file not found");
  YAML::Node root;
  try {
    root = YAML::LoadFile(name);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(name + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  } catch (const YAML::Exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  detail::ConfigReader rd(name);
  if (!root.IsMap()) throw ConfigError(name + ": top level must be a mapping");
  rd.only_keys(root, {"model", "drive", "certification", "output", "landau"}, "top level");

  RunConfig c;
  c.source = path;

  const YAML::Node m = root["model"];
  if (!m) throw ConfigError(name + ": missing section 'model'");
  rd.only_keys(m, {"kind", "dim", "gamma0", "spectrum_max", "coupling", "seed"}, "model");
  c.model.kind = rd.get<std::string>(m, "kind", c.model.kind);
  if (c.model.kind != "spectral" && c.model.kind != "commuting" && c.model.kind != "landau")
    rd.fail(m["kind"], "model kind must be spectral, commuting or landau");
  c.model.dim = rd.get(m, "dim", c.model.dim);
  c.model.gamma0 = rd.get(m, "gamma0", c.model.gamma0);
  c.model.spectrum_max = rd.get(m, "spectrum_max", c.model.spectrum_max);
  c.model.coupling = rd.get(m, "coupling", c.model.coupling);
  c.model.seed = rd.get<std::uint64_t>(m, "seed", c.model.seed);
  if (c.model.kind != "landau") {
    if (c.model.dim < 2) rd.fail(m["dim"] ? m["dim"] : m, "dim must be >= 2");
    if (!(c.model.spectrum_max > 1.0 + c.model.gamma0))
      rd.fail(m["spectrum_max"] ? m["spectrum_max"] : m, "spectrum_max must exceed 1 + gamma0");
    if (!(c.model.coupling >= 0.0)) rd.fail(m["coupling"] ? m["coupling"] : m, "coupling must be >= 0");
  }
  if (!(c.model.gamma0 > 0.0)) rd.fail(m["gamma0"] ? m["gamma0"] : m, "gamma0 must be positive");

  const YAML::Node d = root["drive"];
  if (!d) throw ConfigError(name + ": missing section 'drive'");
  rd.only_keys(d, {"epsilon", "eta_sweep", "switch", "epsilon_equals_eta"}, "drive");
  c.drive.epsilon = rd.get(d, "epsilon", c.drive.epsilon);
  c.epsilon_location = rd.where(d["epsilon"] ? d["epsilon"] : d);
  if (!(c.drive.epsilon >= 0.0)) rd.fail(d["epsilon"] ? d["epsilon"] : d, "epsilon must be >= 0");
  c.drive.eta_sweep = rd.get_list(d, "eta_sweep", c.drive.eta_sweep);
  if (c.drive.eta_sweep.empty()) rd.fail(d["eta_sweep"] ? d["eta_sweep"] : d, "eta_sweep must not be empty");
  for (double e : c.drive.eta_sweep)
    if (!(e > 0.0) || !std::isfinite(e)) rd.fail(d["eta_sweep"], "eta values must be positive");
  c.drive.epsilon_equals_eta = rd.get(d, "epsilon_equals_eta", false);
  if (c.drive.epsilon_equals_eta) {
    if (c.drive.eta_sweep.size() != 1)
      rd.fail(d["eta_sweep"] ? d["eta_sweep"] : d, "epsilon_equals_eta needs a single eta value");
    c.drive.epsilon = c.drive.eta_sweep.front();
  }
  if (const auto s = d["switch"]) {
    rd.only_keys(s, {"profile", "order", "amplitude", "file"}, "switch");
    auto& sw = c.drive.switching;
    sw.profile = rd.get<std::string>(s, "profile", sw.profile);
    sw.order = rd.get(s, "order", sw.order);
    sw.amplitude = rd.get(s, "amplitude", sw.amplitude);
    sw.file = rd.get<std::string>(s, "file", "");
    if (sw.profile != "smoothstep" && sw.profile != "sampled")
      rd.fail(s["profile"], "switch profile must be smoothstep or sampled");
    if (sw.profile == "smoothstep" && sw.order < 1) rd.fail(s["order"], "smoothstep order must be >= 1");
    if (sw.profile == "smoothstep" && !(sw.amplitude > 0.0)) rd.fail(s["amplitude"], "amplitude must be positive");
    if (sw.profile == "sampled" && sw.file.empty()) rd.fail(s, "sampled switch needs 'file'");
  }

  if (const auto k = root["certification"]) {
    rd.only_keys(k, {"n_range", "grid_size", "tol", "eps_probe", "constant_points", "derivative_check",
                     "max_steps"},
                 "certification");
    auto& cc = c.certification;
    if (const auto nr = k["n_range"]) {
      auto v = rd.get_list(k, "n_range", {});
      if (v.size() != 2) rd.fail(nr, "n_range must be [n_min, n_max]");
      cc.n_min = static_cast<int>(v[0]);
      cc.n_max = static_cast<int>(v[1]);
      if (cc.n_min != -cc.n_max || cc.n_max < 0) rd.fail(nr, "n_range must be symmetric around 0");
    }
    cc.grid_size = rd.get(k, "grid_size", cc.grid_size);
    if (cc.grid_size < 9) rd.fail(k["grid_size"], "grid_size must be >= 9");
    cc.tol = rd.get(k, "tol", cc.tol);
    if (!(cc.tol > 0.0)) rd.fail(k["tol"], "tol must be positive");
    cc.eps_probe = rd.get_list(k, "eps_probe", cc.eps_probe);
    for (double e : cc.eps_probe)
      if (!(e > 0.0)) rd.fail(k["eps_probe"], "eps_probe values must be positive");
    cc.constant_points = rd.get(k, "constant_points", cc.constant_points);
    if (cc.constant_points < 3) rd.fail(k["constant_points"], "constant_points must be >= 3");
    cc.derivative_check = rd.get(k, "derivative_check", cc.derivative_check);
    cc.max_steps = rd.get(k, "max_steps", cc.max_steps);
    if (cc.max_steps < 1) rd.fail(k["max_steps"], "max_steps must be >= 1");
  }

  if (const auto o = root["output"]) {
    rd.only_keys(o, {"directory", "formats"}, "output");
    c.output.directory = rd.get<std::string>(o, "directory", c.output.directory);
    if (const auto f = o["formats"]) {
      if (!f.IsSequence()) rd.fail(f, "formats must be a list");
      c.output.formats.clear();
      for (const auto& x : f) {
        const auto v = x.as<std::string>();
        if (v != "json" && v != "csv" && v != "plot") rd.fail(x, "unknown format '" + v + "' (json, csv, plot)");
        c.output.formats.push_back(v);
      }
    }
  }

  if (const auto l = root["landau"]) {
    if (c.model.kind != "landau") rd.fail(l, "section 'landau' requires model kind landau");
    rd.only_keys(l, {"spectrum", "certification", "level_states", "levels", "level_tolerance", "commutator_sigma",
                     "commutator_min_ratio"},
                 "landau");
    LandauRunConfig lc;
    lc.spectrum = rd.landau_spec(l["spectrum"], "landau.spectrum");
    lc.certification = rd.landau_spec(l["certification"], "landau.certification");
    lc.level_states = rd.get(l, "level_states", lc.level_states);
    lc.levels = rd.get(l, "levels", lc.levels);
    lc.level_tolerance = rd.get(l, "level_tolerance", lc.level_tolerance);
    lc.commutator_sigma = rd.get(l, "commutator_sigma", lc.commutator_sigma);
    lc.commutator_min_ratio = rd.get(l, "commutator_min_ratio", lc.commutator_min_ratio);
    c.landau = lc;
  } else if (c.model.kind == "landau") {
    throw ConfigError(name + ": model kind landau needs a 'landau' section");
  }

  // resolved settings
  Json r;
  r["model"] = {{"kind", c.model.kind}, {"gamma0", c.model.gamma0}};
  if (c.model.kind != "landau") {
    r["model"]["dim"] = c.model.dim;
    r["model"]["spectrum_max"] = c.model.spectrum_max;
    r["model"]["coupling"] = c.model.coupling;
    r["model"]["seed"] = c.model.seed;
  }
  r["drive"] = {{"epsilon", c.drive.epsilon},
                {"eta_sweep", c.drive.eta_sweep},
                {"epsilon_equals_eta", c.drive.epsilon_equals_eta},
                {"switch",
                 {{"profile", c.drive.switching.profile},
                  {"order", c.drive.switching.order},
                  {"amplitude", c.drive.switching.amplitude},
                  {"file", c.drive.switching.file}}}};
  r["certification"] = {{"n_range", {c.certification.n_min, c.certification.n_max}},
                        {"grid_size", c.certification.grid_size},
                        {"tol", c.certification.tol},
                        {"eps_probe", c.certification.eps_probe},
                        {"constant_points", c.certification.constant_points},
                        {"derivative_check", c.certification.derivative_check},
                        {"max_steps", c.certification.max_steps}};
  r["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
  if (c.landau) {
    r["landau"] = {{"spectrum", detail::landau_spec_json(c.landau->spectrum)},
                   {"certification", detail::landau_spec_json(c.landau->certification)},
                   {"level_states", c.landau->level_states},
                   {"levels", c.landau->levels},
                   {"level_tolerance", c.landau->level_tolerance},
                   {"commutator_sigma", c.landau->commutator_sigma},
                   {"commutator_min_ratio", c.landau->commutator_min_ratio}};
  }
  c.resolved = std::move(r);
  return c;
}

/// Switch profile named by the configuration.
inline SwitchFunction make_switch(const RunConfig& c) {
  const auto& s = c.drive.switching;
  if (s.profile == "sampled") {
    std::filesystem::path p(s.file);
    if (p.is_relative()) p = c.source.parent_path() / p;
    return SwitchFunction::from_file(p);
  }
  return SwitchFunction::smoothstep(s.order, s.amplitude);
}

/// Model named by the configuration (spectral or commuting).
inline ModelPair make_model(const RunConfig& c) {
  const auto& m = c.model;
  if (m.kind == "spectral") return build_spectral_model(m.dim, m.gamma0, m.spectrum_max, m.coupling, m.seed);
  if (m.kind == "commuting") return build_commuting_model(m.dim, m.gamma0, m.spectrum_max, m.coupling, m.seed);
  if (!c.landau) throw ConfigError(c.source.string() + ": landau model needs a 'landau' section");
  return build_landau_model(c.landau->certification, m.gamma0);
}

inline CertifyOptions make_certify_options(const RunConfig& c, unsigned threads) {
  CertifyOptions o;
  o.eta_sweep = c.drive.eta_sweep;
  o.n_max = c.certification.n_max;
  o.grid_size = c.certification.grid_size;
  o.tol = c.certification.tol;
  o.eps_probe = c.certification.eps_probe;
  o.constant_points = c.certification.constant_points;
  o.derivative_check = c.certification.derivative_check;
  o.max_steps = c.certification.max_steps;
  o.threads = threads;
  return o;
}

} // namespace propcert
