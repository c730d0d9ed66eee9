// Command-line front end: certify, gauge-check and landau runs driven by one
// YAML configuration file each.

#include <CLI11.hpp>

#include "propcert/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Energy-norm bound certification for switched perturbations of a Hamiltonian"};
  app.require_subcommand(1);

  propcert::RunOptions opts;
  std::string config, out_dir;
  unsigned threads = 1;
  bool verbose = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "run configuration (YAML)")->required();
    sub->add_option("--out-dir", out_dir, "artifact directory (overrides output.directory)");
    sub->add_option("--threads", threads, "worker threads for independent eta cells")->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", verbose, "progress messages on stderr");
  };
  auto* certify = app.add_subcommand("certify", "full certificate, CSV and plot data");
  auto* gauge = app.add_subcommand("gauge-check", "gauge identity audit between the two pictures");
  auto* landau = app.add_subcommand("landau", "magnetic Laplacian levels, commutator and reduced certificate");
  for (auto* s : {certify, gauge, landau}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : propcert::kExitConfig;
  }

  opts.config = config;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  opts.threads = threads;
  opts.verbose = verbose;

  if (*certify) return propcert::run_certify(opts);
  if (*gauge) return propcert::run_gauge_check(opts);
  return propcert::run_landau(opts);
}
