#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cli_commands.hpp"
#include "psdetect/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"psdetect - Monte Carlo tests for preferential sampling in "
               "spatial data"};
  app.require_subcommand(1);

  psdetect::cli::RunManifest manifest;
  std::string alt = "two";
  std::string statistic = "nn";
  manifest.config.threads = psdetect::default_thread_count();

  auto add_test_flags = [&](CLI::App* cmd) {
    cmd->add_option("--input", manifest.input_path, "input CSV")->required();
    cmd->add_option("--k", manifest.config.k_values,
                    "K values for the NN statistic")
        ->delimiter(',');
    cmd->add_option("--m", manifest.config.m, "Monte Carlo samples");
    cmd->add_option("--alt", alt, "alternative: pos, neg or two");
    cmd->add_flag("--fix-n", manifest.config.fix_n,
                  "condition replicates on the observed sample size");
    cmd->add_option("--statistic", statistic, "nn or residual");
    cmd->add_option("--bandwidth", manifest.config.bandwidth,
                    "residual smoothing bandwidth (default: LOOCV)");
    cmd->add_option("--seed", manifest.config.seed, "master seed");
    cmd->add_option("--out", manifest.out_dir, "output directory");
    cmd->add_option("--threads", manifest.config.threads, "worker threads");
    cmd->add_option("--transform", manifest.transform,
                    "mark transform: identity, log-ratio, anscombe-count");
  };

  CLI::App* geostat =
      app.add_subcommand("test-geostat", "PS test for point-location data");
  add_test_flags(geostat);
  geostat->add_option("--covariates", manifest.covariate_paths,
                      "covariate raster CSVs")
      ->delimiter(',');
  geostat->add_option("--null", manifest.null_kind,
                      "null model: auto, hpp, ipp or hardcore");

  CLI::App* areal =
      app.add_subcommand("test-areal", "PS test for areal-unit data");
  add_test_flags(areal);
  areal->add_option("--selection-covariates", manifest.selection_covariates,
                    "covariates in the selection model: all, w, x or none");

  std::string spec_path, sim_out = ".";
  std::uint64_t sim_seed = 0;
  int sim_threads = psdetect::default_thread_count();
  bool fast = false;
  CLI::App* sim = app.add_subcommand("simstudy", "run a simulation study");
  sim->add_option("--spec", spec_path, "experiment spec JSON")->required();
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--threads", sim_threads, "worker threads");
  sim->add_flag("--fast", fast, "cap replicates at 50 for quick runs");

  CLI11_PARSE(app, argc, argv);

  try {
    psdetect::cli::alternative_and_statistic(manifest, alt, statistic);
    if (geostat->parsed()) return psdetect::cli::cmd_test_geostat(manifest);
    if (areal->parsed()) return psdetect::cli::cmd_test_areal(manifest);
    if (sim->parsed())
      return psdetect::cli::cmd_simstudy(spec_path, sim_seed, sim_out,
                                         sim_threads, fast);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
