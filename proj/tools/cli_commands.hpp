#ifndef PSDETECT_CLI_COMMANDS_HPP
#define PSDETECT_CLI_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "psdetect/mc_test.hpp"

namespace psdetect::cli {

/// Everything one invocation needs: input paths, test configuration and
/// output location.
struct RunManifest {
  std::string input_path;
  std::vector<std::string> covariate_paths;
  TestConfig config;
  std::string out_dir = ".";
  std::string null_kind = "auto";  // auto | hpp | ipp | hardcore
  std::string transform = "identity";
  std::string selection_covariates = "all";  // areal: all | w | x | none
};

/// Fill manifest.config from the --alt / --statistic flag spellings.
void alternative_and_statistic(RunManifest& manifest, const std::string& alt,
                               const std::string& statistic);

/// Algorithm-1 style test on a geostatistical point CSV. Writes
/// report.json, report.md and plotdata.csv into out_dir.
int cmd_test_geostat(const RunManifest& manifest);

/// Algorithm-2 style test on an areal-unit CSV. Same artifacts.
int cmd_test_areal(const RunManifest& manifest);

/// Run a simulation-study experiment spec; writes results.csv and
/// summary.json.
int cmd_simstudy(const std::string& spec_path, std::uint64_t seed,
                 const std::string& out_dir, int threads, bool fast);

}  // namespace psdetect::cli

#endif  // PSDETECT_CLI_COMMANDS_HPP
