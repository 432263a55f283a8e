#ifndef PSDETECT_SIM_STUDY_HPP
#define PSDETECT_SIM_STUDY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "psdetect/mc_test.hpp"

namespace psdetect {

enum class ResponseKind { gaussian, poisson_count };
enum class TruthKind { binomial_ipp, hardcore };
enum class NullKind { automatic, ipp, hardcore };
enum class TestKind { nn_mc, residual_mc, nn_perm, residual_perm };

std::string to_string(ResponseKind v);
std::string to_string(TruthKind v);
std::string to_string(NullKind v);
std::string to_string(TestKind v);

/// One cell of the simulation study: the generative settings, the tests to
/// run and the Monte Carlo sizes.
struct ExperimentSpec {
  int n = 50;
  double gamma = 0.0;
  double alpha1 = 0.0;
  double rho_z = 0.2;
  double rho_w = 1.0;
  std::vector<int> k_values{1, 5, 10};
  int replicates = 200;
  int m = 19;
  ResponseKind response = ResponseKind::gaussian;
  TruthKind truth = TruthKind::binomial_ipp;
  double hardcore_radius = 0.0;
  NullKind null_kind = NullKind::automatic;
  std::vector<TestKind> tests{TestKind::nn_mc};
  int resolution = 64;
  bool fix_n = true;
  double level = 0.05;

  void validate() const;
  std::string to_json_string(int indent = -1) const;
  /// Throws with a list of offending fields on schema violations.
  static ExperimentSpec from_json_string(const std::string& text);
};

struct CellResult {
  TestKind test = TestKind::nn_mc;
  int k = 0;  // 0 for the residual statistic
  int rejections = 0;
  int used = 0;  // replicates that produced a p-value
  double rate = 0.0;
  double std_error = 0.0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;
  int skipped_replicates = 0;
  /// Per-replicate outcome per cell: 1 reject, 0 accept, 2 skipped.
  /// Indexed [cell][replicate]; cells in the same order as `cells`.
  std::vector<std::vector<std::uint8_t>> outcomes;

  std::string to_csv_string() const;
  std::string to_json_string(int indent = 2) const;

  const CellResult& cell(TestKind test, int k) const;
};

/// Run the experiment. Outer replicates parallelize across threads with
/// per-replicate substreams, so results are bit-identical for a fixed seed
/// regardless of thread count.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                std::uint64_t seed, int threads = 1);

}  // namespace psdetect

#endif  // PSDETECT_SIM_STUDY_HPP
