#ifndef PSDETECT_AREAL_HPP
#define PSDETECT_AREAL_HPP

#include <span>
#include <string>
#include <vector>

#include "psdetect/mc_test.hpp"

namespace psdetect {

struct ArealUnit {
  int id = 0;
  double cx = 0.0, cy = 0.0;
  double area = 1.0;
};

/// Selection state and per-unit data for one time index. Marks are
/// meaningful exactly where selected[i] == 1 (NaN elsewhere).
struct ArealFrame {
  int time_index = 0;
  std::vector<std::uint8_t> selected;
  std::vector<double> marks;
  std::vector<std::vector<double>> w_covariates;  // [covariate][unit]
  std::vector<std::vector<double>> x_covariates;

  std::vector<int> selected_indices() const;
};

/// Population of areal units (shared geometry) with per-time selection
/// indicators, marks and covariates.
struct ArealPopulation {
  std::vector<ArealUnit> units;
  std::vector<ArealFrame> frames;

  void validate() const;

  static ArealPopulation read_csv(const std::string& path);
  void write_csv(const std::string& path) const;
};

/// Logistic selection model:
///   logit p(A_i, t) = intercept + alpha' w(A_i,t) + delta' x(A_i,t).
struct SelectionModel {
  double intercept = 0.0;
  std::vector<double> alpha_w;
  std::vector<double> delta_x;

  std::vector<double> fitted_probabilities(const ArealFrame& frame) const;
};

struct CovariateInclude {
  bool w = true;
  bool x = true;
};

/// Logistic maximum likelihood pooled over frames (Newton/IRLS).
/// Intercept-only when no covariates are included.
SelectionModel fit_selection(const ArealPopulation& pop,
                             CovariateInclude include = {});

/// Monte Carlo PS test for areal data: Spearman correlation between the
/// per-unit latent estimates at selected units and centroid KNN mean
/// distances among selected units, with replicates drawn from the fitted
/// Bernoulli selection model (fix_n: weighted sampling without
/// replacement of exactly n_t units, probability proportional to odds).
TestReport run_discrete_test(const ArealPopulation& pop,
                             const std::vector<std::vector<double>>& z_hat,
                             const SelectionModel& model,
                             const TestConfig& config);

}  // namespace psdetect

#endif  // PSDETECT_AREAL_HPP
