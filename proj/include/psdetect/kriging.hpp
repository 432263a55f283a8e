#ifndef PSDETECT_KRIGING_HPP
#define PSDETECT_KRIGING_HPP

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "psdetect/grid_field.hpp"
#include "psdetect/matern.hpp"
#include "psdetect/point_pattern.hpp"

namespace psdetect {

enum class ResponseTransform { identity, log_ratio, anscombe_count };

/// Gaussian-process regression model for the latent field: transformed
/// marks = beta0 + beta' x(s) + Z(s) + noise, Z Matern with the stored
/// hyperparameters, noise variance `nugget`.
struct KrigingModel {
  MaternParams params;
  double nugget = 0.0;
  double mean = 0.0;                 // beta0
  std::vector<double> coefficients;  // beta over covariate fields
  std::vector<std::shared_ptr<const GridField>> covariate_fields;
  ResponseTransform transform = ResponseTransform::identity;
  double loglik = 0.0;

  /// Hyperparameters and trend as JSON (covariate fields export
  /// separately through the grid CSV format).
  std::string to_json_string(int indent = -1) const;
};

std::string to_string(ResponseTransform transform);

/// Thrown when the marginal-likelihood search fails; carries the best
/// parameters found.
class kriging_error : public error {
 public:
  kriging_error(const std::string& msg, KrigingModel best)
      : error(msg), best_found(std::move(best)) {}
  KrigingModel best_found;
};

double apply_transform(double y, ResponseTransform transform);
std::vector<double> apply_transform(std::span<const double> y,
                                    ResponseTransform transform);

/// Estimate (sigma, range, nugget, beta) by maximizing the Gaussian
/// marginal likelihood of the transformed marks. The smoothness nu is held
/// fixed. Bounded quasi-Newton search with 5 deterministic restarts.
KrigingModel fit_kriging(
    const PointPattern& pattern,
    const std::vector<std::shared_ptr<const GridField>>& covariates,
    ResponseTransform transform = ResponseTransform::identity,
    double fixed_nu = 1.0);

/// Frozen kriging weights for repeated prediction at new targets: the
/// posterior mean of the mean-centered latent field Z (trend and covariate
/// effects subtracted). Immutable, safe to share across threads.
class KrigingPredictor {
 public:
  KrigingPredictor(const KrigingModel& model, const PointPattern& pattern);

  std::vector<double> predict(std::span<const Point> targets) const;
  std::vector<double> predict_variance(std::span<const Point> targets) const;

  const KrigingModel& model() const { return model_; }
  /// GLS trend estimate (intercept first) under the frozen covariance.
  const Eigen::VectorXd& trend_coefficients() const { return beta_; }

 private:
  KrigingModel model_;
  std::vector<Point> data_points_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd weights_;  // C^{-1} (z - X beta)
  Eigen::LLT<Eigen::MatrixXd> chol_;
};

/// Posterior mean of Z at the targets under `model`, trained on the
/// pattern's (transformed, detrended) marks.
std::vector<double> predict_z(const KrigingModel& model,
                              const PointPattern& pattern,
                              std::span<const Point> targets);

}  // namespace psdetect

#endif  // PSDETECT_KRIGING_HPP
