#include "psdetect/intensity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace psdetect {

IntensityModel IntensityModel::homogeneous(double rate) {
  if (rate < 0.0 || !(rate == rate))
    throw error("IntensityModel: rate must be >= 0");
  IntensityModel model;
  model.intercept = std::log(rate);  // -inf encodes the empty process
  return model;
}

double IntensityModel::log_intensity(const Point& p) const {
  double eta = intercept;
  for (std::size_t k = 0; k < coefficients.size(); ++k)
    eta += coefficients[k] * covariates[k]->interpolate(p);
  return eta;
}

double IntensityModel::max_log_intensity() const {
  if (covariates.empty()) return intercept;
  std::set<double> xs{0.0, 1.0}, ys{0.0, 1.0};
  for (const auto& field : covariates) {
    for (int i = 0; i < field->resolution(); ++i) {
      xs.insert(field->node_coord(i));
      ys.insert(field->node_coord(i));
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double x : xs)
    for (double y : ys)
      best = std::max(best, log_intensity(Point{x, y}));
  return best;
}

void IntensityModel::validate() const {
  if (coefficients.size() != covariates.size())
    throw error("IntensityModel: coefficient/covariate count mismatch");
  for (const auto& field : covariates)
    if (!field) throw error("IntensityModel: null covariate field");
  for (double c : coefficients)
    if (!std::isfinite(c))
      throw error("IntensityModel: non-finite coefficient");
}

QuadratureScheme make_counting_quadrature(const PointPattern& pattern,
                                          int tile_resolution) {
  if (tile_resolution < 1)
    throw error("make_counting_quadrature: tile resolution must be >= 1");
  const int q = tile_resolution;
  const double tile_area = 1.0 / (static_cast<double>(q) * q);
  const std::size_t n = pattern.size();

  auto tile_of = [q](const Point& p) {
    int ix = static_cast<int>(p.x * q);
    int iy = static_cast<int>(p.y * q);
    if (ix >= q) ix = q - 1;
    if (iy >= q) iy = q - 1;
    return iy * q + ix;
  };

  std::vector<int> counts(static_cast<std::size_t>(q) * q, 0);
  for (const Point& p : pattern.points) ++counts[tile_of(p)];

  QuadratureScheme scheme;
  scheme.tile_resolution = q;
  scheme.nodes.reserve(n + counts.size());
  scheme.weights.reserve(n + counts.size());
  scheme.is_data.reserve(n + counts.size());
  for (const Point& p : pattern.points) {
    scheme.nodes.push_back(p);
    scheme.weights.push_back(tile_area / (counts[tile_of(p)] + 1));
    scheme.is_data.push_back(1);
  }
  for (int iy = 0; iy < q; ++iy) {
    for (int ix = 0; ix < q; ++ix) {
      Point dummy{(ix + 0.5) / q, (iy + 0.5) / q};
      scheme.nodes.push_back(dummy);
      scheme.weights.push_back(tile_area / (counts[iy * q + ix] + 1));
      scheme.is_data.push_back(0);
    }
  }
  return scheme;
}

double FittedIntensity::integral() const {
  double total = 0.0;
  for (std::size_t j = 0; j < quadrature.nodes.size(); ++j)
    total += quadrature.weights[j] * model.intensity(quadrature.nodes[j]);
  return total;
}

std::string FittedIntensity::to_json_string(int indent) const {
  nlohmann::json j;
  j["intercept"] = model.intercept;
  j["coefficients"] = model.coefficients;
  j["quadrature_resolution"] = quadrature.tile_resolution;
  j["loglik"] = loglik;
  j["iterations"] = iterations;
  return j.dump(indent);
}

FittedIntensity fit_intensity(
    const PointPattern& pattern,
    const std::vector<std::shared_ptr<const GridField>>& covariates,
    bool include_intercept, int quad_resolution,
    std::vector<double>* loglik_trace) {
  if (pattern.size() == 0)
    throw error("fit_intensity: empty point pattern");
  pattern.validate();
  if (!include_intercept && covariates.empty())
    throw error("fit_intensity: model has no terms");

  QuadratureScheme quadrature =
      make_counting_quadrature(pattern, quad_resolution);
  const std::size_t nq = quadrature.nodes.size();
  const int p = static_cast<int>(covariates.size()) + (include_intercept ? 1 : 0);

  Eigen::MatrixXd design(nq, p);
  for (std::size_t j = 0; j < nq; ++j) {
    int col = 0;
    if (include_intercept) design(j, col++) = 1.0;
    for (const auto& field : covariates)
      design(j, col++) = field->interpolate(quadrature.nodes[j]);
  }

  // collinear covariates have no unique maximizer
  {
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-10);
    if (lu.rank() < p)
      throw error("fit_intensity: covariate design is rank-deficient");
  }

  Eigen::VectorXd weights(nq), counts(nq);
  for (std::size_t j = 0; j < nq; ++j) {
    weights(j) = quadrature.weights[j];
    counts(j) = quadrature.is_data[j] ? 1.0 : 0.0;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (include_intercept)
    beta(0) = std::log(static_cast<double>(pattern.size()));

  auto loglik_at = [&](const Eigen::VectorXd& b, Eigen::VectorXd& eta) {
    eta = design * b;
    // sum over data points of log lambda minus the intensity integral
    double value = counts.dot(eta);
    for (std::size_t j = 0; j < nq; ++j) value -= weights(j) * std::exp(eta(j));
    return value;
  };

  Eigen::VectorXd eta(nq);
  double loglik = loglik_at(beta, eta);
  if (loglik_trace) loglik_trace->push_back(loglik);
  int iterations = 0;
  const int max_iterations = 100;
  bool converged = false;
  double grad_norm = 0.0;
  // gradient entries scale with the point count
  const double grad_tol = 1e-8 * (1.0 + static_cast<double>(pattern.size()));
  const double grad_tol_loose =
      1e-4 * (1.0 + static_cast<double>(pattern.size()));

  for (; iterations < max_iterations; ++iterations) {
    if (eta.maxCoeff() > 40.0)
      throw error("fit_intensity: log-intensity diverging; the design may "
                  "perfectly separate the data points");
    Eigen::VectorXd lam_w = (eta.array().exp() * weights.array()).matrix();
    Eigen::VectorXd grad = design.transpose() * (counts - lam_w);
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm < grad_tol) {
      converged = true;
      break;
    }
    Eigen::MatrixXd hessian = design.transpose() * lam_w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> solver(hessian);
    if (solver.info() != Eigen::Success)
      throw error("fit_intensity: singular Hessian");
    Eigen::VectorXd step = solver.solve(grad);

    // damped step keeps the ascent monotone
    double scale = 1.0;
    Eigen::VectorXd candidate;
    double new_loglik = 0.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      candidate = beta + scale * step;
      new_loglik = loglik_at(candidate, eta);
      if (std::isfinite(new_loglik) && new_loglik >= loglik) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // the log-likelihood can no longer move at double precision
      loglik = loglik_at(beta, eta);
      converged = grad_norm < grad_tol_loose;
      break;
    }
    beta = candidate;
    loglik = new_loglik;
    if (loglik_trace) loglik_trace->push_back(loglik);
  }
  if (!converged && grad_norm >= grad_tol_loose)
    throw error("fit_intensity: Newton iterations did not converge "
                "(gradient norm " + std::to_string(grad_norm) + ")");

  FittedIntensity fitted;
  int col = 0;
  if (include_intercept) fitted.model.intercept = beta(col++);
  for (const auto& field : covariates) {
    fitted.model.coefficients.push_back(beta(col++));
    fitted.model.covariates.push_back(field);
  }
  fitted.quadrature = std::move(quadrature);
  fitted.loglik = loglik;
  fitted.iterations = iterations;
  return fitted;
}

}  // namespace psdetect
