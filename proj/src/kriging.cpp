#include "psdetect/kriging.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <json.hpp>

namespace psdetect {

namespace {

struct Bounds {
  double sigma2_lo = 1e-4, sigma2_hi = 25.0;
  double range_lo = 1.0 / 63.0, range_hi = 4.0;
  double nugget_lo = 1e-8, nugget_hi = 25.0;
};

// optimizer works on unconstrained u; parameters are logistic-mapped into
// their boxes
double to_box(double u, double lo, double hi) {
  return lo + (hi - lo) / (1.0 + std::exp(-u));
}
double from_box(double x, double lo, double hi) {
  const double t = std::clamp((x - lo) / (hi - lo), 1e-12, 1.0 - 1e-12);
  return std::log(t / (1.0 - t));
}

struct Theta {
  double sigma2, range, nugget;
};

Theta decode(const Eigen::Vector3d& u, const Bounds& b) {
  return Theta{to_box(u(0), b.sigma2_lo, b.sigma2_hi),
               to_box(u(1), b.range_lo, b.range_hi),
               to_box(u(2), b.nugget_lo, b.nugget_hi)};
}

Eigen::Vector3d encode(const Theta& t, const Bounds& b) {
  Eigen::Vector3d u;
  u << from_box(t.sigma2, b.sigma2_lo, b.sigma2_hi),
      from_box(t.range, b.range_lo, b.range_hi),
      from_box(t.nugget, b.nugget_lo, b.nugget_hi);
  return u;
}

// Builds C = sigma2 R + nugget I and factors it, escalating diagonal
// jitter when the factorization fails.
Eigen::LLT<Eigen::MatrixXd> factor_covariance(
    const Eigen::MatrixXd& dist, const MaternShape& shape, double sigma2,
    double range, double nugget) {
  const int n = static_cast<int>(dist.rows());
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    cov(i, i) = sigma2 + nugget;
    for (int j = i + 1; j < n; ++j) {
      const double v = sigma2 * shape.correlation_fast(dist(i, j), range);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  double applied = 0.0;
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    if (jitter > 0.0) cov.diagonal().array() += sigma2 * (jitter - applied);
    applied = jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw error("kriging: covariance not positive definite after jitter");
}

struct ProfileFit {
  double nll = std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta;
};

// Concentrated negative log marginal likelihood: beta profiled out by GLS.
ProfileFit profile_nll(const Eigen::MatrixXd& dist,
                       const Eigen::MatrixXd& design,
                       const Eigen::VectorXd& z, const MaternShape& shape,
                       const Theta& theta) {
  ProfileFit fit;
  const int n = static_cast<int>(z.size());
  Eigen::LLT<Eigen::MatrixXd> llt;
  try {
    llt = factor_covariance(dist, shape, theta.sigma2, theta.range,
                            theta.nugget);
  } catch (const error&) {
    return fit;  // infinite nll
  }
  const Eigen::MatrixXd ci_x = llt.solve(design);
  const Eigen::VectorXd ci_z = llt.solve(z);
  const Eigen::MatrixXd xtcx = design.transpose() * ci_x;
  Eigen::LDLT<Eigen::MatrixXd> gls(xtcx);
  if (gls.info() != Eigen::Success) return fit;
  fit.beta = gls.solve(design.transpose() * ci_z);
  const Eigen::VectorXd resid = z - design * fit.beta;
  const Eigen::VectorXd ci_r = llt.solve(resid);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;
  fit.nll = 0.5 * (logdet + resid.dot(ci_r) +
                   n * std::log(2.0 * M_PI));
  return fit;
}

struct BfgsResult {
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  double f = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool stalled = false;
};

// Quasi-Newton (BFGS, inverse-Hessian form) with Armijo backtracking and
// central finite-difference gradients in the unconstrained coordinates.
BfgsResult bfgs_minimize(const std::function<double(const Eigen::Vector3d&)>& f,
                         Eigen::Vector3d u0, int max_iters) {
  const double fd_step = 1e-5;
  auto gradient = [&](const Eigen::Vector3d& u) {
    Eigen::Vector3d g;
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d up = u, dn = u;
      up(i) += fd_step;
      dn(i) -= fd_step;
      g(i) = (f(up) - f(dn)) / (2.0 * fd_step);
    }
    return g;
  };

  BfgsResult result;
  result.u = u0;
  result.f = f(u0);
  if (!std::isfinite(result.f)) return result;
  Eigen::Vector3d g = gradient(u0);
  Eigen::Matrix3d hinv = Eigen::Matrix3d::Identity();

  for (int iter = 0; iter < max_iters; ++iter) {
    result.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (result.grad_norm < 1e-6) break;
    Eigen::Vector3d direction = -hinv * g;
    if (direction.dot(g) >= 0.0) direction = -g;

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::Vector3d u_new;
    bool ok = false;
    for (int ls = 0; ls < 30; ++ls) {
      u_new = result.u + step * direction;
      f_new = f(u_new);
      if (std::isfinite(f_new) &&
          f_new <= result.f + 1e-4 * step * direction.dot(g)) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      result.stalled = true;
      break;
    }
    const Eigen::Vector3d g_new = gradient(u_new);
    const Eigen::Vector3d s = u_new - result.u;
    const Eigen::Vector3d y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::Vector3d hy = hinv * y;
      hinv += ((sy + y.dot(hy)) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    const double improvement = result.f - f_new;
    result.u = u_new;
    result.f = f_new;
    g = g_new;
    result.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (improvement < 1e-10 * (1.0 + std::fabs(result.f))) break;
  }
  return result;
}

Eigen::MatrixXd pairwise_distances(const std::vector<Point>& pts) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = distance(pts[i], pts[j]);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

Eigen::MatrixXd build_design(
    const std::vector<Point>& pts,
    const std::vector<std::shared_ptr<const GridField>>& covariates) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd design(n, 1 + covariates.size());
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t k = 0; k < covariates.size(); ++k)
      design(i, 1 + k) = covariates[k]->interpolate(pts[i]);
  }
  return design;
}

}  // namespace

std::string to_string(ResponseTransform transform) {
  switch (transform) {
    case ResponseTransform::identity: return "identity";
    case ResponseTransform::log_ratio: return "log-ratio";
    case ResponseTransform::anscombe_count: return "anscombe-count";
  }
  return "?";
}

std::string KrigingModel::to_json_string(int indent) const {
  nlohmann::json j;
  j["nu"] = params.nu;
  j["sigma"] = params.sigma;
  j["range"] = params.range;
  j["nugget"] = nugget;
  j["mean"] = mean;
  j["coefficients"] = coefficients;
  j["transform"] = to_string(transform);
  j["loglik"] = loglik;
  return j.dump(indent);
}

double apply_transform(double y, ResponseTransform transform) {
  switch (transform) {
    case ResponseTransform::identity:
      return y;
    case ResponseTransform::log_ratio:
      if (!(y > 0.0))
        throw error("log-ratio transform requires positive marks");
      return std::log(y);
    case ResponseTransform::anscombe_count:
      if (y < 0.0 || std::fabs(y - std::round(y)) > 1e-9)
        throw error("anscombe transform requires non-negative integer marks");
      return 2.0 * std::sqrt(y + 0.375);
  }
  throw error("unknown transform");
}

std::vector<double> apply_transform(std::span<const double> y,
                                    ResponseTransform transform) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = apply_transform(y[i], transform);
  return out;
}

KrigingModel fit_kriging(
    const PointPattern& pattern,
    const std::vector<std::shared_ptr<const GridField>>& covariates,
    ResponseTransform transform, double fixed_nu) {
  pattern.validate();
  if (!pattern.marks)
    throw error("fit_kriging: pattern has no marks");
  const std::size_t n = pattern.size();
  if (n < 5) throw error("fit_kriging: need at least 5 marked points");

  const std::vector<double> z_values =
      apply_transform(*pattern.marks, transform);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = z_values[i];

  double z_mean = z.mean();
  double z_var = (z.array() - z_mean).square().sum() / (n - 1);
  if (z_var < 1e-14 * (1.0 + z_mean * z_mean))
    throw error("fit_kriging: all marks identical (degenerate variance)");

  Bounds bounds;
  double min_spacing = 1.0 / 63.0;
  for (const auto& field : covariates)
    min_spacing = std::min(min_spacing, field->spacing());
  bounds.range_lo = min_spacing;

  const MaternShape& shape = MaternShape::get(fixed_nu);
  const Eigen::MatrixXd dist = pairwise_distances(pattern.points);
  const Eigen::MatrixXd design = build_design(pattern.points, covariates);

  auto objective = [&](const Eigen::Vector3d& u) {
    return profile_nll(dist, design, z, shape, decode(u, bounds)).nll;
  };

  const double s2 = std::clamp(z_var, bounds.sigma2_lo, bounds.sigma2_hi);
  const Theta starts[5] = {
      {s2, 0.1, std::max(0.1 * s2, bounds.nugget_lo)},
      {s2, 0.5, std::max(0.01 * s2, bounds.nugget_lo)},
      {std::max(0.5 * s2, bounds.sigma2_lo), 0.05,
       std::max(0.5 * s2, bounds.nugget_lo)},
      {s2, std::min(1.0, bounds.range_hi), 1e-6},
      {std::max(0.25 * s2, bounds.sigma2_lo), 0.02,
       std::max(0.75 * s2, bounds.nugget_lo)},
  };

  BfgsResult best;
  for (const Theta& start : starts) {
    Theta clipped = start;
    clipped.range = std::clamp(clipped.range, bounds.range_lo,
                               bounds.range_hi);
    clipped.nugget =
        std::clamp(clipped.nugget, bounds.nugget_lo, bounds.nugget_hi);
    const BfgsResult run =
        bfgs_minimize(objective, encode(clipped, bounds), 60);
    if (run.f < best.f) best = run;
  }

  const Theta theta = decode(best.u, bounds);
  const ProfileFit fit = profile_nll(dist, design, z, shape, theta);
  if (!std::isfinite(best.f) || !std::isfinite(fit.nll))
    throw kriging_error("fit_kriging: likelihood search failed from every "
                        "start",
                        KrigingModel{});

  KrigingModel model;
  model.params.nu = fixed_nu;
  model.params.sigma = std::sqrt(theta.sigma2);
  model.params.range = theta.range;
  model.nugget = theta.nugget;
  model.mean = fit.beta(0);
  for (std::size_t k = 0; k < covariates.size(); ++k)
    model.coefficients.push_back(fit.beta(1 + k));
  model.covariate_fields = covariates;
  model.transform = transform;
  model.loglik = -fit.nll;
  return model;
}

KrigingPredictor::KrigingPredictor(const KrigingModel& model,
                                   const PointPattern& pattern)
    : model_(model), data_points_(pattern.points) {
  if (!pattern.marks)
    throw error("KrigingPredictor: pattern has no marks");
  pattern.validate();
  const std::size_t n = pattern.size();
  const std::vector<double> z_values =
      apply_transform(*pattern.marks, model.transform);

  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = z_values[i];
  const Eigen::MatrixXd design =
      build_design(data_points_, model.covariate_fields);

  const MaternShape& shape = MaternShape::get(model.params.nu);
  const Eigen::MatrixXd dist = pairwise_distances(data_points_);
  const double sigma2 = model.params.sigma * model.params.sigma;
  chol_ = factor_covariance(dist, shape, sigma2, model.params.range,
                            model.nugget);

  // trend re-estimated by GLS under the frozen covariance, so that shifts
  // and covariate effects in the marks are absorbed before predicting Z
  const Eigen::MatrixXd ci_x = chol_.solve(design);
  Eigen::LDLT<Eigen::MatrixXd> gls(design.transpose() * ci_x);
  if (gls.info() != Eigen::Success)
    throw error("KrigingPredictor: singular GLS system");
  beta_ = gls.solve(design.transpose() * chol_.solve(z));
  weights_ = chol_.solve((z - design * beta_).eval());
}

std::vector<double> KrigingPredictor::predict(
    std::span<const Point> targets) const {
  const MaternShape& shape = MaternShape::get(model_.params.nu);
  const double sigma2 = model_.params.sigma * model_.params.sigma;
  const double range = model_.params.range;
  std::vector<double> out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!in_unit_square(targets[t]))
      throw error("KrigingPredictor: target outside the unit square");
    double value = 0.0;
    for (std::size_t i = 0; i < data_points_.size(); ++i) {
      const double d = distance(targets[t], data_points_[i]);
      value += sigma2 * shape.correlation_fast(d, range) * weights_(i);
    }
    out[t] = value;
  }
  return out;
}

std::vector<double> KrigingPredictor::predict_variance(
    std::span<const Point> targets) const {
  const MaternShape& shape = MaternShape::get(model_.params.nu);
  const double sigma2 = model_.params.sigma * model_.params.sigma;
  const double range = model_.params.range;
  const std::size_t n = data_points_.size();
  std::vector<double> out(targets.size());
  Eigen::VectorXd cross(n);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = distance(targets[t], data_points_[i]);
      cross(i) = sigma2 * shape.correlation_fast(d, range);
    }
    const double reduction = cross.dot(chol_.solve(cross).eval());
    out[t] = std::max(0.0, sigma2 - reduction);
  }
  return out;
}

std::vector<double> predict_z(const KrigingModel& model,
                              const PointPattern& pattern,
                              std::span<const Point> targets) {
  return KrigingPredictor(model, pattern).predict(targets);
}

}  // namespace psdetect
