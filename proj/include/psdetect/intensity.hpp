#ifndef PSDETECT_INTENSITY_HPP
#define PSDETECT_INTENSITY_HPP

#include <memory>
#include <vector>

#include "psdetect/grid_field.hpp"
#include "psdetect/point_pattern.hpp"

namespace psdetect {

/// Log-linear intensity over the unit square:
///   log lambda(s) = intercept + sum_k coefficients[k] * covariates[k](s).
struct IntensityModel {
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<std::shared_ptr<const GridField>> covariates;

  static IntensityModel homogeneous(double rate);

  double log_intensity(const Point& p) const;
  double intensity(const Point& p) const { return std::exp(log_intensity(p)); }

  /// Exact supremum of log lambda over the square. The intensity is
  /// piecewise bilinear on the union refinement of the covariate lattices,
  /// so the supremum is attained at a refinement node.
  double max_log_intensity() const;

  void validate() const;
};

/// Berman-Turner quadrature: data points plus one dummy point per lattice
/// tile, with tile area split evenly over the quadrature points it
/// contains (weights sum to |S| = 1).
struct QuadratureScheme {
  std::vector<Point> nodes;     // data points first, then dummies
  std::vector<double> weights;
  std::vector<std::uint8_t> is_data;
  int tile_resolution = 0;
};

QuadratureScheme make_counting_quadrature(const PointPattern& pattern,
                                          int tile_resolution);

struct FittedIntensity {
  IntensityModel model;
  QuadratureScheme quadrature;
  double loglik = 0.0;
  int iterations = 0;

  /// Quadrature approximation of the integrated intensity over the square.
  double integral() const;

  /// Coefficients, quadrature resolution and log-likelihood as JSON.
  std::string to_json_string(int indent = -1) const;
};

/// Maximize the quadrature-approximated Poisson likelihood by damped
/// Newton iterations (step halving keeps the ascent monotone). With no
/// covariates this is the homogeneous fit lambda = n / |S|. When
/// `loglik_trace` is given, the per-iteration log-likelihoods are
/// appended to it.
FittedIntensity fit_intensity(
    const PointPattern& pattern,
    const std::vector<std::shared_ptr<const GridField>>& covariates,
    bool include_intercept = true, int quad_resolution = 64,
    std::vector<double>* loglik_trace = nullptr);

}  // namespace psdetect

#endif  // PSDETECT_INTENSITY_HPP
