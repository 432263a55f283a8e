#ifndef PSDETECT_MATERN_HPP
#define PSDETECT_MATERN_HPP

#include <memory>
#include <vector>

#include "psdetect/common.hpp"

namespace psdetect {

/// Matern family parameters. `range` is the practical range: the distance
/// at which the correlation drops to 0.1.
struct MaternParams {
  double nu = 1.0;
  double sigma = 1.0;
  double range = 0.2;

  void validate() const;
};

/// Matern correlation at distance d, calibrated so that
/// matern_correlation(params.range, params) == 0.1.
double matern_correlation(double d, const MaternParams& params);

/// Dimensionless Matern shape g(x) = 2^{1-nu}/Gamma(nu) x^nu K_nu(x) for a
/// fixed smoothness, together with the calibration constant x0 solving
/// g(x0) = 0.1 and a cubic-Hermite table for hot loops. Shapes are cached
/// per nu and immutable once built.
class MaternShape {
 public:
  static const MaternShape& get(double nu);

  double nu() const { return nu_; }
  /// x with g(x) = 0.1 (bisection to 1e-12 relative; ln 10 for nu = 1/2).
  double x_at_p10() const { return x10_; }

  double exact(double x) const;
  /// Table lookup, accurate to ~1e-12 against exact(); 0 beyond the cut.
  double fast(double x) const;

  /// Correlation at distance d for a given practical range.
  double correlation(double d, double range) const {
    if (d == 0.0) return 1.0;
    return exact(d * x10_ / range);
  }
  double correlation_fast(double d, double range) const {
    if (d == 0.0) return 1.0;
    return fast(d * x10_ / range);
  }

 private:
  explicit MaternShape(double nu);

  double nu_ = 1.0;
  double x10_ = 0.0;
  double ucut_ = 0.0;
  double du_ = 0.0;
  std::vector<double> val_;
  std::vector<double> der_;  // dg/du on the log1p grid
};

}  // namespace psdetect

#endif  // PSDETECT_MATERN_HPP
