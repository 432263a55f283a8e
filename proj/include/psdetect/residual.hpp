#ifndef PSDETECT_RESIDUAL_HPP
#define PSDETECT_RESIDUAL_HPP

#include <span>
#include <vector>

#include "psdetect/intensity.hpp"

namespace psdetect {

/// Kernel-smoothed raw residuals of a fitted intensity:
///   s(u) = [ sum_i kappa_h(u - s_i) - int kappa_h(u - v) lambda(v) dv ] / c(u)
/// with c(u) = int_S kappa_h(u - v) dv the edge correction. The kernel is
/// an isotropic Gaussian truncated at 4 bandwidths; integrals are
/// trapezoidal lattice sums. The intensity convolution and the edge
/// correction depend only on the fitted model, so they are precomputed on
/// the lattice once and interpolated, which makes per-replicate residual
/// evaluation cheap inside Monte Carlo loops.
class ResidualSmoother {
 public:
  ResidualSmoother(const FittedIntensity& fitted, double bandwidth,
                   int resolution = 64);

  double bandwidth() const { return bandwidth_; }
  int resolution() const { return resolution_; }

  /// Edge-correction mass c(u) (interpolated off the lattice).
  double edge_correction(const Point& u) const;
  /// Intensity convolution int kappa_h(u-v) lambda(v) dv (interpolated).
  double intensity_convolution(const Point& u) const;
  /// Kernel sum over the pattern points (exact, no lattice).
  double point_mass(const Point& u, const PointPattern& pattern) const;

  double at(const Point& u, const PointPattern& pattern) const {
    return (point_mass(u, pattern) - intensity_convolution(u)) /
           edge_correction(u);
  }

  GridField field(const PointPattern& pattern) const;

 private:
  double lattice_sum(const Point& u, const std::vector<double>& f) const;

  double bandwidth_;
  int resolution_;
  std::vector<double> lambda_;       // fitted intensity at lattice nodes
  std::vector<double> trapezoid_;    // trapezoid weights
  std::vector<double> conv_lambda_;  // intensity convolution at nodes
  std::vector<double> edge_;         // edge correction at nodes
};

GridField smoothed_residual_field(const PointPattern& pattern,
                                  const FittedIntensity& fitted,
                                  double bandwidth, int resolution = 64);

/// Edge-correction mass c(u) = int_S kappa_h(u - v) dv as a direct
/// trapezoidal lattice sum (no precomputation).
double edge_correction_at(const Point& u, double bandwidth,
                          int resolution = 64);

/// Smoothing kernel at offset (dx, dy): isotropic Gaussian density
/// truncated at 4 bandwidths per axis.
double smoothing_kernel(double dx, double dy, double bandwidth);

/// Leave-one-out squared-error objective for the smoothed point mass
/// nu_h(u) = sum_i kappa_h(u - s_i) / c(u): the unbiased risk estimate
///   int nu_h(u)^2 du - 2 sum_i nu_{h,-i}(s_i),
/// where nu_{h,-i} re-smooths with point i deleted. Smaller is better.
double loocv_objective(const PointPattern& pattern,
                       const FittedIntensity& fitted, double bandwidth,
                       int resolution = 64);

struct BandwidthSelection {
  double bandwidth = 0.0;
  bool degenerate = false;  // grid gave no usable contrast
};

BandwidthSelection select_bandwidth_loocv(const PointPattern& pattern,
                                          const FittedIntensity& fitted,
                                          std::span<const double> grid,
                                          int resolution = 64);

/// 10 log-spaced candidates between half the lattice spacing and 0.25.
std::vector<double> default_bandwidth_grid(int resolution = 64);

}  // namespace psdetect

#endif  // PSDETECT_RESIDUAL_HPP
