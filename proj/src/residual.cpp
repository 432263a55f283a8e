#include "psdetect/residual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psdetect {

namespace {

constexpr double kKernelCut = 4.0;  // truncate at 4 bandwidths per axis

// Isotropic Gaussian density truncated on the square |dx|,|dy| <= 4h,
// which keeps the kernel separable for the lattice convolutions.
double gauss_kernel(double dx, double dy, double h) {
  const double cut = kKernelCut * h;
  if (std::fabs(dx) > cut || std::fabs(dy) > cut) return 0.0;
  return std::exp(-0.5 * (dx * dx + dy * dy) / (h * h)) /
         (2.0 * M_PI * h * h);
}

double gauss_1d(double t, double h) {
  const double cut = kKernelCut * h;
  if (std::fabs(t) > cut) return 0.0;
  return std::exp(-0.5 * t * t / (h * h)) / std::sqrt(2.0 * M_PI * h * h);
}

}  // namespace

ResidualSmoother::ResidualSmoother(const FittedIntensity& fitted,
                                   double bandwidth, int resolution)
    : bandwidth_(bandwidth), resolution_(resolution) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw error("ResidualSmoother: bandwidth must be positive");
  if (resolution < 2) throw error("ResidualSmoother: resolution must be >= 2");

  const int res = resolution_;
  const std::size_t n = static_cast<std::size_t>(res) * res;
  const double h = 1.0 / (res - 1);
  lambda_.resize(n);
  trapezoid_.resize(n);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const Point u{ix * h, iy * h};
      const std::size_t idx = static_cast<std::size_t>(iy) * res + ix;
      lambda_[idx] = fitted.model.intensity(u);
      const double wx = (ix == 0 || ix == res - 1) ? 0.5 : 1.0;
      const double wy = (iy == 0 || iy == res - 1) ? 0.5 : 1.0;
      trapezoid_[idx] = wx * wy * h * h;
    }
  }

  // 1D smoothing matrix row: node-to-node kernel with trapezoid weights
  const int halfwin =
      std::min(res - 1, static_cast<int>(kKernelCut * bandwidth / h) + 1);
  auto smooth_axis_weight = [&](int node) {
    return (node == 0 || node == res - 1) ? 0.5 : 1.0;
  };

  // separable convolution of the intensity: columns then rows
  std::vector<double> half(n);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      double acc = 0.0;
      const int lo = std::max(0, iy - halfwin);
      const int hi = std::min(res - 1, iy + halfwin);
      for (int jy = lo; jy <= hi; ++jy)
        acc += smooth_axis_weight(jy) * h * gauss_1d((iy - jy) * h, bandwidth) *
               lambda_[static_cast<std::size_t>(jy) * res + ix];
      half[static_cast<std::size_t>(iy) * res + ix] = acc;
    }
  }
  conv_lambda_.resize(n);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      double acc = 0.0;
      const int lo = std::max(0, ix - halfwin);
      const int hi = std::min(res - 1, ix + halfwin);
      for (int jx = lo; jx <= hi; ++jx)
        acc += smooth_axis_weight(jx) * h * gauss_1d((ix - jx) * h, bandwidth) *
               half[static_cast<std::size_t>(iy) * res + jx];
      conv_lambda_[static_cast<std::size_t>(iy) * res + ix] = acc;
    }
  }

  // edge correction factorizes exactly: c(u) = Cx(u.x) * Cy(u.y)
  std::vector<double> axis_mass(res);
  for (int i = 0; i < res; ++i) {
    double acc = 0.0;
    const int lo = std::max(0, i - halfwin);
    const int hi = std::min(res - 1, i + halfwin);
    for (int j = lo; j <= hi; ++j)
      acc += smooth_axis_weight(j) * h * gauss_1d((i - j) * h, bandwidth);
    axis_mass[i] = acc;
  }
  edge_.resize(n);
  for (int iy = 0; iy < res; ++iy)
    for (int ix = 0; ix < res; ++ix)
      edge_[static_cast<std::size_t>(iy) * res + ix] =
          axis_mass[ix] * axis_mass[iy];
}

namespace {

double interp_lattice(const std::vector<double>& values, int res,
                      const Point& p) {
  double gx = p.x * (res - 1);
  double gy = p.y * (res - 1);
  const double rx = std::round(gx), ry = std::round(gy);
  if (std::fabs(gx - rx) < 1e-9) gx = rx;
  if (std::fabs(gy - ry) < 1e-9) gy = ry;
  int ix = std::clamp(static_cast<int>(std::floor(gx)), 0, res - 2);
  int iy = std::clamp(static_cast<int>(std::floor(gy)), 0, res - 2);
  const double fx = gx - ix, fy = gy - iy;
  const auto v = [&](int a, int b) {
    return values[static_cast<std::size_t>(b) * res + a];
  };
  return (1 - fx) * (1 - fy) * v(ix, iy) + fx * (1 - fy) * v(ix + 1, iy) +
         (1 - fx) * fy * v(ix, iy + 1) + fx * fy * v(ix + 1, iy + 1);
}

}  // namespace

double ResidualSmoother::edge_correction(const Point& u) const {
  return interp_lattice(edge_, resolution_, u);
}

double ResidualSmoother::intensity_convolution(const Point& u) const {
  return interp_lattice(conv_lambda_, resolution_, u);
}

double ResidualSmoother::point_mass(const Point& u,
                                    const PointPattern& pattern) const {
  double total = 0.0;
  for (const Point& s : pattern.points)
    total += gauss_kernel(u.x - s.x, u.y - s.y, bandwidth_);
  return total;
}

GridField ResidualSmoother::field(const PointPattern& pattern) const {
  const int res = resolution_;
  const double h = 1.0 / (res - 1);
  std::vector<double> values(static_cast<std::size_t>(res) * res);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const Point u{ix * h, iy * h};
      const std::size_t idx = static_cast<std::size_t>(iy) * res + ix;
      values[idx] =
          (point_mass(u, pattern) - conv_lambda_[idx]) / edge_[idx];
    }
  }
  return GridField(res, std::move(values));
}

GridField smoothed_residual_field(const PointPattern& pattern,
                                  const FittedIntensity& fitted,
                                  double bandwidth, int resolution) {
  return ResidualSmoother(fitted, bandwidth, resolution).field(pattern);
}

double smoothing_kernel(double dx, double dy, double bandwidth) {
  return gauss_kernel(dx, dy, bandwidth);
}

double edge_correction_at(const Point& u, double bandwidth, int resolution) {
  const int res = resolution;
  const double h = 1.0 / (res - 1);
  auto axis_mass = [&](double t) {
    double acc = 0.0;
    const double cut = kKernelCut * bandwidth;
    const int lo = std::max(0, static_cast<int>((t - cut) / h));
    const int hi = std::min(res - 1, static_cast<int>((t + cut) / h) + 1);
    for (int j = lo; j <= hi; ++j) {
      const double w = (j == 0 || j == res - 1) ? 0.5 : 1.0;
      acc += w * h * gauss_1d(t - j * h, bandwidth);
    }
    return acc;
  };
  return axis_mass(u.x) * axis_mass(u.y);
}

double loocv_objective(const PointPattern& pattern,
                       const FittedIntensity& fitted, double bandwidth,
                       int resolution) {
  (void)fitted;  // the risk targets the point-mass half of the residual
  if (!(bandwidth > 0.0))
    throw error("loocv_objective: bandwidth must be positive");
  const auto& pts = pattern.points;

  // integral of the squared edge-corrected point density (trapezoid sum);
  // the node-level edge correction factorizes into per-axis masses
  const int res = resolution;
  const double h = 1.0 / (res - 1);
  std::vector<double> axis_mass(res);
  for (int i = 0; i < res; ++i)
    axis_mass[i] = 0.0;
  {
    const double cut = kKernelCut * bandwidth;
    const int halfwin = std::min(res - 1, static_cast<int>(cut / h) + 1);
    for (int i = 0; i < res; ++i) {
      double acc = 0.0;
      const int lo = std::max(0, i - halfwin);
      const int hi = std::min(res - 1, i + halfwin);
      for (int j = lo; j <= hi; ++j) {
        const double w = (j == 0 || j == res - 1) ? 0.5 : 1.0;
        acc += w * h * gauss_1d((i - j) * h, bandwidth);
      }
      axis_mass[i] = acc;
    }
  }
  double integral = 0.0;
  for (int iy = 0; iy < res; ++iy) {
    const double wy = (iy == 0 || iy == res - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix < res; ++ix) {
      const double wx = (ix == 0 || ix == res - 1) ? 0.5 : 1.0;
      const Point u{ix * h, iy * h};
      double mass = 0.0;
      for (const Point& s : pts)
        mass += gauss_kernel(u.x - s.x, u.y - s.y, bandwidth);
      const double nu = mass / (axis_mass[ix] * axis_mass[iy]);
      integral += wx * wy * h * h * nu * nu;
    }
  }

  // leave-one-out cross term: delete each point and re-smooth
  double loo = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      mass += gauss_kernel(pts[i].x - pts[j].x, pts[i].y - pts[j].y,
                           bandwidth);
    }
    loo += mass / edge_correction_at(pts[i], bandwidth, resolution);
  }
  return integral - 2.0 * loo;
}

BandwidthSelection select_bandwidth_loocv(const PointPattern& pattern,
                                          const FittedIntensity& fitted,
                                          std::span<const double> grid,
                                          int resolution) {
  if (grid.empty())
    throw error("select_bandwidth_loocv: empty candidate grid");
  if (pattern.size() < 3)
    throw error("select_bandwidth_loocv: need at least 3 points");
  BandwidthSelection selection;
  if (grid.size() == 1) {
    selection.bandwidth = grid[0];
    return selection;
  }
  double best_score = std::numeric_limits<double>::infinity();
  double best_h = grid[0];
  double first_finite = std::numeric_limits<double>::quiet_NaN();
  bool any_contrast = false;
  for (double h : grid) {
    const double score = loocv_objective(pattern, fitted, h, resolution);
    if (!std::isfinite(score)) continue;
    if (std::isnan(first_finite))
      first_finite = score;
    else if (score != first_finite)
      any_contrast = true;
    if (score < best_score) {
      best_score = score;
      best_h = h;
    }
  }
  if (!std::isfinite(best_score) || !any_contrast) {
    selection.bandwidth = grid[0];
    selection.degenerate = true;
    return selection;
  }
  selection.bandwidth = best_h;
  return selection;
}

std::vector<double> default_bandwidth_grid(int resolution) {
  const double lo = 0.5 / (resolution - 1);
  const double hi = 0.25;
  const int count = 10;
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    grid[i] = lo * std::pow(hi / lo, t);
  }
  return grid;
}

}  // namespace psdetect
