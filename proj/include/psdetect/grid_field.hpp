#ifndef PSDETECT_GRID_FIELD_HPP
#define PSDETECT_GRID_FIELD_HPP

#include <optional>
#include <string>
#include <vector>

#include "psdetect/common.hpp"
#include "psdetect/matern.hpp"

namespace psdetect {

/// Scalar field sampled on a regular (resolution x resolution) lattice of
/// nodes covering [0,1]^2, with bilinear interpolation between nodes.
/// Immutable after construction, safe to share across threads.
class GridField {
 public:
  GridField(int resolution, std::vector<double> values,
            std::optional<MaternParams> params = std::nullopt);

  static GridField constant(int resolution, double value);

  int resolution() const { return resolution_; }
  double spacing() const { return 1.0 / (resolution_ - 1); }
  const std::optional<MaternParams>& params() const { return params_; }
  const std::vector<double>& values() const { return values_; }

  double node_coord(int i) const {
    return static_cast<double>(i) / (resolution_ - 1);
  }
  double at_node(int ix, int iy) const {
    return values_[static_cast<std::size_t>(iy) * resolution_ + ix];
  }

  /// Bilinear interpolation; exact at lattice nodes. Rejects points
  /// outside [0,1]^2.
  double interpolate(const Point& p) const;
  double operator()(double x, double y) const {
    return interpolate(Point{x, y});
  }

  double min_value() const;
  double max_value() const;

  void write_csv(const std::string& path) const;
  static GridField read_csv(const std::string& path);

 private:
  int resolution_;
  std::vector<double> values_;
  std::optional<MaternParams> params_;
};

}  // namespace psdetect

#endif  // PSDETECT_GRID_FIELD_HPP
