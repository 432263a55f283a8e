#ifndef PSDETECT_POINT_PATTERN_HPP
#define PSDETECT_POINT_PATTERN_HPP

#include <optional>
#include <string>
#include <vector>

#include "psdetect/common.hpp"

namespace psdetect {

/// A finite point pattern in [0,1]^2 for one time index, with optional
/// marks aligned to the points.
struct PointPattern {
  std::vector<Point> points;
  int time_index = 0;
  std::optional<std::vector<double>> marks;

  std::size_t size() const { return points.size(); }

  void validate() const {
    for (const Point& p : points)
      if (!in_unit_square(p))
        throw error("PointPattern: point outside the unit square");
    if (marks && marks->size() != points.size())
      throw error("PointPattern: marks length does not match points");
  }
};

/// Read `x,y,t[,mark]` rows, grouped into one pattern per time index
/// (ascending t). Parse failures report the line number.
std::vector<PointPattern> read_point_patterns_csv(const std::string& path);

void write_point_patterns_csv(const std::string& path,
                              const std::vector<PointPattern>& patterns);

}  // namespace psdetect

#endif  // PSDETECT_POINT_PATTERN_HPP
