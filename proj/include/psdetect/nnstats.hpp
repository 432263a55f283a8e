#ifndef PSDETECT_NNSTATS_HPP
#define PSDETECT_NNSTATS_HPP

#include <span>
#include <vector>

#include "psdetect/point_pattern.hpp"

namespace psdetect {

/// Per-point mean distance to the K nearest neighbours, with the
/// neighbour index sets. No edge correction.
struct KnnSummary {
  int k = 0;
  std::vector<double> mean_distances;
  std::vector<std::vector<int>> indices;
  bool has_duplicate_locations = false;
};

/// Exact Euclidean KNN via a kd-tree. Equidistant neighbours are broken
/// by lowest index. Requires 1 <= k <= n-1.
KnnSummary knn_mean_distances(const PointPattern& pattern, int k);

/// Sorted distances (and indices) to the k nearest neighbours of every
/// point; mean distances for any smaller K are prefix means of row i.
struct KnnTable {
  int k_max = 0;
  std::vector<std::vector<double>> distances;  // [point][rank]
  std::vector<std::vector<int>> indices;
  bool has_duplicate_locations = false;

  std::vector<double> mean_distances(int k) const;
};

KnnTable knn_table(std::span<const Point> points, int k_max);

/// Midrank vector (average ranks over ties), 1-based.
std::vector<double> mid_ranks(std::span<const double> values);

/// Spearman's rank correlation: Pearson correlation of midranks.
/// Throws degenerate_statistic if either argument has zero rank variance.
double spearman_rho(std::span<const double> a, std::span<const double> b);

}  // namespace psdetect

#endif  // PSDETECT_NNSTATS_HPP
