#include "psdetect/nnstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psdetect {

namespace {

// Static kd-tree over a point span. Nodes are stored as index ranges of a
// permutation array; splitting axis alternates with depth.
class KdTree {
 public:
  explicit KdTree(std::span<const Point> points) : points_(points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0);
    build(0, static_cast<int>(points.size()), 0);
  }

  struct Neighbor {
    double d2;
    int index;
    // worst neighbour first in the heap: larger distance, then larger index
    bool operator<(const Neighbor& other) const {
      if (d2 != other.d2) return d2 < other.d2;
      return index < other.index;
    }
  };

  /// k nearest neighbours of points_[self], self excluded, sorted by
  /// (distance, index).
  std::vector<Neighbor> query(int self, int k) const {
    heap_.clear();
    k_ = k;
    query_ = points_[self];
    self_ = self;
    search(0, static_cast<int>(points_.size()), 0);
    std::vector<Neighbor> result(heap_.begin(), heap_.end());
    std::sort(result.begin(), result.end());
    return result;
  }

 private:
  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int mid = (lo + hi) / 2;
    const int axis = depth % 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi, [&](int a, int b) {
                       const double ca = axis == 0 ? points_[a].x : points_[a].y;
                       const double cb = axis == 0 ? points_[b].x : points_[b].y;
                       if (ca != cb) return ca < cb;
                       return a < b;
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void consider(int idx) const {
    if (idx == self_) return;
    Neighbor cand{squared_distance(query_, points_[idx]), idx};
    if (static_cast<int>(heap_.size()) < k_) {
      heap_.push_back(cand);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (cand < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = cand;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  void search(int lo, int hi, int depth) const {
    if (lo >= hi) return;
    const int mid = (lo + hi) / 2;
    const int node = order_[mid];
    consider(node);
    if (hi - lo == 1) return;
    const int axis = depth % 2;
    const double qc = axis == 0 ? query_.x : query_.y;
    const double nc = axis == 0 ? points_[node].x : points_[node].y;
    const double plane_d2 = (qc - nc) * (qc - nc);
    const bool left_first = qc < nc;
    const auto near_range = left_first ? std::pair{lo, mid}
                                       : std::pair{mid + 1, hi};
    const auto far_range = left_first ? std::pair{mid + 1, hi}
                                      : std::pair{lo, mid};
    search(near_range.first, near_range.second, depth + 1);
    // visit the far side unless it is strictly beyond the current worst;
    // boundary ties must still be visited so index tie-breaks stay exact
    if (static_cast<int>(heap_.size()) < k_ || plane_d2 <= heap_.front().d2)
      search(far_range.first, far_range.second, depth + 1);
  }

  std::span<const Point> points_;
  std::vector<int> order_;
  mutable std::vector<Neighbor> heap_;
  mutable Point query_;
  mutable int self_ = -1;
  mutable int k_ = 0;
};

}  // namespace

KnnTable knn_table(std::span<const Point> points, int k_max) {
  const int n = static_cast<int>(points.size());
  if (k_max < 1 || k_max > n - 1)
    throw error("knn_table: k must satisfy 1 <= k <= n-1 (k=" +
                std::to_string(k_max) + ", n=" + std::to_string(n) + ")");
  KdTree tree(points);
  KnnTable table;
  table.k_max = k_max;
  table.distances.resize(n);
  table.indices.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto neighbors = tree.query(i, k_max);
    table.distances[i].reserve(k_max);
    table.indices[i].reserve(k_max);
    for (const auto& nb : neighbors) {
      if (nb.d2 == 0.0) table.has_duplicate_locations = true;
      table.distances[i].push_back(std::sqrt(nb.d2));
      table.indices[i].push_back(nb.index);
    }
  }
  return table;
}

std::vector<double> KnnTable::mean_distances(int k) const {
  if (k < 1 || k > k_max) throw error("KnnTable: k out of range");
  std::vector<double> means(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += distances[i][j];
    means[i] = total / k;
  }
  return means;
}

KnnSummary knn_mean_distances(const PointPattern& pattern, int k) {
  const auto table = knn_table(pattern.points, k);
  KnnSummary summary;
  summary.k = k;
  summary.mean_distances = table.mean_distances(k);
  summary.indices = table.indices;
  summary.has_duplicate_locations = table.has_duplicate_locations;
  return summary;
}

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw error("spearman_rho: length mismatch");
  if (a.size() < 3)
    throw error("spearman_rho: need at least 3 pairs");
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw degenerate_statistic("spearman_rho: zero rank variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace psdetect
