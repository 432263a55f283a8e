#include "psdetect/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace psdetect {

namespace {

constexpr double kMaxLogIntensity = 40.0;

double checked_max_log(const IntensityModel& intensity) {
  intensity.validate();
  const double max_log = intensity.max_log_intensity();
  if (max_log > kMaxLogIntensity)
    throw error("sampler: intensity maximum exp(" + std::to_string(max_log) +
                ") is too large");
  return max_log;
}

// Uniform grid of buckets with cell size >= radius, so conflicts can only
// sit in the 3x3 neighbourhood of a point's bucket.
class CellList {
 public:
  CellList(double radius, std::size_t n_hint) {
    cells_per_axis_ = 64;
    if (radius > 0.0)
      cells_per_axis_ =
          std::clamp(static_cast<int>(1.0 / radius), 1, 64);
    buckets_.resize(static_cast<std::size_t>(cells_per_axis_) *
                    cells_per_axis_);
    for (auto& b : buckets_) b.reserve(2 + n_hint / buckets_.size());
  }

  int bucket_of(const Point& p) const {
    int ix = static_cast<int>(p.x * cells_per_axis_);
    int iy = static_cast<int>(p.y * cells_per_axis_);
    ix = std::min(ix, cells_per_axis_ - 1);
    iy = std::min(iy, cells_per_axis_ - 1);
    return iy * cells_per_axis_ + ix;
  }

  void insert(int index, const Point& p) {
    buckets_[bucket_of(p)].push_back(index);
  }

  void remove(int index, const Point& p) {
    auto& bucket = buckets_[bucket_of(p)];
    bucket.erase(std::find(bucket.begin(), bucket.end(), index));
  }

  /// Any point (other than `exclude`) within distance <= radius of p?
  bool conflicts(const Point& p, double radius,
                 const std::vector<Point>& points, int exclude) const {
    const double r2 = radius * radius;
    const int cx = std::min(static_cast<int>(p.x * cells_per_axis_),
                            cells_per_axis_ - 1);
    const int cy = std::min(static_cast<int>(p.y * cells_per_axis_),
                            cells_per_axis_ - 1);
    for (int dy = -1; dy <= 1; ++dy) {
      const int iy = cy + dy;
      if (iy < 0 || iy >= cells_per_axis_) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const int ix = cx + dx;
        if (ix < 0 || ix >= cells_per_axis_) continue;
        for (int idx : buckets_[iy * cells_per_axis_ + ix]) {
          if (idx == exclude) continue;
          if (squared_distance(p, points[idx]) <= r2) return true;
        }
      }
    }
    return false;
  }

 private:
  int cells_per_axis_;
  std::vector<std::vector<int>> buckets_;
};

PointPattern run_hardcore_chain(const HardcoreModel& model,
                                const IntensityModel* intensity, Rng& rng) {
  model.validate();
  const int n = model.n;
  const double radius = model.radius;

  // sequential-inhibition start
  std::vector<Point> points;
  CellList cells(radius, n);
  bool initialized = false;
  for (int attempt = 0; attempt < 1000 && !initialized; ++attempt) {
    points.clear();
    cells = CellList(radius, n);
    int consecutive_failures = 0;
    while (static_cast<int>(points.size()) < n &&
           consecutive_failures < 200 * n) {
      const Point candidate = rng.point_in_unit_square();
      if (cells.conflicts(candidate, radius, points, -1)) {
        ++consecutive_failures;
        continue;
      }
      cells.insert(static_cast<int>(points.size()), candidate);
      points.push_back(candidate);
      consecutive_failures = 0;
    }
    initialized = static_cast<int>(points.size()) == n;
  }
  if (!initialized)
    throw error("sample_hardcore: sequential inhibition failed after 1000 "
                "attempts; the configuration is likely infeasible");

  // Metropolis shift moves: uniform relocation proposal, accepted when
  // feasible (times the intensity ratio in the inhomogeneous case)
  const long proposals = 10000L * n;
  for (long step = 0; step < proposals; ++step) {
    const int i = static_cast<int>(rng.uniform_index(n));
    const Point candidate = rng.point_in_unit_square();
    if (cells.conflicts(candidate, radius, points, i)) continue;
    if (intensity != nullptr) {
      const double delta = intensity->log_intensity(candidate) -
                           intensity->log_intensity(points[i]);
      if (delta < 0.0 && rng.uniform() > std::exp(delta)) continue;
    }
    cells.remove(i, points[i]);
    points[i] = candidate;
    cells.insert(i, candidate);
  }

  PointPattern pattern;
  pattern.points = std::move(points);
  return pattern;
}

}  // namespace

void HardcoreModel::validate() const {
  if (n < 1) throw error("HardcoreModel: n must be >= 1");
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw error("HardcoreModel: radius must be finite and >= 0");
  // packing bound: n disks of radius R/2 must fit in the unit square
  const double half = radius / 2.0;
  if (n * M_PI * half * half >= 1.0)
    throw error("HardcoreModel: infeasible (n disks of radius R/2 exceed "
                "the unit square)");
}

PointPattern sample_binomial_ipp(const IntensityModel& intensity, int n,
                                 Rng& rng) {
  if (n < 1) throw error("sample_binomial_ipp: n must be >= 1");
  const double max_log = checked_max_log(intensity);
  if (!std::isfinite(max_log))
    throw error("sample_binomial_ipp: intensity is identically zero");

  PointPattern pattern;
  pattern.points.reserve(n);
  const bool constant = intensity.covariates.empty();
  long budget = 20000000L;
  while (static_cast<int>(pattern.points.size()) < n) {
    if (--budget < 0)
      throw error("sample_binomial_ipp: rejection sampling stalled "
                  "(acceptance rate too low)");
    const Point candidate = rng.point_in_unit_square();
    if (constant) {
      pattern.points.push_back(candidate);
      continue;
    }
    const double accept =
        std::exp(intensity.log_intensity(candidate) - max_log);
    if (rng.uniform() < accept) pattern.points.push_back(candidate);
  }
  return pattern;
}

PointPattern sample_ipp(const IntensityModel& intensity, Rng& rng) {
  intensity.validate();
  const double max_log = intensity.max_log_intensity();
  PointPattern pattern;
  if (!std::isfinite(max_log) && max_log < 0.0) return pattern;  // lambda = 0
  if (max_log > kMaxLogIntensity)
    throw error("sample_ipp: intensity maximum is too large");

  const double bound = std::exp(max_log);
  const long proposals = rng.poisson(bound);
  pattern.points.reserve(static_cast<std::size_t>(proposals));
  const bool constant = intensity.covariates.empty();
  for (long j = 0; j < proposals; ++j) {
    const Point candidate = rng.point_in_unit_square();
    if (constant) {
      pattern.points.push_back(candidate);
      continue;
    }
    const double accept =
        std::exp(intensity.log_intensity(candidate) - max_log);
    if (rng.uniform() < accept) pattern.points.push_back(candidate);
  }
  return pattern;
}

PointPattern sample_hardcore(const HardcoreModel& model, Rng& rng) {
  return run_hardcore_chain(model, nullptr, rng);
}

PointPattern sample_hardcore(const HardcoreModel& model,
                             const IntensityModel& intensity, Rng& rng) {
  intensity.validate();
  const double max_log = intensity.max_log_intensity();
  if (!std::isfinite(max_log))
    throw error("sample_hardcore: intensity is identically zero");
  return run_hardcore_chain(model, &intensity, rng);
}

HardcoreModel fit_hardcore(const PointPattern& pattern) {
  if (pattern.size() < 2)
    throw error("fit_hardcore: need at least 2 points");
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pattern.size(); ++i)
    for (std::size_t j = i + 1; j < pattern.size(); ++j)
      min_d2 = std::min(min_d2, squared_distance(pattern.points[i],
                                                 pattern.points[j]));
  HardcoreModel model;
  model.radius = std::sqrt(min_d2);
  model.n = static_cast<int>(pattern.size());
  return model;
}

}  // namespace psdetect
