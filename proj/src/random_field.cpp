#include "psdetect/random_field.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <list>
#include <memory>
#include <mutex>
#include <tuple>

namespace psdetect {

namespace {

using FactorKey = std::tuple<double, double, int>;  // nu, range, resolution

struct CacheEntry {
  FactorKey key;
  std::shared_ptr<const Eigen::MatrixXd> factor;
};

// Cholesky factor of the lattice correlation matrix with escalating
// diagonal jitter (1e-10 to 1e-6, x10 steps) on failure.
std::shared_ptr<const Eigen::MatrixXd> build_factor(double nu, double range,
                                                    int resolution) {
  const int n = resolution * resolution;
  const MaternShape& shape = MaternShape::get(nu);
  Eigen::MatrixXd corr(n, n);
  const double h = 1.0 / (resolution - 1);
  for (int a = 0; a < n; ++a) {
    const double ax = (a % resolution) * h;
    const double ay = (a / resolution) * h;
    corr(a, a) = 1.0;
    for (int b = a + 1; b < n; ++b) {
      const double bx = (b % resolution) * h;
      const double by = (b / resolution) * h;
      const double d = std::hypot(ax - bx, ay - by);
      const double r = shape.correlation_fast(d, range);
      corr(a, b) = r;
      corr(b, a) = r;
    }
  }
  double jitter = 0.0;
  for (double try_jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    if (try_jitter > 0.0)
      corr.diagonal().array() += (try_jitter - jitter);
    jitter = try_jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() == Eigen::Success) {
      return std::make_shared<const Eigen::MatrixXd>(
          llt.matrixL());
    }
  }
  throw error("simulate_field: correlation matrix not positive definite "
              "after diagonal jitter up to 1e-6");
}

std::shared_ptr<const Eigen::MatrixXd> cached_factor(double nu, double range,
                                                     int resolution) {
  static std::mutex mutex;
  static std::list<CacheEntry> cache;  // small LRU; factors are large
  constexpr std::size_t kMaxEntries = 4;
  const FactorKey key{nu, range, resolution};
  std::lock_guard<std::mutex> lock(mutex);
  for (auto it = cache.begin(); it != cache.end(); ++it) {
    if (it->key == key) {
      cache.splice(cache.begin(), cache, it);
      return cache.front().factor;
    }
  }
  auto factor = build_factor(nu, range, resolution);
  cache.push_front(CacheEntry{key, factor});
  while (cache.size() > kMaxEntries) cache.pop_back();
  return factor;
}

}  // namespace

GridField simulate_field(const MaternParams& params, int resolution,
                         Rng& rng) {
  params.validate();
  if (resolution < 2 || resolution > kMaxFieldResolution)
    throw error("simulate_field: resolution must be in [2, " +
                std::to_string(kMaxFieldResolution) + "]");
  const auto factor = cached_factor(params.nu, params.range, resolution);
  const int n = resolution * resolution;
  Eigen::VectorXd noise(n);
  for (int i = 0; i < n; ++i) noise(i) = rng.normal();
  Eigen::VectorXd z = factor->triangularView<Eigen::Lower>() * noise;
  std::vector<double> values(n);
  // scaling by sigma afterwards keeps sigma=2 draws exactly twice the
  // sigma=1 draws for a shared seed
  for (int i = 0; i < n; ++i) values[i] = params.sigma * z(i);
  return GridField(resolution, std::move(values), params);
}

}  // namespace psdetect
