#include "psdetect/matern.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace psdetect {

namespace {

constexpr double kXCut = 60.0;  // g(60) < 1e-24 for all nu of interest
constexpr int kTableSize = 8192;

double shape_exact(double nu, double x) {
  if (x <= 0.0) return 1.0;
  if (x >= kXCut) {
    // continue the exact tail until K_nu underflows
    if (x > 690.0) return 0.0;
  }
  if (nu == 0.5) return std::exp(-x);
  const double c = std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu));
  const double k = std::cyl_bessel_k(nu, x);
  return c * std::pow(x, nu) * k;
}

// d/dx [c x^nu K_nu(x)] = -c x^nu K_{nu-1}(x)
double shape_derivative(double nu, double x) {
  if (x <= 0.0) return 0.0;
  if (x > 690.0) return 0.0;
  if (nu == 0.5) return -std::exp(-x);
  const double c = std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu));
  const double km = std::cyl_bessel_k(std::fabs(nu - 1.0), x);
  return -c * std::pow(x, nu) * km;
}

}  // namespace

void MaternParams::validate() const {
  if (!(nu > 0.0) || !std::isfinite(nu))
    throw error("MaternParams: nu must be positive and finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw error("MaternParams: sigma must be positive and finite");
  if (!(range > 0.0) || !std::isfinite(range))
    throw error("MaternParams: range must be positive and finite");
}

MaternShape::MaternShape(double nu) : nu_(nu) {
  if (nu == 0.5) {
    x10_ = std::log(10.0);
  } else {
    // g is strictly decreasing; bisect g(x) = 0.1
    double lo = 1e-10, hi = kXCut;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (shape_exact(nu_, mid) > 0.1)
        lo = mid;
      else
        hi = mid;
      if (hi - lo < 1e-12 * hi) break;
    }
    x10_ = 0.5 * (lo + hi);
  }

  ucut_ = std::log1p(kXCut);
  du_ = ucut_ / (kTableSize - 1);
  val_.resize(kTableSize);
  der_.resize(kTableSize);
  for (int i = 0; i < kTableSize; ++i) {
    const double u = i * du_;
    const double x = std::expm1(u);
    val_[i] = shape_exact(nu_, x);
    // chain rule onto the u = log1p(x) grid
    der_[i] = shape_derivative(nu_, x) * (1.0 + x);
  }
  val_[0] = 1.0;
}

double MaternShape::exact(double x) const { return shape_exact(nu_, x); }

double MaternShape::fast(double x) const {
  if (x <= 0.0) return 1.0;
  if (x >= kXCut) return 0.0;
  const double u = std::log1p(x);
  double ti = u / du_;
  int i = static_cast<int>(ti);
  if (i >= kTableSize - 1) i = kTableSize - 2;
  const double t = ti - i;
  const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
  const double h10 = t * (1.0 - t) * (1.0 - t);
  const double h01 = t * t * (3.0 - 2.0 * t);
  const double h11 = t * t * (t - 1.0);
  return h00 * val_[i] + h10 * du_ * der_[i] + h01 * val_[i + 1] +
         h11 * du_ * der_[i + 1];
}

const MaternShape& MaternShape::get(double nu) {
  static std::mutex mutex;
  static std::map<double, std::unique_ptr<MaternShape>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(nu);
  if (it == cache.end()) {
    it = cache.emplace(nu, std::unique_ptr<MaternShape>(new MaternShape(nu)))
             .first;
  }
  return *it->second;
}

double matern_correlation(double d, const MaternParams& params) {
  params.validate();
  if (!std::isfinite(d) || d < 0.0)
    throw error("matern_correlation: distance must be finite and >= 0");
  if (d == 0.0) return 1.0;
  return MaternShape::get(params.nu).correlation(d, params.range);
}

}  // namespace psdetect
