#include "psdetect/grid_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace psdetect {

GridField::GridField(int resolution, std::vector<double> values,
                     std::optional<MaternParams> params)
    : resolution_(resolution), values_(std::move(values)),
      params_(std::move(params)) {
  if (resolution_ < 2) throw error("GridField: resolution must be >= 2");
  const std::size_t expected =
      static_cast<std::size_t>(resolution_) * resolution_;
  if (values_.size() != expected)
    throw error("GridField: expected " + std::to_string(expected) +
                " values, got " + std::to_string(values_.size()));
  for (double v : values_)
    if (!std::isfinite(v)) throw error("GridField: non-finite value");
  if (params_) params_->validate();
}

GridField GridField::constant(int resolution, double value) {
  return GridField(resolution,
                   std::vector<double>(
                       static_cast<std::size_t>(resolution) * resolution,
                       value));
}

namespace {

// Snap near-integer grid coordinates so lattice nodes reproduce stored
// values exactly despite x*(res-1) rounding.
void split_coord(double x, int res, int& i0, double& frac) {
  double g = x * (res - 1);
  const double r = std::round(g);
  if (std::fabs(g - r) < 1e-9) g = r;
  i0 = static_cast<int>(std::floor(g));
  if (i0 >= res - 1) i0 = res - 2;
  if (i0 < 0) i0 = 0;
  frac = g - i0;
}

}  // namespace

double GridField::interpolate(const Point& p) const {
  if (!in_unit_square(p))
    throw error("GridField: point (" + std::to_string(p.x) + ", " +
                std::to_string(p.y) + ") outside the unit square");
  int ix, iy;
  double fx, fy;
  split_coord(p.x, resolution_, ix, fx);
  split_coord(p.y, resolution_, iy, fy);
  const double v00 = at_node(ix, iy);
  const double v10 = at_node(ix + 1, iy);
  const double v01 = at_node(ix, iy + 1);
  const double v11 = at_node(ix + 1, iy + 1);
  // flat cells reproduce the constant exactly
  if (v00 == v10 && v00 == v01 && v00 == v11) return v00;
  return (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 +
         (1.0 - fx) * fy * v01 + fx * fy * v11;
}

double GridField::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

double GridField::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

void GridField::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw error("GridField: cannot open " + path + " for writing");
  out << "# psdetect-grid resolution=" << resolution_;
  if (params_) {
    char buf[128];
    std::snprintf(buf, sizeof buf, " nu=%.17g sigma=%.17g range=%.17g",
                  params_->nu, params_->sigma, params_->range);
    out << buf;
  }
  out << "\n";
  out << "x,y,value\n";
  char line[192];
  for (int iy = 0; iy < resolution_; ++iy) {
    for (int ix = 0; ix < resolution_; ++ix) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", node_coord(ix),
                    node_coord(iy), at_node(ix, iy));
      out << line;
    }
  }
  if (!out) throw error("GridField: write to " + path + " failed");
}

GridField GridField::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("GridField: cannot open " + path);
  std::string line;
  int lineno = 0;
  int resolution = 0;
  std::optional<MaternParams> params;

  if (!std::getline(in, line))
    throw error(path + ": empty file");
  ++lineno;
  if (line.rfind("# psdetect-grid", 0) == 0) {
    std::istringstream meta(line.substr(15));
    std::string token;
    MaternParams mp;
    bool have_nu = false, have_sigma = false, have_range = false;
    while (meta >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const double value = std::stod(token.substr(eq + 1));
      if (key == "resolution") resolution = static_cast<int>(value);
      else if (key == "nu") { mp.nu = value; have_nu = true; }
      else if (key == "sigma") { mp.sigma = value; have_sigma = true; }
      else if (key == "range") { mp.range = value; have_range = true; }
    }
    if (have_nu && have_sigma && have_range) params = mp;
    if (!std::getline(in, line))
      throw error(path + ": missing header line");
    ++lineno;
  }
  if (line != "x,y,value")
    throw error(path + ": line " + std::to_string(lineno) +
                ": expected header 'x,y,value'");

  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string fx, fy, fv;
    if (!std::getline(row, fx, ',') || !std::getline(row, fy, ',') ||
        !std::getline(row, fv))
      throw error(path + ": line " + std::to_string(lineno) +
                  ": expected 3 comma-separated fields");
    try {
      values.push_back(std::stod(fv));
    } catch (const std::exception&) {
      throw error(path + ": line " + std::to_string(lineno) +
                  ": bad numeric value '" + fv + "'");
    }
  }
  if (resolution == 0) {
    const double r = std::sqrt(static_cast<double>(values.size()));
    resolution = static_cast<int>(std::lround(r));
  }
  if (resolution < 2 ||
      values.size() !=
          static_cast<std::size_t>(resolution) * resolution)
    throw error(path + ": value count " + std::to_string(values.size()) +
                " does not match resolution " + std::to_string(resolution));
  return GridField(resolution, std::move(values), params);
}

}  // namespace psdetect
