#include "psdetect/areal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "psdetect/nnstats.hpp"

namespace psdetect {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kStreamSelection = 303;
}  // namespace

std::vector<int> ArealFrame::selected_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < selected.size(); ++i)
    if (selected[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

void ArealPopulation::validate() const {
  const std::size_t n = units.size();
  if (n == 0) throw error("ArealPopulation: no units");
  for (const auto& unit : units) {
    if (!in_unit_square(Point{unit.cx, unit.cy}))
      throw error("ArealPopulation: centroid outside the unit square");
    if (!(unit.area > 0.0))
      throw error("ArealPopulation: unit area must be positive");
  }
  for (const auto& frame : frames) {
    if (frame.selected.size() != n || frame.marks.size() != n)
      throw error("ArealPopulation: frame size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const bool has_mark = !std::isnan(frame.marks[i]);
      if (frame.selected[i] && !has_mark)
        throw error("ArealPopulation: selected unit without a mark");
      if (!frame.selected[i] && has_mark)
        throw error("ArealPopulation: mark on an unselected unit");
    }
    for (const auto& col : frame.w_covariates)
      if (col.size() != n)
        throw error("ArealPopulation: w covariate length mismatch");
    for (const auto& col : frame.x_covariates)
      if (col.size() != n)
        throw error("ArealPopulation: x covariate length mismatch");
  }
}

std::vector<double> SelectionModel::fitted_probabilities(
    const ArealFrame& frame) const {
  if (alpha_w.size() != frame.w_covariates.size() ||
      delta_x.size() != frame.x_covariates.size())
    throw error("SelectionModel: coefficient/covariate count mismatch");
  const std::size_t n = frame.selected.size();
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = intercept;
    for (std::size_t k = 0; k < alpha_w.size(); ++k)
      eta += alpha_w[k] * frame.w_covariates[k][i];
    for (std::size_t k = 0; k < delta_x.size(); ++k)
      eta += delta_x[k] * frame.x_covariates[k][i];
    probs[i] = 1.0 / (1.0 + std::exp(-eta));
  }
  return probs;
}

SelectionModel fit_selection(const ArealPopulation& pop,
                             CovariateInclude include) {
  pop.validate();
  if (pop.frames.empty()) throw error("fit_selection: no frames");
  const std::size_t p_w = include.w ? pop.frames[0].w_covariates.size() : 0;
  const std::size_t p_x = include.x ? pop.frames[0].x_covariates.size() : 0;
  const int p = static_cast<int>(1 + p_w + p_x);

  std::size_t rows = 0;
  std::size_t n_selected = 0;
  for (const auto& frame : pop.frames) {
    rows += frame.selected.size();
    n_selected += std::count(frame.selected.begin(), frame.selected.end(), 1);
  }
  if (n_selected == 0)
    throw error("fit_selection: no unit was ever selected");
  if (n_selected == rows)
    throw error("fit_selection: every unit selected (degenerate likelihood)");

  Eigen::MatrixXd design(rows, p);
  Eigen::VectorXd response(rows);
  std::size_t r = 0;
  for (const auto& frame : pop.frames) {
    for (std::size_t i = 0; i < frame.selected.size(); ++i, ++r) {
      int col = 0;
      design(r, col++) = 1.0;
      for (std::size_t k = 0; k < p_w; ++k)
        design(r, col++) = frame.w_covariates[k][i];
      for (std::size_t k = 0; k < p_x; ++k)
        design(r, col++) = frame.x_covariates[k][i];
      response(r) = frame.selected[i] ? 1.0 : 0.0;
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double loglik = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd eta = design * beta;
    if (eta.lpNorm<Eigen::Infinity>() > 30.0)
      throw error("fit_selection: fitted probabilities degenerate toward "
                  "0/1; covariates may perfectly separate the selection");
    Eigen::VectorXd prob =
        (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    double ll = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      ll += response(i) * std::log(prob(i)) +
            (1.0 - response(i)) * std::log(1.0 - prob(i));
    loglik = ll;
    Eigen::VectorXd grad = design.transpose() * (response - prob);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10) break;
    Eigen::VectorXd w =
        (prob.array() * (1.0 - prob.array())).cwiseMax(1e-12).matrix();
    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> solver(hessian);
    if (solver.info() != Eigen::Success)
      throw error("fit_selection: singular information matrix");
    beta += solver.solve(grad);
  }
  (void)loglik;

  SelectionModel model;
  int col = 0;
  model.intercept = beta(col++);
  if (include.w)
    for (std::size_t k = 0; k < pop.frames[0].w_covariates.size(); ++k)
      model.alpha_w.push_back(beta(col++));
  if (include.x)
    for (std::size_t k = 0; k < pop.frames[0].x_covariates.size(); ++k)
      model.delta_x.push_back(beta(col++));
  // coefficients for excluded covariates stay absent; probabilities are
  // computed against frames with the same covariate layout
  if (!include.w) model.alpha_w.assign(pop.frames[0].w_covariates.size(), 0.0);
  if (!include.x) model.delta_x.assign(pop.frames[0].x_covariates.size(), 0.0);
  return model;
}

namespace {

std::vector<int> draw_selection(const std::vector<double>& probs, bool fix_n,
                                std::size_t n_target, Rng& rng) {
  const std::size_t n = probs.size();
  std::vector<int> chosen;
  if (!fix_n) {
    for (std::size_t i = 0; i < n; ++i)
      if (rng.uniform() < probs[i]) chosen.push_back(static_cast<int>(i));
    return chosen;
  }
  // weighted sampling without replacement by exponential keys,
  // weight = odds of selection
  std::vector<std::pair<double, int>> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    const double odds = p / (1.0 - p);
    keys.emplace_back(rng.exponential() / odds, static_cast<int>(i));
  }
  std::sort(keys.begin(), keys.end());
  chosen.reserve(n_target);
  for (std::size_t i = 0; i < n_target && i < n; ++i)
    chosen.push_back(keys[i].second);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<double> knn_stat_row(const std::vector<ArealUnit>& units,
                                 const std::vector<int>& chosen,
                                 const std::vector<double>& z_units,
                                 const std::vector<int>& k_values) {
  std::vector<Point> pts;
  std::vector<double> z_sel;
  pts.reserve(chosen.size());
  z_sel.reserve(chosen.size());
  for (int i : chosen) {
    pts.push_back(Point{units[i].cx, units[i].cy});
    z_sel.push_back(z_units[i]);
  }
  const int k_max = *std::max_element(k_values.begin(), k_values.end());
  const KnnTable table = knn_table(pts, k_max);
  std::vector<double> row;
  row.reserve(k_values.size());
  for (int k : k_values) {
    const auto dbar = table.mean_distances(k);
    row.push_back(spearman_rho(z_sel, dbar));
  }
  return row;
}

}  // namespace

TestReport run_discrete_test(const ArealPopulation& pop,
                             const std::vector<std::vector<double>>& z_hat,
                             const SelectionModel& model,
                             const TestConfig& config) {
  pop.validate();
  if (z_hat.size() != pop.frames.size())
    throw error("run_discrete_test: z_hat must have one vector per frame");
  for (std::size_t f = 0; f < pop.frames.size(); ++f)
    if (z_hat[f].size() != pop.units.size())
      throw error("run_discrete_test: z_hat must cover every unit");

  const int k_max =
      *std::max_element(config.k_values.begin(), config.k_values.end());

  std::vector<TestReport> per_frame;
  for (std::size_t f = 0; f < pop.frames.size(); ++f) {
    const ArealFrame& frame = pop.frames[f];
    const std::vector<int> observed = frame.selected_indices();
    config.validate(observed.size());
    const std::vector<double> probs = model.fitted_probabilities(frame);
    for (double p : probs)
      if (!(p > 0.0) || !(p < 1.0))
        throw error("run_discrete_test: fitted probability outside (0,1)");

    TestReport report;
    report.config = config;
    report.k_columns = config.k_values;
    TimeSliceResult slice;
    slice.time_index = frame.time_index;
    slice.rho_obs = knn_stat_row(pop.units, observed, z_hat[f],
                                 config.k_values);

    const int m_total = config.m;
    slice.rho_mc.assign(m_total, {});
    parallel_for(
        static_cast<std::size_t>(m_total), config.threads,
        [&](std::size_t m) {
          Rng rng(config.seed, kStreamSelection + f, m + 1);
          std::vector<double> row(config.k_values.size(), kNaN);
          for (int attempt = 0; attempt < 10; ++attempt) {
            const auto chosen =
                draw_selection(probs, config.fix_n, observed.size(), rng);
            if (static_cast<int>(chosen.size()) < k_max + 1 ||
                chosen.size() < 3)
              continue;
            try {
              row = knn_stat_row(pop.units, chosen, z_hat[f],
                                 config.k_values);
            } catch (const degenerate_statistic&) {
              std::fill(row.begin(), row.end(), kNaN);
            }
            break;
          }
          slice.rho_mc[m] = std::move(row);
        });

    int valid = 0;
    for (const auto& row : slice.rho_mc) {
      const bool ok = !row.empty() &&
                      std::none_of(row.begin(), row.end(),
                                   [](double v) { return std::isnan(v); });
      if (ok) ++valid;
    }
    slice.skipped = m_total - valid;
    if (slice.skipped > 0.2 * m_total)
      throw error("run_discrete_test: more than 20% of replicates skipped");

    slice.p_values.resize(config.k_values.size());
    for (std::size_t c = 0; c < config.k_values.size(); ++c) {
      int count = 0;
      for (const auto& row : slice.rho_mc) {
        if (row.empty() || std::isnan(row[c])) continue;
        switch (config.alternative) {
          case Alternative::two_sided:
            if (std::fabs(row[c]) >= std::fabs(slice.rho_obs[c])) ++count;
            break;
          case Alternative::positive_ps:
            if (row[c] <= slice.rho_obs[c]) ++count;
            break;
          case Alternative::negative_ps:
            if (row[c] >= slice.rho_obs[c]) ++count;
            break;
        }
      }
      slice.p_values[c] = empirical_p(count, valid);
    }
    report.slices.push_back(std::move(slice));
    report.skipped_total = report.slices.front().skipped;
    const double min_p =
        *std::min_element(report.slices.front().p_values.begin(),
                          report.slices.front().p_values.end());
    report.global_p = std::min(
        1.0, min_p * static_cast<double>(config.k_values.size()));
    per_frame.push_back(std::move(report));
  }
  return per_frame.size() == 1 ? per_frame.front()
                               : combine_time_slices(per_frame);
}

// --- CSV I/O ---

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_field(const std::string& s, const std::string& path, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw error(path + ": line " + std::to_string(lineno) +
                ": bad numeric value '" + s + "'");
  }
}

}  // namespace

ArealPopulation ArealPopulation::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw error(path + ": empty file");
  ++lineno;

  const auto header = split_fields(line);
  const std::vector<std::string> fixed = {"id",       "cx",   "cy",
                                          "area",     "t",    "selected",
                                          "mark"};
  if (header.size() < fixed.size())
    throw error(path + ": line 1: expected header starting with "
                "'id,cx,cy,area,t,selected,mark'");
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (header[i] != fixed[i])
      throw error(path + ": line 1: expected column '" + fixed[i] +
                  "' at position " + std::to_string(i + 1));
  std::size_t n_w = 0, n_x = 0;
  for (std::size_t i = fixed.size(); i < header.size(); ++i) {
    if (header[i].rfind('w', 0) == 0 && n_x == 0)
      ++n_w;
    else if (header[i].rfind('x', 0) == 0)
      ++n_x;
    else
      throw error(path + ": line 1: unexpected covariate column '" +
                  header[i] + "' (w columns then x columns)");
  }

  struct Row {
    int id, t;
    double cx, cy, area;
    int selected;
    double mark;
    std::vector<double> w, x;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw error(path + ": line " + std::to_string(lineno) + ": expected " +
                  std::to_string(header.size()) + " fields, got " +
                  std::to_string(fields.size()));
    Row row;
    row.id = static_cast<int>(parse_field(fields[0], path, lineno));
    row.cx = parse_field(fields[1], path, lineno);
    row.cy = parse_field(fields[2], path, lineno);
    row.area = parse_field(fields[3], path, lineno);
    row.t = static_cast<int>(parse_field(fields[4], path, lineno));
    row.selected = static_cast<int>(parse_field(fields[5], path, lineno));
    if (row.selected != 0 && row.selected != 1)
      throw error(path + ": line " + std::to_string(lineno) +
                  ": selected must be 0 or 1");
    if (fields[6].empty()) {
      if (row.selected == 1)
        throw error(path + ": line " + std::to_string(lineno) +
                    ": selected unit must carry a mark");
      row.mark = kNaN;
    } else {
      row.mark = parse_field(fields[6], path, lineno);
      if (row.selected == 0)
        throw error(path + ": line " + std::to_string(lineno) +
                    ": unselected unit must have an empty mark");
    }
    for (std::size_t k = 0; k < n_w; ++k)
      row.w.push_back(parse_field(fields[7 + k], path, lineno));
    for (std::size_t k = 0; k < n_x; ++k)
      row.x.push_back(parse_field(fields[7 + n_w + k], path, lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw error(path + ": no data rows");

  // units from the first frame's ordering; frames keyed by t
  ArealPopulation pop;
  std::vector<int> times;
  for (const auto& row : rows)
    if (std::find(times.begin(), times.end(), row.t) == times.end())
      times.push_back(row.t);
  std::sort(times.begin(), times.end());

  std::vector<int> unit_ids;
  for (const auto& row : rows) {
    if (row.t != times.front()) continue;
    unit_ids.push_back(row.id);
    pop.units.push_back(ArealUnit{row.id, row.cx, row.cy, row.area});
  }
  auto unit_index = [&](int id) {
    const auto it = std::find(unit_ids.begin(), unit_ids.end(), id);
    if (it == unit_ids.end())
      throw error(path + ": unit id " + std::to_string(id) +
                  " not present in the first time frame");
    return static_cast<std::size_t>(it - unit_ids.begin());
  };

  for (int t : times) {
    ArealFrame frame;
    frame.time_index = t;
    frame.selected.assign(pop.units.size(), 0);
    frame.marks.assign(pop.units.size(), kNaN);
    frame.w_covariates.assign(n_w, std::vector<double>(pop.units.size(), 0.0));
    frame.x_covariates.assign(n_x, std::vector<double>(pop.units.size(), 0.0));
    for (const auto& row : rows) {
      if (row.t != t) continue;
      const std::size_t i = unit_index(row.id);
      frame.selected[i] = static_cast<std::uint8_t>(row.selected);
      frame.marks[i] = row.mark;
      for (std::size_t k = 0; k < n_w; ++k) frame.w_covariates[k][i] = row.w[k];
      for (std::size_t k = 0; k < n_x; ++k) frame.x_covariates[k][i] = row.x[k];
    }
    pop.frames.push_back(std::move(frame));
  }
  pop.validate();
  return pop;
}

void ArealPopulation::write_csv(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw error("cannot open " + path + " for writing");
  const std::size_t n_w = frames.empty() ? 0 : frames[0].w_covariates.size();
  const std::size_t n_x = frames.empty() ? 0 : frames[0].x_covariates.size();
  out << "id,cx,cy,area,t,selected,mark";
  for (std::size_t k = 0; k < n_w; ++k) out << ",w" << (k + 1);
  for (std::size_t k = 0; k < n_x; ++k) out << ",x" << (k + 1);
  out << "\n";
  char buf[96];
  for (const auto& frame : frames) {
    for (std::size_t i = 0; i < units.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%d,",
                    units[i].id, units[i].cx, units[i].cy, units[i].area,
                    frame.time_index, static_cast<int>(frame.selected[i]));
      out << buf;
      if (frame.selected[i]) {
        std::snprintf(buf, sizeof buf, "%.17g", frame.marks[i]);
        out << buf;
      }
      for (std::size_t k = 0; k < n_w; ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", frame.w_covariates[k][i]);
        out << buf;
      }
      for (std::size_t k = 0; k < n_x; ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", frame.x_covariates[k][i]);
        out << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw error("write to " + path + " failed");
}

}  // namespace psdetect
