#include "cli_commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "psdetect/areal.hpp"
#include "psdetect/kriging.hpp"
#include "psdetect/point_pattern.hpp"
#include "psdetect/sim_study.hpp"

namespace psdetect::cli {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw error("write to " + path.string() + " failed");
}

ResponseTransform transform_from_string(const std::string& s) {
  if (s == "identity") return ResponseTransform::identity;
  if (s == "log-ratio") return ResponseTransform::log_ratio;
  if (s == "anscombe-count") return ResponseTransform::anscombe_count;
  throw error("unknown transform '" + s + "'");
}

std::string report_markdown(const TestReport& report,
                            const std::string& title,
                            const std::vector<std::size_t>& sizes) {
  std::ostringstream md;
  md << "# " << title << "\n\n";
  md << "- statistic: " << to_string(report.config.statistic) << "\n";
  md << "- alternative: " << to_string(report.config.alternative) << "\n";
  md << "- Monte Carlo samples (M): " << report.config.m << "\n";
  md << "- fixed n across replicates: "
     << (report.config.fix_n ? "yes" : "no") << "\n";
  md << "- seed: " << report.config.seed << "\n";
  md << "- skipped replicates: " << report.skipped_total << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", report.global_p);
  md << "- global p (Bonferroni min-p over t and K): " << buf << "\n\n";

  md << "| t | n |";
  for (int k : report.k_columns) {
    if (k == 0)
      md << " residual |";
    else
      md << " K=" << k << " |";
  }
  md << "\n|---|---|";
  for (std::size_t c = 0; c < report.k_columns.size(); ++c) md << "---|";
  md << "\n";
  for (std::size_t s = 0; s < report.slices.size(); ++s) {
    const auto& slice = report.slices[s];
    md << "| " << slice.time_index << " | "
       << (s < sizes.size() ? sizes[s] : 0) << " |";
    for (double p : slice.p_values) {
      std::snprintf(buf, sizeof buf, " %.4g |", p);
      md << buf;
    }
    md << "\n";
  }
  md << "\nEmpirical p-values use the (1 + count) / (M + 1) convention and "
        "are not adjusted for multiple testing; the global value applies a "
        "Bonferroni min-p correction across all reported cells.\n";
  return md.str();
}

std::string plotdata_csv(const TestReport& report) {
  std::ostringstream out;
  out << "t,k,rho_obs,p_value\n";
  char buf[128];
  for (const auto& slice : report.slices) {
    for (std::size_t c = 0; c < report.k_columns.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", slice.time_index,
                    report.k_columns[c], slice.rho_obs[c],
                    slice.p_values[c]);
      out << buf;
    }
  }
  return out.str();
}

void write_report_artifacts(const TestReport& report,
                            const std::string& title,
                            const std::vector<std::size_t>& sizes,
                            const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report.to_json_string(2) + "\n");
  write_text(out_dir / "report.md", report_markdown(report, title, sizes));
  write_text(out_dir / "plotdata.csv", plotdata_csv(report));
}

}  // namespace

void alternative_and_statistic(RunManifest& manifest, const std::string& alt,
                               const std::string& statistic) {
  manifest.config.alternative = alternative_from_string(alt);
  manifest.config.statistic = statistic_from_string(statistic);
}

int cmd_test_geostat(const RunManifest& manifest) {
  const auto patterns = read_point_patterns_csv(manifest.input_path);
  if (patterns.empty())
    throw error(manifest.input_path + ": no point rows");

  std::vector<std::shared_ptr<const GridField>> covariates;
  for (const auto& path : manifest.covariate_paths)
    covariates.push_back(
        std::make_shared<const GridField>(GridField::read_csv(path)));

  const ResponseTransform transform =
      transform_from_string(manifest.transform);

  std::vector<TestReport> reports;
  std::vector<std::size_t> sizes;
  std::ostringstream models;
  models << "[\n";
  for (const auto& pattern : patterns) {
    if (pattern.size() < 10)
      throw error("refusing to test t=" + std::to_string(pattern.time_index) +
                  ": only " + std::to_string(pattern.size()) +
                  " points (need at least 10)");
    if (!pattern.marks)
      throw error(manifest.input_path +
                  ": marks column required for the geostatistical test");
    sizes.push_back(pattern.size());

    const KrigingModel kriging =
        fit_kriging(pattern, covariates, transform, 1.0);

    NullModel null_model = HardcoreModel{};
    if (manifest.null_kind == "hardcore") {
      null_model = fit_hardcore(pattern);
    } else if (manifest.null_kind == "hpp") {
      null_model = fit_intensity(pattern, {}, true);
    } else if (manifest.null_kind == "ipp" ||
               manifest.null_kind == "auto") {
      null_model = fit_intensity(pattern, covariates, true);
    } else {
      throw error("unknown null model '" + manifest.null_kind + "'");
    }

    if (reports.size() > 0) models << ",\n";
    models << "{\"t\": " << pattern.time_index
           << ", \"kriging\": " << kriging.to_json_string();
    if (std::holds_alternative<FittedIntensity>(null_model))
      models << ", \"null_intensity\": "
             << std::get<FittedIntensity>(null_model).to_json_string();
    else
      models << ", \"null_hardcore\": {\"radius\": "
             << std::get<HardcoreModel>(null_model).radius
             << ", \"n\": " << std::get<HardcoreModel>(null_model).n << "}";
    models << "}";

    TestConfig config = manifest.config;
    if (config.statistic == StatisticKind::nn)
      reports.push_back(run_nn_test(pattern, kriging, null_model, config));
    else
      reports.push_back(
          run_residual_test(pattern, kriging, null_model, config));
  }
  models << "\n]\n";

  const TestReport combined = combine_time_slices(reports);
  write_report_artifacts(combined, "Preferential sampling test (geostatistical)",
                         sizes, manifest.out_dir);
  write_text(fs::path(manifest.out_dir) / "models.json", models.str());
  return 0;
}

int cmd_test_areal(const RunManifest& manifest) {
  const ArealPopulation pop = ArealPopulation::read_csv(manifest.input_path);

  CovariateInclude include;
  if (manifest.selection_covariates == "all") {
    include = {true, true};
  } else if (manifest.selection_covariates == "w") {
    include = {true, false};
  } else if (manifest.selection_covariates == "x") {
    include = {false, true};
  } else if (manifest.selection_covariates == "none") {
    include = {false, false};
  } else {
    throw error("unknown selection covariates '" +
                manifest.selection_covariates + "'");
  }

  const SelectionModel selection = fit_selection(pop, include);
  const ResponseTransform transform =
      transform_from_string(manifest.transform);

  // latent estimates: kriging on selected centroids, predicted at every
  // unit centroid
  std::vector<std::vector<double>> z_hat;
  std::vector<std::size_t> sizes;
  for (const auto& frame : pop.frames) {
    PointPattern marked;
    marked.time_index = frame.time_index;
    std::vector<double> marks;
    for (std::size_t i = 0; i < pop.units.size(); ++i) {
      if (!frame.selected[i]) continue;
      marked.points.push_back(Point{pop.units[i].cx, pop.units[i].cy});
      marks.push_back(frame.marks[i]);
    }
    marked.marks = marks;
    sizes.push_back(marked.size());
    if (marked.size() < 10)
      throw error("refusing to test t=" + std::to_string(frame.time_index) +
                  ": only " + std::to_string(marked.size()) +
                  " selected units (need at least 10)");
    const KrigingModel kriging = fit_kriging(marked, {}, transform, 1.0);
    KrigingPredictor predictor(kriging, marked);
    std::vector<Point> centroids;
    centroids.reserve(pop.units.size());
    for (const auto& unit : pop.units)
      centroids.push_back(Point{unit.cx, unit.cy});
    z_hat.push_back(predictor.predict(centroids));
  }

  const TestReport report =
      run_discrete_test(pop, z_hat, selection, manifest.config);
  write_report_artifacts(report, "Preferential sampling test (areal)", sizes,
                         manifest.out_dir);
  return 0;
}

int cmd_simstudy(const std::string& spec_path, std::uint64_t seed,
                 const std::string& out_dir, int threads, bool fast) {
  std::ifstream in(spec_path);
  if (!in) throw error("cannot open " + spec_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentSpec spec = ExperimentSpec::from_json_string(buffer.str());
  if (fast) spec.replicates = std::min(spec.replicates, 50);

  const ExperimentResult result = run_experiment(spec, seed, threads);

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "results.csv", result.to_csv_string());
  write_text(fs::path(out_dir) / "summary.json",
             result.to_json_string(2) + "\n");
  return 0;
}

}  // namespace psdetect::cli
