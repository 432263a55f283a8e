#include "psdetect/sim_study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "psdetect/random_field.hpp"
#include "psdetect/residual.hpp"

namespace psdetect {

std::string to_string(ResponseKind v) {
  return v == ResponseKind::gaussian ? "gaussian" : "poisson-count";
}
std::string to_string(TruthKind v) {
  return v == TruthKind::binomial_ipp ? "binomial-ipp" : "hardcore";
}
std::string to_string(NullKind v) {
  switch (v) {
    case NullKind::automatic: return "auto";
    case NullKind::ipp: return "ipp";
    case NullKind::hardcore: return "hardcore";
  }
  return "?";
}
std::string to_string(TestKind v) {
  switch (v) {
    case TestKind::nn_mc: return "nn-mc";
    case TestKind::residual_mc: return "residual-mc";
    case TestKind::nn_perm: return "nn-perm";
    case TestKind::residual_perm: return "residual-perm";
  }
  return "?";
}

namespace {

ResponseKind response_from_string(const std::string& s) {
  if (s == "gaussian") return ResponseKind::gaussian;
  if (s == "poisson-count") return ResponseKind::poisson_count;
  throw error("unknown response '" + s + "'");
}
TruthKind truth_from_string(const std::string& s) {
  if (s == "binomial-ipp") return TruthKind::binomial_ipp;
  if (s == "hardcore") return TruthKind::hardcore;
  throw error("unknown truth '" + s + "'");
}
NullKind null_from_string(const std::string& s) {
  if (s == "auto") return NullKind::automatic;
  if (s == "ipp") return NullKind::ipp;
  if (s == "hardcore") return NullKind::hardcore;
  throw error("unknown null '" + s + "'");
}
TestKind test_from_string(const std::string& s) {
  if (s == "nn-mc") return TestKind::nn_mc;
  if (s == "residual-mc") return TestKind::residual_mc;
  if (s == "nn-perm") return TestKind::nn_perm;
  if (s == "residual-perm") return TestKind::residual_perm;
  throw error("unknown test '" + s + "'");
}

}  // namespace

void ExperimentSpec::validate() const {
  std::vector<std::string> bad;
  if (n < 10) bad.push_back("n");
  if (!std::isfinite(gamma)) bad.push_back("gamma");
  if (!std::isfinite(alpha1)) bad.push_back("alpha1");
  if (!(rho_z > 0.0)) bad.push_back("rho_z");
  if (!(rho_w > 0.0)) bad.push_back("rho_w");
  if (k_values.empty() ||
      std::any_of(k_values.begin(), k_values.end(),
                  [&](int k) { return k < 1 || k >= n; }))
    bad.push_back("k_values");
  if (replicates < 50) bad.push_back("replicates");
  if (m < 19) bad.push_back("m");
  if (truth == TruthKind::hardcore && !(hardcore_radius > 0.0))
    bad.push_back("hardcore_radius");
  if (tests.empty()) bad.push_back("tests");
  if (resolution < 2 || resolution > kMaxFieldResolution)
    bad.push_back("resolution");
  if (!(level > 0.0 && level < 1.0)) bad.push_back("level");
  if (!bad.empty()) {
    std::string msg = "experiment spec invalid: fields [";
    for (std::size_t i = 0; i < bad.size(); ++i)
      msg += (i ? ", " : "") + bad[i];
    throw error(msg + "]");
  }
}

std::string ExperimentSpec::to_json_string(int indent) const {
  nlohmann::json j;
  j["n"] = n;
  j["gamma"] = gamma;
  j["alpha1"] = alpha1;
  j["rho_z"] = rho_z;
  j["rho_w"] = rho_w;
  j["k_values"] = k_values;
  j["replicates"] = replicates;
  j["m"] = m;
  j["response"] = to_string(response);
  j["truth"] = to_string(truth);
  if (truth == TruthKind::hardcore) j["hardcore_radius"] = hardcore_radius;
  j["null"] = to_string(null_kind);
  std::vector<std::string> names;
  for (TestKind t : tests) names.push_back(to_string(t));
  j["tests"] = names;
  j["resolution"] = resolution;
  j["fix_n"] = fix_n;
  j["level"] = level;
  return j.dump(indent);
}

ExperimentSpec ExperimentSpec::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw error(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  ExperimentSpec spec;
  std::vector<std::string> bad;
  auto read = [&](const char* key, auto& target, bool required) {
    if (!j.contains(key)) {
      if (required) bad.push_back(key);
      return;
    }
    try {
      target = j.at(key).get<std::decay_t<decltype(target)>>();
    } catch (const nlohmann::json::exception&) {
      bad.push_back(key);
    }
  };
  read("n", spec.n, true);
  read("gamma", spec.gamma, true);
  read("alpha1", spec.alpha1, false);
  read("rho_z", spec.rho_z, true);
  read("rho_w", spec.rho_w, false);
  read("k_values", spec.k_values, true);
  read("replicates", spec.replicates, true);
  read("m", spec.m, true);
  read("hardcore_radius", spec.hardcore_radius, false);
  read("resolution", spec.resolution, false);
  read("fix_n", spec.fix_n, false);
  read("level", spec.level, false);

  auto read_enum = [&](const char* key, auto& target, auto parser,
                       bool required) {
    if (!j.contains(key)) {
      if (required) bad.push_back(key);
      return;
    }
    try {
      target = parser(j.at(key).get<std::string>());
    } catch (const std::exception&) {
      bad.push_back(key);
    }
  };
  read_enum("response", spec.response, response_from_string, true);
  read_enum("truth", spec.truth, truth_from_string, true);
  read_enum("null", spec.null_kind, null_from_string, false);
  if (!j.contains("tests")) {
    bad.push_back("tests");
  } else {
    try {
      spec.tests.clear();
      for (const auto& name : j.at("tests"))
        spec.tests.push_back(test_from_string(name.get<std::string>()));
    } catch (const std::exception&) {
      bad.push_back("tests");
    }
  }
  if (!bad.empty()) {
    std::string msg = "experiment spec invalid: fields [";
    for (std::size_t i = 0; i < bad.size(); ++i)
      msg += (i ? ", " : "") + bad[i];
    throw error(msg + "]");
  }
  spec.validate();
  return spec;
}

namespace {

struct ReplicateOutcome {
  // per test cell (battery order x k columns flattened): 0/1/2
  std::vector<std::uint8_t> outcome;
  bool skipped = false;
};

struct Battery {
  std::vector<McStatistic> entries;
  std::vector<TestKind> kinds;
  std::vector<bool> permutation;
};

Battery make_battery(const std::vector<TestKind>& tests) {
  Battery battery;
  for (TestKind t : tests) {
    McStatistic entry;
    entry.kind = (t == TestKind::nn_mc || t == TestKind::nn_perm)
                     ? StatisticKind::nn
                     : StatisticKind::residual;
    entry.permutation = (t == TestKind::nn_perm || t == TestKind::residual_perm);
    battery.entries.push_back(entry);
    battery.kinds.push_back(t);
  }
  return battery;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                std::uint64_t seed, int threads) {
  spec.validate();
  const Battery battery = make_battery(spec.tests);

  // column layout: for each battery entry, its k columns
  std::vector<std::pair<std::size_t, int>> cell_layout;  // (entry, k)
  for (std::size_t b = 0; b < battery.entries.size(); ++b) {
    if (battery.entries[b].kind == StatisticKind::nn)
      for (int k : spec.k_values) cell_layout.emplace_back(b, k);
    else
      cell_layout.emplace_back(b, 0);
  }

  const MaternParams z_params{1.0, 1.0, spec.rho_z};
  const MaternParams w_params{1.0, 1.0, spec.rho_w};

  // prime the factor cache so parallel replicates do not race to build it
  {
    Rng warm(seed, 9999, 0);
    (void)simulate_field(z_params, spec.resolution, warm);
    if (spec.alpha1 != 0.0)
      (void)simulate_field(w_params, spec.resolution, warm);
  }

  std::vector<ReplicateOutcome> outcomes(spec.replicates);

  parallel_for(
      static_cast<std::size_t>(spec.replicates), threads,
      [&](std::size_t r) {
        ReplicateOutcome& out = outcomes[r];
        out.outcome.assign(cell_layout.size(), 2);
        const std::uint64_t rep_seed = Rng(seed, 7001, r + 1).next_u64();
        try {
          Rng field_rng(rep_seed, 1, 0);
          const GridField z_field =
              simulate_field(z_params, spec.resolution, field_rng);
          std::shared_ptr<const GridField> w_field;
          if (spec.alpha1 != 0.0) {
            Rng w_rng(rep_seed, 2, 0);
            w_field = std::make_shared<const GridField>(
                simulate_field(w_params, spec.resolution, w_rng));
          }

          // truth: log lambda = alpha1 w + gamma Z (alpha0 irrelevant
          // under fixed n)
          IntensityModel truth;
          auto z_shared = std::make_shared<const GridField>(z_field);
          if (spec.alpha1 != 0.0) {
            truth.coefficients.push_back(spec.alpha1);
            truth.covariates.push_back(w_field);
          }
          if (spec.gamma != 0.0) {
            truth.coefficients.push_back(spec.gamma);
            truth.covariates.push_back(z_shared);
          }

          Rng pattern_rng(rep_seed, 3, 0);
          PointPattern pattern;
          if (spec.truth == TruthKind::binomial_ipp) {
            pattern = sample_binomial_ipp(truth, spec.n, pattern_rng);
          } else {
            HardcoreModel core{spec.hardcore_radius, spec.n};
            if (truth.coefficients.empty())
              pattern = sample_hardcore(core, pattern_rng);
            else
              pattern = sample_hardcore(core, truth, pattern_rng);
          }

          Rng mark_rng(rep_seed, 4, 0);
          std::vector<double> marks(pattern.size());
          for (std::size_t i = 0; i < pattern.size(); ++i) {
            const double z = z_field.interpolate(pattern.points[i]);
            if (spec.response == ResponseKind::gaussian)
              marks[i] = z;
            else
              marks[i] = static_cast<double>(mark_rng.poisson(
                  std::exp(2.0 + z)));
          }
          pattern.marks = marks;

          const ResponseTransform transform =
              spec.response == ResponseKind::gaussian
                  ? ResponseTransform::identity
                  : ResponseTransform::anscombe_count;
          const KrigingModel kriging =
              fit_kriging(pattern, {}, transform, 1.0);

          std::vector<std::shared_ptr<const GridField>> null_covs;
          if (spec.alpha1 != 0.0) null_covs.push_back(w_field);
          NullKind null_kind = spec.null_kind;
          if (null_kind == NullKind::automatic)
            null_kind = spec.truth == TruthKind::hardcore ? NullKind::hardcore
                                                          : NullKind::ipp;
          NullModel null_model =
              null_kind == NullKind::hardcore
                  ? NullModel(fit_hardcore(pattern))
                  : NullModel(fit_intensity(pattern, null_covs, true,
                                            spec.resolution));

          TestConfig config;
          config.k_values = spec.k_values;
          config.m = spec.m;
          config.alternative = Alternative::two_sided;
          config.fix_n = spec.fix_n;
          config.seed = rep_seed;
          config.threads = 1;  // outer loop owns the parallelism

          KrigingZSource z_source(kriging, pattern);
          const auto reports = run_mc_tests(pattern, z_source, &null_model,
                                            config, battery.entries);

          std::size_t cell = 0;
          for (std::size_t b = 0; b < battery.entries.size(); ++b) {
            const auto& slice = reports[b].slices.front();
            for (std::size_t c = 0; c < reports[b].k_columns.size(); ++c) {
              out.outcome[cell++] =
                  slice.p_values[c] <= spec.level ? 1 : 0;
            }
          }
        } catch (const error&) {
          out.skipped = true;
          std::fill(out.outcome.begin(), out.outcome.end(),
                    static_cast<std::uint8_t>(2));
        }
      });

  ExperimentResult result;
  result.spec = spec;
  result.seed = seed;
  result.outcomes.assign(cell_layout.size(), {});
  int skipped = 0;
  for (const auto& out : outcomes)
    if (out.skipped) ++skipped;
  if (skipped > 0.2 * spec.replicates)
    throw error("run_experiment: " + std::to_string(skipped) + " of " +
                std::to_string(spec.replicates) + " replicates failed");
  result.skipped_replicates = skipped;

  for (std::size_t cell = 0; cell < cell_layout.size(); ++cell) {
    CellResult cr;
    cr.test = battery.kinds[cell_layout[cell].first];
    cr.k = cell_layout[cell].second;
    auto& column = result.outcomes[cell];
    column.resize(spec.replicates);
    for (int r = 0; r < spec.replicates; ++r) {
      column[r] = outcomes[r].outcome[cell];
      if (column[r] == 2) continue;
      ++cr.used;
      cr.rejections += column[r];
    }
    cr.rate = cr.used > 0 ? static_cast<double>(cr.rejections) / cr.used : 0.0;
    cr.std_error =
        cr.used > 0 ? std::sqrt(cr.rate * (1.0 - cr.rate) / cr.used) : 0.0;
    result.cells.push_back(cr);
  }
  return result;
}

const CellResult& ExperimentResult::cell(TestKind test, int k) const {
  for (const auto& c : cells)
    if (c.test == test && c.k == k) return c;
  throw error("ExperimentResult: no cell for " + to_string(test) + ", k=" +
              std::to_string(k));
}

std::string ExperimentResult::to_csv_string() const {
  std::ostringstream out;
  out << "test,k,rejections,used,rate,std_error,skipped_replicates\n";
  char buf[160];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.17g,%.17g,%d\n",
                  to_string(c.test).c_str(), c.k, c.rejections, c.used,
                  c.rate, c.std_error, skipped_replicates);
    out << buf;
  }
  return out.str();
}

std::string ExperimentResult::to_json_string(int indent) const {
  nlohmann::json j;
  j["spec"] = nlohmann::json::parse(spec.to_json_string());
  j["seed"] = seed;
  j["skipped_replicates"] = skipped_replicates;
  nlohmann::json jcells = nlohmann::json::array();
  for (const auto& c : cells) {
    jcells.push_back({{"test", to_string(c.test)},
                      {"k", c.k},
                      {"rejections", c.rejections},
                      {"used", c.used},
                      {"rate", c.rate},
                      {"std_error", c.std_error}});
  }
  j["cells"] = std::move(jcells);
  return j.dump(indent);
}

}  // namespace psdetect
