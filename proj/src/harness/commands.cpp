#include "mtedebias/harness/commands.hpp"

#include <cmath>
#include <ostream>

#include "mtedebias/errors.hpp"
#include "mtedebias/harness/io.hpp"
#include "mtedebias/harness/manifest.hpp"
#include "mtedebias/harness/pipeline.hpp"
#include "mtedebias/rng.hpp"
#include "mtedebias/weakiv.hpp"

namespace mte::harness {

using nlohmann::json;

namespace {

json truth_json(const RunConfig& config) {
  const auto truth = dgp::truth_report(config.model, config.late_pairs);
  json cells = json::array();
  for (const auto& c : truth.cells) {
    json late = json::array();
    for (const auto& l : c.late)
      late.push_back({{"z", l.z}, {"z_prime", l.z_prime}, {"p", l.p}, {"p_prime", l.p_prime}, {"late", l.late}});
    cells.push_back({{"x", c.x},
                     {"delta", config.model.delta_at(c.x)},
                     {"p_tilde", config.model.p_tilde_at(c.x)},
                     {"observed_support", {c.observed_support.first, c.observed_support.second}},
                     {"cate", c.cate},
                     {"mprte", c.mprte},
                     {"late", late}});
  }
  return {{"schema_version", kSchemaVersion}, {"kind", "truth"}, {"cells", cells}};
}

struct Loaded {
  dgp::ObservedData data;
  bool simulated = false;
};

Loaded load_data(const RunConfig& config) {
  Loaded l;
  if (!config.run.input.empty()) {
    l.data = read_sample_csv(config.run.input);
  } else {
    l.data = dgp::simulate(config.model, config.run.n, config.run.seed).observed;
    l.simulated = true;
  }
  return l;
}

bool all_ok(const std::vector<CellResult>& cells) {
  for (const auto& c : cells)
    if (!c.ok()) return false;
  return true;
}

json cell_status(const std::vector<CellResult>& cells) {
  json s = json::array();
  for (const auto& c : cells) s.push_back({{"x", c.x}, {"status", c.status}});
  return s;
}

void report_failures(const std::vector<CellResult>& cells, std::ostream& err) {
  for (const auto& c : cells) {
    if (!c.error.empty()) err << "mtedebias: cell x = " << format_number(c.x) << " failed: " << c.error << "\n";
    for (const auto& l : c.late)
      if (!l.error.empty()) err << "mtedebias: cell x = " << format_number(c.x) << ": " << l.error << "\n";
  }
}

int cmd_simulate(const RunConfig& config, OutputDir& dir, std::ostream& out, json& status) {
  const dgp::Sample sample = dgp::simulate(config.model, config.run.n, config.run.seed);
  dir.write("sample.csv", sample_csv(sample, config.run.latent));
  dir.write("truth.json", render_json(truth_json(config)));
  out << "wrote " << sample.size() << " rows to " << dir.file("sample.csv") << "\n";
  status = "ok";
  return kExitOk;
}

int cmd_estimate(const RunConfig& config, OutputDir& dir, std::ostream& out, std::ostream& err, json& status) {
  const Loaded l = load_data(config);
  AnalysisOptions o = analysis_options(config);
  o.late_pairs.clear();
  o.keep_curve = true;
  const auto cells = analyze(l.data, config.model.x_grid, o);
  json fits = json::array();
  for (const auto& c : cells) {
    json j = {{"x", c.x}, {"n", c.n}, {"status", c.status}, {"pscore_method", pscore::to_string(c.method)}};
    const json full = to_json(c);
    for (const char* key : {"error", "probit", "pscore_bandwidth", "support", "avg_derivative", "delta_hat",
                            "liv_bandwidth", "evaluable_v"})
      if (full.contains(key)) j[key] = full[key];
    fits.push_back(j);
  }
  dir.write("pscore.json", render_json({{"schema_version", kSchemaVersion}, {"kind", "pscore"}, {"cells", fits}}));
  dir.write("curve.csv", curve_table(cells).render());
  out << "fitted " << cells.size() << " cells into " << dir.path() << "\n";
  report_failures(cells, err);
  status = cell_status(cells);
  return all_ok(cells) ? kExitOk : kExitEstimation;
}

int cmd_debias(const RunConfig& config, OutputDir& dir, std::ostream& out, std::ostream& err, json& status,
               bool force_bounds) {
  const Loaded l = load_data(config);
  AnalysisOptions o = analysis_options(config);
  if (force_bounds) o.bounds_mode = true;
  const auto cells = analyze(l.data, config.model.x_grid, o);
  json results = json::array();
  for (const auto& c : cells) results.push_back(to_json(c));
  dir.write("results.csv", results_table(cells).render());
  dir.write("late.csv", late_table(cells).render());
  if (o.bounds_mode)
    dir.write("bounds.csv", bounds_table(cells).render());
  else
    dir.write("mte_grid.csv", mte_grid_table(cells).render());
  json doc = {{"schema_version", kSchemaVersion}, {"kind", "results"}, {"bounds_mode", o.bounds_mode},
              {"cells", results}};
  dir.write("results.json", render_json(doc));
  if (l.simulated) dir.write("truth.json", render_json(truth_json(config)));
  for (const auto& c : cells) {
    out << "x = " << format_number(c.x) << ": " << c.status;
    if (c.ident) out << ", delta_hat = " << format_number(c.ident->delta_hat);
    if (c.cate) out << ", cate = " << format_number(c.cate->endpoint);
    if (c.bounds && c.bounds->late.upper)
      out << ", late in [" << (c.bounds->late.lower ? format_number(*c.bounds->late.lower) : "-inf") << ", "
          << format_number(*c.bounds->late.upper) << "]";
    out << "\n";
  }
  report_failures(cells, err);
  status = cell_status(cells);
  return all_ok(cells) ? kExitOk : kExitEstimation;
}

json rate_json(const weakiv::RateReport& r) {
  json modes = json::array();
  for (const auto& m : r.modes) {
    json points = json::array();
    for (const auto& p : m.points)
      points.push_back({{"n", p.n},
                        {"delta", p.delta},
                        {"scale", p.scale},
                        {"population_avg_derivative", p.population_avg_derivative},
                        {"mean_avg_derivative", number_or_null(p.mean_avg_derivative)},
                        {"sd_avg_derivative", number_or_null(p.sd_avg_derivative)},
                        {"mean_mprte_star", number_or_null(p.mean_mprte_star)},
                        {"sd_mprte_star", number_or_null(p.sd_mprte_star)},
                        {"mean_scaled_mprte", number_or_null(p.mean_scaled_mprte)},
                        {"sd_scaled_mprte", number_or_null(p.sd_scaled_mprte)},
                        {"true_mprte", p.true_mprte},
                        {"failures", p.failures},
                        {"first_failure", p.first_failure.empty() ? json() : json(p.first_failure)}});
    json scaled = json::array();
    for (const auto& s : weakiv::scaled_mprte_check(m))
      scaled.push_back({{"n", s.n},
                        {"mean_scaled", number_or_null(s.mean_scaled)},
                        {"sd_scaled", number_or_null(s.sd_scaled)},
                        {"true_mprte", s.true_mprte},
                        {"deviation_in_sd", number_or_null(s.deviation_in_sd)},
                        {"within_3sd", s.within_3sd},
                        {"wide_dispersion", s.wide_dispersion}});
    json residuals = json::array();
    for (double e : m.residuals) residuals.push_back(e);
    modes.push_back({{"mode", weakiv::to_string(m.mode)},
                     {"slope", number_or_null(m.slope)},
                     {"intercept", number_or_null(m.intercept)},
                     {"residuals", residuals},
                     {"mprte_dispersion_ratio", number_or_null(m.mprte_dispersion_ratio)},
                     {"points", points},
                     {"scaled_mprte", scaled}});
  }
  json j = {{"nu", r.nu}, {"x", r.x}, {"reps", r.reps}, {"seed", r.seed}, {"modes", modes}};
  j["fixed_delta"] = r.fixed_delta ? json(*r.fixed_delta) : json();
  return j;
}

int cmd_weakiv(const RunConfig& config, OutputDir& dir, std::ostream& out, json& status) {
  const auto& w = config.weakiv;
  std::vector<weakiv::DriftDesign> designs;
  auto make = [&](double nu) {
    weakiv::DriftDesign d;
    d.nu = nu;
    d.fixed_delta = w.fixed_delta;
    d.n_grid = w.n_grid;
    d.reps = w.reps;
    d.base = config.model;
    d.x = w.x;
    d.modes = w.modes;
    d.pscore = config.estimation.fit_options();
    if (d.pscore.method == pscore::Method::kOracle) d.pscore.method = pscore::Method::kKernel;
    d.curve = config.estimation.curve_options();
    d.trim = config.estimation.trim;
    d.threads = config.threads();
    return d;
  };
  if (w.fixed_delta) {
    designs.push_back(make(w.nu.empty() ? -1.0 : w.nu.front()));
  } else {
    for (double nu : w.nu) designs.push_back(make(nu));
  }
  json reports = json::array();
  CsvTable tidy;
  tidy.kind = "weakiv";
  tidy.header = {"nu", "mode", "n", "rep", "delta", "avg_derivative", "mprte_star"};
  std::size_t failures = 0;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const auto report = weakiv::run_drift_experiment(designs[i], num::derive_seed(config.run.seed, 1000003 + i));
    reports.push_back(rate_json(report));
    for (const auto& m : report.modes) {
      out << "nu = " << format_number(report.nu) << " [" << weakiv::to_string(m.mode)
          << "]: slope = " << format_number(m.slope) << ", mprte sd ratio = " << format_number(m.mprte_dispersion_ratio)
          << "\n";
      for (const auto& p : m.points) {
        failures += p.failures;
        for (std::size_t r = 0; r < p.avg_derivative.size(); ++r) {
          const double a = p.avg_derivative[r], s = p.mprte_star[r];
          tidy.add({format_number(report.nu), weakiv::to_string(m.mode), format_number(p.n), format_number(r),
                    format_number(p.delta), std::isfinite(a) ? format_number(a) : "",
                    std::isfinite(s) ? format_number(s) : ""});
        }
      }
    }
  }
  dir.write("weakiv.json", render_json({{"schema_version", kSchemaVersion}, {"kind", "weakiv"}, {"designs", reports}}));
  dir.write("weakiv.csv", tidy.render());
  status = {{"failed_replications", failures}};
  return kExitOk;
}

int cmd_replicate(const RunConfig& config, OutputDir& dir, std::ostream& out, json& status) {
  const auto records = run_replications(config);
  dir.write("replications.csv", replication_table(records, config.late_pairs.size()).render());
  const json summary = replication_summary(config, records);
  dir.write("summary.json", render_json(summary));
  std::size_t failures = 0;
  for (const auto& c : summary["cells"]) failures += c["failures"].get<std::size_t>();
  out << "ran " << records.size() << " replications, " << failures << " failed cells\n";
  status = {{"failed_cells", failures}};
  return failures == 0 ? kExitOk : kExitEstimation;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "estimate", "debias", "bounds", "weakiv", "replicate"};
  return names;
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    const std::string started = utc_timestamp();
    OutputDir dir(config.run.out);
    json status;
    int code = kExitOk;
    if (command == "simulate")
      code = cmd_simulate(config, dir, out, status);
    else if (command == "estimate")
      code = cmd_estimate(config, dir, out, err, status);
    else if (command == "debias")
      code = cmd_debias(config, dir, out, err, status, false);
    else if (command == "bounds")
      code = cmd_debias(config, dir, out, err, status, true);
    else if (command == "weakiv")
      code = cmd_weakiv(config, dir, out, status);
    else if (command == "replicate")
      code = cmd_replicate(config, dir, out, status);
    else
      throw ConfigError("unknown command '" + command + "'");
    dir.write_manifest(command, to_json(config), config.run.seed, started, status);
    return code;
  } catch (const ConfigError& e) {
    err << "mtedebias: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "mtedebias: io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "mtedebias: estimation error: " << e.what() << "\n";
    return kExitEstimation;
  }
}

}  // namespace mte::harness
