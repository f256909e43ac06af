#include "mtedebias/harness/pipeline.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "mtedebias/errors.hpp"
#include "mtedebias/parallel.hpp"
#include "mtedebias/rng.hpp"

namespace mte::harness {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return format_number(v); }

std::string fmt_opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

json opt_json(const std::optional<double>& v) { return v ? number_or_null(*v) : json(); }

json interval_json(const debias::Interval& i) { return {{"lower", opt_json(i.lower)}, {"upper", opt_json(i.upper)}}; }

// CSV fields may not contain commas or newlines.
std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

AnalysisOptions analysis_options(const RunConfig& config) {
  AnalysisOptions o;
  o.estimation = config.estimation;
  o.late_pairs = config.late_pairs;
  o.delta_bar = config.delta_bar;
  o.bounds_mode = config.limited_support || config.delta_bar.has_value();
  o.model = &config.model;
  return o;
}

CellResult analyze_cell(const dgp::ObservedData& data, double x, const AnalysisOptions& options) {
  CellResult c;
  c.x = x;
  c.bounds_mode = options.bounds_mode;
  const auto& est = options.estimation;
  c.method = est.pscore_method;
  bool partial = false;
  try {
    const pscore::PropensityFit pfit = [&] {
      if (est.pscore_method == pscore::Method::kOracle) {
        if (!options.model) throw ConfigError("oracle propensity needs the model configuration");
        return pscore::oracle_propensity(*options.model, data, x);
      }
      return pscore::fit_propensity(data, x, est.fit_options());
    }();
    c.n = pfit.cell_size();
    if (const auto* p = pfit.probit()) c.probit = *p;
    if (const auto* k = pfit.kernel()) c.pscore_bandwidth = k->bandwidth;
    c.avg_derivative = pscore::avg_derivative(pfit);
    c.support = pscore::estimate_support(pfit, est.trim, est.max_gap);
    c.ident = debias::identify_delta(*c.support, est.delta_tolerance);
    const liv::CurveFit curve = liv::fit_outcome_curve(data, pfit, *c.support, est.curve_options());
    c.liv_bandwidth = curve.bandwidth();
    c.evaluable = debias::evaluable_v_range(curve, *c.ident);
    if (options.keep_curve) c.curve = curve.grid();

    for (const auto& [z, zp] : options.late_pairs) {
      LateResult l;
      l.estimate.z = z;
      l.estimate.z_prime = zp;
      l.estimate.late_star = l.estimate.late = kNaN;
      try {
        l.estimate = debias::late_debias(curve, *c.ident, pfit, z, zp);
      } catch (const std::exception& e) {
        l.error = e.what();
        partial = true;
      }
      c.late.push_back(l);
    }
    c.mprte = debias::mprte_debias(curve, *c.ident, pfit);

    if (options.bounds_mode) {
      const double late_star = c.late.empty() ? kNaN : c.late.front().estimate.late_star;
      c.bounds = debias::bounds_limited_support(*c.support, options.delta_bar, late_star, c.mprte->mprte_star);
    } else {
      c.cate = debias::cate_automatic(curve, *c.support);
      for (double v : est.mte_v_grid) {
        const bool inside = v >= c.evaluable.first && v <= c.evaluable.second;
        c.mte_grid.emplace_back(v, inside ? debias::debias_mte(curve, *c.ident, v) : kNaN);
      }
    }
    c.status = partial ? "partial" : "ok";
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    c.status = "failed";
    c.error = e.what();
  }
  return c;
}

std::vector<CellResult> analyze(const dgp::ObservedData& data, const std::vector<double>& x_grid,
                                const AnalysisOptions& options) {
  std::vector<CellResult> out;
  for (double x : x_grid) out.push_back(analyze_cell(data, x, options));
  return out;
}

json to_json(const CellResult& c) {
  json j = {{"x", c.x}, {"n", c.n}, {"status", c.status}, {"pscore_method", pscore::to_string(c.method)}};
  j["error"] = c.error.empty() ? json() : json(c.error);
  if (c.probit)
    j["probit"] = {{"intercept", c.probit->intercept}, {"slope", c.probit->slope},
                   {"se_intercept", c.probit->se_intercept}, {"se_slope", c.probit->se_slope},
                   {"log_likelihood", c.probit->log_likelihood}, {"iterations", c.probit->iterations}};
  if (c.method == pscore::Method::kKernel) j["pscore_bandwidth"] = number_or_null(c.pscore_bandwidth);
  if (c.support)
    j["support"] = {{"p_lo", c.support->p_lo}, {"p_hi", c.support->p_hi}, {"method", c.support->method},
                    {"trim", c.support->trim}, {"max_gap", c.support->max_gap}};
  j["avg_derivative"] = number_or_null(c.avg_derivative);
  if (c.ident) {
    j["delta_hat"] = c.ident->delta_hat;
    j["p_tilde_identified"] = c.ident->p_tilde_identified;
    j["p_tilde_hat"] = c.ident->p_tilde_identified ? json(c.ident->p_tilde_hat) : json();
    j["provenance"] = c.ident->provenance;
  }
  if (c.liv_bandwidth > 0.0) {
    j["liv_bandwidth"] = c.liv_bandwidth;
    j["evaluable_v"] = {c.evaluable.first, c.evaluable.second};
  }
  if (c.cate) j["cate"] = {{"endpoint", c.cate->endpoint}, {"quadrature", c.cate->quadrature}, {"a", c.cate->a}, {"b", c.cate->b}};
  json late = json::array();
  for (const auto& l : c.late) {
    json e = {{"z", l.estimate.z}, {"z_prime", l.estimate.z_prime}, {"p", number_or_null(l.estimate.p)},
              {"p_prime", number_or_null(l.estimate.p_prime)}, {"late_star", number_or_null(l.estimate.late_star)}};
    e["late"] = c.bounds_mode ? json() : number_or_null(l.estimate.late);
    e["error"] = l.error.empty() ? json() : json(l.error);
    late.push_back(e);
  }
  j["late"] = late;
  if (c.mprte) {
    j["mprte"] = {{"mprte_star", c.mprte->mprte_star}, {"weight_coverage", c.mprte->weight_coverage},
                  {"mean_derivative", c.mprte->mean_derivative}};
    j["mprte"]["mprte"] = c.bounds_mode ? json() : json(c.mprte->mprte);
  }
  json grid = json::array();
  for (const auto& [v, m] : c.mte_grid) grid.push_back({{"v", v}, {"mte", number_or_null(m)}});
  j["mte_grid"] = grid;
  if (c.bounds) {
    const auto& b = *c.bounds;
    j["bounds"] = {{"delta_lower", b.delta_lower},     {"delta_upper", opt_json(b.delta_upper)},
                   {"factor", interval_json(b.factor)}, {"late", interval_json(b.late)},
                   {"mprte", interval_json(b.mprte)},   {"width_factor", interval_json(b.width_factor)},
                   {"width_late", interval_json(b.width_late)}, {"width_mprte", interval_json(b.width_mprte)}};
  }
  return j;
}

CsvTable results_table(const std::vector<CellResult>& cells) {
  CsvTable t;
  t.kind = "results";
  t.header = {"x",    "n",     "status",         "p_lo",       "p_hi",  "delta_hat", "p_tilde_hat", "p_tilde_identified",
              "cate", "cate_quadrature", "mprte_star", "mprte", "avg_derivative", "liv_bandwidth", "error"};
  for (const auto& c : cells) {
    const bool point = !c.bounds_mode;
    t.add({fmt(c.x),
           format_number(c.n),
           c.status,
           c.support ? fmt(c.support->p_lo) : "",
           c.support ? fmt(c.support->p_hi) : "",
           c.ident ? fmt(c.ident->delta_hat) : "",
           c.ident && c.ident->p_tilde_identified ? fmt(c.ident->p_tilde_hat) : "",
           c.ident ? (c.ident->p_tilde_identified ? "1" : "0") : "",
           point && c.cate ? fmt(c.cate->endpoint) : "",
           point && c.cate ? fmt(c.cate->quadrature) : "",
           c.mprte ? fmt(c.mprte->mprte_star) : "",
           point && c.mprte ? fmt(c.mprte->mprte) : "",
           c.support ? fmt(c.avg_derivative) : "",
           c.liv_bandwidth > 0.0 ? fmt(c.liv_bandwidth) : "",
           sanitize(c.error)});
  }
  return t;
}

CsvTable late_table(const std::vector<CellResult>& cells) {
  CsvTable t;
  t.kind = "late";
  t.header = {"x", "pair", "z", "z_prime", "p", "p_prime", "late_star", "late", "error"};
  for (const auto& c : cells)
    for (std::size_t k = 0; k < c.late.size(); ++k) {
      const auto& l = c.late[k];
      const bool has = l.error.empty();
      t.add({fmt(c.x), format_number(k), fmt(l.estimate.z), fmt(l.estimate.z_prime), has ? fmt(l.estimate.p) : "",
             has ? fmt(l.estimate.p_prime) : "", has ? fmt(l.estimate.late_star) : "",
             has && !c.bounds_mode ? fmt(l.estimate.late) : "", sanitize(l.error)});
    }
  return t;
}

CsvTable mte_grid_table(const std::vector<CellResult>& cells) {
  CsvTable t;
  t.kind = "mte_grid";
  t.header = {"x", "v", "mte"};
  for (const auto& c : cells)
    for (const auto& [v, m] : c.mte_grid) t.add({fmt(c.x), fmt(v), std::isfinite(m) ? fmt(m) : ""});
  return t;
}

CsvTable bounds_table(const std::vector<CellResult>& cells) {
  CsvTable t;
  t.kind = "bounds";
  t.header = {"x", "target", "star", "delta_lower", "delta_upper", "factor_lower", "factor_upper", "lower", "upper",
              "width_factor_lower", "width_factor_upper", "width_lower", "width_upper"};
  for (const auto& c : cells) {
    if (!c.bounds) continue;
    const auto& b = *c.bounds;
    auto row = [&](const char* target, double star, const debias::Interval& i, const debias::Interval& w) {
      t.add({fmt(c.x), target, fmt(star), fmt(b.delta_lower), fmt_opt(b.delta_upper), fmt_opt(b.factor.lower),
             fmt_opt(b.factor.upper), fmt_opt(i.lower), fmt_opt(i.upper), fmt_opt(b.width_factor.lower),
             fmt_opt(b.width_factor.upper), fmt_opt(w.lower), fmt_opt(w.upper)});
    };
    if (!c.late.empty()) row("late", c.late.front().estimate.late_star, b.late, b.width_late);
    row("mprte", c.mprte->mprte_star, b.mprte, b.width_mprte);
  }
  return t;
}

CsvTable curve_table(const std::vector<CellResult>& cells) {
  CsvTable t;
  t.kind = "curve";
  t.header = {"x", "u", "level", "derivative"};
  for (const auto& c : cells)
    for (const auto& g : c.curve) t.add({fmt(c.x), fmt(g.u), fmt(g.level), fmt(g.derivative)});
  return t;
}

std::vector<ReplicationRecord> run_replications(const RunConfig& config) {
  config.validate();
  if (config.run.reps < 2) throw ConfigError("run.reps: replicate needs at least 2 replications");
  const AnalysisOptions options = analysis_options(config);
  std::vector<ReplicationRecord> records(config.run.reps);
  parallel_for(config.run.reps, config.threads(), [&](std::size_t r) {
    ReplicationRecord& rec = records[r];
    rec.rep = r;
    rec.seed = num::derive_seed(config.run.seed, r);
    const dgp::Sample sample = dgp::simulate(config.model, config.run.n, rec.seed);
    rec.cells = analyze(sample.observed, config.model.x_grid, options);
  });
  return records;
}

CsvTable replication_table(const std::vector<ReplicationRecord>& records, std::size_t late_pairs) {
  CsvTable t;
  t.kind = "replications";
  t.header = {"rep", "seed", "x", "status", "delta_hat", "p_tilde_hat", "cate", "cate_quadrature"};
  for (std::size_t k = 0; k < late_pairs; ++k) {
    t.header.push_back("late_star_" + std::to_string(k));
    t.header.push_back("late_" + std::to_string(k));
  }
  t.header.insert(t.header.end(), {"mprte_star", "mprte", "late_lower", "late_upper", "mprte_lower", "mprte_upper"});
  for (const auto& rec : records)
    for (const auto& c : rec.cells) {
      const bool point = !c.bounds_mode;
      std::vector<std::string> row{format_number(rec.rep), std::to_string(rec.seed), fmt(c.x), c.status,
                                   c.ident ? fmt(c.ident->delta_hat) : "",
                                   c.ident && c.ident->p_tilde_identified ? fmt(c.ident->p_tilde_hat) : "",
                                   point && c.cate ? fmt(c.cate->endpoint) : "",
                                   point && c.cate ? fmt(c.cate->quadrature) : ""};
      for (std::size_t k = 0; k < late_pairs; ++k) {
        const bool has = k < c.late.size() && c.late[k].error.empty();
        row.push_back(has ? fmt(c.late[k].estimate.late_star) : "");
        row.push_back(has && point ? fmt(c.late[k].estimate.late) : "");
      }
      row.push_back(c.mprte ? fmt(c.mprte->mprte_star) : "");
      row.push_back(c.mprte && point ? fmt(c.mprte->mprte) : "");
      if (c.bounds) {
        row.insert(row.end(), {fmt_opt(c.bounds->late.lower), fmt_opt(c.bounds->late.upper),
                               fmt_opt(c.bounds->mprte.lower), fmt_opt(c.bounds->mprte.upper)});
      } else {
        row.insert(row.end(), {"", "", "", ""});
      }
      t.add(std::move(row));
    }
  return t;
}

namespace {

json summarize(const std::vector<double>& values, double truth) {
  std::vector<double> v;
  for (double e : values)
    if (std::isfinite(e)) v.push_back(e);
  json j = {{"count", v.size()}, {"truth", number_or_null(truth)}};
  if (v.empty()) return j;
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  double ss = 0.0, abs_err = 0.0, sq_err = 0.0;
  for (double e : v) {
    ss += (e - mean) * (e - mean);
    abs_err += std::fabs(e - truth);
    sq_err += (e - truth) * (e - truth);
  }
  const double k = static_cast<double>(v.size());
  const double sd = v.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  j["mean"] = mean;
  j["sd"] = sd;
  if (std::isfinite(truth)) {
    j["bias"] = mean - truth;
    j["mean_abs_error"] = abs_err / k;
    j["rmse"] = std::sqrt(sq_err / k);
    std::size_t inside = 0;
    for (double e : v)
      if (std::fabs(e - truth) <= 1.96 * sd) ++inside;
    j["share_within_1.96_sd"] = static_cast<double>(inside) / k;
  }
  return j;
}

json coverage(const std::vector<debias::Interval>& intervals, double truth) {
  std::size_t inside = 0;
  for (const auto& i : intervals)
    if (i.contains(truth)) ++inside;
  const double k = static_cast<double>(intervals.size());
  return {{"count", intervals.size()}, {"truth", truth}, {"coverage", intervals.empty() ? json() : json(static_cast<double>(inside) / k)}};
}

}  // namespace

json replication_summary(const RunConfig& config, const std::vector<ReplicationRecord>& records) {
  const auto truth = dgp::truth_report(config.model, config.late_pairs);
  const bool bounds_mode = config.limited_support || config.delta_bar.has_value();
  json cells = json::array();
  for (std::size_t ci = 0; ci < config.model.x_grid.size(); ++ci) {
    const double x = config.model.x_grid[ci];
    const auto& t = truth.cell(x);
    std::map<std::string, std::vector<double>> series;
    std::vector<debias::Interval> late_iv, mprte_iv, late_w, mprte_w;
    std::size_t failures = 0, partial = 0;
    json messages = json::array();
    for (const auto& rec : records) {
      const CellResult& c = rec.cells[ci];
      if (c.status == "failed") {
        ++failures;
        if (messages.size() < 5) messages.push_back({{"rep", rec.rep}, {"error", c.error}});
      }
      if (c.status == "partial") ++partial;
      series["delta_hat"].push_back(c.ident ? c.ident->delta_hat : kNaN);
      series["p_tilde_hat"].push_back(c.ident && c.ident->p_tilde_identified ? c.ident->p_tilde_hat : kNaN);
      series["mprte_star"].push_back(c.mprte ? c.mprte->mprte_star : kNaN);
      for (std::size_t k = 0; k < config.late_pairs.size(); ++k) {
        const bool has = k < c.late.size() && c.late[k].error.empty();
        series["late_star_" + std::to_string(k)].push_back(has ? c.late[k].estimate.late_star : kNaN);
        if (!bounds_mode) series["late_" + std::to_string(k)].push_back(has ? c.late[k].estimate.late : kNaN);
      }
      if (!bounds_mode) {
        series["cate"].push_back(c.cate ? c.cate->endpoint : kNaN);
        series["cate_quadrature"].push_back(c.cate ? c.cate->quadrature : kNaN);
        series["mprte"].push_back(c.mprte ? c.mprte->mprte : kNaN);
      }
      if (c.bounds) {
        late_iv.push_back(c.bounds->late);
        mprte_iv.push_back(c.bounds->mprte);
        late_w.push_back(c.bounds->width_late);
        mprte_w.push_back(c.bounds->width_mprte);
      }
    }
    const double delta = config.model.delta_at(x);
    const double scale = 1.0 / (1.0 - delta);
    std::map<std::string, double> truths = {{"delta_hat", delta},
                                            {"p_tilde_hat", delta > 0.0 ? config.model.p_tilde_at(x) : kNaN},
                                            {"cate", t.cate},
                                            {"cate_quadrature", t.cate},
                                            {"mprte", t.mprte},
                                            {"mprte_star", t.mprte * scale}};
    for (std::size_t k = 0; k < t.late.size(); ++k) {
      truths["late_" + std::to_string(k)] = t.late[k].late;
      truths["late_star_" + std::to_string(k)] = t.late[k].late * scale;
    }
    json q = json::object();
    for (const auto& [name, values] : series) q[name] = summarize(values, truths.count(name) ? truths[name] : kNaN);
    json cell = {{"x", x}, {"failures", failures}, {"partial", partial}, {"failure_messages", messages}, {"quantities", q}};
    if (bounds_mode && !t.late.empty()) {
      cell["bounds_coverage"] = {{"late", coverage(late_iv, t.late.front().late)},
                                 {"mprte", coverage(mprte_iv, t.mprte)},
                                 {"width_late", coverage(late_w, t.late.front().late)},
                                 {"width_mprte", coverage(mprte_w, t.mprte)}};
    }
    cells.push_back(cell);
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "replication_summary"},
          {"reps", records.size()},
          {"n", config.run.n},
          {"seed", config.run.seed},
          {"bounds_mode", bounds_mode},
          {"cells", cells}};
}

}  // namespace mte::harness
