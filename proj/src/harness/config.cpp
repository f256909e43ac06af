#include "mtedebias/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/parallel.hpp"

namespace mte::harness {

using nlohmann::json;

namespace {

const json* child(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

std::size_t count(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw ConfigError(key + ": expected a non-negative integer");
  const double d = v.get<double>();
  if (d < 0) throw ConfigError(key + ": expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

std::vector<double> numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!ok.count(item.key())) throw ConfigError(section + "." + item.key() + ": unknown key");
}

// A per-cell map is either one number for every cell or an object keyed by
// the covariate value written as a number ("0", "1", "0.5").
std::map<double, double> cell_map(const json& v, const std::vector<double>& grid, const std::string& key) {
  std::map<double, double> out;
  if (v.is_number()) {
    for (double x : grid) out[x] = v.get<double>();
    return out;
  }
  if (!v.is_object()) throw ConfigError(key + ": expected a number or an object keyed by x value");
  for (const auto& item : v.items()) {
    double x = 0.0;
    try {
      std::size_t used = 0;
      x = std::stod(item.key(), &used);
      if (used != item.key().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(key + ": key '" + item.key() + "' is not a covariate value");
    }
    out[x] = number(item.value(), key + "." + item.key());
  }
  return out;
}

std::string key_string(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

void parse_model(const json& m, dgp::ModelConfig& c) {
  check_keys(m, "model", {"x_grid", "x_probs", "delta", "p_tilde", "theta", "sigma_z", "alpha", "beta", "rho",
                          "sigma_eta", "outcome_mode"});
  if (auto v = child(m, "x_grid")) c.x_grid = numbers(*v, "model.x_grid");
  if (auto v = child(m, "x_probs")) c.x_probs = numbers(*v, "model.x_probs");
  if (auto v = child(m, "delta")) c.delta = cell_map(*v, c.x_grid, "model.delta");
  if (auto v = child(m, "p_tilde")) c.p_tilde = cell_map(*v, c.x_grid, "model.p_tilde");
  auto triple = [&](const char* key, std::size_t size) {
    const auto v = numbers(m.at(key), std::string("model.") + key);
    if (v.size() != size)
      throw ConfigError(std::string("model.") + key + ": expected " + std::to_string(size) + " numbers");
    return v;
  };
  if (child(m, "theta")) {
    const auto t = triple("theta", 3);
    c.theta0 = t[0];
    c.theta1 = t[1];
    c.theta2 = t[2];
  }
  if (auto v = child(m, "sigma_z")) c.sigma_z = number(*v, "model.sigma_z");
  if (child(m, "alpha")) {
    const auto t = triple("alpha", 2);
    c.alpha0 = t[0];
    c.alpha1 = t[1];
  }
  if (child(m, "beta")) {
    const auto t = triple("beta", 2);
    c.beta0 = t[0];
    c.beta1 = t[1];
  }
  if (child(m, "rho")) {
    const auto t = triple("rho", 2);
    c.rho0 = t[0];
    c.rho1 = t[1];
  }
  if (auto v = child(m, "sigma_eta")) c.sigma_eta = number(*v, "model.sigma_eta");
  if (auto v = child(m, "outcome_mode")) {
    if (!v->is_string()) throw ConfigError("model.outcome_mode: expected a string");
    c.outcome_mode = dgp::outcome_mode_from_string(v->get<std::string>());
  }
}

void parse_estimation(const json& e, EstimationOptions& o) {
  check_keys(e, "estimation", {"pscore_method", "trim", "max_gap", "bw_mult", "liv_degree", "liv_bw_mult",
                               "liv_bandwidth", "grid_points", "mte_v_grid", "delta_tolerance"});
  if (auto v = child(e, "pscore_method")) {
    if (!v->is_string()) throw ConfigError("estimation.pscore_method: expected a string");
    o.pscore_method = pscore::method_from_string(v->get<std::string>());
  }
  if (auto v = child(e, "trim")) o.trim = number(*v, "estimation.trim");
  if (auto v = child(e, "max_gap")) o.max_gap = number(*v, "estimation.max_gap");
  if (auto v = child(e, "bw_mult")) o.bw_mult = number(*v, "estimation.bw_mult");
  if (auto v = child(e, "liv_degree")) o.liv_degree = static_cast<int>(count(*v, "estimation.liv_degree"));
  if (auto v = child(e, "liv_bw_mult")) o.liv_bw_mult = number(*v, "estimation.liv_bw_mult");
  if (auto v = child(e, "liv_bandwidth")) o.liv_bandwidth = number(*v, "estimation.liv_bandwidth");
  if (auto v = child(e, "grid_points")) o.grid_points = count(*v, "estimation.grid_points");
  if (auto v = child(e, "mte_v_grid")) o.mte_v_grid = numbers(*v, "estimation.mte_v_grid");
  if (auto v = child(e, "delta_tolerance")) o.delta_tolerance = number(*v, "estimation.delta_tolerance");
}

void parse_weakiv(const json& w, WeakIvOptions& o) {
  check_keys(w, "weakiv", {"nu", "fixed_delta", "n_grid", "reps", "x", "modes"});
  if (auto v = child(w, "nu")) o.nu = v->is_number() ? std::vector<double>{v->get<double>()} : numbers(*v, "weakiv.nu");
  if (auto v = child(w, "fixed_delta")) o.fixed_delta = number(*v, "weakiv.fixed_delta");
  if (auto v = child(w, "n_grid")) {
    if (!v->is_array()) throw ConfigError("weakiv.n_grid: expected an array");
    o.n_grid.clear();
    for (std::size_t i = 0; i < v->size(); ++i) o.n_grid.push_back(count((*v)[i], "weakiv.n_grid"));
  }
  if (auto v = child(w, "reps")) o.reps = count(*v, "weakiv.reps");
  if (auto v = child(w, "x")) o.x = number(*v, "weakiv.x");
  if (auto v = child(w, "modes")) {
    if (!v->is_array()) throw ConfigError("weakiv.modes: expected an array of strings");
    o.modes.clear();
    for (const auto& m : *v) {
      if (!m.is_string()) throw ConfigError("weakiv.modes: expected strings");
      o.modes.push_back(weakiv::drift_mode_from_string(m.get<std::string>()));
    }
  }
}

void parse_run(const json& r, RunOptions& o) {
  check_keys(r, "run", {"n", "seed", "reps", "threads", "out", "input", "latent"});
  if (auto v = child(r, "n")) o.n = count(*v, "run.n");
  if (auto v = child(r, "seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("run.seed: expected a non-negative integer");
    o.seed = v->get<std::uint64_t>();
  }
  if (auto v = child(r, "reps")) o.reps = count(*v, "run.reps");
  if (auto v = child(r, "threads")) o.threads = static_cast<unsigned>(count(*v, "run.threads"));
  if (auto v = child(r, "out")) o.out = v->get<std::string>();
  if (auto v = child(r, "input")) o.input = v->get<std::string>();
  if (auto v = child(r, "latent")) {
    if (!v->is_boolean()) throw ConfigError("run.latent: expected true or false");
    o.latent = v->get<bool>();
  }
}

}  // namespace

std::vector<double> default_v_grid() {
  std::vector<double> v;
  for (int i = 1; i <= 19; ++i) v.push_back(i / 20.0);
  return v;
}

pscore::FitOptions EstimationOptions::fit_options() const {
  pscore::FitOptions f;
  f.method = pscore_method;
  f.bandwidth_multiplier = bw_mult;
  return f;
}

liv::CurveOptions EstimationOptions::curve_options() const {
  liv::CurveOptions c;
  c.degree = liv_degree;
  c.bandwidth = liv_bandwidth;
  c.bandwidth_multiplier = liv_bw_mult;
  c.grid_points = grid_points;
  return c;
}

void RunConfig::validate() const {
  model.validate();
  const auto& e = estimation;
  if (!(e.trim >= 0.0 && e.trim < 0.5)) throw ConfigError("estimation.trim: must lie in [0, 0.5)");
  if (!(e.max_gap > 0.0 && e.max_gap <= 1.0)) throw ConfigError("estimation.max_gap: must lie in (0, 1]");
  if (!(e.bw_mult > 0.0)) throw ConfigError("estimation.bw_mult: must be positive");
  if (e.liv_degree < 0 || e.liv_degree > 3) throw ConfigError("estimation.liv_degree: must be 0..3");
  if (!(e.liv_bw_mult > 0.0)) throw ConfigError("estimation.liv_bw_mult: must be positive");
  if (e.grid_points < 2) throw ConfigError("estimation.grid_points: need at least 2");
  for (double v : e.mte_v_grid)
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("estimation.mte_v_grid: values must lie in (0, 1)");
  if (!(e.delta_tolerance >= 0.0 && e.delta_tolerance < 1.0))
    throw ConfigError("estimation.delta_tolerance: must lie in [0, 1)");
  for (const auto& [z, zp] : late_pairs)
    if (z == zp) throw ConfigError("targets.late_pairs: z and z' must differ");
  if (delta_bar && !(*delta_bar >= 0.0 && *delta_bar < 1.0)) throw ConfigError("bounds.delta_bar: must lie in [0, 1)");
  if (run.n < 1) throw ConfigError("run.n: must be positive");
}

unsigned RunConfig::threads() const { return run.threads == 0 ? default_threads() : run.threads; }

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(doc, "config", {"schema_version", "model", "estimation", "targets", "bounds", "weakiv", "run"});
  if (auto v = child(doc, "schema_version"))
    if (!v->is_number_integer() || v->get<int>() != kSchemaVersion)
      throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion));
  RunConfig c;
  if (auto v = child(doc, "model")) parse_model(*v, c.model);
  if (auto v = child(doc, "estimation")) parse_estimation(*v, c.estimation);
  if (auto t = child(doc, "targets")) {
    check_keys(*t, "targets", {"late_pairs"});
    if (auto v = child(*t, "late_pairs")) {
      if (!v->is_array()) throw ConfigError("targets.late_pairs: expected an array of [z, z'] pairs");
      c.late_pairs.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto pair = numbers((*v)[i], "targets.late_pairs[" + std::to_string(i) + "]");
        if (pair.size() != 2) throw ConfigError("targets.late_pairs: each pair needs exactly two values");
        c.late_pairs.emplace_back(pair[0], pair[1]);
      }
    }
  }
  if (auto b = child(doc, "bounds")) {
    check_keys(*b, "bounds", {"delta_bar", "limited_support"});
    if (auto v = child(*b, "delta_bar")) c.delta_bar = number(*v, "bounds.delta_bar");
    if (auto v = child(*b, "limited_support")) {
      if (!v->is_boolean()) throw ConfigError("bounds.limited_support: expected true or false");
      c.limited_support = v->get<bool>();
    }
  }
  if (auto v = child(doc, "weakiv")) parse_weakiv(*v, c.weakiv);
  if (auto v = child(doc, "run")) parse_run(*v, c.run);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json model;
  const auto& m = c.model;
  model["x_grid"] = m.x_grid;
  model["x_probs"] = m.x_probs;
  json delta = json::object(), p_tilde = json::object();
  for (const auto& [x, v] : m.delta) delta[key_string(x)] = v;
  for (const auto& [x, v] : m.p_tilde) p_tilde[key_string(x)] = v;
  model["delta"] = delta;
  model["p_tilde"] = p_tilde;
  model["theta"] = {m.theta0, m.theta1, m.theta2};
  model["sigma_z"] = m.sigma_z;
  model["alpha"] = {m.alpha0, m.alpha1};
  model["beta"] = {m.beta0, m.beta1};
  model["rho"] = {m.rho0, m.rho1};
  model["sigma_eta"] = m.sigma_eta;
  model["outcome_mode"] = dgp::to_string(m.outcome_mode);

  const auto& e = c.estimation;
  json est = {{"pscore_method", pscore::to_string(e.pscore_method)},
              {"trim", e.trim},
              {"max_gap", e.max_gap},
              {"bw_mult", e.bw_mult},
              {"liv_degree", e.liv_degree},
              {"liv_bw_mult", e.liv_bw_mult},
              {"liv_bandwidth", e.liv_bandwidth},
              {"grid_points", e.grid_points},
              {"mte_v_grid", e.mte_v_grid},
              {"delta_tolerance", e.delta_tolerance}};

  json pairs = json::array();
  for (const auto& [z, zp] : c.late_pairs) pairs.push_back({z, zp});

  json bounds = {{"limited_support", c.limited_support}};
  bounds["delta_bar"] = c.delta_bar ? json(*c.delta_bar) : json(nullptr);

  const auto& w = c.weakiv;
  json modes = json::array();
  for (auto mode : w.modes) modes.push_back(weakiv::to_string(mode));
  json weak = {{"nu", w.nu}, {"n_grid", w.n_grid}, {"reps", w.reps}, {"x", w.x}, {"modes", modes}};
  weak["fixed_delta"] = w.fixed_delta ? json(*w.fixed_delta) : json(nullptr);

  json run = {{"n", c.run.n}, {"seed", c.run.seed}, {"reps", c.run.reps}, {"latent", c.run.latent}};
  return {{"schema_version", kSchemaVersion}, {"model", model},   {"estimation", est}, {"targets", {{"late_pairs", pairs}}},
          {"bounds", bounds},                 {"weakiv", weak},   {"run", run}};
}

}  // namespace mte::harness
