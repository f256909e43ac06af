#include "mtedebias/weakiv.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mtedebias/debias.hpp"
#include "mtedebias/errors.hpp"
#include "mtedebias/normal.hpp"
#include "mtedebias/parallel.hpp"
#include "mtedebias/quadrature.hpp"
#include "mtedebias/rng.hpp"

namespace mte::weakiv {

namespace {

struct MeanSd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

MeanSd mean_sd(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t k = 0;
  for (double e : v)
    if (std::isfinite(e)) {
      sum += e;
      ++k;
    }
  MeanSd r;
  if (k == 0) return r;
  r.mean = sum / static_cast<double>(k);
  if (k < 2) return r;
  double ss = 0.0;
  for (double e : v)
    if (std::isfinite(e)) ss += (e - r.mean) * (e - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(k - 1));
  return r;
}

struct RepResult {
  double avg_derivative = std::numeric_limits<double>::quiet_NaN();
  double mprte_star = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

RepResult run_mode(DriftMode mode, const DriftDesign& design, const dgp::ModelConfig& config,
                   const dgp::ObservedData& data) {
  RepResult r;
  try {
    const pscore::PropensityFit pfit = mode == DriftMode::kOracle
                                           ? pscore::oracle_propensity(config, data, design.x)
                                           : pscore::fit_propensity(data, design.x, design.pscore);
    r.avg_derivative = pscore::avg_derivative(pfit);
    const auto support = pscore::estimate_support(pfit, design.trim);
    const auto curve = liv::fit_outcome_curve(data, pfit, support, design.curve);
    r.mprte_star = debias::mprte_star(curve, pfit).mprte_star;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

}  // namespace

double delta_sequence(double nu, double n) {
  if (!(nu < 0.0)) {
    std::ostringstream os;
    os << "nu: must be negative, got " << nu;
    throw ConfigError(os.str());
  }
  if (!(n >= 1.0)) throw DomainError("delta_sequence: n must be at least 1");
  return 1.0 - std::pow(n, nu);
}

std::string to_string(DriftMode mode) { return mode == DriftMode::kOracle ? "oracle" : "estimated"; }

DriftMode drift_mode_from_string(const std::string& name) {
  if (name == "oracle") return DriftMode::kOracle;
  if (name == "estimated") return DriftMode::kEstimated;
  throw ConfigError("weakiv.modes: expected 'oracle' or 'estimated', got '" + name + "'");
}

void DriftDesign::validate() const {
  base.validate();
  base.cell_index(x);
  if (!fixed_delta && !(nu < 0.0)) throw ConfigError("weakiv.nu: must be negative");
  if (fixed_delta && !(*fixed_delta >= 0.0 && *fixed_delta < 1.0))
    throw ConfigError("weakiv.fixed_delta: must lie in [0, 1)");
  if (n_grid.size() < 3) throw ConfigError("weakiv.n_grid: need at least three sample sizes for the slope fit");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ConfigError("weakiv.n_grid: every n must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("weakiv.n_grid: must be strictly increasing");
  }
  if (reps < 50) throw ConfigError("weakiv.reps: need at least 50 replications");
  if (modes.empty()) throw ConfigError("weakiv.modes: empty");
  if (!(trim >= 0.0 && trim < 0.5)) throw ConfigError("weakiv.trim: must lie in [0, 0.5)");
}

double DriftDesign::delta_at(std::size_t n) const {
  return fixed_delta ? *fixed_delta : delta_sequence(nu, static_cast<double>(n));
}

const ModeReport& RateReport::mode(DriftMode m) const {
  for (const auto& r : modes)
    if (r.mode == m) return r;
  throw DomainError("RateReport: mode " + to_string(m) + " was not run");
}

double oracle_avg_derivative(const dgp::ModelConfig& config, double x) {
  auto integrand = [&](double w) {
    return dgp::observed_propensity_dz(config, x, config.sigma_z * w) * num::normal_pdf(w);
  };
  return num::integrate_real_line(integrand, 1e-15, 1e-12).value;
}

std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

RateReport run_drift_experiment(const DriftDesign& design, std::uint64_t seed) {
  design.validate();
  const std::size_t grid = design.n_grid.size();
  const std::size_t modes = design.modes.size();
  std::vector<RepResult> results(grid * design.reps * modes);

  std::vector<dgp::ModelConfig> configs(grid, design.base);
  for (std::size_t g = 0; g < grid; ++g) configs[g].set_delta(design.delta_at(design.n_grid[g]));

  parallel_for(grid * design.reps, design.threads, [&](std::size_t item) {
    const std::size_t g = item / design.reps;
    const dgp::Sample sample = dgp::simulate(configs[g], design.n_grid[g], num::derive_seed(seed, item));
    for (std::size_t m = 0; m < modes; ++m)
      results[item * modes + m] = run_mode(design.modes[m], design, configs[g], sample.observed);
  });

  RateReport report;
  report.nu = design.nu;
  report.fixed_delta = design.fixed_delta;
  report.x = design.x;
  report.reps = design.reps;
  report.seed = seed;
  const double truth = dgp::true_mprte(design.base, design.x);
  for (std::size_t m = 0; m < modes; ++m) {
    ModeReport mr;
    mr.mode = design.modes[m];
    std::vector<double> log_n, log_sd;
    for (std::size_t g = 0; g < grid; ++g) {
      DriftPoint p;
      p.n = design.n_grid[g];
      p.delta = configs[g].delta_at(design.x);
      p.scale = 1.0 - p.delta;
      p.population_avg_derivative = oracle_avg_derivative(configs[g], design.x);
      p.true_mprte = truth;
      std::vector<double> scaled;
      for (std::size_t r = 0; r < design.reps; ++r) {
        const RepResult& rr = results[((g * design.reps) + r) * modes + m];
        p.avg_derivative.push_back(rr.avg_derivative);
        p.mprte_star.push_back(rr.mprte_star);
        scaled.push_back(p.scale * rr.mprte_star);
        if (!rr.error.empty()) {
          ++p.failures;
          if (p.first_failure.empty()) p.first_failure = rr.error;
        }
      }
      const MeanSd ad = mean_sd(p.avg_derivative), ms = mean_sd(p.mprte_star), sc = mean_sd(scaled);
      p.mean_avg_derivative = ad.mean;
      p.sd_avg_derivative = ad.sd;
      p.mean_mprte_star = ms.mean;
      p.sd_mprte_star = ms.sd;
      p.mean_scaled_mprte = sc.mean;
      p.sd_scaled_mprte = sc.sd;
      if (std::isfinite(ad.sd) && ad.sd > 0.0) {
        log_n.push_back(std::log(static_cast<double>(p.n)));
        log_sd.push_back(std::log(ad.sd));
      }
      mr.points.push_back(std::move(p));
    }
    if (log_n.size() >= 3) {
      std::tie(mr.intercept, mr.slope) = ols_line(log_n, log_sd);
      for (std::size_t i = 0; i < log_n.size(); ++i)
        mr.residuals.push_back(log_sd[i] - (mr.intercept + mr.slope * log_n[i]));
    } else {
      mr.slope = mr.intercept = std::numeric_limits<double>::quiet_NaN();
    }
    mr.mprte_dispersion_ratio = mr.points.back().sd_mprte_star / mr.points.front().sd_mprte_star;
    report.modes.push_back(std::move(mr));
  }
  return report;
}

std::vector<ScaledRow> scaled_mprte_check(const ModeReport& report) {
  std::vector<ScaledRow> rows;
  for (const auto& p : report.points) {
    ScaledRow r;
    r.n = p.n;
    r.scale = p.scale;
    r.mean_scaled = p.mean_scaled_mprte;
    r.sd_scaled = p.sd_scaled_mprte;
    r.true_mprte = p.true_mprte;
    r.deviation_in_sd = std::fabs(r.mean_scaled - r.true_mprte) / r.sd_scaled;
    r.within_3sd = r.deviation_in_sd <= 3.0;
    r.wide_dispersion = r.sd_scaled > std::fabs(r.true_mprte);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ScaledRow> scaled_mprte_check(const DriftDesign& design, std::uint64_t seed, DriftMode mode) {
  DriftDesign d = design;
  d.modes = {mode};
  return scaled_mprte_check(run_drift_experiment(d, seed).mode(mode));
}

}  // namespace mte::weakiv
