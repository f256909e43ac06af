#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtedebias/dgp.hpp"
#include "mtedebias/liv.hpp"
#include "mtedebias/pscore.hpp"

namespace mte::weakiv {

// 1 - n^nu; throws ConfigError for nu >= 0 and DomainError for n < 1.
double delta_sequence(double nu, double n);

enum class DriftMode { kOracle, kEstimated };

std::string to_string(DriftMode mode);
DriftMode drift_mode_from_string(const std::string& name);

struct DriftDesign {
  double nu = -0.25;
  std::optional<double> fixed_delta;  // overrides the sequence, e.g. 0 for the strong-instrument baseline
  std::vector<std::size_t> n_grid{1000, 4000, 16000, 64000};
  std::size_t reps = 200;
  dgp::ModelConfig base;
  double x = 1.0;
  std::vector<DriftMode> modes{DriftMode::kOracle, DriftMode::kEstimated};
  pscore::FitOptions pscore;
  liv::CurveOptions curve;
  double trim = 0.001;
  unsigned threads = 1;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
  double delta_at(std::size_t n) const;
};

struct DriftPoint {
  std::size_t n = 0;
  double delta = 0.0;
  double scale = 1.0;                 // 1 - delta = n^nu
  double population_avg_derivative = 0.0;
  double true_mprte = 0.0;
  double mean_avg_derivative = 0.0;
  double sd_avg_derivative = 0.0;
  double mean_mprte_star = 0.0;
  double sd_mprte_star = 0.0;
  double mean_scaled_mprte = 0.0;  // mean of n^nu * MPRTE*
  double sd_scaled_mprte = 0.0;
  std::size_t failures = 0;          // replications without an MPRTE* estimate
  std::string first_failure;
  std::vector<double> avg_derivative;  // per replication
  std::vector<double> mprte_star;      // per replication, NaN on failure
};

struct ModeReport {
  DriftMode mode = DriftMode::kOracle;
  std::vector<DriftPoint> points;
  double slope = 0.0;  // OLS slope of log sd(avg derivative) on log n
  double intercept = 0.0;
  std::vector<double> residuals;
  double mprte_dispersion_ratio = 0.0;  // sd(MPRTE*) at the largest n over the smallest
};

struct RateReport {
  double nu = 0.0;
  std::optional<double> fixed_delta;
  double x = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<ModeReport> modes;

  const ModeReport& mode(DriftMode m) const;
};

// Population E[dP*(x, Z)/dz] for the configured delta, by quadrature.
double oracle_avg_derivative(const dgp::ModelConfig& config, double x);

// Simulates every (n, replication) pair once and runs each mode on the same
// sample. Per-replication failures are counted, not thrown.
RateReport run_drift_experiment(const DriftDesign& design, std::uint64_t seed);

struct ScaledRow {
  std::size_t n = 0;
  double scale = 1.0;
  double mean_scaled = 0.0;
  double sd_scaled = 0.0;
  double true_mprte = 0.0;
  double deviation_in_sd = 0.0;  // |mean - truth| / sd
  bool within_3sd = false;
  bool wide_dispersion = false;  // sd above the magnitude of the truth
};

std::vector<ScaledRow> scaled_mprte_check(const ModeReport& report);
std::vector<ScaledRow> scaled_mprte_check(const DriftDesign& design, std::uint64_t seed, DriftMode mode = DriftMode::kOracle);

// OLS of y on (1, x): returns {intercept, slope}.
std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mte::weakiv
