#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mtedebias/dgp.hpp"
#include "mtedebias/smooth.hpp"

namespace mte::pscore {

enum class Method { kProbitMle, kKernel, kOracle };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct ProbitCoefficients {
  double intercept = 0.0;
  double slope = 0.0;
  double se_intercept = 0.0;
  double se_slope = 0.0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Nadaraya-Watson smoother of D* on t = Phi((z - center) / scale). On the t
// scale a normal instrument is uniform, so every fitted value averages about
// the same number of observations and the plateaus in the tails of Z, which
// pin down the support endpoints, are not dominated by a handful of points.
struct KernelState {
  double center = 0.0;
  double scale = 1.0;
  double bandwidth = 0.0;  // on the t scale
  double bandwidth_multiplier = 1.0;
  smooth::BinnedData bins;
};

// True P*(x, .) from the model, for experiments that assume a known propensity.
struct OracleState {
  double delta = 0.0;
  double p_tilde = 0.5;
  double offset = 0.0;  // theta0 + theta2 x
  double theta1 = 1.0;
};

struct FitOptions {
  Method method = Method::kKernel;
  double bandwidth_multiplier = 1.0;
  std::size_t min_cell = 200;
};

// Fitted observed propensity P*(x, z) for one covariate cell. Immutable; the
// fitted values and derivatives at the cell's own instrument values are
// computed once at construction.
class PropensityFit {
 public:
  double x() const { return x_; }
  Method method() const;
  std::size_t cell_size() const { return rows_.size(); }

  // P*-hat(x, z), clamped to [0, 1].
  double value(double z) const;
  // d P*-hat(x, z) / dz, analytic for every method.
  double derivative(double z) const;

  std::span<const std::size_t> rows() const { return rows_; }
  std::span<const double> fitted() const { return fitted_; }
  std::span<const double> fitted_derivative() const { return fitted_derivative_; }

  const ProbitCoefficients* probit() const { return std::get_if<ProbitCoefficients>(&state_); }
  const KernelState* kernel() const { return std::get_if<KernelState>(&state_); }
  const OracleState* oracle() const { return std::get_if<OracleState>(&state_); }

  // Probit evaluator with fixed coefficients on (1, z).
  static PropensityFit from_probit(const dgp::ObservedData& data, double x, double intercept, double slope);

 private:
  using State = std::variant<ProbitCoefficients, KernelState, OracleState>;
  PropensityFit(const dgp::ObservedData& data, double x, std::vector<std::size_t> rows, State state);

  friend PropensityFit fit_propensity(const dgp::ObservedData&, double, const FitOptions&);
  friend PropensityFit oracle_propensity(const dgp::ModelConfig&, const dgp::ObservedData&, double);

  double x_ = 0.0;
  std::vector<std::size_t> rows_;
  State state_;
  std::vector<double> fitted_;
  std::vector<double> fitted_derivative_;
};

// Probit MLE of D* on (1, z) by Newton iterations (mean score norm < 1e-8), or
// the transformed-scale kernel smoother. Throws EstimationError when the cell
// is too small, D* is constant, or z separates D* perfectly.
PropensityFit fit_propensity(const dgp::ObservedData& data, double x, const FitOptions& options = {});

PropensityFit oracle_propensity(const dgp::ModelConfig& config, const dgp::ObservedData& data, double x);

struct SupportEstimate {
  double p_lo = 0.0;
  double p_hi = 1.0;
  std::string method = "exact";
  double trim = 0.0;
  double max_gap = 0.0;  // largest gap between sorted fitted values inside [p_lo, p_hi]

  double width() const { return p_hi - p_lo; }

  // Validated constructor; throws EstimationError unless 0 <= lo < hi <= 1.
  static SupportEstimate make(double p_lo, double p_hi, std::string method = "exact", double trim = 0.0);
};

// Endpoints as the trim and (1 - trim) quantiles of the fitted values. Trimming
// pulls the endpoints inward slightly, which biases delta-hat = 1 - width
// upward by the same amount. Supports whose fitted values leave a gap wider
// than max_gap_fraction * width are rejected as not being an interval.
SupportEstimate estimate_support(const PropensityFit& fit, double trim = 0.001, double max_gap_fraction = 0.1);

// Sample mean of d P*-hat(x, Z_i) / dz over the cell.
double avg_derivative(const PropensityFit& fit);

// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double prob);

}  // namespace mte::pscore
