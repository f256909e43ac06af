#include "mtedebias/pscore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/normal.hpp"

namespace mte::pscore {

namespace {

struct CellData {
  std::vector<std::size_t> rows;
  std::vector<double> z;
  std::vector<double> d;
};

CellData collect(const dgp::ObservedData& data, double x) {
  CellData cell;
  cell.rows = dgp::cell_rows(data, x);
  cell.z.reserve(cell.rows.size());
  cell.d.reserve(cell.rows.size());
  for (std::size_t r : cell.rows) {
    cell.z.push_back(data.z[r]);
    cell.d.push_back(data.d_star[r]);
  }
  return cell;
}

void check_cell(const CellData& cell, double x, std::size_t min_cell) {
  if (cell.rows.size() < min_cell) {
    std::ostringstream os;
    os << "cell x = " << x << " has " << cell.rows.size() << " observations, need at least " << min_cell;
    throw EstimationError(os.str());
  }
  const double treated = std::accumulate(cell.d.begin(), cell.d.end(), 0.0);
  if (treated == 0.0 || treated == static_cast<double>(cell.d.size())) {
    std::ostringstream os;
    os << "perfect separation in cell x = " << x << ": d_star is constant (" << (treated == 0.0 ? 0 : 1) << ")";
    throw EstimationError(os.str());
  }
}

// log Phi(s) and the inverse Mills ratio phi(s)/Phi(s), stable in the lower tail.
double log_cdf(double s) {
  if (s > -37.0) return std::log(num::normal_cdf(s));
  return -0.5 * s * s - std::log(-s) - 0.91893853320467274178;
}

double mills(double s) {
  if (s > -37.0) return num::normal_pdf(s) / num::normal_cdf(s);
  return -s;
}

ProbitCoefficients probit_newton(const CellData& cell, double x) {
  const double n = static_cast<double>(cell.z.size());
  double zmax0 = -INFINITY, zmin0 = INFINITY, zmax1 = -INFINITY, zmin1 = INFINITY;
  for (std::size_t i = 0; i < cell.z.size(); ++i) {
    if (cell.d[i] > 0.5) {
      zmin1 = std::min(zmin1, cell.z[i]);
      zmax1 = std::max(zmax1, cell.z[i]);
    } else {
      zmin0 = std::min(zmin0, cell.z[i]);
      zmax0 = std::max(zmax0, cell.z[i]);
    }
  }
  if (zmax0 < zmin1 || zmax1 < zmin0) {
    std::ostringstream os;
    os << "perfect separation in cell x = " << x << ": z splits d_star exactly";
    throw EstimationError(os.str());
  }

  auto loglik = [&](double b0, double b1) {
    double ll = 0.0;
    for (std::size_t i = 0; i < cell.z.size(); ++i) {
      const double q = 2.0 * cell.d[i] - 1.0;
      ll += log_cdf(q * (b0 + b1 * cell.z[i]));
    }
    return ll;
  };

  ProbitCoefficients c;
  const double mean_d = std::accumulate(cell.d.begin(), cell.d.end(), 0.0) / n;
  c.intercept = num::normal_quantile(mean_d);
  c.slope = 0.0;
  double ll = loglik(c.intercept, c.slope);
  double h00 = 0.0, h01 = 0.0, h11 = 0.0;
  for (int it = 0; it < 200; ++it) {
    double g0 = 0.0, g1 = 0.0;
    h00 = h01 = h11 = 0.0;
    for (std::size_t i = 0; i < cell.z.size(); ++i) {
      const double q = 2.0 * cell.d[i] - 1.0;
      const double s = q * (c.intercept + c.slope * cell.z[i]);
      const double r = mills(s);
      const double score = q * r;
      const double curv = r * (s + r);  // minus the second derivative in the index
      g0 += score;
      g1 += score * cell.z[i];
      h00 += curv;
      h01 += curv * cell.z[i];
      h11 += curv * cell.z[i] * cell.z[i];
    }
    c.gradient_norm = std::hypot(g0, g1) / n;
    c.iterations = it;
    if (c.gradient_norm < 1e-8) break;
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) throw EstimationError("probit: information matrix is singular");
    const double step0 = (h11 * g0 - h01 * g1) / det;
    const double step1 = (h00 * g1 - h01 * g0) / det;
    double scale = 1.0;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      const double trial = loglik(c.intercept + scale * step0, c.slope + scale * step1);
      if (trial >= ll) {
        c.intercept += scale * step0;
        c.slope += scale * step1;
        ll = trial;
        break;
      }
    }
    if (std::fabs(c.slope) > 1e6) throw EstimationError("probit: coefficients diverge (quasi-separation)");
  }
  if (!(c.gradient_norm < 1e-8)) throw EstimationError("probit: Newton iterations did not converge");
  const double det = h00 * h11 - h01 * h01;
  c.se_intercept = std::sqrt(h11 / det);
  c.se_slope = std::sqrt(h00 / det);
  c.log_likelihood = ll;
  return c;
}

KernelState build_kernel(const CellData& cell, double multiplier) {
  const double n = static_cast<double>(cell.z.size());
  KernelState k;
  k.center = std::accumulate(cell.z.begin(), cell.z.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : cell.z) ss += (v - k.center) * (v - k.center);
  k.scale = std::sqrt(ss / (n - 1.0));
  if (!(k.scale > 0.0)) throw EstimationError("kernel propensity: instrument has no variation in cell");
  // Silverman's 1.06 s n^(-1/5) in z, carried to the t scale at the centre of Z.
  k.bandwidth_multiplier = multiplier;
  k.bandwidth = multiplier * 1.06 * std::pow(n, -0.2) * num::kInvSqrt2Pi;
  std::vector<double> t(cell.z.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = num::normal_cdf((cell.z[i] - k.center) / k.scale);
  k.bins = smooth::BinnedData(t, cell.d, 0.0, 1.0, smooth::nodes_for(0.0, 1.0, k.bandwidth));
  return k;
}

struct Evaluator {
  double operator()(const ProbitCoefficients& c, double z) const {
    return num::normal_cdf(c.intercept + c.slope * z);
  }
  double operator()(const OracleState& o, double z) const {
    return (1.0 - o.delta) * num::normal_cdf(o.offset + o.theta1 * z) + o.delta * o.p_tilde;
  }
  double operator()(const KernelState& k, double z) const {
    const double t = num::normal_cdf((z - k.center) / k.scale);
    const auto fit = smooth::local_polynomial(k.bins, t, k.bandwidth, 0);
    if (!fit) throw EstimationError("kernel propensity: empty kernel window");
    return fit->level;
  }
};

struct DerivativeEvaluator {
  double operator()(const ProbitCoefficients& c, double z) const {
    return c.slope * num::normal_pdf(c.intercept + c.slope * z);
  }
  double operator()(const OracleState& o, double z) const {
    return (1.0 - o.delta) * o.theta1 * num::normal_pdf(o.offset + o.theta1 * z);
  }
  double operator()(const KernelState& k, double z) const {
    const double w = (z - k.center) / k.scale;
    const double t = num::normal_cdf(w);
    const auto fit = smooth::local_polynomial(k.bins, t, k.bandwidth, 0);
    if (!fit) throw EstimationError("kernel propensity: empty kernel window");
    return fit->slope * num::normal_pdf(w) / k.scale;
  }
};

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kProbitMle: return "probit-mle";
    case Method::kKernel: return "kernel";
    case Method::kOracle: return "oracle";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "probit-mle" || name == "probit") return Method::kProbitMle;
  if (name == "kernel") return Method::kKernel;
  if (name == "oracle") return Method::kOracle;
  throw ConfigError("propensity method: expected 'probit-mle', 'kernel' or 'oracle', got '" + name + "'");
}

PropensityFit::PropensityFit(const dgp::ObservedData& data, double x, std::vector<std::size_t> rows, State state)
    : x_(x), rows_(std::move(rows)), state_(std::move(state)) {
  fitted_.resize(rows_.size());
  fitted_derivative_.resize(rows_.size());
  const KernelState* k = kernel();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double z = data.z[rows_[i]];
    if (k) {
      // one local fit gives both the level and the slope
      const double w = (z - k->center) / k->scale;
      const auto fit = smooth::local_polynomial(k->bins, num::normal_cdf(w), k->bandwidth, 0);
      if (!fit) throw EstimationError("kernel propensity: empty kernel window");
      fitted_[i] = std::clamp(fit->level, 0.0, 1.0);
      fitted_derivative_[i] = fit->slope * num::normal_pdf(w) / k->scale;
    } else {
      fitted_[i] = value(z);
      fitted_derivative_[i] = derivative(z);
    }
  }
}

Method PropensityFit::method() const {
  if (probit()) return Method::kProbitMle;
  if (kernel()) return Method::kKernel;
  return Method::kOracle;
}

double PropensityFit::value(double z) const {
  const double v = std::visit([z](const auto& s) { return Evaluator{}(s, z); }, state_);
  return std::clamp(v, 0.0, 1.0);
}

double PropensityFit::derivative(double z) const {
  return std::visit([z](const auto& s) { return DerivativeEvaluator{}(s, z); }, state_);
}

PropensityFit PropensityFit::from_probit(const dgp::ObservedData& data, double x, double intercept, double slope) {
  ProbitCoefficients c;
  c.intercept = intercept;
  c.slope = slope;
  return PropensityFit(data, x, dgp::cell_rows(data, x), c);
}

PropensityFit fit_propensity(const dgp::ObservedData& data, double x, const FitOptions& options) {
  CellData cell = collect(data, x);
  switch (options.method) {
    case Method::kProbitMle: {
      check_cell(cell, x, options.min_cell);
      ProbitCoefficients c = probit_newton(cell, x);
      return PropensityFit(data, x, std::move(cell.rows), c);
    }
    case Method::kKernel: {
      check_cell(cell, x, options.min_cell);
      if (!(options.bandwidth_multiplier > 0.0)) throw ConfigError("bw_mult: must be positive");
      KernelState k = build_kernel(cell, options.bandwidth_multiplier);
      return PropensityFit(data, x, std::move(cell.rows), std::move(k));
    }
    case Method::kOracle:
      throw ConfigError("oracle propensity needs the model configuration; use oracle_propensity()");
  }
  throw ConfigError("unknown propensity method");
}

PropensityFit oracle_propensity(const dgp::ModelConfig& config, const dgp::ObservedData& data, double x) {
  OracleState o;
  o.delta = config.delta_at(x);
  o.p_tilde = config.p_tilde_at(x);
  o.offset = config.theta0 + config.theta2 * x;
  o.theta1 = config.theta1;
  return PropensityFit(data, x, dgp::cell_rows(data, x), o);
}

SupportEstimate SupportEstimate::make(double p_lo, double p_hi, std::string method, double trim) {
  if (!(p_lo >= 0.0 && p_hi <= 1.0 && p_lo < p_hi)) {
    std::ostringstream os;
    os << "degenerate support [" << p_lo << ", " << p_hi << "]: need 0 <= p_lo < p_hi <= 1";
    throw EstimationError(os.str());
  }
  SupportEstimate s;
  s.p_lo = p_lo;
  s.p_hi = p_hi;
  s.method = std::move(method);
  s.trim = trim;
  return s;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(prob, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const std::size_t k = static_cast<std::size_t>(pos);
  if (k + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

SupportEstimate estimate_support(const PropensityFit& fit, double trim, double max_gap_fraction) {
  if (!(trim >= 0.0 && trim < 0.5)) throw ConfigError("trim: must lie in [0, 0.5)");
  if (fit.cell_size() < 2) throw EstimationError("estimate_support: fewer than two fitted values");
  std::vector<double> sorted(fit.fitted().begin(), fit.fitted().end());
  std::sort(sorted.begin(), sorted.end());
  auto at = [&](double prob) {
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const std::size_t k = std::min(static_cast<std::size_t>(pos), sorted.size() - 2);
    return sorted[k] + (pos - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
  };
  const double lo = at(trim);
  const double hi = at(1.0 - trim);
  SupportEstimate s = SupportEstimate::make(lo, hi, to_string(fit.method()) + "-quantile", trim);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] <= lo || sorted[i - 1] >= hi) continue;
    s.max_gap = std::max(s.max_gap, std::min(sorted[i], hi) - std::max(sorted[i - 1], lo));
  }
  if (s.max_gap > max_gap_fraction * s.width()) {
    std::ostringstream os;
    os << "propensity support is not an interval: gap of " << s.max_gap << " inside [" << lo << ", " << hi << "]";
    throw EstimationError(os.str());
  }
  return s;
}

double avg_derivative(const PropensityFit& fit) {
  const auto d = fit.fitted_derivative();
  if (d.empty()) throw EstimationError("avg_derivative: empty cell");
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

}  // namespace mte::pscore
