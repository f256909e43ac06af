#include "mtedebias/liv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/quadrature.hpp"

namespace mte::liv {

namespace {

void check_inside(const OutcomeCurve& curve, double u, const char* what) {
  if (!(u >= curve.lower() && u <= curve.upper())) {
    std::ostringstream os;
    os << what << ": u = " << u << " is outside the evaluable interval [" << curve.lower() << ", " << curve.upper()
       << "]";
    throw DomainError(os.str());
  }
}

}  // namespace

double rule_of_thumb_bandwidth(std::span<const double> pscores, const CurveOptions& options) {
  const double n = static_cast<double>(pscores.size());
  if (n < 2) throw EstimationError("bandwidth: fewer than two propensity values");
  const double mean = std::accumulate(pscores.begin(), pscores.end(), 0.0) / n;
  double ss = 0.0;
  for (double p : pscores) ss += (p - mean) * (p - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return options.bandwidth_multiplier * 1.06 * sd * std::pow(n, options.rate);
}

CurveFit fit_outcome_curve(const dgp::ObservedData& data, std::span<const std::size_t> rows,
                           std::span<const double> pscores, double x, const pscore::SupportEstimate& support,
                           const CurveOptions& options) {
  if (rows.size() != pscores.size()) throw DomainError("fit_outcome_curve: rows and pscores differ in length");
  if (options.degree < 0 || options.degree > 3) throw ConfigError("degree: must be 0..3");
  if (rows.size() < options.min_cell) {
    std::ostringstream os;
    os << "cell x = " << x << " has " << rows.size() << " observations, need at least " << options.min_cell
       << " for the outcome curve";
    throw EstimationError(os.str());
  }
  CurveFit fit;
  fit.x_ = x;
  fit.degree_ = options.degree;
  fit.cell_size_ = rows.size();
  fit.grid_points_ = std::max<std::size_t>(options.grid_points, 2);
  fit.support_ = support;
  fit.bandwidth_ = options.bandwidth > 0.0 ? options.bandwidth : rule_of_thumb_bandwidth(pscores, options);
  if (!(support.width() > 4.0 * fit.bandwidth_)) {
    std::ostringstream os;
    os << "bandwidth " << fit.bandwidth_ << " too large for support of width " << support.width();
    throw EstimationError(os.str());
  }
  fit.lower_ = support.p_lo + fit.bandwidth_;
  fit.upper_ = support.p_hi - fit.bandwidth_;

  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = data.y[rows[i]];
  const auto [mn, mx] = std::minmax_element(pscores.begin(), pscores.end());
  double lo = *mn, hi = *mx;
  if (!(hi > lo)) throw EstimationError("fit_outcome_curve: fitted propensities are constant");
  fit.bins_ = smooth::BinnedData(pscores, y, lo, hi, smooth::nodes_for(lo, hi, fit.bandwidth_));
  return fit;
}

CurveFit fit_outcome_curve(const dgp::ObservedData& data, const pscore::PropensityFit& pfit,
                           const pscore::SupportEstimate& support, const CurveOptions& options) {
  return fit_outcome_curve(data, pfit.rows(), pfit.fitted(), pfit.x(), support, options);
}

smooth::LocalFit CurveFit::fit_at(double u) const {
  const auto fit = smooth::local_polynomial(bins_, u, bandwidth_, degree_);
  if (!fit) {
    std::ostringstream os;
    os << "outcome curve: empty or singular kernel window at u = " << u;
    throw EstimationError(os.str());
  }
  return *fit;
}

double CurveFit::level(double u) const {
  check_inside(*this, u, "outcome curve level");
  return fit_at(u).level;
}

double CurveFit::derivative(double u) const {
  check_inside(*this, u, "outcome curve derivative");
  return fit_at(u).slope;
}

std::vector<GridPoint> CurveFit::grid() const {
  std::vector<GridPoint> out(grid_points_);
  for (std::size_t i = 0; i < grid_points_; ++i) {
    const double u = lower_ + (upper_ - lower_) * static_cast<double>(i) / static_cast<double>(grid_points_ - 1);
    const auto f = fit_at(u);
    out[i] = {u, f.level, f.slope};
  }
  return out;
}

double pseudo_mte_hat(const OutcomeCurve& curve, double u) {
  check_inside(curve, u, "pseudo_mte_hat");
  return curve.derivative(u);
}

IntegralResult curve_integral(const OutcomeCurve& curve, double a, double b) {
  if (b < a) {
    std::ostringstream os;
    os << "curve_integral: inverted interval [" << a << ", " << b << "]";
    throw DomainError(os.str());
  }
  check_inside(curve, a, "curve_integral");
  check_inside(curve, b, "curve_integral");
  IntegralResult r;
  if (a == b) return r;
  r.endpoint_difference = curve.level(b) - curve.level(a);
  const auto q = num::integrate([&](double u) { return curve.derivative(u); }, a, b, 1e-10, 1e-9);
  r.quadrature = q.value;
  r.quadrature_error = q.error;
  return r;
}

}  // namespace mte::liv
