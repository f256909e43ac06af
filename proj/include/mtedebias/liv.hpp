#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtedebias/curve.hpp"
#include "mtedebias/dgp.hpp"
#include "mtedebias/pscore.hpp"
#include "mtedebias/smooth.hpp"

namespace mte::liv {

struct CurveOptions {
  int degree = 2;
  double bandwidth = 0.0;  // <= 0: rule of thumb below
  double bandwidth_multiplier = 1.0;
  double rate = -1.0 / 5.0;  // exponent of the cell size in the rule of thumb
  std::size_t min_cell = 500;
  std::size_t grid_points = 101;
};

// Rule-of-thumb bandwidth multiplier * 1.06 * sd(pscores) * n^rate.
double rule_of_thumb_bandwidth(std::span<const double> pscores, const CurveOptions& options);

struct GridPoint {
  double u = 0.0;
  double level = 0.0;
  double derivative = 0.0;
};

// Local-polynomial regression of Y on the fitted propensity within one cell.
// Evaluable on [p_lo + h, p_hi - h]; queries outside throw DomainError.
class CurveFit final : public OutcomeCurve {
 public:
  double level(double u) const override;
  double derivative(double u) const override;
  double lower() const override { return lower_; }
  double upper() const override { return upper_; }

  double x() const { return x_; }
  double bandwidth() const { return bandwidth_; }
  int degree() const { return degree_; }
  std::size_t cell_size() const { return cell_size_; }
  const pscore::SupportEstimate& support() const { return support_; }

  // Evenly spaced evaluation grid over the evaluable region.
  std::vector<GridPoint> grid() const;

 private:
  friend CurveFit fit_outcome_curve(const dgp::ObservedData&, std::span<const std::size_t>, std::span<const double>,
                                    double, const pscore::SupportEstimate&, const CurveOptions&);

  smooth::LocalFit fit_at(double u) const;

  double x_ = 0.0;
  double bandwidth_ = 0.0;
  int degree_ = 2;
  std::size_t cell_size_ = 0;
  std::size_t grid_points_ = 101;
  double lower_ = 0.0;
  double upper_ = 1.0;
  pscore::SupportEstimate support_;
  smooth::BinnedData bins_;
};

// rows index into data; pscores[i] is the fitted propensity of rows[i].
// Throws EstimationError for a cell under min_cell or a support narrower
// than four bandwidths.
CurveFit fit_outcome_curve(const dgp::ObservedData& data, std::span<const std::size_t> rows,
                           std::span<const double> pscores, double x, const pscore::SupportEstimate& support,
                           const CurveOptions& options = {});

CurveFit fit_outcome_curve(const dgp::ObservedData& data, const pscore::PropensityFit& fit,
                           const pscore::SupportEstimate& support, const CurveOptions& options = {});

// m-hat*'(u); DomainError naming the evaluable interval when u is outside it.
double pseudo_mte_hat(const OutcomeCurve& curve, double u);

struct IntegralResult {
  double endpoint_difference = 0.0;  // m(b) - m(a), the primary value
  double quadrature = 0.0;           // integral of m' over [a, b]
  double quadrature_error = 0.0;
};

IntegralResult curve_integral(const OutcomeCurve& curve, double a, double b);

}  // namespace mte::liv
