#pragma once

#include <optional>
#include <string>
#include <utility>

#include "mtedebias/curve.hpp"
#include "mtedebias/pscore.hpp"

namespace mte::debias {

struct Identified {
  double delta_hat = 0.0;
  double p_tilde_hat = 0.0;  // meaningful only when p_tilde_identified
  bool p_tilde_identified = false;
  pscore::SupportEstimate support;
  std::string provenance;

  // p_hi - p_lo = 1 - delta_hat, the de-biasing factor.
  double width() const { return support.width(); }
};

inline constexpr double kDeltaTolerance = 0.01;

// delta = 1 - (p_hi - p_lo), P~ = p_lo / delta. Below `tolerance` the cell is
// treated as free of non-responders and P~ is left unidentified.
Identified identify_delta(const pscore::SupportEstimate& support, double tolerance = kDeltaTolerance);

// Range of v in (0, 1) whose mapped point width * v + p_lo is evaluable on the curve.
std::pair<double, double> evaluable_v_range(const OutcomeCurve& curve, const Identified& ident);

// MTE(v) = width * MTE*(width * v + p_lo).
double debias_mte(const OutcomeCurve& curve, const Identified& ident, double v);

struct CateEstimate {
  double endpoint = 0.0;    // rescaled endpoint difference of the level curve
  double quadrature = 0.0;  // rescaled integral of the derivative curve
  double a = 0.0;           // integration limits actually used
  double b = 0.0;
};

// Integral of MTE* over the observed support. Where the curve is only
// evaluable on [a, b] inside [p_lo, p_hi], the difference over [a, b] is
// stretched by (p_hi - p_lo) / (b - a), which assumes m* is close to linear in
// the two trimmed slivers.
CateEstimate cate_automatic(const OutcomeCurve& curve, const pscore::SupportEstimate& support);

struct LateEstimate {
  double z = 0.0;
  double z_prime = 0.0;
  double p = 0.0;  // P*-hat(x, z)
  double p_prime = 0.0;
  double late_star = 0.0;
  double late = 0.0;  // width * late_star
};

// Starred Wald ratio of the level curve between P*-hat(z) and P*-hat(z'),
// times the support width. Throws EstimationError on a propensity tie.
LateEstimate late_debias(const OutcomeCurve& curve, const Identified& ident, const pscore::PropensityFit& pfit, double z,
                         double z_prime);

struct MprteEstimate {
  double mprte_star = 0.0;
  double mprte = 0.0;            // width * mprte_star
  double mean_derivative = 0.0;  // over the whole cell
  double weight_coverage = 0.0;  // share of the derivative weight inside the evaluable region
  std::size_t used = 0;
};

// mean_i[m'(P_i) dP_i/dz] / mean_i[dP_i/dz] over cell members whose fitted
// propensity is evaluable on the curve. Throws EstimationError when the mean
// derivative is numerically zero.
MprteEstimate mprte_star(const OutcomeCurve& curve, const pscore::PropensityFit& pfit);
MprteEstimate mprte_debias(const OutcomeCurve& curve, const Identified& ident, const pscore::PropensityFit& pfit);

// An interval whose ends may be missing (unbounded on that side).
struct Interval {
  std::optional<double> lower;
  std::optional<double> upper;

  bool contains(double value) const {
    return (!lower || *lower <= value) && (!upper || value <= *upper);
  }
};

struct BoundsReport {
  double delta_lower = 0.0;  // 1 - (p_hi - p_lo)
  std::optional<double> delta_upper;
  Interval factor;  // [1 - delta_bar, p_hi - p_lo]
  Interval late;
  Interval mprte;
  // Width-consistent alternative. The observed support has width
  // (1 - delta)(p_hi - p_lo of P) <= 1 - delta, so 1 - width bounds delta from
  // above and the factor 1 - delta lies in [max(width, 1 - delta_bar), 1].
  Interval width_factor;
  Interval width_late;
  Interval width_mprte;
};

// Factor interval [1 - delta_bar, p_hi - p_lo] applied to LATE* and MPRTE*;
// without delta_bar only the upper end is produced. Endpoints are swapped for
// negative starred values. Throws ConfigError for delta_bar >= 1 and
// EstimationError when delta_bar < 1 - (p_hi - p_lo).
BoundsReport bounds_limited_support(const pscore::SupportEstimate& support, std::optional<double> delta_bar,
                                    double late_star, double mprte_star);

// Scales an interval of factors by `value`, ordering the ends.
Interval scale(const Interval& factor, double value);

}  // namespace mte::debias
