#include "mtedebias/debias.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/quadrature.hpp"

namespace mte::debias {

Identified identify_delta(const pscore::SupportEstimate& support, double tolerance) {
  if (!(support.p_lo >= 0.0 && support.p_hi <= 1.0 && support.p_lo < support.p_hi))
    throw EstimationError("identify_delta: invalid support");
  Identified id;
  id.support = support;
  id.delta_hat = 1.0 - (support.p_hi - support.p_lo);
  if (id.delta_hat > tolerance) {
    id.p_tilde_hat = support.p_lo / id.delta_hat;
    id.p_tilde_identified = true;
    id.provenance = "support endpoints (" + support.method + ")";
  } else {
    id.p_tilde_identified = false;
    id.provenance = "support endpoints (" + support.method + "); delta below tolerance, P~ not identified";
  }
  return id;
}

std::pair<double, double> evaluable_v_range(const OutcomeCurve& curve, const Identified& ident) {
  const double w = ident.width();
  const double lo = std::max(0.0, (curve.lower() - ident.support.p_lo) / w);
  const double hi = std::min(1.0, (curve.upper() - ident.support.p_lo) / w);
  return {lo, hi};
}

double debias_mte(const OutcomeCurve& curve, const Identified& ident, double v) {
  const double w = ident.width();
  const double u = w * v + ident.support.p_lo;
  if (!(v > 0.0 && v < 1.0) || u < curve.lower() || u > curve.upper()) {
    const auto [lo, hi] = evaluable_v_range(curve, ident);
    std::ostringstream os;
    os << "debias_mte: v = " << v << " maps into the boundary margin; evaluable v-range is [" << lo << ", " << hi
       << "]";
    throw DomainError(os.str());
  }
  return w * curve.derivative(u);
}

CateEstimate cate_automatic(const OutcomeCurve& curve, const pscore::SupportEstimate& support) {
  CateEstimate c;
  c.a = std::max(curve.lower(), support.p_lo);
  c.b = std::min(curve.upper(), support.p_hi);
  if (!(c.b > c.a)) {
    std::ostringstream os;
    os << "cate_automatic: support [" << support.p_lo << ", " << support.p_hi
       << "] leaves no evaluable interval after the boundary margin";
    throw EstimationError(os.str());
  }
  const double stretch = support.width() / (c.b - c.a);
  c.endpoint = (curve.level(c.b) - curve.level(c.a)) * stretch;
  const auto q = num::integrate([&](double u) { return curve.derivative(u); }, c.a, c.b, 1e-10, 1e-9);
  c.quadrature = q.value * stretch;
  return c;
}

LateEstimate late_debias(const OutcomeCurve& curve, const Identified& ident, const pscore::PropensityFit& pfit, double z,
                         double z_prime) {
  LateEstimate e;
  e.z = z;
  e.z_prime = z_prime;
  e.p = pfit.value(z);
  e.p_prime = pfit.value(z_prime);
  if (std::fabs(e.p - e.p_prime) < 1e-10) {
    std::ostringstream os;
    os << "late_debias: degenerate pair, P*(z = " << z << ") = P*(z' = " << z_prime << ") = " << e.p;
    throw EstimationError(os.str());
  }
  e.late_star = (curve.level(e.p) - curve.level(e.p_prime)) / (e.p - e.p_prime);
  e.late = ident.width() * e.late_star;
  return e;
}

MprteEstimate mprte_star(const OutcomeCurve& curve, const pscore::PropensityFit& pfit) {
  const auto p = pfit.fitted();
  const auto dp = pfit.fitted_derivative();
  MprteEstimate e;
  double total = 0.0, inside = 0.0, num = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total += dp[i];
    if (p[i] < curve.lower() || p[i] > curve.upper()) continue;
    inside += dp[i];
    num += curve.derivative(p[i]) * dp[i];
    ++e.used;
  }
  const double n = static_cast<double>(p.size());
  e.mean_derivative = total / n;
  if (!(std::fabs(inside / n) > 1e-10)) {
    std::ostringstream os;
    os << "mprte: mean propensity derivative " << e.mean_derivative << " is numerically zero (irrelevant instrument)";
    throw EstimationError(os.str());
  }
  e.mprte_star = num / inside;
  e.mprte = e.mprte_star;
  e.weight_coverage = inside / total;
  return e;
}

MprteEstimate mprte_debias(const OutcomeCurve& curve, const Identified& ident, const pscore::PropensityFit& pfit) {
  MprteEstimate e = mprte_star(curve, pfit);
  e.mprte = ident.width() * e.mprte_star;
  return e;
}

Interval scale(const Interval& factor, double value) {
  Interval out;
  if (value >= 0.0) {
    if (factor.lower) out.lower = *factor.lower * value;
    if (factor.upper) out.upper = *factor.upper * value;
  } else {
    if (factor.upper) out.lower = *factor.upper * value;
    if (factor.lower) out.upper = *factor.lower * value;
  }
  return out;
}

BoundsReport bounds_limited_support(const pscore::SupportEstimate& support, std::optional<double> delta_bar,
                                    double late_star, double mprte_star) {
  BoundsReport r;
  const double w = support.width();
  r.delta_lower = 1.0 - w;
  r.delta_upper = delta_bar;
  r.factor.upper = w;
  r.width_factor.lower = w;
  r.width_factor.upper = 1.0;
  if (delta_bar) {
    if (!(*delta_bar >= 0.0 && *delta_bar < 1.0)) {
      std::ostringstream os;
      os << "delta_bar: must lie in [0, 1), got " << *delta_bar;
      throw ConfigError(os.str());
    }
    if (*delta_bar < r.delta_lower) {
      std::ostringstream os;
      os << "delta_bar = " << *delta_bar << " contradicts the support lower bound delta >= " << r.delta_lower;
      throw EstimationError(os.str());
    }
    r.factor.lower = 1.0 - *delta_bar;
    r.width_factor.lower = std::max(w, 1.0 - *delta_bar);
  }
  r.late = scale(r.factor, late_star);
  r.mprte = scale(r.factor, mprte_star);
  r.width_late = scale(r.width_factor, late_star);
  r.width_mprte = scale(r.width_factor, mprte_star);
  return r;
}

}  // namespace mte::debias
