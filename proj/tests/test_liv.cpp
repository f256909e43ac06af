#include <doctest.h>

#include <cmath>
#include <vector>

#include "mtedebias/dgp.hpp"
#include "mtedebias/errors.hpp"
#include "mtedebias/liv.hpp"
#include "mtedebias/pscore.hpp"

using namespace mte;

namespace {

struct Fitted {
  dgp::Sample sample;
  pscore::PropensityFit pfit;
  pscore::SupportEstimate support;
  liv::CurveFit curve;
};

Fitted fit_cell(const dgp::ModelConfig& c, std::size_t n, std::uint64_t seed, double x) {
  auto s = dgp::simulate(c, n, seed);
  auto pf = pscore::fit_propensity(s.observed, x);
  auto sup = pscore::estimate_support(pf);
  auto cf = liv::fit_outcome_curve(s.observed, pf, sup);
  return {std::move(s), std::move(pf), sup, std::move(cf)};
}

dgp::ModelConfig with_delta(double delta) {
  auto c = dgp::benchmark_config();
  c.set_delta(delta);
  return c;
}

template <class Truth>
double mae(const liv::CurveFit& f, double lo, double hi, Truth truth) {
  lo = std::max(lo, f.lower());
  hi = std::min(hi, f.upper());
  double sum = 0;
  int k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double u = std::min(hi, lo + (hi - lo) * i / 100.0);
    sum += std::fabs(liv::pseudo_mte_hat(f, u) - truth(u));
    ++k;
  }
  return sum / k;
}

}  // namespace

TEST_CASE("LIV slope recovers the MTE without non-responders") {
  const auto c = with_delta(0.0);
  const auto f = fit_cell(c, 100000, 51, 0.0);
  CHECK(f.curve.lower() <= 0.1);
  CHECK(f.curve.upper() >= 0.9);
  CHECK(mae(f.curve, 0.1, 0.9, [&](double u) { return dgp::true_mte(c, u, 0.0); }) < 0.15);
  CHECK(f.curve.degree() == 2);
  CHECK(f.curve.bandwidth() == doctest::Approx(liv::rule_of_thumb_bandwidth(f.pfit.fitted(), {})));
}

TEST_CASE("LIV slope tracks the pseudo-MTE under non-responders") {
  const auto c = with_delta(0.4);
  for (double x : {0.0, 1.0}) {
    // averaged over replications so the check is about the estimator, not one draw
    double total = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
      const auto f = fit_cell(c, 100000, 520 + r, x);
      total += mae(f.curve, 0.12, 0.68, [&](double u) { return dgp::pseudo_mte_oracle(c, u, x); });
    }
    INFO("x = " << x << ", mean MAE at the default bandwidth = " << total / reps);
    CHECK(total / reps < 0.2);
  }
}

TEST_CASE("wider LIV bandwidth tracks the pseudo-MTE under non-responders") {
  const auto c = with_delta(0.4);
  liv::CurveOptions co;
  co.bandwidth_multiplier = 1.5;
  for (double x : {0.0, 1.0}) {
    double total = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
      auto s = dgp::simulate(c, 100000, 520 + r);
      const auto pf = pscore::fit_propensity(s.observed, x);
      const auto sup = pscore::estimate_support(pf);
      const auto f = liv::fit_outcome_curve(s.observed, pf, sup, co);
      total += mae(f, 0.12, 0.68, [&](double u) { return dgp::pseudo_mte_oracle(c, u, x); });
    }
    CHECK(total / reps < 0.25);
  }
}

TEST_CASE("pseudo-MTE at the responder median") {
  const auto c = with_delta(0.4);
  for (double x : {0.0, 1.0}) {
    const auto f = fit_cell(c, 100000, 52, x);
    // u = 0.40 maps to responder quantile 0.5 with scale 1/0.6; pointwise sd is about 0.35 at this n
    CHECK(std::fabs(liv::pseudo_mte_hat(f.curve, 0.40) - dgp::true_mte(c, 0.5, x) / 0.6) < 1.0);
  }
}

TEST_CASE("pseudo_mte_hat domain") {
  const auto f = fit_cell(with_delta(0.4), 20000, 53, 1.0);
  const double mid = 0.5 * (f.support.p_lo + f.support.p_hi);
  CHECK(std::isfinite(liv::pseudo_mte_hat(f.curve, mid)));
  CHECK_THROWS_WITH_AS(liv::pseudo_mte_hat(f.curve, f.support.p_hi + 0.01), doctest::Contains("evaluable interval"),
                       DomainError);
  CHECK_THROWS_AS(f.curve.level(f.support.p_lo), DomainError);
  const auto grid = f.curve.grid();
  CHECK(grid.size() == 101);
  CHECK(grid.front().u == doctest::Approx(f.curve.lower()));
  CHECK(grid.back().u == doctest::Approx(f.curve.upper()));
}

TEST_CASE("constant and affine outcomes") {
  auto s = dgp::simulate(with_delta(0.4), 20000, 54);
  const auto pf = pscore::fit_propensity(s.observed, 0.0);
  const auto sup = pscore::estimate_support(pf);
  const auto base = liv::fit_outcome_curve(s.observed, pf, sup);

  auto flat = s.observed;
  for (auto& y : flat.y) y = 3.25;
  const auto cf = liv::fit_outcome_curve(flat, pf, sup);
  for (const auto& g : cf.grid()) {
    CHECK(std::fabs(g.derivative) < 1e-9);
    CHECK(g.level == doctest::Approx(3.25).epsilon(1e-12));
  }

  auto affine = s.observed;
  for (auto& y : affine.y) y = -2.0 * y + 7.0;
  const auto af = liv::fit_outcome_curve(affine, pf, sup);
  const auto g0 = base.grid(), g1 = af.grid();
  for (std::size_t i = 0; i < g0.size(); ++i)
    CHECK(g1[i].derivative == doctest::Approx(-2.0 * g0[i].derivative).epsilon(1e-9));
}

TEST_CASE("no essential heterogeneity gives a flat curve") {
  auto c = with_delta(0.0);
  c.rho1 = c.rho0;
  const auto f = fit_cell(c, 100000, 55, 1.0);
  const double flat = c.d_alpha() + c.d_beta();
  double sum = 0;
  const auto grid = f.curve.grid();
  for (const auto& g : grid) sum += g.derivative;
  CHECK(sum / grid.size() == doctest::Approx(flat).epsilon(0.05 / flat));
  CHECK(mae(f.curve, 0.1, 0.9, [&](double) { return flat; }) < 0.2);
}

TEST_CASE("curve integrals") {
  const auto c = with_delta(0.4);
  const auto f = fit_cell(c, 100000, 56, 1.0);
  const double a = f.curve.lower(), b = f.curve.upper(), m = 0.5 * (a + b);
  CHECK(liv::curve_integral(f.curve, m, m).endpoint_difference == 0.0);
  CHECK(liv::curve_integral(f.curve, m, m).quadrature == 0.0);
  const auto whole = liv::curve_integral(f.curve, a, b);
  const auto left = liv::curve_integral(f.curve, a, m);
  const auto right = liv::curve_integral(f.curve, m, b);
  CHECK(std::fabs(whole.quadrature - left.quadrature - right.quadrature) < 1e-6);
  CHECK(whole.endpoint_difference == doctest::Approx(left.endpoint_difference + right.endpoint_difference));
  // stretched to the full observed support the integral is the CATE
  CHECK(whole.endpoint_difference * f.support.width() / (b - a) == doctest::Approx(1.5).epsilon(0.1 / 1.5));
  CHECK_THROWS_AS(liv::curve_integral(f.curve, b, a), DomainError);
}

TEST_CASE("endpoint difference equals the integrated slope on smooth data") {
  // noise-free outcome on the observed propensity: both routes see the same smooth curve
  const auto c = with_delta(0.4);
  auto s = dgp::simulate(c, 50000, 57);
  const auto pf = pscore::oracle_propensity(c, s.observed, 1.0);
  const auto sup = pscore::estimate_support(pf);
  for (std::size_t i = 0; i < pf.cell_size(); ++i)
    s.observed.y[pf.rows()[i]] = dgp::observable_level(c, pf.fitted()[i], 1.0);
  const auto f = liv::fit_outcome_curve(s.observed, pf, sup);
  const auto r = liv::curve_integral(f, f.lower(), f.upper());
  CHECK(std::fabs(r.endpoint_difference - r.quadrature) < 1e-3);
}

TEST_CASE("outcome curve preconditions") {
  const auto s = dgp::simulate(with_delta(0.4), 800, 58);
  const auto pf = pscore::fit_propensity(s.observed, 0.0);
  const auto sup = pscore::estimate_support(pf);
  CHECK_THROWS_WITH_AS(liv::fit_outcome_curve(s.observed, pf, sup), doctest::Contains("at least 500"),
                       EstimationError);
  liv::CurveOptions wide;
  wide.min_cell = 100;
  wide.bandwidth = 0.2;
  CHECK_THROWS_WITH_AS(liv::fit_outcome_curve(s.observed, pf, sup, wide), doctest::Contains("too large"),
                       EstimationError);
  liv::CurveOptions bad;
  bad.degree = 5;
  CHECK_THROWS_AS(liv::fit_outcome_curve(s.observed, pf, sup, bad), ConfigError);
}
