#include <doctest.h>

#include <cmath>
#include <vector>

#include "mtedebias/dgp.hpp"
#include "mtedebias/errors.hpp"
#include "mtedebias/pscore.hpp"
#include "mtedebias/rng.hpp"

using namespace mte;

namespace {

dgp::ModelConfig with_delta(double delta) {
  auto c = dgp::benchmark_config();
  c.set_delta(delta);
  return c;
}

pscore::FitOptions probit() {
  pscore::FitOptions o;
  o.method = pscore::Method::kProbitMle;
  return o;
}

}  // namespace

TEST_CASE("probit MLE recovers the responder index without non-responders") {
  const auto c = with_delta(0.0);
  const auto s = dgp::simulate(c, 20000, 31);
  for (double x : c.x_grid) {
    const auto fit = pscore::fit_propensity(s.observed, x, probit());
    const auto* p = fit.probit();
    REQUIRE(p != nullptr);
    CHECK(p->gradient_norm < 1e-8);
    CHECK(std::fabs(p->intercept - (c.theta0 + c.theta2 * x)) < 3 * p->se_intercept);
    CHECK(std::fabs(p->slope - c.theta1) < 3 * p->se_slope);
    CHECK(fit.method() == pscore::Method::kProbitMle);
  }
}

TEST_CASE("degenerate cells are rejected") {
  auto s = dgp::simulate(with_delta(0.0), 2000, 1);
  auto constant = s.observed;
  for (auto& d : constant.d_star) d = 1;
  CHECK_THROWS_WITH_AS(pscore::fit_propensity(constant, 0.0, probit()), doctest::Contains("separation"),
                       EstimationError);
  CHECK_THROWS_WITH_AS(pscore::fit_propensity(constant, 0.0), doctest::Contains("separation"), EstimationError);

  auto split = s.observed;
  for (std::size_t i = 0; i < split.size(); ++i) split.d_star[i] = split.z[i] > 0.0;
  CHECK_THROWS_WITH_AS(pscore::fit_propensity(split, 1.0, probit()), doctest::Contains("separation"), EstimationError);

  const auto small = dgp::simulate(with_delta(0.0), 300, 2);
  CHECK_THROWS_WITH_AS(pscore::fit_propensity(small.observed, 0.0), doctest::Contains("at least 200"),
                       EstimationError);
  CHECK_THROWS_AS(pscore::fit_propensity(s.observed, 0.0, pscore::FitOptions{pscore::Method::kOracle}), ConfigError);
  CHECK_THROWS_AS(pscore::method_from_string("logit"), ConfigError);
}

TEST_CASE("evaluators: clamping, derivatives, monotonicity") {
  const auto s = dgp::simulate(with_delta(0.0), 20000, 4);
  const auto fit = pscore::fit_propensity(s.observed, 1.0, probit());
  num::Rng rng(8);
  double prev = -1.0;
  for (double z = -12.0; z <= 12.0; z += 0.25) {
    const double v = fit.value(z);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v >= prev);
    prev = v;
  }
  for (int i = 0; i < 50; ++i) {
    const double z = 2.0 * rng.normal();
    const double step = 1e-5;
    const double fd = (fit.value(z + step) - fit.value(z - step)) / (2 * step);
    CHECK(fit.derivative(z) == doctest::Approx(fd).epsilon(1e-6));
  }

  const auto k = pscore::fit_propensity(s.observed, 1.0);
  REQUIRE(k.kernel() != nullptr);
  for (double z : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
    CHECK(k.value(z) >= 0.0);
    CHECK(k.value(z) <= 1.0);
    const double step = 1e-5;
    const double fd = (k.value(z + step) - k.value(z - step)) / (2 * step);
    CHECK(k.derivative(z) == doctest::Approx(fd).epsilon(1e-5));
  }
  // the fitted values at the cell's own z's come from the same evaluator
  for (std::size_t i = 0; i < k.cell_size(); i += 997) {
    const double z = s.observed.z[k.rows()[i]];
    CHECK(k.fitted()[i] == doctest::Approx(k.value(z)).epsilon(1e-14));
    CHECK(k.fitted_derivative()[i] == doctest::Approx(k.derivative(z)).epsilon(1e-12));
  }
}

TEST_CASE("support estimates") {
  const std::size_t n = 100000;
  SUBCASE("full support without non-responders") {
    const auto s = dgp::simulate(with_delta(0.0), n, 41);
    for (auto opts : {pscore::FitOptions{}, probit()}) {
      const auto fit = pscore::fit_propensity(s.observed, 0.0, opts);
      const auto sup = pscore::estimate_support(fit);
      CHECK(sup.p_lo <= 0.02);
      CHECK(sup.p_hi >= 0.98);
      CHECK(sup.trim == 0.001);
    }
  }
  SUBCASE("non-responders compress the support to (delta P~, 1 - delta + delta P~)") {
    const auto s = dgp::simulate(with_delta(0.4), n, 42);
    for (double x : {0.0, 1.0}) {
      const auto fit = pscore::fit_propensity(s.observed, x);
      const auto sup = pscore::estimate_support(fit);
      CHECK(std::fabs(sup.p_lo - 0.10) <= 0.02);
      CHECK(std::fabs(sup.p_hi - 0.70) <= 0.02);
      CHECK(sup.method == "kernel-quantile");
      // a larger trim can only shrink the interval
      const auto wider = pscore::estimate_support(fit, 0.0005);
      const auto narrower = pscore::estimate_support(fit, 0.01);
      CHECK(narrower.p_lo >= sup.p_lo);
      CHECK(narrower.p_hi <= sup.p_hi);
      CHECK(wider.p_lo <= sup.p_lo);
      CHECK(wider.p_hi >= sup.p_hi);
    }
  }
  SUBCASE("constant fitted values") {
    const auto s = dgp::simulate(with_delta(0.0), 2000, 3);
    const auto flat = pscore::PropensityFit::from_probit(s.observed, 0.0, 0.2, 0.0);
    CHECK_THROWS_WITH_AS(pscore::estimate_support(flat), doctest::Contains("degenerate"), EstimationError);
  }
  SUBCASE("a binary instrument gives a non-interval support") {
    auto s = dgp::simulate(with_delta(0.0), 4000, 9);
    for (auto& z : s.observed.z) z = z > 0 ? 1.0 : -1.0;
    const auto fit = pscore::fit_propensity(s.observed, 0.0, probit());
    CHECK_THROWS_WITH_AS(pscore::estimate_support(fit), doctest::Contains("not an interval"), EstimationError);
  }
  CHECK_THROWS_AS(pscore::SupportEstimate::make(0.5, 0.5), EstimationError);
  CHECK_THROWS_AS(pscore::SupportEstimate::make(-0.1, 0.5), EstimationError);
  CHECK(pscore::quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.5);
}

TEST_CASE("average derivative attenuation") {
  const std::size_t n = 100000;
  const auto base = dgp::simulate(with_delta(0.0), n, 77);
  const auto half = dgp::simulate(with_delta(0.5), n, 77);
  const auto most = dgp::simulate(with_delta(0.9), n, 77);
  REQUIRE(base.observed.z == half.observed.z);
  for (double x : {0.0, 1.0}) {
    const double a0 = pscore::avg_derivative(pscore::fit_propensity(base.observed, x));
    const double a5 = pscore::avg_derivative(pscore::fit_propensity(half.observed, x));
    const double a9 = pscore::avg_derivative(pscore::fit_propensity(most.observed, x));
    CHECK(a5 / a0 == doctest::Approx(0.5).epsilon(0.10));
    CHECK(a9 / a0 == doctest::Approx(0.1).epsilon(0.15));
  }
  const auto flat = pscore::PropensityFit::from_probit(base.observed, 1.0, 0.3, 0.0);
  CHECK(pscore::avg_derivative(flat) == 0.0);
}

TEST_CASE("oracle propensity") {
  const auto c = with_delta(0.4);
  const auto s = dgp::simulate(c, 3000, 6);
  const auto o = pscore::oracle_propensity(c, s.observed, 1.0);
  CHECK(o.method() == pscore::Method::kOracle);
  for (double z : {-1.0, 0.0, 2.0}) {
    CHECK(o.value(z) == doctest::Approx(dgp::true_propensity_observed(c, 1.0, z)).epsilon(1e-15));
    CHECK(o.derivative(z) == doctest::Approx(dgp::observed_propensity_dz(c, 1.0, z)).epsilon(1e-15));
  }
}
