#include <doctest.h>

#include <cmath>
#include <vector>

#include "mtedebias/debias.hpp"
#include "mtedebias/dgp.hpp"
#include "mtedebias/errors.hpp"
#include "mtedebias/liv.hpp"
#include "mtedebias/normal.hpp"
#include "mtedebias/pscore.hpp"
#include "mtedebias/quadrature.hpp"

using namespace mte;
using pscore::SupportEstimate;

namespace {

debias::Identified exact_ident(const dgp::ModelConfig& c, double x) {
  const auto [lo, hi] = dgp::observed_support(c, x);
  return debias::identify_delta(SupportEstimate::make(lo, hi));
}

struct Cell {
  dgp::Sample sample;
  pscore::PropensityFit pfit;
  pscore::SupportEstimate support;
  liv::CurveFit curve;
  debias::Identified ident;
};

Cell fit_cell(const dgp::ModelConfig& c, std::size_t n, std::uint64_t seed, double x) {
  auto s = dgp::simulate(c, n, seed);
  auto pf = pscore::fit_propensity(s.observed, x);
  auto sup = pscore::estimate_support(pf);
  auto cf = liv::fit_outcome_curve(s.observed, pf, sup);
  auto id = debias::identify_delta(sup);
  return {std::move(s), std::move(pf), sup, std::move(cf), id};
}

}  // namespace

TEST_CASE("identify_delta examples") {
  auto a = debias::identify_delta(SupportEstimate::make(0.10, 0.70));
  CHECK(a.delta_hat == doctest::Approx(0.4));
  CHECK(a.p_tilde_identified);
  CHECK(a.p_tilde_hat == doctest::Approx(0.25));
  CHECK(a.width() == doctest::Approx(0.6));

  auto b = debias::identify_delta(SupportEstimate::make(0.0, 1.0));
  CHECK(b.delta_hat == 0.0);
  CHECK_FALSE(b.p_tilde_identified);

  auto c = debias::identify_delta(SupportEstimate::make(0.2, 0.8));
  CHECK(c.delta_hat == doctest::Approx(0.4));
  CHECK(c.p_tilde_hat == doctest::Approx(0.5));

  // inside the guard tolerance P~ stays unidentified
  auto d = debias::identify_delta(SupportEstimate::make(0.004, 0.999));
  CHECK(d.delta_hat == doctest::Approx(0.005));
  CHECK_FALSE(d.p_tilde_identified);
  CHECK_FALSE(d.provenance.empty());
}

TEST_CASE("identification round trip on exact endpoints") {
  auto c = dgp::benchmark_config();
  for (double delta : {0.05, 0.2, 0.4, 0.75, 0.95})
    for (double pt : {0.01, 0.25, 0.5, 0.9}) {
      c.delta = {{0.0, delta}, {1.0, delta}};
      c.p_tilde = {{0.0, pt}, {1.0, pt}};
      const auto id = exact_ident(c, 1.0);
      CHECK(id.delta_hat == doctest::Approx(delta).epsilon(1e-12));
      CHECK(id.p_tilde_hat == doctest::Approx(pt).epsilon(1e-12));
      CHECK(id.p_tilde_hat * id.delta_hat == doctest::Approx(id.support.p_lo).epsilon(1e-14));
    }
}

TEST_CASE("debias_mte with oracle inputs is exact") {
  const auto c = dgp::benchmark_config();
  for (double x : {0.0, 1.0}) {
    const dgp::OracleCurve curve(c, x);
    const auto id = exact_ident(c, x);
    for (double v : {0.01, 0.1, 0.37, 0.5, 0.8, 0.99})
      CHECK(debias::debias_mte(curve, id, v) == doctest::Approx(dgp::true_mte(c, v, x)).epsilon(1e-10));
  }
}

TEST_CASE("debias_mte is the identity without non-responders") {
  auto c = dgp::benchmark_config();
  c.set_delta(0.0);
  const auto f = fit_cell(c, 50000, 61, 1.0);
  const auto id = debias::identify_delta(SupportEstimate::make(0.0, 1.0));
  for (double v : {0.2, 0.5, 0.8})
    CHECK(debias::debias_mte(f.curve, id, v) == liv::pseudo_mte_hat(f.curve, v));
}

TEST_CASE("debias_mte on the benchmark") {
  const auto c = dgp::benchmark_config();
  for (double x : {0.0, 1.0}) {
    const auto f = fit_cell(c, 100000, 62, x);
    CHECK(std::fabs(debias::debias_mte(f.curve, f.ident, 0.5) - dgp::true_mte(c, 0.5, x)) < 0.15);
    const auto [vlo, vhi] = debias::evaluable_v_range(f.curve, f.ident);
    CHECK(vlo > 0.0);
    CHECK(vhi < 1.0);
    CHECK_THROWS_WITH_AS(debias::debias_mte(f.curve, f.ident, 0.5 * vlo), doctest::Contains("v"), DomainError);
  }
}

TEST_CASE("automatic CATE") {
  const auto c = dgp::benchmark_config();
  const auto f = fit_cell(c, 100000, 63, 1.0);
  const auto cate = debias::cate_automatic(f.curve, f.support);
  CHECK(cate.endpoint == doctest::Approx(1.5).epsilon(0.1 / 1.5));
  CHECK(std::fabs(cate.endpoint - cate.quadrature) < 0.05);
  CHECK(cate.a == doctest::Approx(f.curve.lower()));
  CHECK(cate.b == doctest::Approx(f.curve.upper()));

  auto flat = f.sample.observed;
  for (auto& y : flat.y) y = -4.0;
  const auto fc = liv::fit_outcome_curve(flat, f.pfit, f.support);
  CHECK(std::fabs(debias::cate_automatic(fc, f.support).endpoint) < 1e-9);

  for (double x : {0.0, 1.0}) {
    const dgp::OracleCurve oc(c, x);
    const auto [lo, hi] = dgp::observed_support(c, x);
    const auto r = debias::cate_automatic(oc, SupportEstimate::make(lo, hi));
    CHECK(r.endpoint == doctest::Approx(c.d_alpha() + c.d_beta() * x).epsilon(1e-8));
    CHECK(r.quadrature == doctest::Approx(c.d_alpha() + c.d_beta() * x).epsilon(1e-6));
  }
}

TEST_CASE("automatic and explicit CATE routes agree") {
  const auto c = dgp::benchmark_config();
  const auto f = fit_cell(c, 100000, 64, 0.0);
  const auto cate = debias::cate_automatic(f.curve, f.support);
  const auto [vlo, vhi] = debias::evaluable_v_range(f.curve, f.ident);
  const auto explicit_route =
      num::integrate([&](double v) { return debias::debias_mte(f.curve, f.ident, v); }, vlo, vhi, 1e-10, 1e-10);
  // both stretch over the same trimmed sliver
  CHECK(explicit_route.value / (vhi - vlo) == doctest::Approx(cate.quadrature).epsilon(1e-6));
  CHECK(std::fabs(explicit_route.value / (vhi - vlo) - cate.endpoint) < 0.05);
}

TEST_CASE("LATE de-biasing") {
  auto c = dgp::benchmark_config();

  SUBCASE("no non-responders leaves LATE* unchanged") {
    c.set_delta(0.0);
    const auto f = fit_cell(c, 50000, 65, 1.0);
    const auto id = debias::identify_delta(SupportEstimate::make(0.0, 1.0));
    const auto r = debias::late_debias(f.curve, id, f.pfit, 0.5, -0.5);
    CHECK(r.late == r.late_star);
  }

  SUBCASE("oracle inputs reproduce the responder LATE") {
    for (double x : {0.0, 1.0}) {
      const dgp::OracleCurve oc(c, x);
      auto s = dgp::simulate(c, 2000, 66);
      const auto pf = pscore::oracle_propensity(c, s.observed, x);
      const auto id = exact_ident(c, x);
      for (auto [z, zp] : std::vector<std::pair<double, double>>{{0.5, -0.5}, {0.0, -1.0}, {2.0, 1.0}}) {
        const auto r = debias::late_debias(oc, id, pf, z, zp);
        CHECK(r.late == doctest::Approx(dgp::true_late(c, x, z, zp)).epsilon(1e-9));
        // LATE* as the average of the pseudo-MTE between the two observed propensities
        const auto q = num::integrate([&](double u) { return oc.derivative(u); }, r.p_prime, r.p);
        CHECK(r.late_star == doctest::Approx(q.value / (r.p - r.p_prime)).epsilon(1e-8));
      }
    }
  }

  SUBCASE("symmetric pair on the benchmark") {
    c.beta1 = c.beta0;
    const double zq = num::normal_quantile(0.75);
    double total = 0;
    const int reps = 4;
    for (int r = 0; r < reps; ++r) {
      const auto f = fit_cell(c, 100000, 670 + r, 0.0);
      total += debias::late_debias(f.curve, f.ident, f.pfit, zq, -zq).late;
    }
    CHECK(dgp::true_late(c, 0.0, zq, -zq) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(total / reps == doctest::Approx(1.0).epsilon(0.15));
  }

  SUBCASE("propensity tie") {
    const dgp::OracleCurve oc(c, 1.0);
    auto s = dgp::simulate(c, 2000, 68);
    const auto pf = pscore::oracle_propensity(c, s.observed, 1.0);
    CHECK_THROWS_AS(debias::late_debias(oc, exact_ident(c, 1.0), pf, 0.3, 0.3), EstimationError);
  }
}

TEST_CASE("MPRTE de-biasing") {
  auto c = dgp::benchmark_config();

  SUBCASE("oracle inputs") {
    for (double x : {0.0, 1.0}) {
      const dgp::OracleCurve oc(c, x);
      auto s = dgp::simulate(c, 400000, 69);
      const auto pf = pscore::oracle_propensity(c, s.observed, x);
      const auto r = debias::mprte_debias(oc, exact_ident(c, x), pf);
      CHECK(r.weight_coverage == doctest::Approx(1.0));
      // sample mean over Z against the quadrature truth
      CHECK(r.mprte == doctest::Approx(dgp::true_mprte(c, x)).epsilon(0.01));
    }
  }

  SUBCASE("no heterogeneity and no non-responders gives the CATE") {
    c.set_delta(0.0);
    c.rho1 = c.rho0;
    const auto f = fit_cell(c, 100000, 70, 1.0);
    const auto id = debias::identify_delta(SupportEstimate::make(0.0, 1.0));
    const auto r = debias::mprte_debias(f.curve, id, f.pfit);
    CHECK(r.mprte == r.mprte_star);
    CHECK(r.mprte == doctest::Approx(1.5).epsilon(0.05 / 1.5));
    CHECK(dgp::true_mprte(c, 1.0) == doctest::Approx(1.5).epsilon(1e-9));
  }

  SUBCASE("benchmark estimate") {
    const auto f = fit_cell(c, 100000, 71, 1.0);
    const auto r = debias::mprte_debias(f.curve, f.ident, f.pfit);
    CHECK(r.weight_coverage > 0.85);
    CHECK(r.mprte == doctest::Approx(dgp::true_mprte(c, 1.0)).epsilon(0.15 / 1.5));
  }

  SUBCASE("irrelevant instrument") {
    auto s = dgp::simulate(c, 5000, 72);
    const auto pf = pscore::PropensityFit::from_probit(s.observed, 1.0, 0.2, 0.0);
    const dgp::OracleCurve oc(c, 1.0);
    CHECK_THROWS_WITH_AS(debias::mprte_star(oc, pf), doctest::Contains("instrument"), EstimationError);
  }
}

TEST_CASE("late and mprte consume only the support endpoints") {
  const auto c = dgp::benchmark_config();
  const auto f = fit_cell(c, 50000, 73, 1.0);
  auto relabeled = f.support;
  relabeled.method = "other";
  relabeled.trim = 0.05;
  relabeled.max_gap = 0.0;
  const auto id2 = debias::identify_delta(relabeled);
  CHECK(debias::late_debias(f.curve, f.ident, f.pfit, 0.5, -0.5).late ==
        debias::late_debias(f.curve, id2, f.pfit, 0.5, -0.5).late);
  CHECK(debias::mprte_debias(f.curve, f.ident, f.pfit).mprte == debias::mprte_debias(f.curve, id2, f.pfit).mprte);
}

TEST_CASE("limited-support bounds") {
  const auto s = SupportEstimate::make(0.2, 0.8);

  auto b = debias::bounds_limited_support(s, 0.5, 2.0, 1.0);
  CHECK(b.delta_lower == doctest::Approx(0.4));
  REQUIRE(b.delta_upper);
  CHECK(*b.delta_upper == 0.5);
  CHECK(*b.late.lower == doctest::Approx(1.0));
  CHECK(*b.late.upper == doctest::Approx(1.2));
  CHECK(*b.mprte.lower == doctest::Approx(0.5));
  CHECK(*b.mprte.upper == doctest::Approx(0.6));
  CHECK(*b.factor.lower == doctest::Approx(0.5));
  CHECK(*b.factor.upper == doctest::Approx(0.6));

  auto point = debias::bounds_limited_support(s, 0.4, 2.0, 1.0);
  CHECK(*point.factor.lower == doctest::Approx(*point.factor.upper));
  CHECK(*point.late.lower == doctest::Approx(*point.late.upper));

  CHECK_THROWS_WITH_AS(debias::bounds_limited_support(s, 0.3, 2.0, 1.0), doctest::Contains("contradicts"),
                       EstimationError);
  CHECK_THROWS_AS(debias::bounds_limited_support(s, 1.0, 2.0, 1.0), ConfigError);

  auto open = debias::bounds_limited_support(s, std::nullopt, 2.0, 1.0);
  CHECK_FALSE(open.late.lower);
  CHECK(*open.late.upper == doctest::Approx(1.2));
  CHECK_FALSE(open.delta_upper);

  auto neg = debias::bounds_limited_support(s, 0.5, -2.0, -1.0);
  CHECK(*neg.late.lower == doctest::Approx(-1.2));
  CHECK(*neg.late.upper == doctest::Approx(-1.0));
  CHECK(*neg.late.lower <= *neg.late.upper);

  // width-consistent interval: the factor 1 - delta is at least the width
  CHECK(*b.width_factor.lower == doctest::Approx(0.6));
  CHECK(*b.width_factor.upper == doctest::Approx(1.0));
  CHECK(*b.width_late.lower == doctest::Approx(1.2));
  CHECK(*b.width_late.upper == doctest::Approx(2.0));

  const auto sc = debias::scale(debias::Interval{0.5, 0.6}, -3.0);
  CHECK(*sc.lower == doctest::Approx(-1.8));
  CHECK(*sc.upper == doctest::Approx(-1.5));
}

TEST_CASE("bounds with oracle inputs bracket the truth only on the width side") {
  // true factor 1 - delta = 0.7; the observed width is smaller because P(x, Z) itself
  // does not reach 0 or 1
  const auto c = dgp::limited_support_config();
  for (double x : {0.0, 1.0}) {
    const auto [lo, hi] = dgp::observed_support(c, x);
    CHECK(hi - lo == doctest::Approx(0.7));
    const double late = dgp::true_late(c, x, 0.5, -0.5);
    const dgp::OracleCurve oc(c, x);
    auto smp = dgp::simulate(c, 2000, 74);
    const auto pf = pscore::oracle_propensity(c, smp.observed, x);
    const auto lr = debias::late_debias(oc, exact_ident(c, x), pf, 0.5, -0.5);
    CHECK(lr.late == doctest::Approx(late).epsilon(1e-9));
  }
  const auto f = fit_cell(c, 100000, 75, 1.0);
  const double w = f.support.width();
  CHECK(w < 0.7);
  const auto b = debias::bounds_limited_support(f.support, 0.5, 1.0, 1.0);
  CHECK(*b.factor.upper == doctest::Approx(w));
  CHECK_FALSE(b.factor.contains(0.7));
  CHECK(b.width_factor.contains(0.7));
}
