#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mtedebias/normal.hpp"
#include "mtedebias/quadrature.hpp"
#include "mtedebias/rng.hpp"
#include "mtedebias/smooth.hpp"

using namespace mte;

namespace {

struct Ref {
  double arg;
  double value;
};

// 50-digit mpmath values (ncdf, and the root of ncdf(x) = p for the quantile).
const Ref kCdf[] = {
    {-30.0, 4.9067139271481872e-198},  {-20.0, 2.7536241186062337e-89}, {-10.0, 7.6198530241605255e-24},
    {-5.0, 2.8665157187919391e-07},    {-3.0, 0.0013498980316300946},   {-1.96, 0.024997895148220435},
    {-1.0, 0.15865525393145705},       {-0.5, 0.30853753872598688},     {-0.001, 0.49960105778608893},
    {0.0, 0.5},                        {0.25, 0.5987063256829237},      {1.0, 0.84134474606854293},
    {1.5, 0.93319279873114191},        {2.5, 0.99379033467422384},      {5.0, 0.99999971334842808},
    {8.0, 0.99999999999999933},
};

const Ref kQuantile[] = {
    {1e-300, -37.047096299361201},      {1e-100, -21.273453560965326},     {1e-20, -9.262340089798407},
    {1e-10, -6.3613409024040566},       {1e-05, -4.2648907939228247},      {0.001, -3.0902323061678136},
    {0.02425, -1.9729610513118849},     {0.025, -1.9599639845400543},      {0.1, -1.2815515655446004},
    {0.3, -0.52440051270804078},        {0.5, 0.0},                        {0.7, 0.52440051270804067},
    {0.975, 1.9599639845400538},        {0.97575, 1.9729610513118849},     {0.999, 3.0902323061678132},
    {0.9999999999, 6.3613408896974217},
};

double rel_err(double got, double want) {
  if (want == 0.0) return std::fabs(got);
  return std::fabs(got - want) / std::fabs(want);
}

}  // namespace

TEST_CASE("normal_cdf against high-precision values") {
  for (const auto& r : kCdf) {
    CAPTURE(r.arg);
    CHECK(rel_err(num::normal_cdf(r.arg), r.value) < 1e-13);
  }
  CHECK(num::normal_pdf(0.0) == doctest::Approx(num::kInvSqrt2Pi).epsilon(1e-15));
}

TEST_CASE("normal_quantile against high-precision values") {
  for (const auto& r : kQuantile) {
    CAPTURE(r.arg);
    CHECK(rel_err(num::normal_quantile(r.arg), r.value) < 1e-13);
  }
  CHECK(num::normal_quantile(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(num::normal_quantile(1.0) == std::numeric_limits<double>::infinity());
  CHECK(std::isnan(num::normal_quantile(-0.1)));
  CHECK(std::isnan(num::normal_quantile(1.5)));
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    CHECK(std::fabs(num::normal_cdf(num::normal_quantile(p)) - p) < 2e-16 * 8);
    CHECK(num::normal_quantile(1.0 - p) == doctest::Approx(-num::normal_quantile(p)).epsilon(1e-12));
  }
}

TEST_CASE("adaptive quadrature") {
  auto poly = num::integrate([](double x) { return x * x * x * x * x; }, 0.0, 1.0);
  CHECK(poly.converged);
  CHECK(poly.value == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  CHECK(num::integrate([](double x) { return std::sin(x); }, 0.0, M_PI).value == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(num::integrate([](double) { return 1.0; }, 2.0, 2.0).value == 0.0);

  // integrable endpoint singularity
  auto sing = num::integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-10, 1e-10);
  CHECK(sing.value == doctest::Approx(2.0).epsilon(1e-8));

  auto gauss = num::integrate_real_line([](double x) { return num::normal_pdf(x); });
  CHECK(gauss.value == doctest::Approx(1.0).epsilon(1e-12));
  auto second = num::integrate_real_line([](double x) { return x * x * num::normal_pdf(x); });
  CHECK(second.value == doctest::Approx(1.0).epsilon(1e-11));

  auto f = [](double x) { return std::exp(-x) * std::cos(3 * x); };
  const double whole = num::integrate(f, 0.0, 2.0).value;
  const double parts = num::integrate(f, 0.0, 0.7).value + num::integrate(f, 0.7, 2.0).value;
  CHECK(std::fabs(whole - parts) < 1e-13);
}

TEST_CASE("rng streams are deterministic and distinct") {
  num::Rng a(42), b(42), c(num::derive_seed(42, 1));
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  num::Rng a2(42);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a2.uniform() == c.uniform();
  CHECK(same == 0);
  CHECK(num::derive_seed(1, 0) != num::derive_seed(1, 1));
  CHECK(num::derive_seed(1, 0) != num::derive_seed(2, 0));
}

TEST_CASE("rng uniforms and normals") {
  num::Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::fabs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::fabs(sn / n) < 5 / std::sqrt(double(n)));
  CHECK(std::fabs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("binned local polynomial reproduces polynomials") {
  std::vector<double> x, y;
  for (int i = 0; i < 20000; ++i) {
    const double t = (i + 0.5) / 20000.0;
    x.push_back(t);
    y.push_back(1.0 + 2.0 * t - 3.0 * t * t);
  }
  const double h = 0.05;
  smooth::BinnedData bins(x, y, 0.0, 1.0, smooth::nodes_for(0.0, 1.0, h));
  CHECK(bins.total_weight() == doctest::Approx(20000.0));
  for (double at : {0.3, 0.5, 0.71}) {
    auto q = smooth::local_polynomial(bins, at, h, 2);
    REQUIRE(q);
    CHECK(q->level == doctest::Approx(1.0 + 2.0 * at - 3.0 * at * at).epsilon(1e-5));
    CHECK(q->slope == doctest::Approx(2.0 - 6.0 * at).epsilon(1e-4));
    auto c = smooth::local_polynomial(bins, at, h, 3);
    REQUIRE(c);
    CHECK(c->slope == doctest::Approx(2.0 - 6.0 * at).epsilon(1e-4));
  }
}

TEST_CASE("Nadaraya-Watson slope is the derivative of its level") {
  std::vector<double> x, y;
  num::Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const double t = rng.uniform();
    x.push_back(t);
    y.push_back(std::sin(3 * t) + 0.1 * rng.normal());
  }
  const double h = 0.04;
  smooth::BinnedData bins(x, y, 0.0, 1.0, smooth::nodes_for(0.0, 1.0, h));
  for (double at : {0.2, 0.5, 0.8}) {
    const double step = 1e-5;
    const double up = smooth::local_polynomial(bins, at + step, h, 0)->level;
    const double dn = smooth::local_polynomial(bins, at - step, h, 0)->level;
    CHECK(smooth::local_polynomial(bins, at, h, 0)->slope == doctest::Approx((up - dn) / (2 * step)).epsilon(1e-5));
  }
}

TEST_CASE("local polynomial reports empty windows") {
  std::vector<double> x{0.0, 0.01}, y{1.0, 1.0};
  smooth::BinnedData bins(x, y, 0.0, 1.0, 200);
  CHECK_FALSE(smooth::local_polynomial(bins, 0.9, 0.01, 2).has_value());
}
