#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace mte::num {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

struct GkPanel {
  double a, b, value, error;
  bool operator<(const GkPanel& o) const { return error < o.error; }
};

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK nodes).
template <class F>
GkPanel gauss_kronrod15(F& f, double a, double b) {
  static constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                    0.207784955007898467600689403773245, 0.0};
  static constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = wgk[7] * fc;
  double gauss = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double pair = f(centre - dx) + f(centre + dx);
    kronrod += wgk[j] * pair;
    if (j % 2 == 1) gauss += wg[j / 2] * pair;
  }
  return {a, b, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod quadrature on a finite interval: the panel
// with the largest error estimate is bisected until the summed error meets
// max(abs_tol, rel_tol*|I|). Endpoints are never evaluated, so integrable
// endpoint singularities are fine.
template <class F>
QuadResult integrate(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-10,
                     int max_panels = 4000) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::priority_queue<detail::GkPanel> panels;
  panels.push(detail::gauss_kronrod15(f, a, b));
  out.evaluations = 15;
  double total = panels.top().value;
  double error = panels.top().error;
  while (error > std::max(abs_tol, rel_tol * std::fabs(total))) {
    if (static_cast<int>(panels.size()) >= max_panels) break;
    const detail::GkPanel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    panels.pop();
    const auto left = detail::gauss_kronrod15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod15(f, mid, worst.b);
    out.evaluations += 30;
    panels.push(left);
    panels.push(right);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
  }
  // Re-sum to shed the drift of the running updates.
  total = 0.0;
  error = 0.0;
  while (!panels.empty()) {
    total += panels.top().value;
    error += panels.top().error;
    panels.pop();
  }
  out.value = sign * total;
  out.error = error;
  out.converged = error <= std::max(abs_tol, rel_tol * std::fabs(total));
  return out;
}

// Integral over the whole real line via x = t / (1 - t^2), t in (-1, 1).
template <class F>
QuadResult integrate_real_line(F&& f, double abs_tol = 1e-12, double rel_tol = 1e-10) {
  auto g = [&f](double t) {
    const double d = 1.0 - t * t;
    const double x = t / d;
    const double v = f(x);
    if (v == 0.0) return 0.0;
    return v * (1.0 + t * t) / (d * d);
  };
  return integrate(g, -1.0, 1.0, abs_tol, rel_tol);
}

}  // namespace mte::num
