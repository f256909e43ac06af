#include "mtedebias/smooth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mte::smooth {

namespace {

constexpr double kNodesPerBandwidth = 32.0;

}  // namespace

BinnedData::BinnedData(std::span<const double> x, std::span<const double> y, double lo, double hi,
                       std::size_t nodes)
    : lo_(lo), weight_(std::max<std::size_t>(nodes, 2), 0.0), sum_(weight_.size(), 0.0) {
  if (x.size() != y.size()) throw std::invalid_argument("BinnedData: x and y differ in length");
  if (!(hi > lo)) throw std::invalid_argument("BinnedData: empty range");
  const std::size_t last = weight_.size() - 1;
  step_ = (hi - lo) / static_cast<double>(last);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pos = std::clamp((x[i] - lo) / step_, 0.0, static_cast<double>(last));
    const std::size_t j = std::min(static_cast<std::size_t>(pos), last - 1);
    const double frac = pos - static_cast<double>(j);
    weight_[j] += 1.0 - frac;
    weight_[j + 1] += frac;
    sum_[j] += (1.0 - frac) * y[i];
    sum_[j + 1] += frac * y[i];
  }
  total_ = static_cast<double>(x.size());
}

std::size_t nodes_for(double lo, double hi, double bandwidth) {
  const double n = std::ceil((hi - lo) / bandwidth * kNodesPerBandwidth) + 1.0;
  return static_cast<std::size_t>(std::clamp(n, 64.0, 65536.0));
}

KernelMoments gaussian_moments(const BinnedData& data, double at, double bandwidth, int max_s, int max_t) {
  KernelMoments m;
  const double step = data.step();
  const double d = step / bandwidth;
  const auto w = data.weights();
  const auto y = data.sums();
  const double first = std::ceil((at - kCutoff * bandwidth - data.lo()) / step);
  const double last = std::floor((at + kCutoff * bandwidth - data.lo()) / step);
  const long j0 = static_cast<long>(std::max(first, 0.0));
  const long j1 = static_cast<long>(std::min(last, static_cast<double>(data.nodes() - 1)));
  if (j1 < j0) return m;

  // exp(-r^2/2) along an arithmetic sequence of r by two running ratios.
  double r = (data.lo() + static_cast<double>(j0) * step - at) / bandwidth;
  double kern = std::exp(-0.5 * r * r);
  double ratio = std::exp(-r * d - 0.5 * d * d);
  const double ratio_step = std::exp(-d * d);
  const double r0 = r;
  for (long j = j0; j <= j1; ++j) {
    r = r0 + static_cast<double>(j - j0) * d;
    const double wk = w[j] * kern;
    const double yk = y[j] * kern;
    double pw = 1.0;
    for (int k = 0; k <= max_s; ++k) {
      m.s[k] += wk * pw;
      if (k <= max_t) m.t[k] += yk * pw;
      pw *= r;
    }
    kern *= ratio;
    ratio *= ratio_step;
  }
  return m;
}

std::optional<LocalFit> local_polynomial(const BinnedData& data, double at, double bandwidth, int degree) {
  if (degree < 0 || degree > 3) throw std::invalid_argument("local_polynomial: degree must be 0..3");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("local_polynomial: bandwidth must be positive");
  const int max_s = std::max(2 * degree, 1);
  const int max_t = std::max(degree, 1);
  const KernelMoments m = gaussian_moments(data, at, bandwidth, max_s, max_t);
  // A window with less than one effective observation is treated as empty.
  if (!(m.s[0] > 1.0)) return std::nullopt;

  LocalFit fit;
  fit.weight = m.s[0];
  if (degree == 0) {
    fit.level = m.t[0] / m.s[0];
    fit.slope = (m.t[1] * m.s[0] - m.t[0] * m.s[1]) / (bandwidth * m.s[0] * m.s[0]);
    return fit;
  }
  const int p = degree + 1;
  Eigen::MatrixXd gram(p, p);
  Eigen::VectorXd rhs(p);
  for (int a = 0; a < p; ++a) {
    rhs(a) = m.t[a];
    for (int b = 0; b < p; ++b) gram(a, b) = m.s[a + b];
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12) return std::nullopt;
  const Eigen::VectorXd beta = ldlt.solve(rhs);
  fit.level = beta(0);
  fit.slope = beta(1) / bandwidth;
  return fit;
}

}  // namespace mte::smooth
