#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mte::smooth {

// Linearly binned (x, y) data on a regular grid. Each observation splits its
// unit weight between the two neighbouring grid nodes; y is carried along as
// a weighted sum. Kernel sums over the nodes then stand in for sums over the
// raw observations with O(step^2) error.
class BinnedData {
 public:
  BinnedData() = default;
  BinnedData(std::span<const double> x, std::span<const double> y, double lo, double hi, std::size_t nodes);

  double lo() const { return lo_; }
  double hi() const { return lo_ + step_ * static_cast<double>(weight_.size() - 1); }
  double step() const { return step_; }
  std::size_t nodes() const { return weight_.size(); }
  double total_weight() const { return total_; }
  std::span<const double> weights() const { return weight_; }
  std::span<const double> sums() const { return sum_; }

 private:
  double lo_ = 0.0;
  double step_ = 1.0;
  double total_ = 0.0;
  std::vector<double> weight_;
  std::vector<double> sum_;
};

// Gaussian-kernel moments at `at` in scaled distance r = (node - at) / h:
//   s[k] = sum_j w_j r_j^k K(r_j),   t[k] = sum_j y_j r_j^k K(r_j).
// Nodes with |r| > kCutoff are skipped.
struct KernelMoments {
  std::array<double, 7> s{};
  std::array<double, 4> t{};
};

inline constexpr double kCutoff = 6.0;

KernelMoments gaussian_moments(const BinnedData& data, double at, double bandwidth, int max_s, int max_t);

struct LocalFit {
  double level = 0.0;
  double slope = 0.0;
  double weight = 0.0;  // kernel mass s[0]
};

// Local polynomial regression of the given degree (0..3) at `at`. Degree 0 is
// Nadaraya-Watson; its slope is the analytic derivative of the ratio
// estimator. For degree >= 1 the slope is the fitted linear coefficient.
// Returns nullopt when the local design is empty or singular.
std::optional<LocalFit> local_polynomial(const BinnedData& data, double at, double bandwidth, int degree);

// Nodes spaced bandwidth / kNodesPerBandwidth, clamped to a sane range.
std::size_t nodes_for(double lo, double hi, double bandwidth);

}  // namespace mte::smooth
