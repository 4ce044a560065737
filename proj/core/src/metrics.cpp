#include "modfield/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "modfield/error.hpp"

namespace modfield {

namespace {

void check_sets(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() == 0 || b.cols() == 0) throw ConfigError("chamfer_distance: point sets must be non-empty");
  if (a.rows() != b.rows()) throw DimensionError("chamfer_distance: point dimension", a.rows(), b.rows());
  if (a.rows() < 1) throw ConfigError("chamfer_distance: points need at least one coordinate");
}

double mean_nearest_brute(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.cols(); ++j) best = std::min(best, (from.col(i) - to.col(j)).squaredNorm());
    sum += best;
  }
  return sum / static_cast<double>(from.cols());
}

double mean_nearest_sweep(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(to.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return to(0, x) < to(0, y); });
  std::vector<double> keys(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) keys[k] = to(0, order[k]);

  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    const double x = from(0, i);
    const auto start = static_cast<std::ptrdiff_t>(std::lower_bound(keys.begin(), keys.end(), x) - keys.begin());
    double best = std::numeric_limits<double>::infinity();
    // Walk outwards in both directions until the first-axis gap alone exceeds the best distance.
    for (std::ptrdiff_t k = start; k < static_cast<std::ptrdiff_t>(keys.size()); ++k) {
      const double dx = keys[static_cast<std::size_t>(k)] - x;
      if (dx * dx > best) break;
      best = std::min(best, (from.col(i) - to.col(order[static_cast<std::size_t>(k)])).squaredNorm());
    }
    for (std::ptrdiff_t k = start - 1; k >= 0; --k) {
      const double dx = x - keys[static_cast<std::size_t>(k)];
      if (dx * dx > best) break;
      best = std::min(best, (from.col(i) - to.col(order[static_cast<std::size_t>(k)])).squaredNorm());
    }
    sum += best;
  }
  return sum / static_cast<double>(from.cols());
}

}  // namespace

double chamfer_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_sets(a, b);
  return mean_nearest_sweep(a, b) + mean_nearest_sweep(b, a);
}

double chamfer_distance_brute(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_sets(a, b);
  return mean_nearest_brute(a, b) + mean_nearest_brute(b, a);
}

}  // namespace modfield
