#pragma once

#include <Eigen/Dense>

namespace modfield {

/// Bi-directional Chamfer distance between point sets stored as columns:
///
///     mean_a min_b |a - b|^2  +  mean_b min_a |b - a|^2
///
/// Uses a sort-and-sweep nearest-neighbour search along the first
/// coordinate; the result equals chamfer_distance_brute up to rounding.
double chamfer_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// O(|A| |B|) reference.
double chamfer_distance_brute(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace modfield
