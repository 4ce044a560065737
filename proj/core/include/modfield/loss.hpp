#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

#include "modfield/dense.hpp"
#include "modfield/signal.hpp"

namespace modfield {

enum class LossKind { L2, L1 };

std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view name);

/// Per-sample reconstruction loss and its gradient w.r.t. pred.
/// L2: ||pred - target||^2. L1: sum |pred - target|, subgradient 0 where the
/// difference is exactly zero.
template <typename T>
std::pair<T, Vector<T>> reconstruction_loss(const Vector<T>& pred, const Vector<T>& target, LossKind kind) {
  if (pred.size() != target.size()) throw DimensionError("reconstruction_loss: pred vs target length", target.size(), pred.size());
  const Vector<T> diff = pred - target;
  if (kind == LossKind::L2) return {diff.squaredNorm(), T(2) * diff};
  return {diff.cwiseAbs().sum(), diff.unaryExpr([](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); })};
}

/// Mean of the per-sample losses over the columns of a batch; writes
/// d(mean)/d(pred) into grad.
template <typename T>
double batch_loss(const Matrix<T>& pred, const Matrix<T>& target, LossKind kind, Matrix<T>& grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("batch_loss: pred vs target size", target.size(), pred.size());
  }
  const Index B = pred.cols();
  const T inv = T(1) / static_cast<T>(B);
  grad = pred - target;
  double total = 0.0;
  if (kind == LossKind::L2) {
    for (Index b = 0; b < B; ++b) total += static_cast<double>(grad.col(b).squaredNorm());
    grad *= T(2) * inv;
  } else {
    for (Index b = 0; b < B; ++b) total += static_cast<double>(grad.col(b).cwiseAbs().sum());
    grad = grad.unaryExpr([inv](T v) { return v > T(0) ? inv : (v < T(0) ? -inv : T(0)); });
  }
  return total / static_cast<double>(B);
}

/// 10 log10(peak^2 / mse); +infinity when mse == 0.
inline double psnr_from_mse(double mse, double peak = 1.0) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

/// Mean squared error over every value of two signals of the same shape.
double mean_squared_error(const SampledSignal& pred, const SampledSignal& target);

/// PSNR over all samples and channels.
double psnr(const SampledSignal& pred, const SampledSignal& target, double peak = 1.0);

/// PSNR restricted to the listed sample indices.
double psnr_subset(const SampledSignal& pred, const SampledSignal& target, std::span<const Eigen::Index> samples,
                   double peak = 1.0);

}  // namespace modfield
