#pragma once

#include <Eigen/Dense>

#include <string_view>

#include "modfield/error.hpp"

namespace modfield {

using Index = Eigen::Index;

/// Column-major batch matrix: one column per sample.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Layer weights are stored row-major so the on-disk blob is a plain copy.
template <typename T>
using WeightMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Activation { Sine, ReLU, Identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// weights [out x in], bias [out].
template <typename T>
struct DenseLayer {
  WeightMatrix<T> weights;
  Vector<T> bias;
  Activation activation = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(Index out_dim, Index in_dim, Activation act)
      : weights(WeightMatrix<T>::Zero(out_dim, in_dim)),
        bias(Vector<T>::Zero(out_dim)),
        activation(act) {
    if (out_dim < 1 || in_dim < 1) throw ConfigError("DenseLayer dimensions must be >= 1");
  }

  [[nodiscard]] Index in_dim() const { return weights.cols(); }
  [[nodiscard]] Index out_dim() const { return weights.rows(); }
  [[nodiscard]] Index parameter_count() const { return weights.size() + bias.size(); }

  template <typename U>
  [[nodiscard]] DenseLayer<U> cast() const {
    DenseLayer<U> out;
    out.weights = weights.template cast<U>();
    out.bias = bias.template cast<U>();
    out.activation = activation;
    return out;
  }
};

/// Pre-activation weights * input + bias.
template <typename T, typename Derived>
Vector<T> linear_forward(const DenseLayer<T>& layer, const Eigen::MatrixBase<Derived>& input) {
  if (input.size() != layer.in_dim()) {
    throw DimensionError("linear_forward: input length vs layer in_dim", layer.in_dim(), input.size());
  }
  return layer.weights * input + layer.bias;
}

/// Batched pre-activation; one sample per column.
template <typename T, typename Derived>
Matrix<T> linear_forward_batch(const DenseLayer<T>& layer, const Eigen::MatrixBase<Derived>& input) {
  if (input.rows() != layer.in_dim()) {
    throw DimensionError("linear_forward_batch: input rows vs layer in_dim", layer.in_dim(), input.rows());
  }
  Matrix<T> out = layer.weights * input;
  out.colwise() += layer.bias;
  return out;
}

/// Pointwise activation, any Eigen shape.
template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& v, Activation kind) {
  using Plain = typename Derived::PlainObject;
  Plain out(v.rows(), v.cols());
  switch (kind) {
    case Activation::Sine:
      out.array() = v.array().sin();
      break;
    case Activation::ReLU:
      out.array() = v.array().max(typename Derived::Scalar(0));
      break;
    case Activation::Identity:
      out = v;
      break;
  }
  return out;
}

/// upstream * d/dv activate(v). ReLU derivative is 1[v > 0].
template <typename DerivedV, typename DerivedU>
auto activate_backward(const Eigen::MatrixBase<DerivedV>& v, Activation kind,
                       const Eigen::MatrixBase<DerivedU>& upstream) {
  using Plain = typename DerivedV::PlainObject;
  using Scalar = typename DerivedV::Scalar;
  if (v.rows() != upstream.rows() || v.cols() != upstream.cols()) {
    throw DimensionError("activate_backward: pre-activation vs upstream size", v.size(), upstream.size());
  }
  Plain out(v.rows(), v.cols());
  switch (kind) {
    case Activation::Sine:
      out.array() = upstream.array() * v.array().cos();
      break;
    case Activation::ReLU:
      out.array() = (v.array() > Scalar(0)).select(upstream.array(), Scalar(0));
      break;
    case Activation::Identity:
      out = upstream;
      break;
  }
  return out;
}

}  // namespace modfield
