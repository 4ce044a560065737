#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modfield/error.hpp"

namespace modfield {

/// Central-difference gradient of a scalar function, in double precision:
/// (f(p + eps e_k) - f(p - eps e_k)) / (2 eps) for every coordinate k.
inline std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                                  std::span<const double> params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_difference_grad: eps must be > 0");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + eps;
    const double plus = f(p);
    p[k] = saved - eps;
    const double minus = f(p);
    p[k] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericalError("finite_difference_grad: non-finite evaluation at coordinate " + std::to_string(k));
    }
    grad[k] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

}  // namespace modfield
