#pragma once

#include <functional>

#include "gelgt/tensor.hpp"

namespace gelgt {

// Central differences (f(θ+ε) − f(θ−ε)) / 2ε per coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double eps = 1e-5);

// Same, perturbing a parameter in place; f reads the parameter itself.
// The parameter value is restored exactly afterwards.
Tensor finite_diff_grad(const std::function<double()>& f, Parameter& param, double eps = 1e-5);

// ||a − b|| / max(||a||, ||b||), or 0 when both are exactly zero.
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace gelgt
