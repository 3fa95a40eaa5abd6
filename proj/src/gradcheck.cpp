#include "gelgt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gelgt/errors.hpp"

namespace gelgt {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double eps) {
  Tensor grad(theta.shape());
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + eps;
    const double up = f(probe);
    probe[i] = theta[i] - eps;
    const double down = f(probe);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

Tensor finite_diff_grad(const std::function<double()>& f, Parameter& param, double eps) {
  Tensor grad(param.value.shape());
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const double orig = param.value[i];
    param.value[i] = orig + eps;
    const double up = f();
    param.value[i] = orig - eps;
    const double down = f();
    param.value[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace gelgt
