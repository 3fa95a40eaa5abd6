#include "gelgt/optimizer.hpp"

#include <cmath>

#include "gelgt/errors.hpp"

namespace gelgt {

Adam::Adam(ParameterSet& params, double beta1, double beta2, double eps)
    : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value.shape());
    v_.emplace_back(params[i].value.shape());
  }
}

void Adam::step(double lr, double weight_decay) {
  if (params_->size() != m_.size()) throw ShapeError("Adam: parameter set changed size");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Parameter& p = (*params_)[i];
    if (!p.grad.same_shape(p.value) || !m_[i].same_shape(p.value)) throw ShapeError("Adam: shape mismatch for " + p.name);
    const double lr_p = lr * p.lr_scale;
    const double wd = p.weight_decay ? weight_decay : 0.0;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p.value[k] -= lr_p * (m_hat / (std::sqrt(v_hat) + eps_) + wd * p.value[k]);
    }
  }
}

double warmup_lr(double lr, std::size_t step, std::size_t warmup) {
  if (warmup > 0 && step < warmup) return lr * static_cast<double>(step) / static_cast<double>(warmup);
  return lr;
}

}  // namespace gelgt
