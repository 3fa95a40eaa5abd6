#pragma once

#include <vector>

#include "gelgt/tensor.hpp"

namespace gelgt {

// Bias-corrected Adam with decoupled weight decay:
//   theta -= lr_p * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
// where lr_p = lr * Parameter::lr_scale and wd applies only to parameters
// flagged for weight decay.
class Adam {
 public:
  explicit Adam(ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(double lr, double weight_decay);
  std::size_t steps() const { return t_; }

 private:
  ParameterSet* params_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Linear warmup: lr * step / warmup for 1-based step < warmup, lr after.
double warmup_lr(double lr, std::size_t step, std::size_t warmup);

}  // namespace gelgt
