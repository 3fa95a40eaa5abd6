#pragma once

#include <cmath>
#include <random>

#include "gelgt/tensor.hpp"

namespace gelgt {

inline Tensor normal_tensor(std::size_t rows, std::size_t cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Tensor t = Tensor::zeros(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// Weight for x W with x of width fan_in.
inline Tensor linear_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return normal_tensor(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

inline Tensor filled_row(std::size_t cols, double v) {
  return Tensor({1, cols}, v);
}

}  // namespace gelgt
