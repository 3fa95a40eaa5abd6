#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gelgt {

// Dense row-major array of doubles. Rank 0, 1 and 2 are the only ranks the
// ops understand; a rank-1 tensor behaves as a single row.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
  static Tensor row(std::vector<double> values);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : shape_.size() == 1 ? shape_[0] : 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Value of a single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const;
  void fill(double v);

  std::string shape_string() const;

 private:
  Shape shape_;
  // Over-aligned so that vectorized reductions peel the same prefix on every
  // allocation; with malloc's 16-byte alignment repeated runs differed in
  // the last bits.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

bool operator==(const Tensor& a, const Tensor& b);

// Learnable tensor with an accumulated gradient of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Multiplier applied to the optimizer learning rate for this parameter.
  double lr_scale = 1.0;
  bool weight_decay = true;

  Parameter(std::string n, Tensor v);
  void zero_grad() { grad.fill(0.0); }
};

// Ordered owner of named parameters. References handed out stay valid for
// the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  // Copies values (not gradients) from another set with identical layout.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace gelgt
