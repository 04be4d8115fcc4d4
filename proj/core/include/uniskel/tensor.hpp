#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace uniskel {

/// Dense row-major tensor of 64-bit floats. Shapes are fixed after
/// construction and all math runs in double precision; there is no
/// device or dtype abstraction on purpose.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(std::initializer_list<int> index);
  double at(std::initializer_list<int> index) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// Value of a single-element tensor.
  double item() const;

  std::string shape_str() const;

  /// Consulted by Tape::leaf when deciding whether to track gradients.
  bool requires_grad = false;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace uniskel
