#include "uniskel/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace uniskel {

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor extent must be positive, got " + uniskel::shape_str(shape));
    }
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (static_cast<std::int64_t>(values.size()) != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + uniskel::shape_str(shape_));
  }
  data_ = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = value;
  return t;
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_str());
  }
  return shape_[static_cast<std::size_t>(axis)];
}

double& Tensor::at(std::initializer_list<int> index) {
  if (static_cast<int>(index.size()) != rank()) {
    throw std::invalid_argument("index rank mismatch for " + shape_str());
  }
  std::int64_t flat = 0;
  auto it = index.begin();
  for (int a = 0; a < rank(); ++a, ++it) {
    if (*it < 0 || *it >= shape_[static_cast<std::size_t>(a)]) {
      throw std::out_of_range("index out of range for " + shape_str());
    }
    flat = flat * shape_[static_cast<std::size_t>(a)] + *it;
  }
  return data_[static_cast<std::size_t>(flat)];
}

double Tensor::at(std::initializer_list<int> index) const {
  return const_cast<Tensor*>(this)->at(index);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::logic_error("item() on tensor of shape " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const { return uniskel::shape_str(shape_); }

}  // namespace uniskel
