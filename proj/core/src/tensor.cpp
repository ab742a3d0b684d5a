#include "pshape/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pshape {

int64_t shape_size(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check(d > 0, "tensor dimensions must be positive, got ", shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  Tensor t;
  int64_t n = shape_size(shape);
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.data) v = value;
  return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values) {
  int64_t n = shape_size(shape);
  check(n == static_cast<int64_t>(values.size()), "tensor data length ", values.size(),
        " does not match shape ", shape_str(shape));
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  int64_t n = static_cast<int64_t>(values.size());
  return from({n}, std::move(values));
}

int64_t Tensor::rows() const {
  check(rank() == 2, "expected a matrix, got shape ", shape_str(shape));
  return shape[0];
}

int64_t Tensor::cols() const {
  check(rank() == 2, "expected a matrix, got shape ", shape_str(shape));
  return shape[1];
}

double Tensor::scalar_value() const {
  check(size() == 1, "expected a scalar, got shape ", shape_str(shape));
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
  check(shape_size(new_shape) == size(), "cannot reshape ", shape_str(shape), " to ",
        shape_str(new_shape));
  Tensor t;
  t.shape = std::move(new_shape);
  t.data = data;
  return t;
}

}  // namespace pshape
