#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pshape/error.hpp"

namespace pshape {

int64_t shape_size(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

// Dense row-major tensor of 64-bit floats. Only a handful of shapes occur in
// practice: vectors, matrices, (H, W, C) images and 4-d conv kernels.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor from(std::vector<int64_t> shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }

  int64_t rows() const;
  int64_t cols() const;

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  double scalar_value() const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  Tensor reshaped(std::vector<int64_t> new_shape) const;
  Tensor flattened() const { return reshaped({size()}); }
};

}  // namespace pshape
