#pragma once

#include <Eigen/Dense>

#include "pshape/tensor.hpp"

namespace pshape {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<MatrixRM> mat(Tensor& t) {
  return {t.data.data(), t.rows(), t.cols()};
}

inline Eigen::Map<const MatrixRM> mat(const Tensor& t) {
  return {t.data.data(), t.rows(), t.cols()};
}

// Reinterpret a tensor of matching size as an r-by-c matrix.
inline Eigen::Map<MatrixRM> mat_as(Tensor& t, int64_t r, int64_t c) {
  check(t.size() == r * c, "cannot view ", shape_str(t.shape), " as ", r, "x", c);
  return {t.data.data(), r, c};
}

inline Eigen::Map<const MatrixRM> mat_as(const Tensor& t, int64_t r, int64_t c) {
  check(t.size() == r * c, "cannot view ", shape_str(t.shape), " as ", r, "x", c);
  return {t.data.data(), r, c};
}

inline Eigen::Map<Eigen::VectorXd> vec(Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}

inline Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace pshape
