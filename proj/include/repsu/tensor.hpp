#pragma once

#include <Eigen/Core>

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "repsu/errors.hpp"

namespace rpsu {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<MatrixRM>;
using ConstMatrixMap = Eigen::Map<const MatrixRM>;

std::string shape_to_string(const Shape& shape);

// Throws ShapeError on an empty list or a non-positive extent.
Index checked_shape_product(const Shape& shape);

// Dense n-dimensional array of 64-bit floats, row-major flat storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(Eigen::ArrayXd::Constant(checked_shape_product(shape_), fill)) {}

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const noexcept { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const noexcept { return data_.size(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double operator[](Index i) const noexcept { return data_[i]; }
  double& operator[](Index i) noexcept { return data_[i]; }

  // Row-major multi-index access, rank checked.
  double& at(std::initializer_list<Index> idx);
  double at(std::initializer_list<Index> idx) const;

  // Flat Eigen views for expression-style arithmetic.
  ArrayMap array() noexcept { return {data_.data(), data_.size()}; }
  ConstArrayMap array() const noexcept { return {data_.data(), data_.size()}; }

  // Rank-2 view.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;

 private:
  Shape shape_;
  Eigen::ArrayXd data_;
};

Tensor zeros(const Shape& shape);
Tensor full(const Shape& shape, double value);
Tensor from_values(const Shape& shape, std::initializer_list<double> values);

template <class F>
Tensor elementwise_map(const Tensor& t, F&& f) {
  Tensor out = t;
  double* p = out.data();
  for (Index i = 0; i < out.size(); ++i) p[i] = f(p[i]);
  return out;
}

// Standard matrix product of two rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

// Same flat data, new shape; element count must match.
Tensor reshape(const Tensor& t, const Shape& shape);

bool all_finite(const Tensor& t) noexcept;

inline bool same_shape(const Tensor& a, const Tensor& b) noexcept {
  return a.shape() == b.shape();
}

}  // namespace rpsu
