#include "repsu/tensor.hpp"

#include <sstream>

namespace rpsu {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Index checked_shape_product(const Shape& shape) {
  if (shape.empty()) throw ShapeError("invalid shape: empty extent list");
  Index n = 1;
  for (Index e : shape) {
    if (e < 1) throw ShapeError("invalid shape: non-positive extent in " + shape_to_string(shape));
    n *= e;
  }
  return n;
}

namespace {

Index flat_index(const Shape& shape, std::initializer_list<Index> idx) {
  if (idx.size() != shape.size())
    throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match tensor rank " +
                     std::to_string(shape.size()));
  Index flat = 0;
  std::size_t d = 0;
  for (Index i : idx) flat = flat * shape[d++] + i;
  return flat;
}

}  // namespace

double& Tensor::at(std::initializer_list<Index> idx) { return data_[flat_index(shape_, idx)]; }

double Tensor::at(std::initializer_list<Index> idx) const {
  return data_[flat_index(shape_, idx)];
}

MatrixMap Tensor::matrix() {
  if (rank() != 2) throw ShapeError("matrix view requires rank 2, got " + shape_to_string(shape_));
  return MatrixMap(data(), dim(0), dim(1));
}

ConstMatrixMap Tensor::matrix() const {
  if (rank() != 2) throw ShapeError("matrix view requires rank 2, got " + shape_to_string(shape_));
  return ConstMatrixMap(data(), dim(0), dim(1));
}

Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }

Tensor full(const Shape& shape, double value) { return Tensor(shape, value); }

Tensor from_values(const Shape& shape, std::initializer_list<double> values) {
  Tensor t(shape);
  if (t.size() != static_cast<Index>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) + " does not fill shape " +
                     shape_to_string(shape));
  Index i = 0;
  for (double v : values) t[i++] = v;
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul requires rank-2 operands, got " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  Tensor out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  return out;
}

Tensor reshape(const Tensor& t, const Shape& shape) {
  if (checked_shape_product(shape) != t.size())
    throw ShapeError("reshape to " + shape_to_string(shape) + " does not preserve element count " +
                     std::to_string(t.size()));
  Tensor out(shape);
  out.array() = t.array();
  return out;
}

bool all_finite(const Tensor& t) noexcept { return t.array().isFinite().all(); }

}  // namespace rpsu
