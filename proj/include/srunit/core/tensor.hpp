#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "srunit/core/errors.hpp"

namespace srunit {

using Index = Eigen::Index;

/// Dimensions of a dense row-major tensor. Image tensors are rank 4 (N, C, H, W);
/// embedding matrices are rank 2 (rows, cols); scalars are rank 0.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims) : dims_(dims) {}
  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) {}

  Index rank() const { return static_cast<Index>(dims_.size()); }
  Index operator[](Index i) const { return dims_[static_cast<size_t>(i)]; }
  Index& operator[](Index i) { return dims_[static_cast<size_t>(i)]; }
  const std::vector<Index>& dims() const { return dims_; }

  Index numel() const {
    return std::accumulate(dims_.begin(), dims_.end(), Index{1}, std::multiplies<>());
  }

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }
  bool operator!=(const Shape& other) const { return dims_ != other.dims_; }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<Index> dims_;
};

/// Dense tensor with contiguous row-major storage in an Eigen column vector.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(Vector::Constant(shape_.numel(), fill)) {}
  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.str());
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }
  static Tensor constant(const Shape& shape, Scalar v) { return Tensor(shape, v); }
  static Tensor scalar(Scalar v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  Index numel() const { return data_.size(); }
  Index rank() const { return shape_.rank(); }
  bool empty() const { return data_.size() == 0; }

  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_.str());
    return data_[0];
  }

  // NCHW accessors.
  Index n() const { return dim(0); }
  Index c() const { return dim(1); }
  Index h() const { return dim(2); }
  Index w() const { return dim(3); }

  Scalar& at(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar at(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar& at(Index r, Index c) { return data_[r * shape_[1] + c]; }
  Scalar at(Index r, Index c) const { return data_[r * shape_[1] + c]; }

  /// Row-major matrix view of a rank-2 tensor.
  MatrixMap matrix() {
    require_rank(2);
    return MatrixMap(data_.data(), shape_[0], shape_[1]);
  }
  ConstMatrixMap matrix() const {
    require_rank(2);
    return ConstMatrixMap(data_.data(), shape_[0], shape_[1]);
  }

  /// C x (H*W) view of a single image of a rank-4 tensor.
  MatrixMap image(Index n) {
    require_rank(4);
    const Index plane = shape_[2] * shape_[3];
    return MatrixMap(data_.data() + n * shape_[1] * plane, shape_[1], plane);
  }
  ConstMatrixMap image(Index n) const {
    require_rank(4);
    const Index plane = shape_[2] * shape_[3];
    return ConstMatrixMap(data_.data() + n * shape_[1] * plane, shape_[1], plane);
  }

  Tensor reshaped(const Shape& shape) const {
    if (shape.numel() != numel())
      throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(shape, data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  void require_rank(Index r) const {
    if (shape_.rank() != r)
      throw DimensionError("expected rank-" + std::to_string(r) + " tensor, got " + shape_.str());
  }

 private:
  Index dim(Index i) const {
    require_rank(4);
    return shape_[i];
  }

  Shape shape_;
  Vector data_;
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": shape " + a.str() + " vs " + b.str());
}

}  // namespace srunit
