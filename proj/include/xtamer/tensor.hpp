#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xtamer/errors.hpp"

namespace xtamer {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major array with an explicit shape. Storage is an Eigen column
/// vector so whole-tensor arithmetic stays expression-friendly.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                       std::to_string(data_.size()) + " values");
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Vector>(values.begin(), Index(values.size()))) {}

  static Tensor constant(Shape shape, Scalar value) {
    Vector v = Vector::Constant(shape_size(shape), value);
    return Tensor(std::move(shape), std::move(v));
  }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return Index(shape_.size()); }
  Index dim(Index i) const { return shape_.at(std::size_t(i)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Element access for rank-3 tensors laid out [c][h][w].
  Scalar& operator()(Index c, Index h, Index w) { return data_[(c * shape_[1] + h) * shape_[2] + w]; }
  Scalar operator()(Index c, Index h, Index w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  MatrixMap matrix(Index rows, Index cols) {
    check_matrix(rows, cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_matrix(rows, cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_.size() == b.data_.size() &&
           (a.data_.array() == b.data_.array()).all();
  }

 private:
  void check_matrix(Index rows, Index cols) const {
    if (rows * cols != data_.size()) {
      throw ShapeError("cannot view " + shape_string(shape_) + " as " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  }

  Shape shape_;
  Vector data_;
};

using TensorD = Tensor<double>;

}  // namespace xtamer
