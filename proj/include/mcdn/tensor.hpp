#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcdn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised when a caller breaks an operation's preconditions (dims, ranges, labels).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ')';
  return os.str();
}

inline Index shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major N-d array. Images are laid out (batch, channel, height, width),
/// feature batches (batch, feature).
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape dims) : dims_(std::move(dims)) {
    check_dims();
    values_ = Storage::Zero(shape_size(dims_));
  }

  Tensor(Shape dims, Storage values) : dims_(std::move(dims)), values_(std::move(values)) {
    check_dims();
    if (values_.size() != shape_size(dims_))
      throw ContractError("tensor: data length " + std::to_string(values_.size()) +
                          " does not match dims " + shape_string(dims_));
  }

  static Tensor zeros(Shape dims) { return Tensor(std::move(dims)); }

  static Tensor constant(Shape dims, Scalar value) {
    Tensor t(std::move(dims));
    t.values_.setConstant(value);
    return t;
  }

  const Shape& dims() const { return dims_; }
  Index rank() const { return static_cast<Index>(dims_.size()); }
  Index dim(Index axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  Scalar& operator()(Index n, Index c, Index h, Index w) {
    return values_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return values_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  Scalar& operator()(Index r, Index c) { return values_[r * dims_[1] + c]; }
  Scalar operator()(Index r, Index c) const { return values_[r * dims_[1] + c]; }

  /// Row-major matrix view over the flat storage; rows * cols must equal size().
  MatrixMap matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return MatrixMap(values_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(values_.data(), rows, cols);
  }

  /// (dim0, rest) view, the usual batch-major flattening.
  MatrixMap as_matrix() { return matrix(dims_.empty() ? 0 : dims_[0], dims_.empty() ? 0 : size() / dims_[0]); }
  ConstMatrixMap as_matrix() const {
    return matrix(dims_.empty() ? 0 : dims_[0], dims_.empty() ? 0 : size() / dims_[0]);
  }

  Tensor reshaped(Shape dims) const { return Tensor(std::move(dims), values_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(dims_, values_.template cast<Other>());
  }

  bool all_finite() const { return values_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.values_ == b.values_;
  }

 private:
  void check_dims() const {
    for (std::size_t i = 0; i < dims_.size(); ++i)
      if (dims_[i] <= 0)
        throw ContractError("tensor: axis " + std::to_string(i) + " has non-positive extent in " +
                            shape_string(dims_));
  }
  void check_view(Index rows, Index cols) const {
    if (rows * cols != size())
      throw ContractError("tensor: cannot view " + shape_string(dims_) + " as " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }

  Shape dims_;
  Storage values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Parameter identifier -> gradient of identical dims.
template <typename Scalar>
using GradientStore = std::map<std::string, Tensor<Scalar>>;

/// Named mutable references to the trainable tensors of a model.
template <typename Scalar>
using ParameterRefs = std::vector<std::pair<std::string, Tensor<Scalar>*>>;

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

template <typename Scalar>
void require_rank(const Tensor<Scalar>& t, Index rank, const std::string& what) {
  if (t.rank() != rank)
    throw ContractError(what + ": expected rank " + std::to_string(rank) + ", got " +
                        shape_string(t.dims()));
}

template <typename Scalar>
void require_finite(const Tensor<Scalar>& t, const std::string& what) {
  if (!t.all_finite()) throw std::runtime_error(what + ": produced non-finite values");
}

}  // namespace mcdn
