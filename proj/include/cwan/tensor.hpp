#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cwan {

/// Thrown when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a value violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a task or run configuration cannot be satisfied.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Dense row-major tensor of doubles, rank 1 or 2.
 *
 * A rank-2 tensor may have zero rows (an empty batch); every other
 * extent is positive. Values are checked finite on construction.
 * Storage is aligned to Eigen's packet boundary so vectorized reductions
 * take the same path on every run.
 */
class Tensor {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() : shape_{1}, values_(1, 0.0) {}

  Tensor(std::vector<std::size_t> shape, const std::vector<double>& values)
      : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    check_shape();
    if (values_.size() != numel_of(shape_)) {
      throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                           std::to_string(numel_of(shape_)) + " values, got " +
                           std::to_string(values_.size()));
    }
    check_finite();
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return filled(std::move(shape), 0.0); }

  static Tensor filled(std::vector<std::size_t> shape, double v) {
    if (!std::isfinite(v)) throw ValidationError("non-finite fill value");
    Tensor t;
    t.shape_ = std::move(shape);
    t.check_shape();
    t.values_.assign(numel_of(t.shape_), v);
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> v;
    std::size_t cols = 0;
    for (const auto& r : rows) {
      if (cols == 0) cols = r.size();
      if (r.size() != cols) throw DimensionError("ragged matrix literal");
      v.insert(v.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(v));
  }

  static Tensor from_matrix(const RowMatrix& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                  std::move(v));
  }

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t numel() const { return values_.size(); }

  /// Rows of a matrix; a vector counts as one row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : shape_[0]; }

  bool is_scalar() const { return numel() == 1; }
  double item() const {
    if (!is_scalar()) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    return values_[0];
  }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// View as a rows() x cols() matrix.
  ConstMatrixMap mat() const {
    return ConstMatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
  }
  MatrixMap mat() {
    return MatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }

  /// Row i of a matrix as a rank-1 tensor.
  Tensor row(std::size_t i) const {
    const std::size_t c = cols();
    return Tensor({c}, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(i * c),
                                           values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * c)));
  }

  /// Rows selected by index, in the given order.
  Tensor select_rows(std::span<const std::size_t> idx) const {
    const std::size_t c = cols();
    std::vector<double> v;
    v.reserve(idx.size() * c);
    for (std::size_t i : idx) {
      if (i >= rows()) throw DimensionError("row index out of range");
      v.insert(v.end(), values_.begin() + static_cast<std::ptrdiff_t>(i * c),
               values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    }
    return Tensor({idx.size(), c}, std::move(v));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && std::ranges::equal(a.values_, b.values_);
  }

  void check_finite() const {
    // x - x is NaN exactly when x is NaN or infinite.
    double acc = 0.0;
    for (double v : values_) acc += v - v;
    if (acc != 0.0) throw ValidationError("non-finite value in tensor " + shape_string(shape_));
  }

  static std::string shape_string(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
  }
  std::string shape_string() const { return shape_string(shape_); }

 private:
  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  void check_shape() const {
    if (shape_.empty() || shape_.size() > 2) {
      throw DimensionError("tensor rank must be 1 or 2, got " + std::to_string(shape_.size()));
    }
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      const bool empty_batch_ok = shape_.size() == 2 && i == 0;
      if (shape_[i] == 0 && !empty_batch_ok) {
        throw DimensionError("tensor extent must be positive: " + shape_string(shape_));
      }
    }
  }

  std::vector<std::size_t> shape_;
  std::vector<double, Eigen::aligned_allocator<double>> values_;
};

}  // namespace cwan
