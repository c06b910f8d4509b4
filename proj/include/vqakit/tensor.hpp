#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vqakit/error.hpp"

namespace vqakit {

// Row-major dense array of doubles. Matrices are rank-2 tensors; linear
// algebra helpers below only accept rank 2 and never broadcast.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
      if (d == 0) throw Error(ErrorCode::kShapeMismatch, "zero-sized dim");
    }
    data_.assign(element_count(shape_), fill);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values) {
    Tensor t = matrix(rows, cols);
    if (values.size() != t.size()) {
      throw Error(ErrorCode::kShapeMismatch, "initializer length mismatch");
    }
    std::copy(values.begin(), values.end(), t.data_.begin());
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t = matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }
  std::size_t last_dim() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (element_count(shape) != size()) {
      throw Error(ErrorCode::kShapeMismatch, "reshape changes element count");
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(*this, o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static void require_same_shape(const Tensor& a, const Tensor& b,
                                 const char* op) {
    if (a.shape_ != b.shape_) {
      throw Error(ErrorCode::kShapeMismatch,
                  std::string(op) + ": " + a.shape_string() + " vs " +
                      b.shape_string());
    }
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return shape.empty() ? 0
                         : std::accumulate(shape.begin(), shape.end(),
                                           std::size_t{1}, std::multiplies<>());
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

namespace detail {

inline void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " must be a matrix, got " +
                    t.shape_string());
  }
}

}  // namespace detail

/// a · b, a: n×k, b: k×m.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul lhs");
  detail::require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul " + a.shape_string() + " · " + b.shape_string());
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double v = a(i, p);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += v * b(p, j);
    }
  }
  return out;
}

/// a · bᵀ, a: n×k, b: m×k. Applies the linear map b to every row of a.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul_nt lhs");
  detail::require_matrix(b, "matmul_nt rhs");
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul_nt " + a.shape_string() + " · " + b.shape_string() +
                    "ᵀ");
  }
  Tensor out = Tensor::matrix(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(j, p);
      out(i, j) = acc;
    }
  }
  return out;
}

/// aᵀ · b, a: k×n, b: k×m.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul_tn lhs");
  detail::require_matrix(b, "matmul_tn rhs");
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul_tn " + a.shape_string() + "ᵀ · " + b.shape_string());
  }
  Tensor out = Tensor::matrix(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = a(p, i);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += v * b(p, j);
    }
  }
  return out;
}

inline Tensor scaled(Tensor t, double s) {
  for (double& v : t.data()) v *= s;
  return t;
}

// Platform-independent uniform draws. std::mt19937_64's output sequence is
// fixed by the standard, but the standard distributions are not, so values
// are built directly from the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::uint64_t next() { return engine_(); }

  void fill_uniform(Tensor& t, double bound) {
    for (double& v : t.data()) v = uniform(-bound, bound);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vqakit
