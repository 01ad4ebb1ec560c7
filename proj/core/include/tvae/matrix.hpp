#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvae {

/// Dense row-major matrix of 64-bit reals. The only dimension that varies at
/// runtime is the batch dimension, so there are no strides or views.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                  shape_string());
    }
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0 || data_.size() != rows * cols) {
      throw std::invalid_argument("Matrix: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " + shape_string());
    }
  }

  static Matrix full(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = value;
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data_.data() + r * cols_, cols_);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols_, cols_);
  }

  void fill(double value) {
    for (double& x : data_) x = value;
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Boolean plane with matrix shape, used for corruption masks
/// (true = corrupted/missing pixel). Stored unpacked for cheap indexing.
class BoolMatrix {
 public:
  BoolMatrix() = default;

  BoolMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::uint8_t& operator[](std::size_t i) { return data_[i]; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

  std::span<std::uint8_t> row(std::size_t r) {
    return std::span<std::uint8_t>(data_.data() + r * cols_, cols_);
  }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return std::span<const std::uint8_t>(data_.data() + r * cols_, cols_);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t b : data_) n += (b != 0);
    return n;
  }

  bool operator==(const BoolMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace tvae
