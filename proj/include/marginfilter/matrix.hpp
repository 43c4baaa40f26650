#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace marginfilter {

// Dense row-major matrix of doubles. Rows are samples, columns are channels
// wherever the matrix carries signal data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: value count does not match shape");
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }
  [[nodiscard]] std::vector<double>& values() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Rows of `m` selected by `indices`, in order.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);

// Sum of squared entries.
double squared_norm(const Matrix& m) noexcept;

// Frobenius inner product; shapes must agree.
double dot(const Matrix& a, const Matrix& b);

// a += scale * b
void axpy(double scale, const Matrix& b, Matrix& a);

}  // namespace marginfilter
