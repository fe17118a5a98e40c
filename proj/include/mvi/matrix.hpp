#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mvi {

/// Dense row-major matrix of doubles.
///
/// The universal carrier for features, parameters and graph filters. Batches
/// of graph signals are stored stacked: sample j occupies rows
/// [j*nodes, (j+1)*nodes).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  // Rows [first, first+count) as a new matrix.
  Matrix row_block(std::size_t first, std::size_t count) const;
  void set_row_block(std::size_t first, const Matrix& block);
  // Columns [first, first+count) as a new matrix.
  Matrix col_block(std::size_t first, std::size_t count) const;

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
std::string shape_string(const Matrix& m);

Matrix hadamard(const Matrix& a, const Matrix& b);
// Frobenius inner product.
double dot(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);
// Throws NumericError naming `what` when any entry is NaN/Inf.
void require_finite(const Matrix& a, const char* what);

// Sum of each column, as a 1 x cols matrix.
Matrix column_sums(const Matrix& a);
// Horizontal concatenation [a | b].
Matrix hconcat(const Matrix& a, const Matrix& b);
// Vertical concatenation.
Matrix vconcat(const std::vector<Matrix>& blocks);

}  // namespace mvi
