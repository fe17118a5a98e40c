#include "mvi/matrix.hpp"

#include <cmath>
#include <sstream>

#include "mvi/error.hpp"

namespace mvi {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("Matrix: value count " + std::to_string(values_.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw ShapeError("row_block out of range");
  return Matrix(count, cols_,
                std::vector<double>(values_.begin() + first * cols_,
                                    values_.begin() + (first + count) * cols_));
}

void Matrix::set_row_block(std::size_t first, const Matrix& block) {
  if (block.cols_ != cols_ || first + block.rows_ > rows_) {
    throw ShapeError("set_row_block: " + shape_string(block) + " into " + shape_string(*this));
  }
  std::copy(block.values_.begin(), block.values_.end(), values_.begin() + first * cols_);
}

Matrix Matrix::col_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ShapeError("col_block out of range");
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, first + c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

double dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Matrix& a) {
  for (double v : a.values())
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const Matrix& a, const char* what) {
  if (!all_finite(a)) throw NumericError(std::string(what) + ": non-finite entry");
}

Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) s(0, c) += a(r, c);
  return s;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

Matrix vconcat(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) return {};
  std::size_t rows = 0;
  const std::size_t cols = blocks.front().cols();
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw ShapeError("vconcat: column mismatch");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const auto& b : blocks) {
    out.set_row_block(at, b);
    at += b.rows();
  }
  return out;
}

}  // namespace mvi
