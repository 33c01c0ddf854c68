#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace seqembed {

// Dense row-major matrix of 64-bit floats. Rows are the unit of work for
// embeddings: one row per sentence.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  // First `cols` columns of every row.
  Matrix leading_columns(std::size_t cols) const;

  // Rows in the given order.
  Matrix select_rows(std::span<const std::size_t> order) const;

  // this += scale * other, where other may have fewer columns (zero padded).
  void add_scaled_padded(const Matrix& other, double scale);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

// Cosine of the angle between u and v, clamped to [-1, 1].
// Throws kDimensionMismatch, kZeroNorm, or kNonFinite.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// (A.rows x B.rows) matrix whose (i, j) entry is cosine_similarity(A_i, B_j).
Matrix pairwise_cosine(const Matrix& a, const Matrix& b);

// Sample Pearson correlation computed from mean-centered copies.
double pearson(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation of the average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

// max(x) + log(sum(exp(x - max(x)))), evaluated without overflow.
double log_sum_exp(std::span<const double> xs);

}  // namespace seqembed
