#include "seqembed/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "seqembed/error.hpp"

namespace seqembed {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::kNonFinite, std::string(what) + " contains a non-finite entry");
    }
  }
}

void require_correlation_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    std::ostringstream msg;
    msg << "correlation inputs differ in length: " << x.size() << " vs " << y.size();
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
  if (x.size() < 2) {
    throw Error(ErrorKind::kUndefinedCorrelation, "correlation needs at least two observations");
  }
  require_finite(x, "correlation input");
  require_finite(y, "correlation input");
}

bool is_constant(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "matrix " << rows_ << "x" << cols_ << " given " << values_.size() << " values";
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) {
      throw Error(ErrorKind::kDimensionMismatch, "ragged rows in Matrix::from_rows");
    }
    values.insert(values.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(values));
}

Matrix Matrix::leading_columns(std::size_t cols) const {
  if (cols > cols_) {
    std::ostringstream msg;
    msg << "cannot take " << cols << " leading columns of a " << cols_ << "-column matrix";
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
  Matrix out(rows_, cols);
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto src = row(r);
    std::copy_n(src.begin(), cols, out.row(r).begin());
  }
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> order) const {
  Matrix out(order.size(), cols_);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = row(order[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void Matrix::add_scaled_padded(const Matrix& other, double scale) {
  if (other.rows_ != rows_ || other.cols_ > cols_) {
    throw Error(ErrorKind::kDimensionMismatch, "add_scaled_padded shape mismatch");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    auto dst = row(r);
    const auto src = other.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += scale * src[c];
  }
}

double dot(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    std::ostringstream msg;
    msg << "cosine of vectors with dims " << u.size() << " and " << v.size();
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
  if (u.empty()) throw Error(ErrorKind::kEmptyInput, "cosine of empty vectors");
  require_finite(u, "cosine operand");
  require_finite(v, "cosine operand");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorKind::kZeroNorm, "cosine of a zero-norm vector");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Matrix pairwise_cosine(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << "pairwise_cosine column mismatch: " << a.cols() << " vs " << b.cols();
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
  auto check_rows = [](const Matrix& m, const char* name) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (l2_norm(m.row(r)) == 0.0) {
        std::ostringstream msg;
        msg << "row " << r << " of " << name << " has zero norm";
        throw Error(ErrorKind::kZeroNorm, msg.str());
      }
    }
  };
  check_rows(a, "A");
  check_rows(b, "B");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = cosine_similarity(a.row(i), b.row(j));
    }
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_correlation_inputs(x, y);
  if (is_constant(x) || is_constant(y)) {
    throw Error(ErrorKind::kUndefinedCorrelation, "correlation of a constant sequence");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorKind::kUndefinedCorrelation, "correlation with zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // Positions i..j-1 hold 1-based ranks i+1..j; their mean is (i+1+j)/2.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_correlation_inputs(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorKind::kEmptyInput, "log_sum_exp of an empty sequence");
  require_finite(xs, "log_sum_exp input");
  const auto top = std::max_element(xs.begin(), xs.end());
  const double m = *top;
  // The max term contributes exactly 1, so sum the rest and use log1p.
  double rest = 0.0;
  for (auto it = xs.begin(); it != xs.end(); ++it) {
    if (it == top) continue;
    rest += std::exp(*it - m);
  }
  return m + std::log1p(rest);
}

}  // namespace seqembed
