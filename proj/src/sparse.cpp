#include "scatterct/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sct {

SparseOperator SparseOperator::from_triplets(int rows, int cols, std::vector<Triplet> entries) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("SparseOperator: negative shape");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseOperator op;
  op.rows_ = rows;
  op.cols_ = cols;
  op.row_ptr_.assign(1, 0);
  op.row_ptr_.reserve(rows + 1);
  op.col_.reserve(entries.size());
  op.val_.reserve(entries.size());
  int r = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    const Triplet& t = entries[i];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw std::invalid_argument("SparseOperator: entry out of bounds");
    if (!std::isfinite(t.value)) throw std::invalid_argument("SparseOperator: non-finite value");
    if (i > 0 && entries[i - 1].row == t.row && entries[i - 1].col == t.col)
      throw std::invalid_argument("SparseOperator: duplicate (row, col) entry");
    while (r < t.row) {
      op.row_ptr_.push_back(static_cast<int64_t>(op.col_.size()));
      ++r;
    }
    op.col_.push_back(t.col);
    op.val_.push_back(t.value);
  }
  while (r < rows) {
    op.row_ptr_.push_back(static_cast<int64_t>(op.col_.size()));
    ++r;
  }
  return op;
}

SparseOperator::Builder::Builder(int rows, int cols) : rows_(rows), cols_(cols) {
  row_ptr_.assign(1, 0);
}

void SparseOperator::Builder::add(int row, int col, double value) {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
    throw std::invalid_argument("SparseOperator::Builder: entry out of bounds");
  if (row < last_row_ || (row == last_row_ && col <= last_col_))
    throw std::invalid_argument("SparseOperator::Builder: entries must be row-major sorted");
  if (!std::isfinite(value)) throw std::invalid_argument("SparseOperator::Builder: non-finite");
  while (last_row_ < row) {
    row_ptr_.push_back(static_cast<int64_t>(col_.size()));
    ++last_row_;
    last_col_ = -1;
  }
  // row_ptr_ gets its closing entries in take()
  col_.push_back(col);
  val_.push_back(value);
  last_col_ = col;
  row_ptr_.back() = static_cast<int64_t>(col_.size());
}

SparseOperator SparseOperator::Builder::take() {
  while (static_cast<int>(row_ptr_.size()) < rows_ + 1)
    row_ptr_.push_back(static_cast<int64_t>(col_.size()));
  SparseOperator op;
  op.rows_ = rows_;
  op.cols_ = cols_;
  op.row_ptr_ = std::move(row_ptr_);
  op.col_ = std::move(col_);
  op.val_ = std::move(val_);
  return op;
}

void SparseOperator::matvec(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_)
    throw std::invalid_argument("SparseOperator::matvec: size mismatch");
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
    y[r] = s;
  }
}

void SparseOperator::rmatvec(std::span<const double> y, std::span<double> x) const {
  if (static_cast<int>(y.size()) != rows_ || static_cast<int>(x.size()) != cols_)
    throw std::invalid_argument("SparseOperator::rmatvec: size mismatch");
  std::fill(x.begin(), x.end(), 0.0);
  rmatvec_add(y, x, 1.0);
}

void SparseOperator::matvec_add(std::span<const double> x, std::span<double> y, double s) const {
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += val_[k] * x[col_[k]];
    y[r] += s * acc;
  }
}

void SparseOperator::rmatvec_add(std::span<const double> y, std::span<double> x, double s) const {
  for (int r = 0; r < rows_; ++r) {
    const double w = s * y[r];
    if (w == 0.0) continue;
    for (int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) x[col_[k]] += w * val_[k];
  }
}

double SparseOperator::row_dot(int r, std::span<const double> x) const {
  double s = 0.0;
  for (int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
  return s;
}

SparseOperator::RowView SparseOperator::row(int r) const {
  const int64_t b = row_ptr_[r], e = row_ptr_[r + 1];
  return {std::span<const int>(col_.data() + b, e - b),
          std::span<const double>(val_.data() + b, e - b)};
}

SparseOperator SparseOperator::transposed() const {
  std::vector<Triplet> tr;
  tr.reserve(val_.size());
  for (int r = 0; r < rows_; ++r)
    for (int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      tr.push_back({col_[k], r, val_[k]});
  return from_triplets(cols_, rows_, std::move(tr));
}

void StackedOp::add_block(const LinOp* op, double scale) {
  if (!blocks_.empty() && op->cols() != cols_)
    throw std::invalid_argument("StackedOp: column mismatch");
  if (blocks_.empty()) cols_ = op->cols();
  offsets_.push_back(total_rows_);
  blocks_.push_back({op, scale});
  total_rows_ += op->rows();
}

void StackedOp::matvec(std::span<const double> x, std::span<double> y) const {
  for (size_t b = 0; b < blocks_.size(); ++b) {
    auto slice = y.subspan(offsets_[b], blocks_[b].op->rows());
    blocks_[b].op->matvec(x, slice);
    if (blocks_[b].scale != 1.0)
      for (double& v : slice) v *= blocks_[b].scale;
  }
}

void StackedOp::rmatvec(std::span<const double> y, std::span<double> x) const {
  std::fill(x.begin(), x.end(), 0.0);
  std::vector<double> tmp(cols_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    auto slice = y.subspan(offsets_[b], blocks_[b].op->rows());
    blocks_[b].op->rmatvec(slice, std::span<double>(tmp));
    const double s = blocks_[b].scale;
    for (int c = 0; c < cols_; ++c) x[c] += s * tmp[c];
  }
}

SparseOperator identity_minus(const SparseOperator& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("identity_minus: matrix not square");
  std::vector<Triplet> tr;
  tr.reserve(w.nnz() + w.rows());
  for (int r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    bool saw_diag = false;
    for (size_t k = 0; k < row.cols.size(); ++k) {
      const int c = row.cols[k];
      double v = -row.vals[k];
      if (c == r) {
        v += 1.0;
        saw_diag = true;
      }
      tr.push_back({r, c, v});
    }
    if (!saw_diag) tr.push_back({r, r, 1.0});
  }
  return SparseOperator::from_triplets(w.rows(), w.cols(), std::move(tr));
}

double exact_sum(std::span<const double> values) {
  // Shewchuk growing-expansion sum: the expansion components are exact, and
  // the final fold over increasing magnitudes yields the correctly rounded
  // total, so regrouping the inputs cannot change the result.
  std::vector<double> expansion;
  for (double v : values) {
    size_t out = 0;
    for (size_t i = 0; i < expansion.size(); ++i) {
      double a = expansion[i];
      const double sum = v + a;
      const double bb = sum - v;
      const double err = (v - (sum - bb)) + (a - bb);
      if (err != 0.0) expansion[out++] = err;
      v = sum;
    }
    expansion.resize(out);
    if (v != 0.0) expansion.push_back(v);
  }
  double total = 0.0;
  for (double c : expansion) total += c;
  return total;
}

}  // namespace sct
