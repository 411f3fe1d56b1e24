#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sct {

/// Abstract linear operator: the matvec/rmatvec surface LSQR and the solvers
/// consume.
class LinOp {
 public:
  virtual ~LinOp() = default;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual void matvec(std::span<const double> x, std::span<double> y) const = 0;
  virtual void rmatvec(std::span<const double> y, std::span<double> x) const = 0;

  /// out[j] += scale2 * ||column j||^2; used for column equilibration.
  virtual void add_col_sq_norms(double scale2, std::span<double> out) const;

  std::vector<double> matvec(std::span<const double> x) const {
    std::vector<double> y(rows());
    matvec(x, std::span<double>(y));
    return y;
  }
  std::vector<double> rmatvec(std::span<const double> y) const {
    std::vector<double> x(cols());
    rmatvec(y, std::span<double>(x));
    return x;
  }
};

struct Triplet {
  int row;
  int col;
  double value;
};

/// Row-compressed sparse matrix. Entries are unique (row, col) pairs with
/// finite values; columns are kept sorted within each row.
class SparseOperator final : public LinOp {
 public:
  SparseOperator() = default;

  static SparseOperator from_triplets(int rows, int cols, std::vector<Triplet> entries);

  /// Streaming row-major builder; rows must be appended in order.
  class Builder {
   public:
    Builder(int rows, int cols);
    /// Append one entry to row `row`; rows must be non-decreasing and columns
    /// strictly increasing within a row.
    void add(int row, int col, double value);
    SparseOperator take();

   private:
    int rows_, cols_;
    int last_row_ = -1, last_col_ = -1;
    std::vector<int64_t> row_ptr_;
    std::vector<int> col_;
    std::vector<double> val_;
  };

  int rows() const override { return rows_; }
  int cols() const override { return cols_; }
  int64_t nnz() const { return static_cast<int64_t>(val_.size()); }

  void matvec(std::span<const double> x, std::span<double> y) const override;
  void rmatvec(std::span<const double> y, std::span<double> x) const override;
  void add_col_sq_norms(double scale2, std::span<double> out) const override;
  using LinOp::matvec;
  using LinOp::rmatvec;

  /// y += s * A x
  void matvec_add(std::span<const double> x, std::span<double> y, double s = 1.0) const;
  /// x += s * A^T y
  void rmatvec_add(std::span<const double> y, std::span<double> x, double s = 1.0) const;

  /// Dot product of row r with x.
  double row_dot(int r, std::span<const double> x) const;

  struct RowView {
    std::span<const int> cols;
    std::span<const double> vals;
  };
  RowView row(int r) const;

  /// A^T B ... no composition helpers; solvers stack via StackedOp.
  SparseOperator transposed() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<int64_t> row_ptr_{0};
  std::vector<int> col_;
  std::vector<double> val_;
};

/// Vertical stack of scaled blocks [s_0*B_0; s_1*B_1; ...] exposed as one
/// operator. Blocks are referenced, not copied.
class StackedOp final : public LinOp {
 public:
  void add_block(const LinOp* op, double scale);
  int rows() const override { return total_rows_; }
  int cols() const override { return cols_; }
  void matvec(std::span<const double> x, std::span<double> y) const override;
  void rmatvec(std::span<const double> y, std::span<double> x) const override;
  void add_col_sq_norms(double scale2, std::span<double> out) const override;
  using LinOp::matvec;
  using LinOp::rmatvec;

  int block_count() const { return static_cast<int>(blocks_.size()); }
  int block_offset(int b) const { return offsets_[b]; }

 private:
  struct Block {
    const LinOp* op;
    double scale;
  };
  std::vector<Block> blocks_;
  std::vector<int> offsets_;
  int total_rows_ = 0;
  int cols_ = 0;
};

/// Identity minus a sparse matrix, used for NLM regularization (I - W).
SparseOperator identity_minus(const SparseOperator& w);

/// Exact sum of doubles (Shewchuk expansion), correctly rounded. Used by tests
/// that assert regrouping-invariant totals.
double exact_sum(std::span<const double> values);

}  // namespace sct
