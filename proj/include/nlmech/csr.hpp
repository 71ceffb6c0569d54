#pragma once

#include "nlmech/parallel.hpp"
#include "nlmech/types.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlmech {

/// Square or rectangular linear operator interface used by the Krylov and
/// preconditioner stack.
class LinearOperator {
public:
  virtual ~LinearOperator() = default;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual void apply(const Vector& x, Vector& y) const = 0;

  Vector operator*(const Vector& x) const {
    Vector y(rows());
    apply(x, y);
    return y;
  }
};

/// Action z ~= M^{-1} r. Applications must be linear and deterministic for a
/// fixed setup; the quasi-Newton preonly mode relies on that contract.
class Preconditioner {
public:
  virtual ~Preconditioner() = default;
  virtual int rows() const = 0;
  virtual void apply(const Vector& r, Vector& z) const = 0;

  Vector operator()(const Vector& r) const {
    Vector z(rows());
    apply(r, z);
    return z;
  }
};

class IdentityPreconditioner final : public Preconditioner {
public:
  explicit IdentityPreconditioner(int n) : n_(n) {}
  int rows() const override { return n_; }
  void apply(const Vector& r, Vector& z) const override { z = r; }

private:
  int n_;
};

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix with sorted, unique column indices per row.
/// The row-parallel product assigns whole rows to workers, so results are
/// bitwise independent of the thread count.
class CsrMatrix final : public LinearOperator {
public:
  CsrMatrix() = default;

  static CsrMatrix fromTriplets(int rows, int cols,
                                std::vector<Triplet> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(),
                     [](const Triplet& a, const Triplet& b) {
                       return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.rowOffsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (std::size_t i = 0; i < triplets.size();) {
      std::size_t j = i;
      double sum = 0.0;
      while (j < triplets.size() && triplets[j].row == triplets[i].row &&
             triplets[j].col == triplets[i].col)
        sum += triplets[j++].value;
      m.colIndices_.push_back(triplets[i].col);
      m.values_.push_back(sum);
      m.rowOffsets_[static_cast<std::size_t>(triplets[i].row) + 1]++;
      i = j;
    }
    for (int r = 0; r < rows; ++r)
      m.rowOffsets_[static_cast<std::size_t>(r) + 1] +=
          m.rowOffsets_[static_cast<std::size_t>(r)];
    return m;
  }

  /// Zero-valued matrix with a fixed sparsity pattern; rows get sorted,
  /// de-duplicated copies of the supplied column lists.
  static CsrMatrix fromPattern(int rows, int cols,
                               std::vector<std::vector<int>> pattern) {
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.rowOffsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (int r = 0; r < rows; ++r) {
      auto& row = pattern[static_cast<std::size_t>(r)];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      for (int c : row) m.colIndices_.push_back(c);
      m.rowOffsets_[static_cast<std::size_t>(r) + 1] =
          static_cast<int>(m.colIndices_.size());
    }
    m.values_.assign(m.colIndices_.size(), 0.0);
    return m;
  }

  static CsrMatrix identity(int n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return fromTriplets(n, n, std::move(t));
  }

  int rows() const override { return rows_; }
  int cols() const override { return cols_; }
  std::size_t nonZeros() const { return values_.size(); }
  int blockSize() const { return blockSize_; }
  void setBlockSize(int b) { blockSize_ = b; }

  const std::vector<int>& rowOffsets() const { return rowOffsets_; }
  const std::vector<int>& colIndices() const { return colIndices_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  void setZero() { std::fill(values_.begin(), values_.end(), 0.0); }

  /// Adds into an existing pattern entry; the entry must exist.
  void addAt(int row, int col, double v) {
    const int b = rowOffsets_[static_cast<std::size_t>(row)];
    const int e = rowOffsets_[static_cast<std::size_t>(row) + 1];
    const auto first = colIndices_.begin() + b;
    const auto last = colIndices_.begin() + e;
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col)
      throw std::runtime_error("entry outside sparsity pattern");
    values_[static_cast<std::size_t>(it - colIndices_.begin())] += v;
  }

  double at(int row, int col) const {
    const int b = rowOffsets_[static_cast<std::size_t>(row)];
    const int e = rowOffsets_[static_cast<std::size_t>(row) + 1];
    for (int k = b; k < e; ++k)
      if (colIndices_[static_cast<std::size_t>(k)] == col)
        return values_[static_cast<std::size_t>(k)];
    return 0.0;
  }

  void apply(const Vector& x, Vector& y) const override {
    if (x.size() != cols_) throw std::invalid_argument("spmv size mismatch");
    y.resize(rows_);
    parallel_for(static_cast<std::size_t>(rows_),
                 [&](std::size_t begin, std::size_t end) {
                   for (std::size_t r = begin; r < end; ++r) {
                     double sum = 0.0;
                     for (int k = rowOffsets_[r]; k < rowOffsets_[r + 1]; ++k)
                       sum += values_[static_cast<std::size_t>(k)] *
                              x[colIndices_[static_cast<std::size_t>(k)]];
                     y[static_cast<Eigen::Index>(r)] = sum;
                   }
                 });
  }

  CsrMatrix transpose() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (int r = 0; r < rows_; ++r)
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k)
        t.push_back({colIndices_[static_cast<std::size_t>(k)], r,
                     values_[static_cast<std::size_t>(k)]});
    return fromTriplets(cols_, rows_, std::move(t));
  }

  Vector diagonal() const {
    Vector d = Vector::Zero(rows_);
    for (int r = 0; r < std::min(rows_, cols_); ++r) d[r] = at(r, r);
    return d;
  }

  /// this * scale(diag) * other, used by the SIMPLE Schur approximation and
  /// the Galerkin coarse products. Pass an empty diag for a plain product.
  /// Row-merge (Gustavson) with a dense accumulator, O(flops).
  CsrMatrix multiply(const CsrMatrix& other,
                     const Vector& diagScale = Vector()) const {
    if (cols_ != other.rows_) throw std::invalid_argument("matmul mismatch");
    CsrMatrix out;
    out.rows_ = rows_;
    out.cols_ = other.cols_;
    out.rowOffsets_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    std::vector<double> acc(static_cast<std::size_t>(other.cols_), 0.0);
    std::vector<int> marker(static_cast<std::size_t>(other.cols_), -1);
    std::vector<int> cols;
    for (int r = 0; r < rows_; ++r) {
      cols.clear();
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k) {
        const int mid = colIndices_[static_cast<std::size_t>(k)];
        double v = values_[static_cast<std::size_t>(k)];
        if (diagScale.size() > 0) v *= diagScale[mid];
        for (int k2 = other.rowOffsets_[static_cast<std::size_t>(mid)];
             k2 < other.rowOffsets_[static_cast<std::size_t>(mid) + 1]; ++k2) {
          const int c = other.colIndices_[static_cast<std::size_t>(k2)];
          if (marker[static_cast<std::size_t>(c)] != r) {
            marker[static_cast<std::size_t>(c)] = r;
            acc[static_cast<std::size_t>(c)] = 0.0;
            cols.push_back(c);
          }
          acc[static_cast<std::size_t>(c)] +=
              v * other.values_[static_cast<std::size_t>(k2)];
        }
      }
      std::sort(cols.begin(), cols.end());
      for (int c : cols) {
        out.colIndices_.push_back(c);
        out.values_.push_back(acc[static_cast<std::size_t>(c)]);
      }
      out.rowOffsets_[static_cast<std::size_t>(r) + 1] =
          static_cast<int>(out.colIndices_.size());
    }
    return out;
  }

  Eigen::MatrixXd toDense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k)
        d(r, colIndices_[static_cast<std::size_t>(k)]) =
            values_[static_cast<std::size_t>(k)];
    return d;
  }

  /// Scales row r and column r of the matrix by zero and sets the diagonal
  /// to one, for every flagged index. Used by the Dirichlet elimination.
  void eliminateSymmetric(const std::vector<char>& constrained) {
    for (int r = 0; r < rows_; ++r) {
      const bool rowConstrained = constrained[static_cast<std::size_t>(r)];
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k) {
        const int c = colIndices_[static_cast<std::size_t>(k)];
        if (rowConstrained || constrained[static_cast<std::size_t>(c)])
          values_[static_cast<std::size_t>(k)] = (r == c) ? 1.0 : 0.0;
      }
    }
  }

  /// Zeroes rows (or columns) of a rectangular coupling block.
  void zeroRows(const std::vector<char>& constrained) {
    for (int r = 0; r < rows_; ++r) {
      if (!constrained[static_cast<std::size_t>(r)]) continue;
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k)
        values_[static_cast<std::size_t>(k)] = 0.0;
    }
  }
  void zeroCols(const std::vector<char>& constrained) {
    for (int r = 0; r < rows_; ++r)
      for (int k = rowOffsets_[static_cast<std::size_t>(r)];
           k < rowOffsets_[static_cast<std::size_t>(r) + 1]; ++k)
        if (constrained[static_cast<std::size_t>(
                colIndices_[static_cast<std::size_t>(k)])])
          values_[static_cast<std::size_t>(k)] = 0.0;
  }

private:
  int rows_ = 0;
  int cols_ = 0;
  int blockSize_ = 1;
  std::vector<int> rowOffsets_{0};
  std::vector<int> colIndices_;
  std::vector<double> values_;
};

inline Vector spmv(const CsrMatrix& a, const Vector& x) { return a * x; }

/// MatrixMarket coordinate dump (1-based indices) for offline debugging.
inline void write_matrix_market(const CsrMatrix& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  os.precision(17);
  for (int r = 0; r < a.rows(); ++r)
    for (int k = a.rowOffsets()[static_cast<std::size_t>(r)];
         k < a.rowOffsets()[static_cast<std::size_t>(r) + 1]; ++k)
      os << r + 1 << " " << a.colIndices()[static_cast<std::size_t>(k)] + 1
         << " " << a.values()[static_cast<std::size_t>(k)] << "\n";
}

}  // namespace nlmech
