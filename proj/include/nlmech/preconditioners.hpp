#pragma once

#include "nlmech/csr.hpp"

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>

namespace nlmech {

class JacobiPreconditioner final : public Preconditioner {
public:
  explicit JacobiPreconditioner(const CsrMatrix& a) : invDiag_(a.diagonal()) {
    for (Eigen::Index i = 0; i < invDiag_.size(); ++i) {
      if (invDiag_[i] == 0.0)
        throw std::runtime_error("Jacobi setup: zero diagonal entry");
      invDiag_[i] = 1.0 / invDiag_[i];
    }
  }
  int rows() const override { return static_cast<int>(invDiag_.size()); }
  void apply(const Vector& r, Vector& z) const override {
    z = invDiag_.cwiseProduct(r);
  }
  const Vector& inverseDiagonal() const { return invDiag_; }

private:
  Vector invDiag_;
};

/// Inverts the (blockSize x blockSize) diagonal blocks; blockSize 1 reduces
/// to plain Jacobi.
class BlockJacobiPreconditioner final : public Preconditioner {
public:
  BlockJacobiPreconditioner(const CsrMatrix& a, int blockSize)
      : n_(a.rows()), bs_(blockSize) {
    if (bs_ < 1 || n_ % bs_ != 0)
      throw std::invalid_argument("block size must divide the dimension");
    const int nb = n_ / bs_;
    blocks_.resize(static_cast<std::size_t>(nb));
    Eigen::MatrixXd blk(bs_, bs_);
    for (int b = 0; b < nb; ++b) {
      for (int i = 0; i < bs_; ++i)
        for (int j = 0; j < bs_; ++j)
          blk(i, j) = a.at(b * bs_ + i, b * bs_ + j);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(blk);
      if (!lu.isInvertible())
        throw std::runtime_error("block Jacobi setup: singular diagonal block");
      blocks_[static_cast<std::size_t>(b)] = lu.inverse();
    }
  }
  int rows() const override { return n_; }
  void apply(const Vector& r, Vector& z) const override {
    z.resize(n_);
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      z.segment(static_cast<Eigen::Index>(b) * bs_, bs_) =
          blocks_[b] * r.segment(static_cast<Eigen::Index>(b) * bs_, bs_);
  }

private:
  int n_ = 0;
  int bs_ = 1;
  std::vector<Eigen::MatrixXd> blocks_;
};

/// Exact dense solve wrapped as a preconditioner action (test scale and the
/// exact Schur variants).
class DenseLuSolver final : public Preconditioner {
public:
  explicit DenseLuSolver(const Eigen::MatrixXd& a) : lu_(a) {
    if (lu_.rcond() < 1e-300)
      throw std::runtime_error("dense LU setup: singular matrix");
  }
  explicit DenseLuSolver(const CsrMatrix& a) : DenseLuSolver(a.toDense()) {}
  int rows() const override { return static_cast<int>(lu_.rows()); }
  void apply(const Vector& r, Vector& z) const override { z = lu_.solve(r); }

private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline std::shared_ptr<Preconditioner> make_jacobi(const CsrMatrix& a) {
  return std::make_shared<JacobiPreconditioner>(a);
}

inline std::shared_ptr<Preconditioner> make_block_jacobi(const CsrMatrix& a,
                                                         int blockSize = 3) {
  return std::make_shared<BlockJacobiPreconditioner>(a, blockSize);
}

inline std::shared_ptr<Preconditioner> make_dense_lu(const CsrMatrix& a) {
  return std::make_shared<DenseLuSolver>(a);
}

}  // namespace nlmech
