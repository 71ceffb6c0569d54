#pragma once

// 2x2 saddle-point block operator [[A, B1], [B2, C]] and Schur-complement
// fieldsplit preconditioners built from its block LU factorization.

#include "nlmech/csr.hpp"
#include "nlmech/preconditioners.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <utility>

namespace nlmech {

class BlockOperator final : public LinearOperator {
public:
  CsrMatrix A;                 // displacement block (nd x nd)
  CsrMatrix B1;                // upper-right (nd x np)
  CsrMatrix B2;                // lower-left (np x nd)
  std::optional<CsrMatrix> C;  // lower-right (np x np), absent means zero

  BlockOperator() = default;
  BlockOperator(CsrMatrix a, CsrMatrix b1, CsrMatrix b2,
                std::optional<CsrMatrix> c = std::nullopt)
      : A(std::move(a)), B1(std::move(b1)), B2(std::move(b2)),
        C(std::move(c)) {
    if (A.rows() != A.cols() || A.rows() != B1.rows() ||
        A.cols() != B2.cols() || B1.cols() != B2.rows() ||
        (C && (C->rows() != B2.rows() || C->cols() != B1.cols())))
      throw std::invalid_argument("incompatible block dimensions");
  }

  int displacementSize() const { return A.rows(); }
  int pressureSize() const { return B1.cols(); }
  int rows() const override { return displacementSize() + pressureSize(); }
  int cols() const override { return rows(); }

  void apply(const Vector& x, Vector& y) const override {
    const int nd = displacementSize(), np = pressureSize();
    const Vector xd = x.head(nd), xp = x.tail(np);
    y.resize(nd + np);
    y.head(nd) = A * xd + B1 * xp;
    y.tail(np) = B2 * xd;
    if (C) y.tail(np) += *C * xp;
  }
};

enum class SchurVariant { Diag, Lower, Upper, Full };
enum class SchurApprox { Simple, Exact };

using SchurPrecFactory =
    std::function<std::shared_ptr<Preconditioner>(const CsrMatrix&)>;

namespace detail {

inline CsrMatrix csr_subtract(const CsrMatrix& a, const CsrMatrix& b) {
  std::vector<Triplet> t;
  auto push = [&](const CsrMatrix& m, double sign) {
    for (int r = 0; r < m.rows(); ++r)
      for (int k = m.rowOffsets()[static_cast<std::size_t>(r)];
           k < m.rowOffsets()[static_cast<std::size_t>(r) + 1]; ++k)
        t.push_back({r, m.colIndices()[static_cast<std::size_t>(k)],
                     sign * m.values()[static_cast<std::size_t>(k)]});
  };
  push(a, 1.0);
  push(b, -1.0);
  return CsrMatrix::fromTriplets(a.rows(), a.cols(), std::move(t));
}

}  // namespace detail

/// Assembled SIMPLE Schur complement Shat = C - B2 diag(A)^{-1} B1.
inline CsrMatrix simple_schur_complement(const BlockOperator& op) {
  Vector invDiag = op.A.diagonal();
  for (Eigen::Index i = 0; i < invDiag.size(); ++i) {
    if (invDiag[i] == 0.0)
      throw std::runtime_error("SIMPLE setup: zero diagonal in A");
    invDiag[i] = 1.0 / invDiag[i];
  }
  const CsrMatrix prod = op.B2.multiply(op.B1, invDiag);
  if (op.C) return detail::csr_subtract(*op.C, prod);
  CsrMatrix neg = prod;
  for (double& v : neg.values()) v = -v;
  return neg;
}

/// Fieldsplit preconditioner applying the chosen factor combination of the
/// block LU of [[A, B1], [B2, C]] with the supplied inner actions.
class SchurFieldsplit final : public Preconditioner {
public:
  SchurFieldsplit(const BlockOperator& op, SchurVariant variant,
                  std::shared_ptr<Preconditioner> innerA,
                  std::shared_ptr<Preconditioner> innerS)
      : B1_(op.B1), B2_(op.B2), variant_(variant), innerA_(std::move(innerA)),
        innerS_(std::move(innerS)) {}

  int rows() const override { return B1_.rows() + B2_.rows(); }

  void apply(const Vector& r, Vector& z) const override {
    const int nd = B1_.rows(), np = B2_.rows();
    const Vector rd = r.head(nd), rp = r.tail(np);
    Vector zd(nd), zp(np);
    switch (variant_) {
      case SchurVariant::Diag:
        innerA_->apply(rd, zd);
        innerS_->apply(rp, zp);
        break;
      case SchurVariant::Lower:
        innerA_->apply(rd, zd);
        innerS_->apply(rp - B2_ * zd, zp);
        break;
      case SchurVariant::Upper:
        innerS_->apply(rp, zp);
        innerA_->apply(rd - B1_ * zp, zd);
        break;
      case SchurVariant::Full: {
        Vector t(nd);
        innerA_->apply(rd, t);
        innerS_->apply(rp - B2_ * t, zp);
        Vector corr(nd);
        innerA_->apply(B1_ * zp, corr);
        zd = t - corr;
        break;
      }
    }
    z.resize(nd + np);
    z.head(nd) = zd;
    z.tail(np) = zp;
  }

private:
  CsrMatrix B1_, B2_;
  SchurVariant variant_;
  std::shared_ptr<Preconditioner> innerA_;
  std::shared_ptr<Preconditioner> innerS_;
};

/// Builds the fieldsplit. SIMPLE assembles Shat = C - B2 diag(A)^{-1} B1 and
/// hands it to the supplied factory (block Jacobi by default); the exact
/// variant forms the true Schur complement through dense solves with A and
/// factorizes it, which is intended for test-scale operators only.
inline std::shared_ptr<Preconditioner> make_schur_fieldsplit(
    const BlockOperator& op, SchurVariant variant, SchurApprox approx,
    std::shared_ptr<Preconditioner> innerA,
    SchurPrecFactory innerS = [](const CsrMatrix& s) { return make_jacobi(s); }) {
  std::shared_ptr<Preconditioner> schurAction;
  if (approx == SchurApprox::Simple) {
    schurAction = innerS(simple_schur_complement(op));
  } else {
    const Eigen::MatrixXd Ad = op.A.toDense();
    const Eigen::MatrixXd B1d = op.B1.toDense();
    const Eigen::MatrixXd B2d = op.B2.toDense();
    Eigen::MatrixXd S = -B2d * Eigen::PartialPivLU<Eigen::MatrixXd>(Ad).solve(B1d);
    if (op.C) S += op.C->toDense();
    schurAction = std::make_shared<DenseLuSolver>(S);
  }
  return std::make_shared<SchurFieldsplit>(op, variant, std::move(innerA),
                                           std::move(schurAction));
}

}  // namespace nlmech
