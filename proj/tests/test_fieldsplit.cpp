#include "nlmech/fieldsplit.hpp"
#include "nlmech/gmres.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nlmech;

namespace {

CsrMatrix denseToCsr(const Eigen::MatrixXd& d) {
  std::vector<Triplet> t;
  for (int r = 0; r < d.rows(); ++r)
    for (int c = 0; c < d.cols(); ++c)
      if (d(r, c) != 0.0) t.push_back({r, c, d(r, c)});
  return CsrMatrix::fromTriplets(static_cast<int>(d.rows()),
                                 static_cast<int>(d.cols()), std::move(t));
}

// Random saddle point [[A, B1], [B1^T, 0]] with SPD A and full-rank B1.
BlockOperator randomSaddlePoint(int nd, int np, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd G(nd, nd), B(nd, np);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j) G(i, j) = u(rng);
  const Eigen::MatrixXd A =
      G.transpose() * G + static_cast<double>(nd) * Eigen::MatrixXd::Identity(nd, nd);
  for (;;) {
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < np; ++j) B(i, j) = u(rng);
    if (Eigen::FullPivLU<Eigen::MatrixXd>(B).rank() == np) break;
  }
  return BlockOperator(denseToCsr(A), denseToCsr(B),
                       denseToCsr(B.transpose()));
}

Vector randomVector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST(BlockOperator, ApplyMatchesMonolithicDense) {
  std::mt19937 rng(2);
  const BlockOperator op = randomSaddlePoint(6, 3, rng);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(9, 9);
  M.topLeftCorner(6, 6) = op.A.toDense();
  M.topRightCorner(6, 3) = op.B1.toDense();
  M.bottomLeftCorner(3, 6) = op.B2.toDense();
  const Vector x = randomVector(9, rng);
  EXPECT_LT((op * x - M * x).norm(), 1e-13 * x.norm());
}

TEST(Schur, ExactVariantsSatisfyMurphyIterationBounds) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int nd = 6 + trial % 5, np = 2 + trial % 3;
    const BlockOperator op = randomSaddlePoint(nd, np, rng);
    const auto innerA = make_dense_lu(op.A);
    const Vector b = randomVector(nd + np, rng);
    const KrylovConfig cfg{0.0, 1e-10, 50};

    const auto diag = make_schur_fieldsplit(op, SchurVariant::Diag,
                                            SchurApprox::Exact, innerA);
    EXPECT_LE(gmres(op, b, diag.get(), cfg).iterations, 3);

    const auto lower = make_schur_fieldsplit(op, SchurVariant::Lower,
                                             SchurApprox::Exact, innerA);
    EXPECT_LE(gmres(op, b, lower.get(), cfg).iterations, 2);

    const auto upper = make_schur_fieldsplit(op, SchurVariant::Upper,
                                             SchurApprox::Exact, innerA);
    EXPECT_LE(gmres(op, b, upper.get(), cfg).iterations, 2);

    const auto full = make_schur_fieldsplit(op, SchurVariant::Full,
                                            SchurApprox::Exact, innerA);
    EXPECT_EQ(gmres(op, b, full.get(), cfg).iterations, 1);
  }
}

TEST(Schur, SimpleComplementMatchesDenseFormula) {
  std::mt19937 rng(5);
  const BlockOperator op = randomSaddlePoint(8, 4, rng);
  const CsrMatrix shat = simple_schur_complement(op);
  const Eigen::MatrixXd Ad = op.A.toDense();
  const Eigen::MatrixXd expected =
      -op.B2.toDense() * Ad.diagonal().cwiseInverse().asDiagonal() *
      op.B1.toDense();
  EXPECT_LT((shat.toDense() - expected).norm(), 1e-12 * expected.norm());
}

TEST(Schur, SimpleLowerVariantSolvesSaddlePoint) {
  std::mt19937 rng(7);
  const BlockOperator op = randomSaddlePoint(20, 6, rng);
  const auto innerA = make_dense_lu(op.A);
  const auto M = make_schur_fieldsplit(op, SchurVariant::Lower,
                                       SchurApprox::Simple, innerA);
  const Vector b = randomVector(26, rng);
  const GmresResult r = gmres(op, b, M.get(), {0.0, 1e-10, 200});
  EXPECT_EQ(r.status, KrylovStatus::Converged);
  EXPECT_LT((op * r.x - b).norm(), 1e-9 * b.norm());
}

TEST(Schur, SingularSimpleComplementRejected) {
  // B1 = 0 makes Shat identically zero
  const CsrMatrix A = CsrMatrix::identity(4);
  const CsrMatrix B1 = CsrMatrix::fromPattern(4, 2, {{0}, {}, {}, {1}});
  const CsrMatrix B2 = B1.transpose();
  const BlockOperator op(A, B1, B2);
  EXPECT_THROW(make_schur_fieldsplit(op, SchurVariant::Lower,
                                     SchurApprox::Simple, make_dense_lu(A)),
               std::runtime_error);
}
