#include "nlmech/csr.hpp"
#include "nlmech/gmres.hpp"
#include "nlmech/preconditioners.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace nlmech;

namespace {

CsrMatrix randomSparse(int n, double density, std::mt19937& rng,
                       bool diagonallyDominant = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution keep(density);
  std::vector<Triplet> t;
  for (int r = 0; r < n; ++r) {
    double offsum = 0.0;
    for (int c = 0; c < n; ++c) {
      if (c == r) continue;
      if (!keep(rng)) continue;
      const double v = u(rng);
      offsum += std::abs(v);
      t.push_back({r, c, v});
    }
    t.push_back({r, r, diagonallyDominant ? offsum + 1.0 : u(rng)});
  }
  return CsrMatrix::fromTriplets(n, n, std::move(t));
}

Vector randomVector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST(Csr, IdentityActsAsIdentity) {
  const CsrMatrix I = CsrMatrix::identity(5);
  std::mt19937 rng(1);
  const Vector x = randomVector(5, rng);
  EXPECT_EQ((I * x - x).norm(), 0.0);
}

TEST(Csr, HandComputedProduct) {
  const CsrMatrix A =
      CsrMatrix::fromTriplets(2, 2, {{0, 0, 2.0}, {1, 0, 1.0}, {1, 1, 3.0}});
  Vector x(2);
  x << 1.0, 1.0;
  const Vector y = A * x;
  EXPECT_EQ(y[0], 2.0);
  EXPECT_EQ(y[1], 4.0);
}

TEST(Csr, MatchesDenseOracle) {
  std::mt19937 rng(42);
  const CsrMatrix A = randomSparse(50, 0.2, rng);
  const Eigen::MatrixXd Ad = A.toDense();
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = randomVector(50, rng);
    const Vector y = A * x;
    const Vector yd = Ad * x;
    EXPECT_LT((y - yd).norm(), 1e-13 * yd.norm());
  }
}

TEST(Csr, DuplicateTripletsAreSummed) {
  const CsrMatrix A =
      CsrMatrix::fromTriplets(2, 2, {{0, 1, 1.5}, {0, 1, 2.5}, {1, 1, 1.0}});
  EXPECT_EQ(A.at(0, 1), 4.0);
  EXPECT_EQ(A.nonZeros(), 2u);
}

TEST(Csr, PatternAdditionAndMismatchError) {
  CsrMatrix A = CsrMatrix::fromPattern(2, 2, {{0, 1}, {1}});
  A.addAt(0, 1, 3.0);
  A.addAt(0, 1, 1.0);
  EXPECT_EQ(A.at(0, 1), 4.0);
  EXPECT_THROW(A.addAt(1, 0, 1.0), std::runtime_error);
}

TEST(Csr, TransposeAndMultiplyMatchDense) {
  std::mt19937 rng(3);
  const CsrMatrix A = randomSparse(20, 0.3, rng);
  const CsrMatrix B = randomSparse(20, 0.3, rng);
  EXPECT_LT((A.transpose().toDense() - A.toDense().transpose()).norm(), 1e-14);
  EXPECT_LT((A.multiply(B).toDense() - A.toDense() * B.toDense()).norm(),
            1e-12);
  Vector d = randomVector(20, rng);
  EXPECT_LT((A.multiply(B, d).toDense() -
             A.toDense() * d.asDiagonal() * B.toDense())
                .norm(),
            1e-12);
}

TEST(Csr, SpmvSizeMismatchThrows) {
  const CsrMatrix I = CsrMatrix::identity(4);
  Vector x(3);
  x.setZero();
  EXPECT_THROW(I * x, std::invalid_argument);
}

TEST(Csr, MatrixMarketDump) {
  const CsrMatrix A =
      CsrMatrix::fromTriplets(2, 3, {{0, 0, 1.0}, {1, 2, -2.5}});
  const std::string path = testing::TempDir() + "/m.mtx";
  write_matrix_market(A, path);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real general");
  int r = 0, c = 0, nnz = 0;
  is >> r >> c >> nnz;
  EXPECT_EQ(r, 2);
  EXPECT_EQ(c, 3);
  EXPECT_EQ(nnz, 2);
  int i = 0, j = 0;
  double v = 0.0;
  is >> i >> j >> v;
  EXPECT_EQ(i, 1);
  EXPECT_EQ(j, 1);
  EXPECT_EQ(v, 1.0);
}

TEST(Gmres, IdentityConvergesImmediately) {
  const CsrMatrix I = CsrMatrix::identity(8);
  std::mt19937 rng(5);
  const Vector b = randomVector(8, rng);
  const GmresResult r = gmres(I, b, nullptr, {0.0, 1e-12, 100});
  EXPECT_EQ(r.status, KrylovStatus::Converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_LT((r.x - b).norm(), 1e-12);
}

TEST(Gmres, ExactInversePreconditionerGivesOneIteration) {
  std::mt19937 rng(7);
  CsrMatrix A = randomSparse(5, 0.8, rng);
  // make it SPD-ish by A^T A + I
  const Eigen::MatrixXd spd =
      A.toDense().transpose() * A.toDense() + Eigen::MatrixXd::Identity(5, 5);
  std::vector<Triplet> t;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) t.push_back({i, j, spd(i, j)});
  const CsrMatrix Aspd = CsrMatrix::fromTriplets(5, 5, std::move(t));
  const DenseLuSolver exact(Aspd);
  const Vector b = randomVector(5, rng);
  const GmresResult r = gmres(Aspd, b, &exact, {0.0, 1e-10, 100});
  EXPECT_EQ(r.iterations, 1);
}

TEST(Gmres, MatchesDenseLuOracle) {
  std::mt19937 rng(11);
  const CsrMatrix A = randomSparse(100, 0.1, rng);
  const Vector b = randomVector(100, rng);
  const GmresResult r = gmres(A, b, nullptr, {0.0, 1e-10, 2000});
  EXPECT_EQ(r.status, KrylovStatus::Converged);
  const Vector oracle = Eigen::PartialPivLU<Eigen::MatrixXd>(A.toDense()).solve(b);
  EXPECT_LT((r.x - oracle).norm(), 1e-8 * oracle.norm());
}

TEST(Gmres, ResidualHistoryIsMonotone) {
  std::mt19937 rng(13);
  const CsrMatrix A = randomSparse(60, 0.15, rng);
  const Vector b = randomVector(60, rng);
  const GmresResult r = gmres(A, b, nullptr, {0.0, 1e-12, 200});
  for (std::size_t i = 1; i < r.residualHistory.size(); ++i)
    EXPECT_LE(r.residualHistory[i], r.residualHistory[i - 1] * (1.0 + 1e-14));
}

TEST(Gmres, MaxIterationsReportedAsStatusNotError) {
  std::mt19937 rng(17);
  const CsrMatrix A = randomSparse(60, 0.15, rng, false);
  const Vector b = randomVector(60, rng);
  const GmresResult r = gmres(A, b, nullptr, {0.0, 1e-14, 3});
  EXPECT_EQ(r.status, KrylovStatus::MaxIterations);
  EXPECT_EQ(r.iterations, 3);
}

TEST(Gmres, DeterministicAcrossRunsAndThreadCounts) {
  std::mt19937 rng(19);
  const CsrMatrix A = randomSparse(3500, 0.002, rng);
  const Vector b = randomVector(3500, rng);
  const GmresResult r1 = gmres(A, b, nullptr, {0.0, 1e-8, 300});
  const GmresResult r2 = gmres(A, b, nullptr, {0.0, 1e-8, 300});
  set_thread_count(4);
  const GmresResult r4 = gmres(A, b, nullptr, {0.0, 1e-8, 300});
  set_thread_count(1);
  EXPECT_EQ(r1.iterations, r2.iterations);
  EXPECT_EQ(r1.iterations, r4.iterations);
  EXPECT_EQ(memcmp(r1.x.data(), r2.x.data(), sizeof(double) * 3500), 0);
  EXPECT_EQ(memcmp(r1.x.data(), r4.x.data(), sizeof(double) * 3500), 0);
}

TEST(Jacobi, DiagonalMatrixSolvedInOneIteration) {
  std::vector<Triplet> t;
  for (int i = 0; i < 6; ++i) t.push_back({i, i, 2.0 + i});
  const CsrMatrix A = CsrMatrix::fromTriplets(6, 6, std::move(t));
  const auto M = make_jacobi(A);
  std::mt19937 rng(23);
  const Vector b = randomVector(6, rng);
  const GmresResult r = gmres(A, b, M.get(), {0.0, 1e-12, 50});
  EXPECT_EQ(r.iterations, 1);
}

TEST(Jacobi, SingularDiagonalRejected) {
  const CsrMatrix A = CsrMatrix::fromTriplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}});
  EXPECT_THROW(make_jacobi(A), std::runtime_error);
}

TEST(BlockJacobi, BlockSizeOneEqualsScalarJacobi) {
  std::mt19937 rng(29);
  const CsrMatrix A = randomSparse(12, 0.3, rng);
  const auto scalar = make_jacobi(A);
  const auto block = make_block_jacobi(A, 1);
  const Vector r = randomVector(12, rng);
  Vector z1(12), z2(12);
  scalar->apply(r, z1);
  block->apply(r, z2);
  EXPECT_LT((z1 - z2).norm(), 1e-15 * z1.norm());
}

TEST(BlockJacobi, MatchesDensePerBlockInversionOracle) {
  std::mt19937 rng(31);
  const int n = 12, bs = 3;
  const CsrMatrix A = randomSparse(n, 0.4, rng);
  const auto M = make_block_jacobi(A, bs);
  const Vector r = randomVector(n, rng);
  Vector z(n);
  M->apply(r, z);
  const Eigen::MatrixXd Ad = A.toDense();
  for (int b = 0; b < n / bs; ++b) {
    const Eigen::MatrixXd blk = Ad.block(b * bs, b * bs, bs, bs);
    const Vector expect = blk.fullPivLu().solve(r.segment(b * bs, bs));
    EXPECT_LT((z.segment(b * bs, bs) - expect).norm(), 1e-12);
  }
}

TEST(BlockJacobi, SingularBlockRejected) {
  // 2x2 zero block on the diagonal
  const CsrMatrix A = CsrMatrix::fromTriplets(
      4, 4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}, {2, 2, 0.0}});
  EXPECT_NO_THROW(make_block_jacobi(A, 2));  // antidiagonal block invertible
  const CsrMatrix B =
      CsrMatrix::fromTriplets(4, 4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
  EXPECT_THROW(make_block_jacobi(B, 2), std::runtime_error);
}

TEST(Preconditioners, ApplyIsLinear) {
  std::mt19937 rng(37);
  const CsrMatrix A = randomSparse(15, 0.4, rng);
  for (const auto& M :
       {make_jacobi(A), make_block_jacobi(A, 3), make_dense_lu(A)}) {
    const Vector x = randomVector(15, rng);
    const Vector y = randomVector(15, rng);
    const double a = 1.7, b = -0.3;
    Vector zx(15), zy(15), zc(15);
    M->apply(x, zx);
    M->apply(y, zy);
    M->apply(a * x + b * y, zc);
    EXPECT_LT((zc - a * zx - b * zy).norm(),
              1e-12 * (zc.norm() + 1e-30));
  }
}
