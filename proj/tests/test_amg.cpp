#include "nlmech/amg.hpp"
#include "nlmech/gmres.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nlmech;

namespace {

CsrMatrix laplacian1d(int n) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return CsrMatrix::fromTriplets(n, n, std::move(t));
}

}  // namespace

TEST(Amg, LaplacianIterationBound) {
  const int n = 1000;
  const CsrMatrix A = laplacian1d(n);
  const auto M = make_amg(A, 1);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = u(rng);
  const GmresResult r = gmres(A, b, M.get(), {0.0, 1e-8, 200});
  EXPECT_EQ(r.status, KrylovStatus::Converged);
  EXPECT_LE(r.iterations, 20);
}

TEST(Amg, BuildsAMultilevelHierarchy) {
  const CsrMatrix A = laplacian1d(4000);
  const AmgPreconditioner M(A, 1);
  EXPECT_GE(M.numLevels(), 3);
}

TEST(Amg, IdentityActionIsExactOnSmallMatrices) {
  const CsrMatrix I = CsrMatrix::identity(50);
  const auto M = make_amg(I, 1);
  Vector b = Vector::LinSpaced(50, 1.0, 2.0);
  const GmresResult r = gmres(I, b, M.get(), {0.0, 1e-12, 10});
  EXPECT_EQ(r.iterations, 1);
}

TEST(Amg, StructurallySingularMatrixRejected) {
  // one fully-zero row/column
  CsrMatrix A = CsrMatrix::fromTriplets(
      3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 0.0}});
  EXPECT_THROW(make_amg(A, 1), std::runtime_error);
}

TEST(Amg, ApplyIsLinearAndDeterministic) {
  const CsrMatrix A = laplacian1d(800);
  const auto M = make_amg(A, 1);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector x(800), y(800);
  for (int i = 0; i < 800; ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
  }
  Vector zx(800), zy(800), zc(800), zx2(800);
  M->apply(x, zx);
  M->apply(y, zy);
  M->apply(2.0 * x - 0.5 * y, zc);
  M->apply(x, zx2);
  EXPECT_LT((zc - 2.0 * zx + 0.5 * zy).norm(), 1e-12 * zc.norm());
  EXPECT_EQ(memcmp(zx.data(), zx2.data(), sizeof(double) * 800), 0);
}

#include "nlmech/cases.hpp"
#include "nlmech/assembly.hpp"

TEST(Amg, CookIterationCountStableUnderRefinement) {
  // GMRES+AMG counts on the undeformed Cook tangent should stay within
  // +-50% across refinement levels
  std::vector<int> its;
  for (int r : {2, 3, 4}) {
    auto mesh = std::make_shared<Mesh>(build_cook_mesh(r));
    auto p = std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
    const Vector x = Vector::Zero(p->totalDofs());
    Jacobian jac = assemble_jacobian(*p, x);
    Vector rhs = Vector::Zero(p->totalDofs());
    apply_dirichlet(jac, rhs, *p, x);
    CsrMatrix A = std::get<CsrMatrix>(std::move(jac));
    ASSERT_GT(A.rows(), 500);  // below that the hierarchy is a direct solve
    const auto M = make_amg(A, 3);
    Vector b = Vector::Ones(A.rows());
    const GmresResult res = gmres(A, b, M.get(), {0.0, 1e-8, 500});
    ASSERT_EQ(res.status, KrylovStatus::Converged);
    its.push_back(res.iterations);
  }
  const double mid = its[1];
  for (int n : its) {
    EXPECT_GE(n, mid * 0.5) << "its: " << its[0] << " " << its[1] << " " << its[2];
    EXPECT_LE(n, mid * 1.5) << "its: " << its[0] << " " << its[1] << " " << its[2];
  }
}
