#include "nlmech/nonlinear.hpp"

#include "nlmech/fem_system.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nlmech;

namespace {

// R(x) = A x - b: the quadratic-energy model problem
class LinearSystemModel final : public NonlinearSystem {
public:
  LinearSystemModel(CsrMatrix a, Vector b, bool exactPrec = false)
      : a_(std::move(a)), b_(std::move(b)), exactPrec_(exactPrec) {}
  int size() const override { return a_.rows(); }
  Vector residual(const Vector& x) override { return a_ * x - b_; }
  Linearized linearize(const Vector& x) override {
    (void)x;
    Linearized lin;
    auto op = std::make_shared<CsrMatrix>(a_);
    lin.op = op;
    if (exactPrec_)
      lin.preconditioner = make_dense_lu(a_);
    else
      lin.preconditioner = std::make_shared<IdentityPreconditioner>(a_.rows());
    return lin;
  }

private:
  CsrMatrix a_;
  Vector b_;
  bool exactPrec_;
};

CsrMatrix randomSpd(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = u(rng);
  const Eigen::MatrixXd S =
      G.transpose() * G + n * Eigen::MatrixXd::Identity(n, n);
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.push_back({i, j, S(i, j)});
  return CsrMatrix::fromTriplets(n, n, std::move(t));
}

Vector randomVector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// dense inverse-Hessian recursion oracle:
// H_{k+1} = (I - rho s y^T) H_k (I - rho y s^T) + rho s s^T
Eigen::MatrixXd denseBfgsInverse(const Eigen::MatrixXd& H0,
                                 const LbfgsHistory& history) {
  Eigen::MatrixXd H = H0;
  const int n = static_cast<int>(H0.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (const auto& p : history.pairs) {
    const Eigen::MatrixXd left = I - p.rho * p.s * p.y.transpose();
    H = left * H * left.transpose() + p.rho * p.s * p.s.transpose();
  }
  return H;
}

std::shared_ptr<Mesh> sharedMesh(Mesh&& m) {
  return std::make_shared<Mesh>(std::move(m));
}

}  // namespace

TEST(ConvergenceCheck, EdgeCases) {
  NonlinearConfig cfg;
  EXPECT_EQ(convergence_check(0.0, 1.0, cfg), ConvergenceState::Converged);
  EXPECT_EQ(convergence_check(cfg.rtol * 2.0, 2.0, cfg),
            ConvergenceState::Converged);  // inclusive boundary
  EXPECT_EQ(convergence_check(std::nan(""), 1.0, cfg),
            ConvergenceState::Diverged);
  EXPECT_EQ(convergence_check(2.0e4, 1.0, cfg), ConvergenceState::Diverged);
  EXPECT_EQ(convergence_check(0.5, 1.0, cfg), ConvergenceState::Continue);
}

TEST(EwTolerance, MatchesFormulaAndClamps) {
  NonlinearConfig cfg;
  EXPECT_NEAR(ew_tolerance(1.0, 0.95, 0.1, cfg), 0.05, 1e-15);
  EXPECT_DOUBLE_EQ(ew_tolerance(1.0, 0.3, 0.1, cfg), 0.1);  // raw 0.7 clamped
  EXPECT_DOUBLE_EQ(ew_tolerance(1.0, 0.0, 0.1, cfg), 0.1);  // exact solve
  EXPECT_DOUBLE_EQ(ew_tolerance(1.0, 1.0 - 1e-9, 0.1, cfg),
                   cfg.ewFloor);  // floor
  EXPECT_THROW(ew_tolerance(0.0, 0.5, 0.1, cfg), std::invalid_argument);
}

TEST(Lbfgs, CurvatureGuardSkipsUpdate) {
  LbfgsHistory h(5);
  Vector s = Vector::Ones(3);
  Vector y = -Vector::Ones(3);  // <s,y> < 0
  EXPECT_FALSE(lbfgs_update(h, s, y));
  EXPECT_EQ(h.size(), 0);
  EXPECT_EQ(h.skippedUpdates, 1);
}

TEST(Lbfgs, RingEvictsOldestBeyondMemory) {
  LbfgsHistory h(2);
  std::mt19937 rng(3);
  Vector firstS;
  for (int i = 0; i < 3; ++i) {
    Vector s = randomVector(4, rng);
    Vector y = s * (i + 1.0);  // positive curvature
    if (i == 0) firstS = s;
    EXPECT_TRUE(lbfgs_update(h, s, y));
  }
  EXPECT_EQ(h.size(), 2);
  EXPECT_NE((h.pairs.front().s - firstS).norm(), 0.0);
}

TEST(Lbfgs, StoredRhoMatchesDotProductOracle) {
  LbfgsHistory h(5);
  std::mt19937 rng(5);
  const Vector s = randomVector(6, rng);
  Vector y = randomVector(6, rng);
  if (s.dot(y) < 0) y = -y;
  ASSERT_TRUE(lbfgs_update(h, s, y));
  EXPECT_DOUBLE_EQ(h.pairs.back().rho, 1.0 / s.dot(y));
}

TEST(Lbfgs, EmptyHistoryReturnsInitialAction) {
  LbfgsHistory h(5);
  std::mt19937 rng(7);
  const Vector g = randomVector(5, rng);
  const Vector out =
      lbfgs_apply(h, [](const Vector& v) { return 2.0 * v; }, g);
  EXPECT_EQ((out - 2.0 * g).norm(), 0.0);
}

TEST(Lbfgs, SinglePairMatchesDenseRankTwoFormula) {
  LbfgsHistory h(5);
  std::mt19937 rng(9);
  const int n = 5;
  const Vector s = randomVector(n, rng);
  Vector y = randomVector(n, rng);
  if (s.dot(y) < 0) y = -y;
  ASSERT_TRUE(lbfgs_update(h, s, y));
  const Eigen::MatrixXd H0 = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd H = denseBfgsInverse(H0, h);
  const Vector g = randomVector(n, rng);
  const Vector viaTwoLoop =
      lbfgs_apply(h, [](const Vector& v) { return v; }, g);
  EXPECT_LT((viaTwoLoop - H * g).norm(), 1e-13 * (H * g).norm());
}

TEST(Lbfgs, TwoLoopMatchesDenseRecursionProperty) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;      // dimensions up to 10
    const int k = trial % 6;          // history lengths 0..5
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = u(rng);
    const Eigen::MatrixXd H0 =
        G.transpose() * G + n * Eigen::MatrixXd::Identity(n, n);  // SPD B0
    LbfgsHistory h(8);
    for (int i = 0; i < k; ++i) {
      const Vector s = randomVector(n, rng);
      Vector y = randomVector(n, rng);
      if (s.dot(y) <= 0) y = -y + 0.1 * s;
      lbfgs_update(h, s, y);
    }
    const Eigen::MatrixXd H = denseBfgsInverse(H0, h);
    const Vector g = randomVector(n, rng);
    const Vector viaTwoLoop = lbfgs_apply(
        h, [&](const Vector& v) -> Vector { return H0 * v; }, g);
    const Vector dense = H * g;
    EXPECT_LT((viaTwoLoop - dense).norm(), 1e-12 * std::max(1.0, dense.norm()))
        << "n=" << n << " k=" << h.size();
  }
}

TEST(Newton, LinearProblemConvergesInOneIteration) {
  std::mt19937 rng(13);
  const int n = 12;
  LinearSystemModel system(randomSpd(n, rng), randomVector(n, rng));
  NonlinearConfig cfg;
  cfg.rtol = 1e-5;  // looser than the quasi-exact linear tolerance
  Vector x = Vector::Zero(n);
  const SolveReport report = solve_newton(system, cfg, x);
  EXPECT_EQ(report.status, SolveStatus::Converged);
  EXPECT_EQ(report.nit, 1);
  EXPECT_EQ(report.jacobianAssemblies, 1);
}

TEST(Newton, ExactInitialGuessConvergesInZeroIterations) {
  std::mt19937 rng(17);
  const int n = 8;
  const CsrMatrix A = randomSpd(n, rng);
  const Vector sol = randomVector(n, rng);
  LinearSystemModel system(A, A * sol);
  NonlinearConfig cfg;
  Vector x = sol;
  const SolveReport report = solve_newton(system, cfg, x);
  EXPECT_EQ(report.status, SolveStatus::Converged);
  EXPECT_EQ(report.nit, 0);
  EXPECT_EQ(report.jacobianAssemblies, 0);
  EXPECT_EQ(report.residualNormHistory.size(), 1u);
}

TEST(InexactNewton, LinearProblemUsesNoMoreLinearItsThanNewton) {
  std::mt19937 rng(19);
  const int n = 20;
  const CsrMatrix A = randomSpd(n, rng);
  const Vector b = randomVector(n, rng);
  NonlinearConfig cfg;
  cfg.rtol = 0.2;  // both drivers converge in one step; per-solve cost decides
  LinearSystemModel s1(A, b), s2(A, b);
  Vector x1 = Vector::Zero(n), x2 = Vector::Zero(n);
  const SolveReport nk = solve_newton(s1, cfg, x1);
  const SolveReport ink = solve_inexact_newton(s2, cfg, x2);
  EXPECT_EQ(nk.status, SolveStatus::Converged);
  EXPECT_EQ(ink.status, SolveStatus::Converged);
  EXPECT_LE(ink.totalLinearIts, nk.totalLinearIts);
}

TEST(Bfgs, ExactInitialHessianSolvesSpdProblemInOneIteration) {
  std::mt19937 rng(23);
  const int n = 10;
  LinearSystemModel system(randomSpd(n, rng), randomVector(n, rng),
                           /*exactPrec=*/true);
  NonlinearConfig cfg;
  Vector x = Vector::Zero(n);
  const SolveReport report = solve_bfgs(system, cfg, B0Mode::Preonly, x);
  EXPECT_EQ(report.status, SolveStatus::Converged);
  EXPECT_EQ(report.nit, 1);
  EXPECT_EQ(report.jacobianAssemblies, 1);
  EXPECT_EQ(report.totalLinearIts, 0);  // preonly never runs a Krylov solve
}

TEST(Report, ConsistencyInvariants) {
  std::mt19937 rng(29);
  const int n = 15;
  LinearSystemModel system(randomSpd(n, rng), randomVector(n, rng));
  NonlinearConfig cfg;
  Vector x = Vector::Zero(n);
  const SolveReport report = solve_newton(system, cfg, x);
  long total = 0;
  for (int its : report.perIterationLinearIts) total += its;
  EXPECT_EQ(report.totalLinearIts, total);
  EXPECT_EQ(report.residualNormHistory.size(),
            static_cast<std::size_t>(report.nit) + 1);
  EXPECT_EQ(report.perIterationLinearIts.size(),
            static_cast<std::size_t>(report.nit));
  EXPECT_GT(report.wallTimeSeconds, 0.0);
  if (report.nit > 0)
    EXPECT_DOUBLE_EQ(report.avgLinearIts,
                     static_cast<double>(total) / report.nit);
}

// --- coarse finite-element behavior ---------------------------------------

TEST(FemSolvers, CookNewtonShowsQuadraticTail) {
  auto mesh = sharedMesh(build_cook_mesh(1));
  auto problem =
      std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
  auto system = make_fem_system(problem);
  NonlinearConfig cfg;
  Vector x = system->initialGuess();
  const SolveReport report = solve_newton(*system, cfg, x);
  ASSERT_EQ(report.status, SolveStatus::Converged);
  EXPECT_LE(report.nit, 15);
  // observed order log||R_{k+1}|| / log||R_k|| (relative norms) on the
  // final step
  const auto& h = report.residualNormHistory;
  ASSERT_GE(h.size(), 3u);
  const double relPrev = h[h.size() - 2] / h[0];
  const double relLast = h[h.size() - 1] / h[0];
  const double order = std::log(relLast) / std::log(relPrev);
  EXPECT_GE(order, 1.8);
  EXPECT_EQ(report.jacobianAssemblies, report.nit);
}

TEST(FemSolvers, CookInexactNewtonHasDecreasingRatios) {
  auto mesh = sharedMesh(build_cook_mesh(1));
  auto problem =
      std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
  auto system = make_fem_system(problem);
  NonlinearConfig cfg;
  cfg.kind = SolverKind::InexactNewton;
  Vector x = system->initialGuess();
  const SolveReport report = solve_inexact_newton(*system, cfg, x);
  ASSERT_EQ(report.status, SolveStatus::Converged);
  EXPECT_LE(report.nit, 15);
  const auto& h = report.residualNormHistory;
  ASSERT_GE(h.size(), 4u);
  std::vector<double> ratios;
  for (std::size_t i = 1; i < h.size(); ++i) ratios.push_back(h[i] / h[i - 1]);
  const std::size_t m = ratios.size();
  EXPECT_LT(ratios[m - 1], ratios[m - 2]);
  EXPECT_LT(ratios[m - 2], ratios[m - 3]);
}

TEST(FemSolvers, CookBfgsPreonlyConvergesSlowerThanNewton) {
  auto mesh = sharedMesh(build_cook_mesh(1));
  auto pNewton =
      std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
  auto pBfgs =
      std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
  NonlinearConfig cfg;
  auto newtonSystem = make_fem_system(pNewton);
  Vector xn = newtonSystem->initialGuess();
  const SolveReport nk = solve_newton(*newtonSystem, cfg, xn);
  auto bfgsSystem = make_fem_system(pBfgs);
  Vector xb = bfgsSystem->initialGuess();
  const SolveReport b = solve_bfgs(*bfgsSystem, cfg, B0Mode::Preonly, xb);
  ASSERT_EQ(nk.status, SolveStatus::Converged);
  ASSERT_EQ(b.status, SolveStatus::Converged);
  EXPECT_GT(b.nit, nk.nit);
  EXPECT_EQ(b.jacobianAssemblies, 1);
  EXPECT_LT((xn - xb).norm(), 1e-5 * xn.norm());  // same solution
}

TEST(FemSolvers, PreonlyActionIsDeterministic) {
  auto mesh = sharedMesh(build_bar_mesh(1, 1, 2));
  auto problem =
      std::make_shared<ProblemDefinition>(make_twist_problem(mesh, {}));
  auto system = make_fem_system(problem);
  const Vector x = system->initialGuess();
  const NonlinearSystem::Linearized lin = system->linearize(x);
  std::mt19937 rng(31);
  const Vector g = randomVector(system->size(), rng);
  Vector z1(system->size()), z2(system->size());
  lin.preconditioner->apply(g, z1);
  lin.preconditioner->apply(g, z2);
  EXPECT_EQ(memcmp(z1.data(), z2.data(),
                   sizeof(double) * static_cast<std::size_t>(z1.size())),
            0);
}

TEST(FemSolvers, NewtonIterationCountStableUnderTighterLinearTolerance) {
  // tightening the quasi-exact rtol from 1e-6 to 1e-8 moves nit by <= 1
  auto runWith = [](double linRtol) {
    auto mesh = sharedMesh(build_cook_mesh(1));
    auto problem =
        std::make_shared<ProblemDefinition>(make_cook_problem(mesh, {}));
    auto system = make_fem_system(problem);
    NonlinearConfig cfg;
    cfg.quasiExactLinear.rtol = linRtol;
    Vector x = system->initialGuess();
    return solve_newton(*system, cfg, x);
  };
  const SolveReport loose = runWith(1e-6);
  const SolveReport tight = runWith(1e-8);
  ASSERT_EQ(loose.status, SolveStatus::Converged);
  ASSERT_EQ(tight.status, SolveStatus::Converged);
  EXPECT_LE(std::abs(loose.nit - tight.nit), 1);
}
