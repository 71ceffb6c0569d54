#pragma once

// Nonlinear drivers: Newton-Krylov (quasi-exact tangent solves), inexact
// Newton-Krylov with an adaptive forcing term, and limited-memory BFGS with
// three choices of the initial inverse-Hessian action (preconditioner only,
// inexact Krylov, quasi-exact Krylov). All drivers take full steps; iteration
// counts are attributable to the solver choice alone.

#include "nlmech/gmres.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace nlmech {

enum class SolverKind {
  NewtonKrylov,
  InexactNewton,
  BfgsPreonly,
  InexactBfgs,
  NewtonPreonly,   // non-default corner: too many assemblies
  QuasiExactBfgs,  // non-default corner: expensive iterations
};

enum class B0Mode { Preonly, Inexact, QuasiExact };

struct NonlinearConfig {
  SolverKind kind = SolverKind::NewtonKrylov;
  double rtol = 1e-8;
  double atol = 1e-10;
  int maxIterations = 1000;
  KrylovConfig quasiExactLinear{1e-10, 1e-6, 2000};
  KrylovConfig inexactLinear{0.0, 1e-2, 2000};
  double ewInitial = 0.1;
  double ewMax = 0.1;
  double ewFloor = 1e-6;
  int lbfgsMemory = 50;
  double divergenceFactor = 1e4;
};

enum class SolveStatus { Converged, Diverged, MaxIterations, StepFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::MaxIterations: return "maxits";
    case SolveStatus::StepFailure: return "stepfailure";
  }
  return "unknown";
}

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int nit = 0;
  long totalLinearIts = 0;
  double avgLinearIts = 0.0;
  double wallTimeSeconds = 0.0;
  std::vector<double> residualNormHistory;  // length nit + 1
  std::vector<int> perIterationLinearIts;   // length nit
  int jacobianAssemblies = 0;
};

/// Nonlinear root-finding problem R(x) = 0 with an assembled tangent and an
/// associated preconditioner. residual() may throw NonPhysicalState.
class NonlinearSystem {
public:
  virtual ~NonlinearSystem() = default;
  virtual int size() const = 0;
  virtual Vector residual(const Vector& x) = 0;

  struct Linearized {
    std::shared_ptr<const LinearOperator> op;
    std::shared_ptr<const Preconditioner> preconditioner;
  };
  virtual Linearized linearize(const Vector& x) = 0;

  /// Re-imposes exact constraint values after an update (no-op by default).
  virtual void project(Vector&) {}
};

enum class ConvergenceState { Converged, Diverged, Continue };

inline ConvergenceState convergence_check(double residualNorm,
                                          double initialNorm,
                                          const NonlinearConfig& cfg) {
  if (!std::isfinite(residualNorm)) return ConvergenceState::Diverged;
  if (residualNorm <= std::max(cfg.atol, cfg.rtol * initialNorm))
    return ConvergenceState::Converged;
  if (residualNorm > cfg.divergenceFactor * initialNorm)
    return ConvergenceState::Diverged;
  return ConvergenceState::Continue;
}

/// Forcing term for the next tangent solve from the previous iteration's
/// residual norm and final linear-model residual, clamped to
/// [ewFloor, ewMax]. The first iteration uses ewInitial directly.
inline double ew_tolerance(double prevResidualNorm,
                           double prevLinearModelResidualNorm,
                           double /*etaPrev*/, const NonlinearConfig& cfg) {
  if (!(prevResidualNorm > 0.0))
    throw std::invalid_argument("previous residual norm must be positive");
  const double raw =
      std::abs(prevLinearModelResidualNorm - prevResidualNorm) /
      prevResidualNorm;
  return std::clamp(raw, cfg.ewFloor, cfg.ewMax);
}

// ---------------------------------------------------------------------------
// limited-memory BFGS storage and two-loop recursion

struct LbfgsHistory {
  explicit LbfgsHistory(int memory = 50) : capacity(memory) {}

  struct Pair {
    Vector s, y;
    double rho = 0.0;
  };
  int capacity = 50;
  std::deque<Pair> pairs;
  int skippedUpdates = 0;

  int size() const { return static_cast<int>(pairs.size()); }
};

/// Push (s, y) unless the curvature is too small; oldest pairs are evicted
/// beyond the memory. Returns whether the pair was accepted.
inline bool lbfgs_update(LbfgsHistory& history, const Vector& s,
                         const Vector& y) {
  if (s.size() != y.size()) throw std::invalid_argument("s/y size mismatch");
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) {
    history.skippedUpdates++;
    return false;
  }
  history.pairs.push_back({s, y, 1.0 / sy});
  while (history.size() > history.capacity) history.pairs.pop_front();
  return true;
}

/// Two-loop recursion around the supplied initial inverse-Hessian action.
inline Vector lbfgs_apply(const LbfgsHistory& history,
                          const std::function<Vector(const Vector&)>& applyB0,
                          const Vector& g) {
  const int k = history.size();
  Vector q = g;
  std::vector<double> alpha(static_cast<std::size_t>(k), 0.0);
  for (int i = k - 1; i >= 0; --i) {
    const auto& p = history.pairs[static_cast<std::size_t>(i)];
    alpha[static_cast<std::size_t>(i)] = p.rho * p.s.dot(q);
    q -= alpha[static_cast<std::size_t>(i)] * p.y;
  }
  Vector r = applyB0(q);
  for (int i = 0; i < k; ++i) {
    const auto& p = history.pairs[static_cast<std::size_t>(i)];
    const double beta = p.rho * p.y.dot(r);
    r += (alpha[static_cast<std::size_t>(i)] - beta) * p.s;
  }
  return r;
}

// ---------------------------------------------------------------------------
// drivers

namespace detail {

class WallTimer {
public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline void finalize(SolveReport& report, const WallTimer& timer) {
  report.totalLinearIts = 0;
  for (int its : report.perIterationLinearIts) report.totalLinearIts += its;
  report.avgLinearIts =
      report.nit > 0 ? static_cast<double>(report.totalLinearIts) / report.nit
                     : 0.0;
  report.wallTimeSeconds = timer.seconds();
}

}  // namespace detail

/// Newton family. kind selects quasi-exact solves (NewtonKrylov), adaptive
/// forcing (InexactNewton) or a bare preconditioner application per step
/// (NewtonPreonly). The tangent is reassembled every iteration.
inline SolveReport solve_newton_family(NonlinearSystem& system,
                                       const NonlinearConfig& cfg, Vector& x,
                                       SolverKind kind) {
  detail::WallTimer timer;
  SolveReport report;
  Vector R;
  try {
    R = system.residual(x);
  } catch (const NonPhysicalState&) {
    report.status = SolveStatus::StepFailure;
    detail::finalize(report, timer);
    return report;
  }
  double r0 = R.norm();
  report.residualNormHistory.push_back(r0);

  double eta = cfg.ewInitial;
  double prevLinRes = 0.0, prevResNorm = 0.0;
  for (int it = 0; it < cfg.maxIterations; ++it) {
    const ConvergenceState state =
        convergence_check(report.residualNormHistory.back(), r0, cfg);
    if (state == ConvergenceState::Converged) {
      report.status = SolveStatus::Converged;
      detail::finalize(report, timer);
      return report;
    }
    if (state == ConvergenceState::Diverged) {
      report.status = SolveStatus::Diverged;
      detail::finalize(report, timer);
      return report;
    }

    NonlinearSystem::Linearized lin = system.linearize(x);
    report.jacobianAssemblies++;

    Vector step;
    int linearIts = 0;
    double linRes = 0.0;
    try {
      if (kind == SolverKind::NewtonPreonly) {
        step.resize(R.size());
        lin.preconditioner->apply(-R, step);
      } else {
        KrylovConfig kcfg = cfg.quasiExactLinear;
        if (kind == SolverKind::InexactNewton) {
          kcfg = cfg.inexactLinear;
          if (it > 0)
            eta = ew_tolerance(prevResNorm, prevLinRes, eta, cfg);
          kcfg.rtol = eta;
          kcfg.atol = 0.0;
        }
        GmresResult lr = gmres(*lin.op, -R, lin.preconditioner.get(), kcfg);
        step = std::move(lr.x);
        linearIts = lr.iterations;
        linRes = lr.residualHistory.back();
      }
    } catch (const KrylovBreakdown&) {
      report.status = SolveStatus::StepFailure;
      detail::finalize(report, timer);
      return report;
    }
    prevResNorm = report.residualNormHistory.back();
    prevLinRes = linRes;

    x += step;
    system.project(x);
    try {
      R = system.residual(x);
    } catch (const NonPhysicalState&) {
      report.status = SolveStatus::StepFailure;
      detail::finalize(report, timer);
      return report;
    }
    report.perIterationLinearIts.push_back(linearIts);
    report.nit = it + 1;
    report.residualNormHistory.push_back(R.norm());
  }
  report.status = convergence_check(report.residualNormHistory.back(), r0,
                                    cfg) == ConvergenceState::Converged
                      ? SolveStatus::Converged
                      : SolveStatus::MaxIterations;
  detail::finalize(report, timer);
  return report;
}

inline SolveReport solve_newton(NonlinearSystem& system,
                                const NonlinearConfig& cfg, Vector& x) {
  return solve_newton_family(system, cfg, x, SolverKind::NewtonKrylov);
}

inline SolveReport solve_inexact_newton(NonlinearSystem& system,
                                        const NonlinearConfig& cfg,
                                        Vector& x) {
  return solve_newton_family(system, cfg, x, SolverKind::InexactNewton);
}

/// Quasi-Newton driver: the tangent is assembled once at the initial guess
/// and only its preconditioner (or an iterative solve with it) provides the
/// initial inverse-Hessian action; curvature pairs from successive residual
/// differences enrich it through the two-loop recursion.
inline SolveReport solve_bfgs(NonlinearSystem& system,
                              const NonlinearConfig& cfg, B0Mode mode,
                              Vector& x) {
  detail::WallTimer timer;
  SolveReport report;
  Vector R;
  try {
    R = system.residual(x);
  } catch (const NonPhysicalState&) {
    report.status = SolveStatus::StepFailure;
    detail::finalize(report, timer);
    return report;
  }
  const double r0 = R.norm();
  report.residualNormHistory.push_back(r0);
  if (convergence_check(r0, r0, cfg) == ConvergenceState::Converged) {
    report.status = SolveStatus::Converged;
    detail::finalize(report, timer);
    return report;
  }

  // the single Hessian assembly of the quasi-Newton family
  NonlinearSystem::Linearized lin = system.linearize(x);
  report.jacobianAssemblies = 1;

  int iterationLinearIts = 0;
  auto applyB0 = [&](const Vector& g) -> Vector {
    if (mode == B0Mode::Preonly) {
      Vector z(g.size());
      lin.preconditioner->apply(g, z);
      return z;
    }
    const KrylovConfig& kcfg = mode == B0Mode::Inexact ? cfg.inexactLinear
                                                       : cfg.quasiExactLinear;
    GmresResult lr = gmres(*lin.op, g, lin.preconditioner.get(), kcfg);
    iterationLinearIts += lr.iterations;
    return std::move(lr.x);
  };

  LbfgsHistory history(cfg.lbfgsMemory);
  for (int it = 0; it < cfg.maxIterations; ++it) {
    iterationLinearIts = 0;
    Vector xNew;
    Vector RNew;
    try {
      const Vector direction = -lbfgs_apply(history, applyB0, R);
      xNew = x + direction;
      system.project(xNew);
      RNew = system.residual(xNew);
    } catch (const NonPhysicalState&) {
      report.status = SolveStatus::StepFailure;
      detail::finalize(report, timer);
      return report;
    } catch (const KrylovBreakdown&) {
      report.status = SolveStatus::StepFailure;
      detail::finalize(report, timer);
      return report;
    }
    lbfgs_update(history, xNew - x, RNew - R);
    x = std::move(xNew);
    R = std::move(RNew);
    report.perIterationLinearIts.push_back(iterationLinearIts);
    report.nit = it + 1;
    report.residualNormHistory.push_back(R.norm());

    const ConvergenceState state = convergence_check(R.norm(), r0, cfg);
    if (state != ConvergenceState::Continue) {
      report.status = state == ConvergenceState::Converged
                          ? SolveStatus::Converged
                          : SolveStatus::Diverged;
      detail::finalize(report, timer);
      return report;
    }
  }
  report.status = SolveStatus::MaxIterations;
  detail::finalize(report, timer);
  return report;
}

/// Dispatch over the full solver taxonomy.
inline SolveReport run_solver(NonlinearSystem& system,
                              const NonlinearConfig& cfg, Vector& x) {
  switch (cfg.kind) {
    case SolverKind::NewtonKrylov:
    case SolverKind::InexactNewton:
    case SolverKind::NewtonPreonly:
      return solve_newton_family(system, cfg, x, cfg.kind);
    case SolverKind::BfgsPreonly:
      return solve_bfgs(system, cfg, B0Mode::Preonly, x);
    case SolverKind::InexactBfgs:
      return solve_bfgs(system, cfg, B0Mode::Inexact, x);
    case SolverKind::QuasiExactBfgs:
      return solve_bfgs(system, cfg, B0Mode::QuasiExact, x);
  }
  throw std::logic_error("unknown solver kind");
}

}  // namespace nlmech
