#pragma once

// Bridges an assembled finite-element problem to the nonlinear drivers:
// residuals with constrained entries zeroed, Dirichlet-eliminated tangents,
// and the per-case preconditioner wiring.

#include "nlmech/amg.hpp"
#include "nlmech/assembly.hpp"
#include "nlmech/cases.hpp"
#include "nlmech/nonlinear.hpp"

#include <memory>
#include <utility>

namespace nlmech {

enum class PrecondKind {
  AmgBlock,          // smoothed aggregation on the displacement matrix
  SchurSimpleLower,  // fieldsplit for the mixed saddle point
  Jacobi,
  Identity,
};

class FemSystem final : public NonlinearSystem {
public:
  FemSystem(std::shared_ptr<ProblemDefinition> problem, PrecondKind precond,
            AmgOptions amgOptions = {})
      : problem_(std::move(problem)), precond_(precond),
        amgOptions_(amgOptions), dirichlet_(dirichlet_data(*problem_)) {
    if (problem_->dispMap.components == 3)
      rigidModes_ = rigid_body_modes(
          node_coordinates(*problem_->mesh, problem_->dispMap));
  }

  const ProblemDefinition& problem() const { return *problem_; }
  ProblemDefinition& problem() { return *problem_; }

  int size() const override { return problem_->totalDofs(); }

  Vector initialGuess() const { return initial_guess(*problem_); }

  Vector residual(const Vector& x) override {
    Vector r = assemble_residual(*problem_, x);
    for (int i = 0; i < problem_->displacementDofs(); ++i)
      if (dirichlet_.flags[static_cast<std::size_t>(i)]) r[i] = 0.0;
    return r;
  }

  Linearized linearize(const Vector& x) override {
    Jacobian jac = assemble_jacobian(*problem_, x);
    Vector rhs = Vector::Zero(problem_->totalDofs());
    apply_dirichlet(jac, rhs, *problem_, x);

    Linearized lin;
    if (auto* A = std::get_if<CsrMatrix>(&jac)) {
      auto op = std::make_shared<CsrMatrix>(std::move(*A));
      lin.preconditioner = makeDisplacementPreconditioner(*op);
      lin.op = std::move(op);
    } else {
      auto op = std::make_shared<BlockOperator>(
          std::move(std::get<BlockOperator>(jac)));
      lin.preconditioner = make_schur_fieldsplit(
          *op, SchurVariant::Lower, SchurApprox::Simple,
          makeDisplacementPreconditioner(op->A));
      lin.op = std::move(op);
    }
    return lin;
  }

  void project(Vector& x) override {
    for (int i = 0; i < problem_->displacementDofs(); ++i)
      if (dirichlet_.flags[static_cast<std::size_t>(i)])
        x[i] = dirichlet_.targets[i];
  }

private:
  std::shared_ptr<Preconditioner> makeDisplacementPreconditioner(
      const CsrMatrix& A) const {
    switch (precond_) {
      case PrecondKind::AmgBlock:
      case PrecondKind::SchurSimpleLower:
        return make_amg(A, problem_->dispMap.components, amgOptions_,
                        rigidModes_);
      case PrecondKind::Jacobi:
        return make_jacobi(A);
      case PrecondKind::Identity:
        return std::make_shared<IdentityPreconditioner>(A.rows());
    }
    throw std::logic_error("unknown preconditioner kind");
  }

  std::shared_ptr<ProblemDefinition> problem_;
  PrecondKind precond_;
  AmgOptions amgOptions_;
  DirichletData dirichlet_;
  std::vector<Vector> rigidModes_;
};

/// Default solver wiring for a case: the mixed problem gets the fieldsplit,
/// everything else the block-aware AMG.
inline std::unique_ptr<FemSystem> make_fem_system(
    std::shared_ptr<ProblemDefinition> problem) {
  const PrecondKind kind = problem->mixed() ? PrecondKind::SchurSimpleLower
                                            : PrecondKind::AmgBlock;
  return std::make_unique<FemSystem>(std::move(problem), kind);
}

}  // namespace nlmech
