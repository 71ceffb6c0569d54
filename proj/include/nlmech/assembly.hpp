#pragma once

// Discrete energy, residual and Jacobian assembly for the quasi-static,
// mixed (displacement-pressure) and Newmark-dynamic formulations. Element
// contributions are computed in parallel into per-cell slots and scattered
// serially in cell order, so assembled values are bitwise independent of the
// thread count.

#include "nlmech/bc.hpp"
#include "nlmech/csr.hpp"
#include "nlmech/dofmap.hpp"
#include "nlmech/fibers.hpp"
#include "nlmech/fieldsplit.hpp"
#include "nlmech/materials.hpp"
#include "nlmech/parallel.hpp"
#include "nlmech/quadrature.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace nlmech {

using Material = std::variant<NeoHookeanParams, TwistParams, GuccioneParams>;
using Jacobian = std::variant<CsrMatrix, BlockOperator>;

namespace detail {
struct JacobianPatterns {
  CsrMatrix A;
  CsrMatrix B1, B2;  // empty unless mixed
};
}  // namespace detail

struct ProblemDefinition {
  std::shared_ptr<const Mesh> mesh;
  DofMap dispMap;
  std::optional<DofMap> pressureMap;  // P0, mixed formulation
  Material material;
  Vec3 bodyForce = Vec3::Zero();
  BoundaryConditions bcs;
  QuadratureRule volumeRule;
  QuadratureRule facetRule;
  std::optional<FiberFrame> fibers;
  double activeGamma = 0.0;  // current active-stress magnitude
  std::optional<DynamicState> dynamics;

  // lazily built sparsity patterns; rebuilt only when absent
  mutable std::shared_ptr<const detail::JacobianPatterns> patternCache;

  bool mixed() const { return pressureMap.has_value(); }
  int displacementDofs() const { return dispMap.numDofs; }
  int pressureDofs() const { return mixed() ? pressureMap->numDofs : 0; }
  int totalDofs() const { return displacementDofs() + pressureDofs(); }
};

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

inline PointResponse eval_material(const ProblemDefinition& problem,
                                   const DeformationState& state, int cell,
                                   int qp) {
  return std::visit(
      overloaded{
          [&](const NeoHookeanParams& p) { return eval_neo_hookean(state, p); },
          [&](const TwistParams& p) { return eval_twist(state, p); },
          [&](const GuccioneParams& p) {
            if (!problem.fibers)
              throw std::invalid_argument("Guccione material needs fibers");
            return eval_guccione(state, p, problem.fibers->at(cell, qp));
          }},
      problem.material);
}

struct CellGeometry {
  std::array<Vec3, 4> gradL;  // constant barycentric gradients
  double jacobianDet = 0.0;   // |det D| = 6 V
};

inline CellGeometry cell_geometry(const Mesh& mesh, int cell) {
  const auto& t = mesh.tets[static_cast<std::size_t>(cell)];
  Mat3 D;
  for (int c = 0; c < 3; ++c)
    D.col(c) = mesh.vertices[t[c + 1]] - mesh.vertices[t[0]];
  CellGeometry geo;
  geo.jacobianDet = std::abs(D.determinant());
  const Mat3 Dinv = D.inverse();
  for (int i = 0; i < 3; ++i) geo.gradL[static_cast<std::size_t>(i) + 1] = Dinv.row(i);
  geo.gradL[0] = -(geo.gradL[1] + geo.gradL[2] + geo.gradL[3]);
  return geo;
}

/// Lagrange basis values and physical gradients at one barycentric point.
inline int eval_basis(ElementFamily family, const std::array<double, 4>& L,
                      const CellGeometry& geo, double* N, Vec3* G) {
  if (family == ElementFamily::P1) {
    for (int i = 0; i < 4; ++i) {
      N[i] = L[static_cast<std::size_t>(i)];
      G[i] = geo.gradL[static_cast<std::size_t>(i)];
    }
    return 4;
  }
  for (int i = 0; i < 4; ++i) {
    N[i] = L[static_cast<std::size_t>(i)] * (2.0 * L[static_cast<std::size_t>(i)] - 1.0);
    G[i] = (4.0 * L[static_cast<std::size_t>(i)] - 1.0) *
           geo.gradL[static_cast<std::size_t>(i)];
  }
  for (int e = 0; e < 6; ++e) {
    const auto [a, b] = kTetEdges[static_cast<std::size_t>(e)];
    N[4 + e] = 4.0 * L[static_cast<std::size_t>(a)] * L[static_cast<std::size_t>(b)];
    G[4 + e] = 4.0 * (L[static_cast<std::size_t>(a)] * geo.gradL[static_cast<std::size_t>(b)] +
                      L[static_cast<std::size_t>(b)] * geo.gradL[static_cast<std::size_t>(a)]);
  }
  return 10;
}

// local node indices of a boundary facet within its owner cell: the three
// facet vertices plus, for P2, the edges with both endpoints on the facet
inline std::vector<int> facet_local_nodes(const Mesh& mesh,
                                          const BoundaryFacet& f,
                                          ElementFamily family) {
  const auto& t = mesh.tets[static_cast<std::size_t>(f.cell)];
  std::vector<int> local;
  std::array<int, 4> onFacet = {0, 0, 0, 0};
  for (int v : f.v)
    for (int lv = 0; lv < 4; ++lv)
      if (t[lv] == v) {
        local.push_back(lv);
        onFacet[static_cast<std::size_t>(lv)] = 1;
      }
  if (family == ElementFamily::P2)
    for (int e = 0; e < 6; ++e) {
      const auto [a, b] = kTetEdges[static_cast<std::size_t>(e)];
      if (onFacet[static_cast<std::size_t>(a)] && onFacet[static_cast<std::size_t>(b)])
        local.push_back(4 + e);
    }
  return local;
}

// barycentric coordinates in the owner cell of a facet quadrature point
inline std::array<double, 4> facet_point_in_cell(const Mesh& mesh,
                                                 const BoundaryFacet& f,
                                                 const std::array<double, 4>& mu) {
  const auto& t = mesh.tets[static_cast<std::size_t>(f.cell)];
  std::array<double, 4> L = {0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 3; ++i)
    for (int lv = 0; lv < 4; ++lv)
      if (t[lv] == f.v[static_cast<std::size_t>(i)])
        L[static_cast<std::size_t>(lv)] += mu[static_cast<std::size_t>(i)];
  return L;
}

inline Mat3 deformation_gradient(int nnodes, const Vec3* G, const double* dloc) {
  Mat3 F = Mat3::Identity();
  for (int n = 0; n < nnodes; ++n)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) F(i, j) += dloc[3 * n + i] * G[n][j];
  return F;
}

// runs body(cell) over all cells in parallel, converting the first
// non-physical failure into a deterministic exception after the join
template <class F>
void guarded_cell_loop(std::size_t ncells, F&& body) {
  std::atomic<long> firstBad{-1};
  std::atomic<int> otherError{0};
  parallel_for(ncells, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      try {
        body(static_cast<int>(c));
      } catch (const NonPhysicalState&) {
        long expected = firstBad.load();
        while ((expected < 0 || static_cast<long>(c) < expected) &&
               !firstBad.compare_exchange_weak(expected, static_cast<long>(c))) {
        }
      } catch (...) {
        otherError.store(1);
      }
    }
  });
  if (otherError.load()) throw std::runtime_error("assembly worker failed");
  if (firstBad.load() >= 0)
    throw NonPhysicalState("non-physical deformation state in cell " +
                           std::to_string(firstBad.load()));
}

inline void gather_local(const DofMap& map, int cell, const Vector& x,
                         double* out) {
  const int* dofs = map.cellDofs(cell);
  for (int i = 0; i < map.dofsPerCell; ++i) out[i] = x[dofs[i]];
}

}  // namespace detail

/// Potential energy of the energy-derived terms: elastic energy, body-force
/// and nominal-traction work, Robin stiffness. Pressure, active-stress and
/// inertia terms are not variational in this form and are excluded.
inline double assemble_energy(const ProblemDefinition& problem,
                              const Vector& x) {
  const Mesh& mesh = *problem.mesh;
  const DofMap& map = problem.dispMap;
  if (x.size() < map.numDofs) throw std::invalid_argument("state too short");
  const std::size_t ncells = mesh.tets.size();
  std::vector<double> cellEnergy(ncells, 0.0);

  detail::guarded_cell_loop(ncells, [&](int cell) {
    const detail::CellGeometry geo = detail::cell_geometry(mesh, cell);
    double N[10];
    Vec3 G[10];
    double dloc[30];
    detail::gather_local(map, cell, x, dloc);
    double e = 0.0;
    for (std::size_t q = 0; q < problem.volumeRule.size(); ++q) {
      const int nn = detail::eval_basis(map.family, problem.volumeRule.points[q],
                                        geo, N, G);
      const double w = problem.volumeRule.weights[q] * geo.jacobianDet;
      DeformationState state;
      state.F = detail::deformation_gradient(nn, G, dloc);
      e += w * detail::eval_material(problem, state, cell, static_cast<int>(q))
               .energy;
      Vec3 u = Vec3::Zero();
      for (int n = 0; n < nn; ++n)
        u += N[n] * Vec3(dloc[3 * n], dloc[3 * n + 1], dloc[3 * n + 2]);
      e -= w * problem.bodyForce.dot(u);
    }
    cellEnergy[static_cast<std::size_t>(cell)] = e;
  });
  double energy = 0.0;
  for (double e : cellEnergy) energy += e;

  double N[10];
  Vec3 G[10];
  double dloc[30];
  for (const auto& f : mesh.facets) {
    const NeumannBc* neumann = nullptr;
    const RobinBc* robin = nullptr;
    for (const auto& bc : problem.bcs.neumann)
      if (bc.region == f.tag) neumann = &bc;
    for (const auto& bc : problem.bcs.robin)
      if (bc.region == f.tag) robin = &bc;
    if (!neumann && !robin) continue;
    const detail::CellGeometry geo = detail::cell_geometry(mesh, f.cell);
    const double area2 = 2.0 * facet_area(mesh, f);
    const Vec3 normal = facet_outward_normal(mesh, f);
    detail::gather_local(map, f.cell, x, dloc);
    for (std::size_t q = 0; q < problem.facetRule.size(); ++q) {
      const auto L = detail::facet_point_in_cell(mesh, f, problem.facetRule.points[q]);
      const int nn = detail::eval_basis(map.family, L, geo, N, G);
      const double w = problem.facetRule.weights[q] * area2;
      Vec3 u = Vec3::Zero();
      for (int n = 0; n < nn; ++n)
        u += N[n] * Vec3(dloc[3 * n], dloc[3 * n + 1], dloc[3 * n + 2]);
      if (neumann) energy -= w * neumann->traction.dot(u);
      if (robin) {
        const double un = normal.dot(u);
        const Vec3 ut = u - un * normal;
        energy += 0.5 * w * (robin->kPerp * un * un + robin->kPar * ut.squaredNorm());
      }
    }
  }
  return energy;
}

/// Residual (gradient of the energy for the variational terms) including
/// boundary, inertia, damping and active-stress contributions. For mixed
/// problems the input is the stacked state [d; p] and the result stacks
/// (R_d, R_p) with R_p the (negated) weak incompressibility residual, which
/// keeps the off-diagonal Jacobian blocks transposes of each other.
inline Vector assemble_residual(const ProblemDefinition& problem,
                                const Vector& x) {
  const Mesh& mesh = *problem.mesh;
  const DofMap& map = problem.dispMap;
  if (x.size() != problem.totalDofs())
    throw std::invalid_argument("state size mismatch");
  const std::size_t ncells = mesh.tets.size();
  const int dpc = map.dofsPerCell;
  const int nd = map.numDofs;

  Vector accel;
  if (problem.dynamics && problem.dynamics->density > 0.0)
    accel = problem.dynamics->acceleration(x.head(nd));

  std::vector<double> elemR(ncells * static_cast<std::size_t>(dpc), 0.0);
  std::vector<double> elemRp(problem.mixed() ? ncells : 0, 0.0);

  detail::guarded_cell_loop(ncells, [&](int cell) {
    const detail::CellGeometry geo = detail::cell_geometry(mesh, cell);
    double N[10];
    Vec3 G[10];
    double dloc[30];
    detail::gather_local(map, cell, x, dloc);
    double aloc[30];
    if (accel.size() > 0) detail::gather_local(map, cell, accel, aloc);
    double* Re = elemR.data() + static_cast<std::size_t>(cell) * dpc;
    double rp = 0.0;
    for (std::size_t q = 0; q < problem.volumeRule.size(); ++q) {
      const int nn = detail::eval_basis(map.family, problem.volumeRule.points[q],
                                        geo, N, G);
      const double w = problem.volumeRule.weights[q] * geo.jacobianDet;
      DeformationState state;
      state.F = detail::deformation_gradient(nn, G, dloc);
      if (problem.mixed()) state.p = x[nd + cell];
      const PointResponse r =
          detail::eval_material(problem, state, cell, static_cast<int>(q));
      Mat3 P = r.P;
      if (problem.activeGamma != 0.0) {
        if (!problem.fibers)
          throw std::invalid_argument("active stress needs fibers");
        Mat3 Pact;
        Tensor4 unusedTangent;
        eval_active_stress(state.F,
                           problem.fibers->at(cell, static_cast<int>(q)).f0,
                           problem.activeGamma, Pact, unusedTangent);
        P += Pact;
      }
      for (int n = 0; n < nn; ++n) {
        const Vec3 Pg = P * G[n];
        for (int i = 0; i < 3; ++i) Re[3 * n + i] += w * Pg[i];
      }
      for (int n = 0; n < nn; ++n)
        for (int i = 0; i < 3; ++i) Re[3 * n + i] -= w * problem.bodyForce[i] * N[n];
      if (accel.size() > 0) {
        Vec3 ah = Vec3::Zero();
        for (int n = 0; n < nn; ++n)
          ah += N[n] * Vec3(aloc[3 * n], aloc[3 * n + 1], aloc[3 * n + 2]);
        const double rho = problem.dynamics->density;
        for (int n = 0; n < nn; ++n)
          for (int i = 0; i < 3; ++i) Re[3 * n + i] += w * rho * ah[i] * N[n];
      }
      if (problem.mixed()) rp -= w * r.constraintResidual;
    }
    if (problem.mixed()) elemRp[static_cast<std::size_t>(cell)] = rp;
  });

  Vector R = Vector::Zero(problem.totalDofs());
  for (std::size_t c = 0; c < ncells; ++c) {
    const int* dofs = map.cellDofs(static_cast<int>(c));
    for (int i = 0; i < dpc; ++i) R[dofs[i]] += elemR[c * static_cast<std::size_t>(dpc) + i];
    if (problem.mixed()) R[nd + static_cast<int>(c)] += elemRp[c];
  }

  // boundary terms, serial over the (few) facets
  Vector velocity;
  if (problem.dynamics) velocity = problem.dynamics->velocity(x.head(nd));
  double N[10];
  Vec3 G[10];
  double dloc[30];
  double vloc[30];
  for (const auto& f : mesh.facets) {
    const NeumannBc* neumann = nullptr;
    const RobinBc* robin = nullptr;
    for (const auto& bc : problem.bcs.neumann)
      if (bc.region == f.tag) neumann = &bc;
    for (const auto& bc : problem.bcs.robin)
      if (bc.region == f.tag) robin = &bc;
    if (!neumann && !robin) continue;
    const detail::CellGeometry geo = detail::cell_geometry(mesh, f.cell);
    const double area2 = 2.0 * facet_area(mesh, f);
    const Vec3 normal = facet_outward_normal(mesh, f);
    const int* dofs = map.cellDofs(f.cell);
    detail::gather_local(map, f.cell, x, dloc);
    if (velocity.size() > 0) detail::gather_local(map, f.cell, velocity, vloc);
    for (std::size_t q = 0; q < problem.facetRule.size(); ++q) {
      const auto L = detail::facet_point_in_cell(mesh, f, problem.facetRule.points[q]);
      const int nn = detail::eval_basis(map.family, L, geo, N, G);
      const double w = problem.facetRule.weights[q] * area2;
      if (neumann) {
        double scale = 1.0;
        if (neumann->followerLoad) {
          const Mat3 F = detail::deformation_gradient(nn, G, dloc);
          const double J = F.determinant();
          if (!(J > 0.0)) throw NonPhysicalState("det F <= 0 on facet");
          scale = J * (F.inverse().transpose() * normal).norm();
        }
        for (int n = 0; n < nn; ++n)
          for (int i = 0; i < 3; ++i)
            R[dofs[3 * n + i]] -= w * scale * neumann->traction[i] * N[n];
      }
      if (robin) {
        Vec3 u = Vec3::Zero(), vel = Vec3::Zero();
        for (int n = 0; n < nn; ++n) {
          u += N[n] * Vec3(dloc[3 * n], dloc[3 * n + 1], dloc[3 * n + 2]);
          if (velocity.size() > 0)
            vel += N[n] * Vec3(vloc[3 * n], vloc[3 * n + 1], vloc[3 * n + 2]);
        }
        const double un = normal.dot(u);
        const double vn = normal.dot(vel);
        const Vec3 traction = robin->kPerp * un * normal +
                              robin->kPar * (u - un * normal) +
                              robin->cPerp * vn * normal +
                              robin->cPar * (vel - vn * normal);
        for (int n = 0; n < nn; ++n)
          for (int i = 0; i < 3; ++i)
            R[dofs[3 * n + i]] += w * traction[i] * N[n];
      }
    }
  }
  return R;
}

namespace detail {

inline std::shared_ptr<const JacobianPatterns> ensure_patterns(
    const ProblemDefinition& problem) {
  if (problem.patternCache) return problem.patternCache;
  const DofMap& map = problem.dispMap;
  const int nd = map.numDofs;
  const std::size_t ncells = problem.mesh->tets.size();
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(nd));
  for (std::size_t c = 0; c < ncells; ++c) {
    const int* dofs = map.cellDofs(static_cast<int>(c));
    for (int i = 0; i < map.dofsPerCell; ++i)
      for (int j = 0; j < map.dofsPerCell; ++j)
        rows[static_cast<std::size_t>(dofs[i])].push_back(dofs[j]);
  }
  auto patterns = std::make_shared<JacobianPatterns>();
  patterns->A = CsrMatrix::fromPattern(nd, nd, std::move(rows));
  patterns->A.setBlockSize(map.components);
  if (problem.mixed()) {
    const int np = problem.pressureMap->numDofs;
    std::vector<std::vector<int>> b1(static_cast<std::size_t>(nd));
    std::vector<std::vector<int>> b2(static_cast<std::size_t>(np));
    for (std::size_t c = 0; c < ncells; ++c) {
      const int* dofs = map.cellDofs(static_cast<int>(c));
      for (int i = 0; i < map.dofsPerCell; ++i) {
        b1[static_cast<std::size_t>(dofs[i])].push_back(static_cast<int>(c));
        b2[c].push_back(dofs[i]);
      }
    }
    patterns->B1 = CsrMatrix::fromPattern(nd, np, std::move(b1));
    patterns->B2 = CsrMatrix::fromPattern(np, nd, std::move(b2));
  }
  problem.patternCache = patterns;
  return patterns;
}

}  // namespace detail

/// Tangent operator at the given state: a CsrMatrix for pure displacement
/// problems, a 2x2 BlockOperator [[A, B1], [B2, 0]] with B2 = B1^T for the
/// mixed formulation. Dynamic problems add the Newmark-scaled mass and Robin
/// damping terms.
inline Jacobian assemble_jacobian(const ProblemDefinition& problem,
                                  const Vector& x) {
  const Mesh& mesh = *problem.mesh;
  const DofMap& map = problem.dispMap;
  if (x.size() != problem.totalDofs())
    throw std::invalid_argument("state size mismatch");
  const std::size_t ncells = mesh.tets.size();
  const int dpc = map.dofsPerCell;
  const int nd = map.numDofs;

  auto patterns = detail::ensure_patterns(problem);
  CsrMatrix A = patterns->A;

  const double massFactor =
      (problem.dynamics && problem.dynamics->density > 0.0)
          ? problem.dynamics->density * problem.dynamics->accelFactor()
          : 0.0;

  std::vector<double> elemK(ncells * static_cast<std::size_t>(dpc) * dpc, 0.0);
  std::vector<double> elemG(problem.mixed() ? ncells * static_cast<std::size_t>(dpc) : 0,
                            0.0);

  detail::guarded_cell_loop(ncells, [&](int cell) {
    const detail::CellGeometry geo = detail::cell_geometry(mesh, cell);
    double N[10];
    Vec3 G[10];
    double dloc[30];
    detail::gather_local(map, cell, x, dloc);
    double* Ke = elemK.data() + static_cast<std::size_t>(cell) * dpc * dpc;
    double* ge = problem.mixed()
                     ? elemG.data() + static_cast<std::size_t>(cell) * dpc
                     : nullptr;
    for (std::size_t q = 0; q < problem.volumeRule.size(); ++q) {
      const int nn = detail::eval_basis(map.family, problem.volumeRule.points[q],
                                        geo, N, G);
      const double w = problem.volumeRule.weights[q] * geo.jacobianDet;
      DeformationState state;
      state.F = detail::deformation_gradient(nn, G, dloc);
      if (problem.mixed()) state.p = x[nd + cell];
      PointResponse r =
          detail::eval_material(problem, state, cell, static_cast<int>(q));
      if (problem.activeGamma != 0.0) {
        if (!problem.fibers)
          throw std::invalid_argument("active stress needs fibers");
        Mat3 Pact;
        Tensor4 Tact;
        eval_active_stress(state.F,
                           problem.fibers->at(cell, static_cast<int>(q)).f0,
                           problem.activeGamma, Pact, Tact);
        r.tangent += Tact;
      }
      // K[(a,i),(b,k)] += w A_{iJkL} G_a[J] G_b[L]
      for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b)
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) {
              double sum = 0.0;
              for (int J = 0; J < 3; ++J)
                for (int LL = 0; LL < 3; ++LL)
                  sum += r.tangent(i, J, k, LL) * G[a][J] * G[b][LL];
              Ke[(3 * a + i) * dpc + 3 * b + k] += w * sum;
            }
      if (massFactor > 0.0)
        for (int a = 0; a < nn; ++a)
          for (int b = 0; b < nn; ++b) {
            const double m = w * massFactor * N[a] * N[b];
            for (int i = 0; i < 3; ++i)
              Ke[(3 * a + i) * dpc + 3 * b + i] += m;
          }
      if (problem.mixed()) {
        // dP/dp contracted with the gradients; shared by B1 and B2
        for (int a = 0; a < nn; ++a) {
          const Vec3 gp = r.dPdp * G[a];
          for (int i = 0; i < 3; ++i) ge[3 * a + i] += w * gp[i];
        }
      }
    }
  });

  for (std::size_t c = 0; c < ncells; ++c) {
    const int* dofs = map.cellDofs(static_cast<int>(c));
    const double* Ke = elemK.data() + c * static_cast<std::size_t>(dpc) * dpc;
    for (int i = 0; i < dpc; ++i)
      for (int j = 0; j < dpc; ++j)
        A.addAt(dofs[i], dofs[j], Ke[i * dpc + j]);
  }

  // facet stiffness: Robin springs/dampers and follower-load geometry
  {
    double N[10];
    Vec3 G[10];
    double dloc[30];
    const double dampFactor =
        problem.dynamics ? problem.dynamics->gamma /
                               (problem.dynamics->beta * problem.dynamics->dt)
                         : 0.0;
    for (const auto& f : mesh.facets) {
      const NeumannBc* neumann = nullptr;
      const RobinBc* robin = nullptr;
      for (const auto& bc : problem.bcs.neumann)
        if (bc.region == f.tag && bc.followerLoad) neumann = &bc;
      for (const auto& bc : problem.bcs.robin)
        if (bc.region == f.tag) robin = &bc;
      if (!neumann && !robin) continue;
      const detail::CellGeometry geo = detail::cell_geometry(mesh, f.cell);
      const double area2 = 2.0 * facet_area(mesh, f);
      const Vec3 normal = facet_outward_normal(mesh, f);
      const int* dofs = map.cellDofs(f.cell);
      detail::gather_local(map, f.cell, x, dloc);
      for (std::size_t q = 0; q < problem.facetRule.size(); ++q) {
        const auto L = detail::facet_point_in_cell(mesh, f, problem.facetRule.points[q]);
        const int nn = detail::eval_basis(map.family, L, geo, N, G);
        const double w = problem.facetRule.weights[q] * area2;
        if (robin) {
          const double kp = robin->kPerp + dampFactor * robin->cPerp;
          const double kt = robin->kPar + dampFactor * robin->cPar;
          for (int a = 0; a < nn; ++a)
            for (int b = 0; b < nn; ++b) {
              const double s = w * N[a] * N[b];
              for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k) {
                  const double nn_ik = normal[i] * normal[k];
                  const double val =
                      s * (kp * nn_ik + kt * ((i == k ? 1.0 : 0.0) - nn_ik));
                  A.addAt(dofs[3 * a + i], dofs[3 * b + k], val);
                }
            }
        }
        if (neumann) {
          const Mat3 F = detail::deformation_gradient(nn, G, dloc);
          const double J = F.determinant();
          if (!(J > 0.0)) throw NonPhysicalState("det F <= 0 on facet");
          const Mat3 Finv = F.inverse();
          const Vec3 u = Finv.transpose() * normal;
          const double g = J * u.norm();
          // d|J F^{-T} n|/dF_kL = (J^2/g) (|u|^2 F^{-T}_kL - u_k (F^{-1} u)_L)
          const Vec3 Fiu = Finv * u;
          Mat3 dscale;
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
              dscale(k, l) = (J * J / g) *
                             (u.squaredNorm() * Finv(l, k) - u[k] * Fiu[l]);
          for (int a = 0; a < nn; ++a)
            for (int i = 0; i < 3; ++i) {
              const double c0 = -w * neumann->traction[i] * N[a];
              for (int b = 0; b < nn; ++b)
                for (int k = 0; k < 3; ++k) {
                  double sum = 0.0;
                  for (int l = 0; l < 3; ++l) sum += dscale(k, l) * G[b][l];
                  A.addAt(dofs[3 * a + i], dofs[3 * b + k], c0 * sum);
                }
            }
        }
      }
    }
  }

  if (!problem.mixed()) return Jacobian{std::move(A)};

  CsrMatrix B1 = patterns->B1;
  CsrMatrix B2 = patterns->B2;
  for (std::size_t c = 0; c < ncells; ++c) {
    const int* dofs = map.cellDofs(static_cast<int>(c));
    const double* ge = elemG.data() + c * static_cast<std::size_t>(dpc);
    for (int i = 0; i < dpc; ++i) {
      B1.addAt(dofs[i], static_cast<int>(c), ge[i]);
      B2.addAt(static_cast<int>(c), dofs[i], ge[i]);
    }
  }
  return Jacobian{BlockOperator(std::move(A), std::move(B1), std::move(B2))};
}

/// Constrained displacement dofs and their prescribed values.
struct DirichletData {
  std::vector<char> flags;  // size = displacement dofs
  Vector targets;
};

inline DirichletData dirichlet_data(const ProblemDefinition& problem) {
  const Mesh& mesh = *problem.mesh;
  const DofMap& map = problem.dispMap;
  DirichletData data;
  data.flags.assign(static_cast<std::size_t>(map.numDofs), 0);
  data.targets = Vector::Zero(map.numDofs);
  for (const auto& bc : problem.bcs.dirichlet) {
    for (const auto& f : mesh.facets) {
      if (f.tag != bc.region) continue;
      const auto locals = detail::facet_local_nodes(mesh, f, map.family);
      const auto coords = cell_node_coords(mesh, map, f.cell);
      const int* dofs = map.cellDofs(f.cell);
      for (int ln : locals) {
        const Vec3 value = bc.value(coords[static_cast<std::size_t>(ln)]);
        for (int comp = 0; comp < 3; ++comp) {
          const int dof = dofs[3 * ln + comp];
          data.flags[static_cast<std::size_t>(dof)] = 1;
          data.targets[dof] = value[comp];
        }
      }
    }
  }
  return data;
}

/// Zero displacement vector lifted to the prescribed Dirichlet values; the
/// canonical initial guess of the nonlinear drivers.
inline Vector initial_guess(const ProblemDefinition& problem) {
  Vector x = Vector::Zero(problem.totalDofs());
  const DirichletData data = dirichlet_data(problem);
  for (int i = 0; i < problem.displacementDofs(); ++i)
    if (data.flags[static_cast<std::size_t>(i)]) x[i] = data.targets[i];
  return x;
}

/// Sets constrained residual entries to zero (the state already satisfies
/// the boundary values).
inline void zero_constrained(const ProblemDefinition& problem, Vector& r) {
  const DirichletData data = dirichlet_data(problem);
  for (int i = 0; i < problem.displacementDofs(); ++i)
    if (data.flags[static_cast<std::size_t>(i)]) r[i] = 0.0;
}

/// Symmetric Dirichlet elimination: constrained rows and columns are zeroed
/// with a unit diagonal, the right-hand side receives the lifted column
/// contributions and the prescribed increments.
inline void apply_dirichlet(Jacobian& jac, Vector& rhs,
                            const ProblemDefinition& problem,
                            const Vector& current) {
  const DirichletData data = dirichlet_data(problem);
  const int nd = problem.displacementDofs();
  Vector lift = Vector::Zero(nd);
  bool any = false;
  for (int i = 0; i < nd; ++i)
    if (data.flags[static_cast<std::size_t>(i)]) {
      lift[i] = data.targets[i] - current[i];
      any = true;
    }
  if (!any) return;

  if (auto* A = std::get_if<CsrMatrix>(&jac)) {
    rhs.head(nd) -= *A * lift;
    A->eliminateSymmetric(data.flags);
  } else {
    auto& block = std::get<BlockOperator>(jac);
    rhs.head(nd) -= block.A * lift;
    rhs.tail(block.pressureSize()) -= block.B2 * lift;
    block.A.eliminateSymmetric(data.flags);
    block.B1.zeroRows(data.flags);
    block.B2.zeroCols(data.flags);
  }
  for (int i = 0; i < nd; ++i)
    if (data.flags[static_cast<std::size_t>(i)]) rhs[i] = lift[i];
}

}  // namespace nlmech
