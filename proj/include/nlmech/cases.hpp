#pragma once

// The three benchmark problems: the Cook membrane (static, almost
// incompressible Neo-Hooke), the incompressible twist of a bar (P2-P0 mixed)
// and the contracting idealized ventricle (Guccione + active stress, Newmark
// dynamics with a Robin-tethered epicardium).

#include "nlmech/assembly.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace nlmech {

inline QuadratureRule volume_rule_for(ElementFamily family) {
  return tet_quadrature(family == ElementFamily::P2 ? 4 : 2);
}
inline QuadratureRule facet_rule_for(ElementFamily family) {
  return tri_quadrature(family == ElementFamily::P2 ? 4 : 2);
}

struct CookOptions {
  ElementFamily order = ElementFamily::P1;
  double tau = 1e6;            // vertical traction on the loaded face
  bool followerLoad = false;   // deformed-configuration traction scaling
  double mu = 8.194e7;
  double nu = 0.3;
};

inline ProblemDefinition make_cook_problem(std::shared_ptr<const Mesh> mesh,
                                           const CookOptions& opts = {}) {
  ProblemDefinition p;
  p.mesh = std::move(mesh);
  p.dispMap = build_dof_map(*p.mesh, opts.order, 3);
  p.material = NeoHookeanParams::fromMuNu(opts.mu, opts.nu);
  p.volumeRule = volume_rule_for(opts.order);
  p.facetRule = facet_rule_for(opts.order);
  p.bcs.dirichlet.push_back(
      {p.mesh->regionId("clamped"), [](const Vec3&) { return Vec3::Zero(); }});
  p.bcs.neumann.push_back({p.mesh->regionId("loaded"),
                           Vec3(0.0, opts.tau, 0.0), opts.followerLoad});
  p.bcs.validate();
  return p;
}

struct TwistOptions {
  double angle = std::numbers::pi / 6.0;  // rotation of the top face
  TwistParams material{};
};

/// Incompressible twist on the unit-section bar; forces the inf-sup stable
/// P2 displacement / P0 pressure pair.
inline ProblemDefinition make_twist_problem(std::shared_ptr<const Mesh> mesh,
                                            const TwistOptions& opts = {}) {
  ProblemDefinition p;
  p.mesh = std::move(mesh);
  p.dispMap = build_dof_map(*p.mesh, ElementFamily::P2, 3);
  p.pressureMap = build_dof_map(*p.mesh, ElementFamily::P0, 1);
  p.material = opts.material;
  p.volumeRule = volume_rule_for(ElementFamily::P2);
  p.facetRule = facet_rule_for(ElementFamily::P2);
  p.bcs.dirichlet.push_back(
      {p.mesh->regionId("base"), [](const Vec3&) { return Vec3::Zero(); }});
  const double angle = opts.angle;
  p.bcs.dirichlet.push_back(
      {p.mesh->regionId("top"), [angle](const Vec3& x) {
         const Vec3 c(0.5, 0.5, 0.0);
         const double dx = x.x() - c.x(), dy = x.y() - c.y();
         return Vec3(std::cos(angle) * dx - std::sin(angle) * dy - dx,
                     std::sin(angle) * dx + std::cos(angle) * dy - dy, 0.0);
       }});
  p.bcs.validate();
  return p;
}

struct HeartbeatOptions {
  ElementFamily order = ElementFamily::P1;
  GuccioneParams material{};
  ActivationParams activation{};
  double helixEndo = 60.0 * std::numbers::pi / 180.0;
  double helixEpi = -60.0 * std::numbers::pi / 180.0;
  RobinBc epicardium{-1, 2e5, 2e4, 2e4, 2e3};
  double density = 1e3;
  double dt = 0.008;
  double newmarkBeta = 0.25;
  double newmarkGamma = 0.5;
};

/// Idealized left-ventricle contraction. The caller advances activeGamma and
/// the DynamicState between time steps; endo and base stay traction free.
inline ProblemDefinition make_heartbeat_problem(
    std::shared_ptr<const Mesh> mesh, const HeartbeatOptions& opts = {}) {
  ProblemDefinition p;
  p.mesh = std::move(mesh);
  p.dispMap = build_dof_map(*p.mesh, opts.order, 3);
  p.material = opts.material;
  p.volumeRule = volume_rule_for(opts.order);
  p.facetRule = facet_rule_for(opts.order);
  p.fibers = fiber_field(*p.mesh, p.volumeRule, opts.helixEndo, opts.helixEpi);
  RobinBc robin = opts.epicardium;
  robin.region = p.mesh->regionId("epi");
  p.bcs.robin.push_back(robin);
  p.bcs.validate();
  DynamicState dyn;
  dyn.d = Vector::Zero(p.dispMap.numDofs);
  dyn.v = Vector::Zero(p.dispMap.numDofs);
  dyn.a = Vector::Zero(p.dispMap.numDofs);
  dyn.dt = opts.dt;
  dyn.density = opts.density;
  dyn.beta = opts.newmarkBeta;
  dyn.gamma = opts.newmarkGamma;
  dyn.validate();
  p.dynamics = std::move(dyn);
  return p;
}

}  // namespace nlmech
