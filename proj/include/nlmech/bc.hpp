#pragma once

#include "nlmech/types.hpp"

#include <functional>
#include <set>
#include <stdexcept>
#include <vector>

namespace nlmech {

struct DirichletBc {
  int region = -1;
  std::function<Vec3(const Vec3&)> value;  // prescribed displacement
};

struct NeumannBc {
  int region = -1;
  Vec3 traction = Vec3::Zero();
  bool followerLoad = false;  // scale by the deformed facet area
};

struct RobinBc {
  int region = -1;
  double kPerp = 0.0, kPar = 0.0;  // stiffness per area
  double cPerp = 0.0, cPar = 0.0;  // damping per area
};

struct BoundaryConditions {
  std::vector<DirichletBc> dirichlet;
  std::vector<NeumannBc> neumann;
  std::vector<RobinBc> robin;

  void validate() const {
    std::set<int> used;
    auto claim = [&used](int region) {
      if (!used.insert(region).second)
        throw std::invalid_argument("region appears in more than one condition");
    };
    for (const auto& bc : dirichlet) claim(bc.region);
    for (const auto& bc : neumann) claim(bc.region);
    for (const auto& bc : robin) claim(bc.region);
  }
};

/// Newmark state for one time step: previous displacement, velocity and
/// acceleration plus the integrator constants. density = 0 recovers the
/// quasi-static problem.
struct DynamicState {
  Vector d, v, a;
  double dt = 0.0;
  double density = 0.0;
  double beta = 0.25;
  double gamma = 0.5;

  void validate() const {
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (density < 0.0) throw std::invalid_argument("density must be >= 0");
    if (beta <= 0.0 || beta > 0.5 || gamma < 0.5 || gamma > 1.0)
      throw std::invalid_argument("Newmark parameters out of range");
  }

  // acceleration as an affine function of the end-of-step displacement
  Vector predictorBase() const { return d + dt * v + dt * dt * (0.5 - beta) * a; }
  double accelFactor() const { return 1.0 / (beta * dt * dt); }
  Vector acceleration(const Vector& dNew) const {
    return accelFactor() * (dNew - predictorBase());
  }
  Vector velocity(const Vector& dNew) const {
    return v + dt * ((1.0 - gamma) * a + gamma * acceleration(dNew));
  }
};

/// End-of-step velocity and acceleration from the accepted displacement.
inline std::pair<Vector, Vector> newmark_advance(const DynamicState& state,
                                                 const Vector& dNew) {
  state.validate();
  Vector aNew = state.acceleration(dNew);
  Vector vNew = state.v + state.dt * ((1.0 - state.gamma) * state.a +
                                      state.gamma * aNew);
  return {std::move(vNew), std::move(aNew)};
}

}  // namespace nlmech
