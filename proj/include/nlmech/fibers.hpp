#pragma once

#include "nlmech/mesh.hpp"
#include "nlmech/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace nlmech {

struct FiberTriple {
  Vec3 f0;  // fiber
  Vec3 s0;  // sheet (transmural)
  Vec3 n0;  // sheet normal
};

/// Orthonormal fiber frames at every quadrature point of every cell.
struct FiberFrame {
  int pointsPerCell = 0;
  std::vector<FiberTriple> data;  // ncells * pointsPerCell

  const FiberTriple& at(int cell, int qp) const {
    return data[static_cast<std::size_t>(cell) * pointsPerCell +
                static_cast<std::size_t>(qp)];
  }
};

namespace detail {

// Transmural coordinate: u = 0 on the endo ellipsoid, 1 on the epi one.
inline double transmural_coordinate(const EllipsoidInfo& geo, const Vec3& p) {
  auto level = [&](double u) {
    const double a = geo.endoRadii.x() + u * geo.wallThickness;
    const double b = geo.endoRadii.y() + u * geo.wallThickness;
    const double c = geo.endoRadii.z() + u * geo.wallThickness;
    return p.x() * p.x() / (a * a) + p.y() * p.y() / (b * b) +
           p.z() * p.z() / (c * c) - 1.0;
  };
  double lo = 0.0, hi = 1.0;
  if (level(lo) <= 0.0) return 0.0;  // flat facets may dip inside the endo
  if (level(hi) >= 0.0) return 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (level(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Analytic helix fibers: the fiber direction lies in the local ellipsoid
/// tangent plane, rotated from the circumferential direction by a helix
/// angle that interpolates linearly from helixEndo (u=0) to helixEpi (u=1).
/// Angles are in radians.
inline FiberFrame fiber_field(const Mesh& mesh, const QuadratureRule& rule,
                              double helixEndo = 60.0 * std::numbers::pi / 180.0,
                              double helixEpi = -60.0 * std::numbers::pi / 180.0) {
  if (!mesh.ellipsoid)
    throw std::invalid_argument("fiber_field requires an ellipsoid mesh");
  const EllipsoidInfo& geo = *mesh.ellipsoid;

  FiberFrame frame;
  frame.pointsPerCell = static_cast<int>(rule.size());
  frame.data.reserve(mesh.tets.size() * rule.size());

  for (const auto& t : mesh.tets) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Vec3 p = Vec3::Zero();
      for (int v = 0; v < 4; ++v) p += rule.points[q][v] * mesh.vertices[t[v]];

      const double u = detail::transmural_coordinate(geo, p);
      const double a = geo.endoRadii.x() + u * geo.wallThickness;
      const double b = geo.endoRadii.y() + u * geo.wallThickness;
      const double c = geo.endoRadii.z() + u * geo.wallThickness;
      // outward surface normal of the local ellipsoid shell
      Vec3 normal(p.x() / (a * a), p.y() / (b * b), p.z() / (c * c));
      normal.normalize();
      Vec3 circ = Vec3::UnitZ().cross(normal);
      if (circ.norm() < 1e-14)
        throw std::runtime_error("fiber frame degenerate on the apex axis");
      circ.normalize();
      const Vec3 longi = normal.cross(circ);

      const double angle = helixEndo + u * (helixEpi - helixEndo);
      FiberTriple ft;
      ft.f0 = std::cos(angle) * circ + std::sin(angle) * longi;
      ft.s0 = normal;
      ft.n0 = ft.f0.cross(ft.s0);
      frame.data.push_back(ft);
    }
  }
  return frame;
}

}  // namespace nlmech
