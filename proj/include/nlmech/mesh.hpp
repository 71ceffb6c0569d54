#pragma once

// Tetrahedral meshes for the three benchmark geometries: the Cook membrane
// (extruded trapezoid), a unit-section bar, and a truncated prolate-spheroid
// shell. Structured hexahedral grids are split with the 6-tet Kuhn
// subdivision, which is deterministic and nests under uniform refinement.

#include "nlmech/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nlmech {

struct BoundaryFacet {
  std::array<int, 3> v;  // vertex indices, sorted
  int cell = -1;         // owning tetrahedron
  int tag = -1;          // region id
};

struct EllipsoidInfo {
  Vec3 endoRadii;
  double wallThickness = 0.0;
  double baseHeight = 0.0;  // z of the truncation plane
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFacet> facets;
  std::vector<std::string> regionNames;
  std::optional<EllipsoidInfo> ellipsoid;

  int regionId(std::string_view name) const {
    for (std::size_t i = 0; i < regionNames.size(); ++i)
      if (regionNames[i] == name) return static_cast<int>(i);
    return -1;
  }
  int addRegion(const std::string& name) {
    const int existing = regionId(name);
    if (existing >= 0) return existing;
    regionNames.push_back(name);
    return static_cast<int>(regionNames.size()) - 1;
  }
};

inline double tet_volume(const Mesh& mesh, int cell) {
  const auto& t = mesh.tets[static_cast<std::size_t>(cell)];
  const Vec3 a = mesh.vertices[t[1]] - mesh.vertices[t[0]];
  const Vec3 b = mesh.vertices[t[2]] - mesh.vertices[t[0]];
  const Vec3 c = mesh.vertices[t[3]] - mesh.vertices[t[0]];
  return a.cross(b).dot(c) / 6.0;
}

inline double mesh_volume(const Mesh& mesh) {
  double v = 0.0;
  for (int c = 0; c < static_cast<int>(mesh.tets.size()); ++c)
    v += tet_volume(mesh, c);
  return v;
}

/// Outward unit normal of a boundary facet (points away from the owner cell).
inline Vec3 facet_outward_normal(const Mesh& mesh, const BoundaryFacet& f) {
  const Vec3 a = mesh.vertices[f.v[0]];
  const Vec3 b = mesh.vertices[f.v[1]];
  const Vec3 c = mesh.vertices[f.v[2]];
  Vec3 n = (b - a).cross(c - a);
  n.normalize();
  const auto& t = mesh.tets[static_cast<std::size_t>(f.cell)];
  Vec3 inside = Vec3::Zero();
  for (int k = 0; k < 4; ++k) inside += mesh.vertices[t[k]];
  inside /= 4.0;
  if (n.dot((a + b + c) / 3.0 - inside) < 0.0) n = -n;
  return n;
}

inline double facet_area(const Mesh& mesh, const BoundaryFacet& f) {
  const Vec3 a = mesh.vertices[f.v[0]];
  const Vec3 b = mesh.vertices[f.v[1]];
  const Vec3 c = mesh.vertices[f.v[2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

namespace detail {

inline std::array<int, 3> sorted3(int a, int b, int c) {
  std::array<int, 3> f = {a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

// The four faces of tet (v0..v3), each opposite one vertex.
inline std::array<std::array<int, 3>, 4> tet_faces(
    const std::array<int, 4>& t) {
  return {sorted3(t[1], t[2], t[3]), sorted3(t[0], t[2], t[3]),
          sorted3(t[0], t[1], t[3]), sorted3(t[0], t[1], t[2])};
}

inline void orient_positive(Mesh& mesh, std::array<int, 4>& t) {
  const Vec3 a = mesh.vertices[t[1]] - mesh.vertices[t[0]];
  const Vec3 b = mesh.vertices[t[2]] - mesh.vertices[t[0]];
  const Vec3 c = mesh.vertices[t[3]] - mesh.vertices[t[0]];
  if (a.cross(b).dot(c) < 0.0) std::swap(t[2], t[3]);
}

// Kuhn/Freudenthal subdivision of one hexahedral cell given its 8 corner
// vertex ids indexed by bit pattern (dx | dy<<1 | dz<<2). Degenerate tets
// (repeated ids, from collapsed pole cells) are skipped.
inline void kuhn_split(Mesh& mesh, const std::array<int, 8>& corner) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& perm : perms) {
    std::array<int, 4> t;
    int bits = 0;
    t[0] = corner[0];
    for (int s = 0; s < 3; ++s) {
      bits |= 1 << perm[s];
      t[s + 1] = corner[static_cast<std::size_t>(bits)];
    }
    bool degenerate = false;
    for (int i = 0; i < 4 && !degenerate; ++i)
      for (int j = i + 1; j < 4; ++j)
        if (t[i] == t[j]) {
          degenerate = true;
          break;
        }
    if (degenerate) continue;
    orient_positive(mesh, t);
    mesh.tets.push_back(t);
  }
}

/// Extracts boundary facets (faces incident to exactly one cell) and tags
/// them with the supplied classifier. The classifier sees the facet vertex
/// ids and the outward normal and must return a valid region id.
inline void build_boundary(
    Mesh& mesh,
    const std::function<int(const std::array<int, 3>&, const Vec3&)>& tagOf) {
  std::map<std::array<int, 3>, std::pair<int, int>> count;  // face -> (n, cell)
  for (int c = 0; c < static_cast<int>(mesh.tets.size()); ++c)
    for (const auto& f : tet_faces(mesh.tets[static_cast<std::size_t>(c)])) {
      auto& e = count[f];
      e.first++;
      e.second = c;
    }
  mesh.facets.clear();
  for (const auto& [face, e] : count) {
    if (e.first != 1) continue;
    BoundaryFacet f;
    f.v = face;
    f.cell = e.second;
    f.tag = tagOf(face, facet_outward_normal(mesh, f));
    if (f.tag < 0) throw std::runtime_error("untagged boundary facet");
    mesh.facets.push_back(f);
  }
}

}  // namespace detail

/// Cook membrane: trapezoid (0,0)-(48,44)-(48,60)-(0,44) extruded to
/// thickness 10, meshed as a (4r x 4r x r)-cell grid by default. Facets on
/// {x=0} are tagged "clamped", {x=48} "loaded", the rest "free".
inline Mesh build_cook_mesh(int refinement,
                            std::array<int, 3> base = {4, 4, 1}) {
  if (refinement < 1) throw std::invalid_argument("refinement must be >= 1");
  const int nx = base[0] * refinement;
  const int ny = base[1] * refinement;
  const int nz = base[2] * refinement;
  Mesh mesh;
  const int clamped = mesh.addRegion("clamped");
  const int loaded = mesh.addRegion("loaded");
  const int free = mesh.addRegion("free");

  auto vid = [&](int i, int j, int k) {
    return (k * (ny + 1) + j) * (nx + 1) + i;
  };
  mesh.vertices.resize(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const double xi = static_cast<double>(i) / nx;
        const double eta = static_cast<double>(j) / ny;
        const double zeta = static_cast<double>(k) / nz;
        mesh.vertices[static_cast<std::size_t>(vid(i, j, k))] =
            Vec3(48.0 * xi, 44.0 * xi + eta * (44.0 - 28.0 * xi), 10.0 * zeta);
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::array<int, 8> c;
        for (int b = 0; b < 8; ++b)
          c[static_cast<std::size_t>(b)] =
              vid(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
        detail::kuhn_split(mesh, c);
      }
  detail::build_boundary(mesh, [&](const std::array<int, 3>& f, const Vec3&) {
    bool left = true, right = true;
    for (int v : f) {
      left = left && mesh.vertices[v].x() < 1e-9;
      right = right && mesh.vertices[v].x() > 48.0 - 1e-9;
    }
    return left ? clamped : (right ? loaded : free);
  });
  return mesh;
}

/// Bar with unit-square cross section and length Lz along z. Facets on
/// {z=0} are tagged "base", {z=Lz} "top", the rest "side".
inline Mesh build_bar_mesh(int nx, int ny, int nz, double Lz = 1.0) {
  if (nx < 1 || ny < 1 || nz < 1 || Lz <= 0.0)
    throw std::invalid_argument("bad bar mesh parameters");
  Mesh mesh;
  const int baseTag = mesh.addRegion("base");
  const int topTag = mesh.addRegion("top");
  const int sideTag = mesh.addRegion("side");

  auto vid = [&](int i, int j, int k) {
    return (k * (ny + 1) + j) * (nx + 1) + i;
  };
  mesh.vertices.resize(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        mesh.vertices[static_cast<std::size_t>(vid(i, j, k))] =
            Vec3(static_cast<double>(i) / nx, static_cast<double>(j) / ny,
                 Lz * static_cast<double>(k) / nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::array<int, 8> c;
        for (int b = 0; b < 8; ++b)
          c[static_cast<std::size_t>(b)] =
              vid(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
        detail::kuhn_split(mesh, c);
      }
  detail::build_boundary(mesh, [&](const std::array<int, 3>& f, const Vec3&) {
    bool bot = true, top = true;
    for (int v : f) {
      bot = bot && mesh.vertices[v].z() < 1e-12;
      top = top && mesh.vertices[v].z() > Lz - 1e-12;
    }
    return bot ? baseTag : (top ? topTag : sideTag);
  });
  return mesh;
}

inline Mesh refine_uniform(const Mesh& mesh);

namespace detail {

// Structured shell of a truncated prolate spheroid. The polar row of hex
// cells collapses onto the apex axis; the Kuhn split drops the degenerate
// tets there, leaving three per collapsed cell.
inline Mesh ellipsoid_shell(const Vec3& endoRadii, double wall, double zBase,
                            int nTheta, int nPhi, int nU) {
  Mesh mesh;
  const int endoTag = mesh.addRegion("endo");
  const int epiTag = mesh.addRegion("epi");
  const int baseTag = mesh.addRegion("base");

  // vertex ids: regular rows it in [0, nTheta), then apex column
  std::vector<int> remap(static_cast<std::size_t>((nTheta + 1) * nPhi * (nU + 1)));
  auto gridIndex = [&](int it, int ip, int iu) {
    return (it * nPhi + (ip % nPhi)) * (nU + 1) + iu;
  };
  const int regular = nTheta * nPhi * (nU + 1);
  for (int it = 0; it <= nTheta; ++it)
    for (int ip = 0; ip < nPhi; ++ip)
      for (int iu = 0; iu <= nU; ++iu)
        remap[static_cast<std::size_t>(gridIndex(it, ip, iu))] =
            it < nTheta ? gridIndex(it, ip, iu) : regular + iu;
  mesh.vertices.resize(static_cast<std::size_t>(regular + nU + 1));

  auto radii = [&](double u) {
    return Vec3(endoRadii.x() + u * wall, endoRadii.y() + u * wall,
                endoRadii.z() + u * wall);
  };
  for (int iu = 0; iu <= nU; ++iu) {
    const double u = static_cast<double>(iu) / nU;
    const Vec3 r = radii(u);
    const double thetaBase = std::acos(zBase / r.z());
    for (int it = 0; it <= nTheta; ++it) {
      const double t = static_cast<double>(it) / nTheta;
      const double theta = thetaBase + t * (std::numbers::pi - thetaBase);
      for (int ip = 0; ip < nPhi; ++ip) {
        const double phi = 2.0 * std::numbers::pi * ip / nPhi;
        const Vec3 p(r.x() * std::sin(theta) * std::cos(phi),
                     r.y() * std::sin(theta) * std::sin(phi),
                     r.z() * std::cos(theta));
        mesh.vertices[static_cast<std::size_t>(
            remap[static_cast<std::size_t>(gridIndex(it, ip, iu))])] =
            it < nTheta ? p : Vec3(0.0, 0.0, -r.z());
      }
    }
  }

  for (int it = 0; it < nTheta; ++it)
    for (int ip = 0; ip < nPhi; ++ip)
      for (int iu = 0; iu < nU; ++iu) {
        std::array<int, 8> c;
        for (int b = 0; b < 8; ++b)
          c[static_cast<std::size_t>(b)] = remap[static_cast<std::size_t>(
              gridIndex(it + ((b >> 1) & 1), ip + (b & 1), iu + ((b >> 2) & 1)))];
        kuhn_split(mesh, c);
      }

  build_boundary(mesh, [&](const std::array<int, 3>& f, const Vec3& n) {
    Vec3 centroid = Vec3::Zero();
    for (int v : f) centroid += mesh.vertices[v];
    centroid /= 3.0;
    if (std::abs(centroid.z() - zBase) < 1e-12 && std::abs(n.z() - 1.0) < 1e-6)
      return baseTag;
    // outward from the wall => epi, inward => endo
    const Vec3 radial(centroid.x() / (endoRadii.x() * endoRadii.x()),
                      centroid.y() / (endoRadii.y() * endoRadii.y()),
                      centroid.z() / (endoRadii.z() * endoRadii.z()));
    return n.dot(radial) > 0.0 ? epiTag : endoTag;
  });
  return mesh;
}

}  // namespace detail

/// Truncated prolate-spheroid shell (idealized left ventricle). The epi
/// surface offsets every endo semi-axis by wallThickness and the shell is
/// cut by the plane z = truncationHeight. Even refinements are built by
/// uniformly refining the next-coarser mesh, so doubling the refinement
/// multiplies the cell count by exactly 8.
inline Mesh build_ellipsoid_mesh(const Vec3& endoRadii = Vec3(0.017, 0.017, 0.060),
                                 double wallThickness = 0.008,
                                 double truncationHeight = 0.02,
                                 int refinement = 1) {
  if (endoRadii.minCoeff() <= 0.0 || wallThickness <= 0.0)
    throw std::invalid_argument("degenerate ellipsoid parameters");
  if (truncationHeight <= 0.0 || truncationHeight >= endoRadii.z())
    throw std::invalid_argument("truncation plane must cut the endo surface");
  if (refinement < 1) throw std::invalid_argument("refinement must be >= 1");
  Mesh mesh;
  if (refinement % 2 == 0) {
    mesh = refine_uniform(build_ellipsoid_mesh(endoRadii, wallThickness,
                                               truncationHeight,
                                               refinement / 2));
  } else {
    const int nTheta = 6 * refinement, nPhi = 16 * refinement,
              nU = 2 * refinement;
    mesh = detail::ellipsoid_shell(endoRadii, wallThickness, truncationHeight,
                                   nTheta, nPhi, nU);
  }
  mesh.ellipsoid = EllipsoidInfo{endoRadii, wallThickness, truncationHeight};
  return mesh;
}

/// Red (1:8) refinement via edge midpoints. Boundary tags propagate from
/// each tagged parent facet to its four children.
inline Mesh refine_uniform(const Mesh& mesh) {
  Mesh out;
  out.regionNames = mesh.regionNames;
  out.ellipsoid = mesh.ellipsoid;
  out.vertices = mesh.vertices;

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    midpoint.emplace(key, id);
    return id;
  };

  out.tets.reserve(mesh.tets.size() * 8);
  for (const auto& t : mesh.tets) {
    const int m01 = mid(t[0], t[1]), m02 = mid(t[0], t[2]),
              m03 = mid(t[0], t[3]), m12 = mid(t[1], t[2]),
              m13 = mid(t[1], t[3]), m23 = mid(t[2], t[3]);
    const std::array<std::array<int, 4>, 8> children = {{
        {t[0], m01, m02, m03},
        {t[1], m01, m12, m13},
        {t[2], m02, m12, m23},
        {t[3], m03, m13, m23},
        // octahedron, split along the m02-m13 diagonal
        {m02, m13, m01, m03},
        {m02, m13, m03, m23},
        {m02, m13, m23, m12},
        {m02, m13, m12, m01},
    }};
    for (auto child : children) {
      detail::orient_positive(out, child);
      out.tets.push_back(child);
    }
  }

  std::map<std::array<int, 3>, int> childTag;
  for (const auto& f : mesh.facets) {
    const int a = f.v[0], b = f.v[1], c = f.v[2];
    const int ab = mid(a, b), ac = mid(a, c), bc = mid(b, c);
    childTag[detail::sorted3(a, ab, ac)] = f.tag;
    childTag[detail::sorted3(b, ab, bc)] = f.tag;
    childTag[detail::sorted3(c, ac, bc)] = f.tag;
    childTag[detail::sorted3(ab, bc, ac)] = f.tag;
  }
  detail::build_boundary(out, [&](const std::array<int, 3>& f, const Vec3&) {
    auto it = childTag.find(f);
    return it == childTag.end() ? -1 : it->second;
  });
  return out;
}

/// Legacy ASCII VTK export: tets plus tagged boundary triangles, with the
/// region id as cell data (-1 for volume cells) and optional nodal vectors.
inline void write_vtk(const Mesh& mesh, const std::string& path,
                      const std::vector<Vec3>* pointVectors = nullptr,
                      const std::string& vectorName = "displacement") {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# vtk DataFile Version 3.0\n"
     << "nlmech mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.vertices.size() << " double\n";
  os.precision(17);
  for (const auto& p : mesh.vertices)
    os << p.x() << " " << p.y() << " " << p.z() << "\n";
  const std::size_t ncells = mesh.tets.size() + mesh.facets.size();
  os << "CELLS " << ncells << " "
     << 5 * mesh.tets.size() + 4 * mesh.facets.size() << "\n";
  for (const auto& t : mesh.tets)
    os << "4 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  for (const auto& f : mesh.facets)
    os << "3 " << f.v[0] << " " << f.v[1] << " " << f.v[2] << "\n";
  os << "CELL_TYPES " << ncells << "\n";
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) os << "10\n";
  for (std::size_t i = 0; i < mesh.facets.size(); ++i) os << "5\n";
  os << "CELL_DATA " << ncells << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) os << "-1\n";
  for (const auto& f : mesh.facets) os << f.tag << "\n";
  if (pointVectors) {
    os << "POINT_DATA " << mesh.vertices.size() << "\nVECTORS " << vectorName
       << " double\n";
    for (const auto& v : *pointVectors)
      os << v.x() << " " << v.y() << " " << v.z() << "\n";
  }
}

/// Checks the structural mesh invariants; throws on the first violation.
inline void validate_mesh(const Mesh& mesh) {
  for (int c = 0; c < static_cast<int>(mesh.tets.size()); ++c)
    if (tet_volume(mesh, c) <= 0.0)
      throw std::runtime_error("non-positive tet volume");
  std::map<std::array<int, 3>, int> count;
  for (const auto& t : mesh.tets)
    for (const auto& f : detail::tet_faces(t)) count[f]++;
  std::size_t boundary = 0;
  for (const auto& [face, n] : count) {
    if (n == 1) boundary++;
    if (n > 2) throw std::runtime_error("face shared by more than two cells");
  }
  if (boundary != mesh.facets.size())
    throw std::runtime_error("tagged facets do not cover the boundary");
  for (const auto& f : mesh.facets) {
    if (count[f.v] != 1) throw std::runtime_error("tagged facet not on boundary");
    if (f.tag < 0 || f.tag >= static_cast<int>(mesh.regionNames.size()))
      throw std::runtime_error("facet with invalid tag");
  }
}

}  // namespace nlmech
