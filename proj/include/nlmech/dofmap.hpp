#pragma once

#include "nlmech/mesh.hpp"

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nlmech {

enum class ElementFamily { P1, P2, P0 };

// Local edges of the reference tet, in the order the P2 cell dofs follow
// after the four vertex dofs.
inline constexpr std::array<std::pair<int, int>, 6> kTetEdges = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Cell-to-global numbering for P1/P2 vector fields and P0 scalars.
/// Vector dofs are node-major with interleaved components, so the global
/// matrix has a natural block structure of size `components`.
struct DofMap {
  ElementFamily family = ElementFamily::P1;
  int components = 1;
  int numDofs = 0;
  int blockSize = 1;
  int dofsPerCell = 0;
  std::vector<int> cellToGlobal;  // ncells * dofsPerCell, flattened

  const int* cellDofs(int cell) const {
    return cellToGlobal.data() + static_cast<std::size_t>(cell) * dofsPerCell;
  }
  int nodesPerCell() const { return dofsPerCell / components; }
};

/// Global edge numbering by first appearance over cells (deterministic for a
/// fixed cell order).
inline std::map<std::pair<int, int>, int> build_edge_map(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : mesh.tets)
    for (const auto& [a, b] : kTetEdges) {
      const auto key = std::minmax(t[a], t[b]);
      edges.emplace(key, static_cast<int>(edges.size()));
    }
  return edges;
}

inline DofMap build_dof_map(const Mesh& mesh, ElementFamily family,
                            int components) {
  if (components != 1 && components != 3)
    throw std::invalid_argument("components must be 1 or 3");
  if (family == ElementFamily::P0 && components != 1)
    throw std::invalid_argument("P0 fields are scalar");

  DofMap map;
  map.family = family;
  map.components = components;
  map.blockSize = components;
  const int ncells = static_cast<int>(mesh.tets.size());

  if (family == ElementFamily::P0) {
    map.numDofs = ncells;
    map.dofsPerCell = 1;
    map.cellToGlobal.resize(static_cast<std::size_t>(ncells));
    for (int c = 0; c < ncells; ++c)
      map.cellToGlobal[static_cast<std::size_t>(c)] = c;
    return map;
  }

  const int nv = static_cast<int>(mesh.vertices.size());
  std::map<std::pair<int, int>, int> edges;
  int nodesPerCell = 4;
  int nnodes = nv;
  if (family == ElementFamily::P2) {
    edges = build_edge_map(mesh);
    nodesPerCell = 10;
    nnodes = nv + static_cast<int>(edges.size());
  }
  map.numDofs = components * nnodes;
  map.dofsPerCell = components * nodesPerCell;
  map.cellToGlobal.resize(static_cast<std::size_t>(ncells) * map.dofsPerCell);

  for (int c = 0; c < ncells; ++c) {
    const auto& t = mesh.tets[static_cast<std::size_t>(c)];
    int* dofs = map.cellToGlobal.data() +
                static_cast<std::size_t>(c) * map.dofsPerCell;
    int slot = 0;
    auto pushNode = [&](int node) {
      for (int comp = 0; comp < components; ++comp)
        dofs[slot++] = components * node + comp;
    };
    for (int v = 0; v < 4; ++v) pushNode(t[v]);
    if (family == ElementFamily::P2)
      for (const auto& [a, b] : kTetEdges)
        pushNode(nv + edges.at(std::minmax(t[a], t[b])));
  }
  return map;
}

/// Coordinates of every global node of the map, in dof order (vertices,
/// then P2 edge midpoints; cell centroids for P0).
inline std::vector<Vec3> node_coordinates(const Mesh& mesh,
                                          const DofMap& map) {
  std::vector<Vec3> coords;
  if (map.family == ElementFamily::P0) {
    for (const auto& t : mesh.tets)
      coords.push_back(0.25 * (mesh.vertices[t[0]] + mesh.vertices[t[1]] +
                               mesh.vertices[t[2]] + mesh.vertices[t[3]]));
    return coords;
  }
  coords = mesh.vertices;
  if (map.family == ElementFamily::P2) {
    coords.resize(static_cast<std::size_t>(map.numDofs / map.components));
    for (const auto& [edge, id] : build_edge_map(mesh))
      coords[mesh.vertices.size() + static_cast<std::size_t>(id)] =
          0.5 * (mesh.vertices[edge.first] + mesh.vertices[edge.second]);
  }
  return coords;
}

/// Physical coordinates of the nodes of one cell (vertices, then edge
/// midpoints for P2). P0 uses the cell centroid.
inline std::vector<Vec3> cell_node_coords(const Mesh& mesh, const DofMap& map,
                                          int cell) {
  const auto& t = mesh.tets[static_cast<std::size_t>(cell)];
  std::vector<Vec3> x;
  if (map.family == ElementFamily::P0) {
    x.push_back(0.25 * (mesh.vertices[t[0]] + mesh.vertices[t[1]] +
                        mesh.vertices[t[2]] + mesh.vertices[t[3]]));
    return x;
  }
  for (int v = 0; v < 4; ++v) x.push_back(mesh.vertices[t[v]]);
  if (map.family == ElementFamily::P2)
    for (const auto& [a, b] : kTetEdges)
      x.push_back(0.5 * (mesh.vertices[t[a]] + mesh.vertices[t[b]]));
  return x;
}

}  // namespace nlmech
