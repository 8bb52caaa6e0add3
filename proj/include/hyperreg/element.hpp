#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace hyperreg {

enum class CellType { Hex8, Tet4 };

inline constexpr std::size_t nodes_per_cell(CellType t) { return t == CellType::Hex8 ? 8 : 4; }
inline constexpr std::size_t quad_points_per_cell(CellType t) { return t == CellType::Hex8 ? 8 : 1; }
/// VTK legacy cell type ids.
inline constexpr int vtk_cell_id(CellType t) { return t == CellType::Hex8 ? 12 : 10; }

/// Reference-element quadrature rule and shape-function gradients.
/// Hex8: trilinear on [-1,1]^3, 2x2x2 Gauss. Tet4: linear on the unit simplex, 1 point.
struct ReferenceRule {
  std::size_t points = 0;
  std::size_t nodes = 0;
  std::array<double, 8> weights{};
  // dN/dxi for each point: nodes x 3
  std::array<Eigen::Matrix<double, 8, 3>, 8> grads{};
};

const ReferenceRule& reference_rule(CellType t);

/// Local faces of a cell, outward-oriented (counterclockwise seen from outside).
/// Hex faces are quads; tet faces triangles (fourth entry unused).
struct LocalFaces {
  std::size_t count;
  std::size_t verts_per_face;
  std::array<std::array<std::size_t, 4>, 6> faces;
};

const LocalFaces& local_faces(CellType t);

}  // namespace hyperreg
