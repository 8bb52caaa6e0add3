#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hyperreg/element.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

/// Outward-oriented triangulation of the mesh boundary. Triangle entries are
/// node ids of the parent mesh.
struct SurfaceMesh {
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<std::size_t> vertex_set;  // sorted
  std::size_t open_edge_count = 0;      // edges not shared by exactly two triangles

  bool closed() const noexcept { return open_edge_count == 0; }
};

/// Per-quadrature-point data in the reference configuration.
struct QuadPoint {
  Eigen::Matrix<double, 8, 3> grad;  // dN/dX, only the first nodes_per_cell rows used
  double weight = 0.0;               // Gauss weight times det(dX/dxi)
};

/// Volumetric finite-element mesh with a single cell type. Immutable once built;
/// construction validates connectivity and element Jacobians and extracts the
/// boundary surface.
class Mesh {
 public:
  Mesh(std::vector<Vec3> nodes, CellType type, std::vector<std::size_t> connectivity,
       std::vector<std::size_t> dirichlet_nodes = {});

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t cell_count() const noexcept { return connectivity_.size() / nodes_per_cell(type_); }
  std::size_t dof_count() const noexcept { return 3 * nodes_.size(); }
  CellType cell_type() const noexcept { return type_; }

  const std::vector<Vec3>& nodes() const noexcept { return nodes_; }
  const Vec3& node(std::size_t i) const { return nodes_[i]; }
  std::span<const std::size_t> cell(std::size_t e) const {
    const std::size_t n = nodes_per_cell(type_);
    return {connectivity_.data() + e * n, n};
  }
  const std::vector<std::size_t>& connectivity() const noexcept { return connectivity_; }

  const std::vector<std::size_t>& dirichlet_nodes() const noexcept { return dirichlet_; }
  bool is_dirichlet(std::size_t node) const { return dirichlet_mask_[node] != 0; }

  const SurfaceMesh& boundary() const noexcept { return boundary_; }
  bool is_boundary(std::size_t node) const { return boundary_mask_[node] != 0; }

  std::span<const QuadPoint> quadrature(std::size_t e) const {
    const std::size_t q = quad_points_per_cell(type_);
    return {quad_.data() + e * q, q};
  }

  double volume() const;
  double element_volume(std::size_t e) const;
  /// Length of the bounding-box diagonal of the reference configuration.
  double diameter() const;
  /// FNV-1a hash of nodes, connectivity and Dirichlet set; identifies the mesh
  /// a model or dataset was produced for.
  std::uint64_t hash() const;

  Mesh with_dirichlet(std::vector<std::size_t> dirichlet_nodes) const;

  /// Reference positions flattened like a NodalField.
  NodalField positions() const;

 private:
  std::vector<Vec3> nodes_;
  CellType type_;
  std::vector<std::size_t> connectivity_;
  std::vector<std::size_t> dirichlet_;
  std::vector<char> dirichlet_mask_;
  std::vector<char> boundary_mask_;
  SurfaceMesh boundary_;
  std::vector<QuadPoint> quad_;
};

/// Structured hexahedral beam [0,lx]x[0,ly]x[0,lz] with nx*ny*nz cells, clamped
/// on the x = 0 face.
Mesh build_beam_mesh(int nx, int ny, int nz, const std::array<double, 3>& lengths);

/// Same grid as build_beam_mesh with every hexahedron split into six
/// tetrahedra around its main diagonal (conforming across cells).
Mesh build_tet_beam_mesh(int nx, int ny, int nz, const std::array<double, 3>& lengths);

/// Boundary faces (faces owned by exactly one cell), quads split into two
/// triangles along the diagonal through the lowest node id.
/// Throws InvalidMesh on a face shared by more than two cells.
SurfaceMesh extract_boundary(CellType type, std::span<const std::size_t> connectivity,
                             std::size_t node_count);
inline SurfaceMesh extract_boundary(const Mesh& mesh) {
  return extract_boundary(mesh.cell_type(), mesh.connectivity(), mesh.node_count());
}

/// Signed volume enclosed by a triangulated surface (divergence theorem).
double enclosed_volume(const SurfaceMesh& surface, const std::vector<Vec3>& positions);

/// Node positions displaced by u.
std::vector<Vec3> deformed_positions(const Mesh& mesh, const NodalField& u);

/// Zeroes the entries of f on Dirichlet nodes.
void zero_dirichlet(const Mesh& mesh, NodalField& f);

/// Nodes whose coordinate along `axis` is within tol of `value`.
std::vector<std::size_t> nodes_on_plane(const Mesh& mesh, int axis, double value,
                                        double tol = 1e-12);

}  // namespace hyperreg
