#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperreg/mesh.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

struct NamedField {
  std::string name;
  NodalField values;
};

struct NamedCellScalars {
  std::string name;
  std::vector<double> values;
};

/// Contents of a legacy VTK unstructured-grid file.
struct MeshFile {
  Mesh mesh;
  std::vector<NamedField> point_vectors;
  std::vector<NamedCellScalars> cell_scalars;

  const NodalField* field(std::string_view name) const;
};

/// Shortest decimal that round-trips is not guaranteed by every reader, so all
/// writers emit 17 significant digits.
std::string format_double(double v);

/// Parses legacy ASCII VTK 3.0 UNSTRUCTURED_GRID text (hex type 12 or tet type 10,
/// one type per file). Throws ParseError carrying the 1-based line number.
MeshFile parse_vtk(std::string_view text, std::vector<std::size_t> dirichlet_nodes = {});
std::string write_vtk(const Mesh& mesh, const std::vector<NamedField>& point_vectors = {},
                      const std::vector<NamedCellScalars>& cell_scalars = {},
                      std::string_view title = "hyperreg mesh");

/// Loads a VTK file; Dirichlet nodes come from the sidecar next to it when present.
MeshFile load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               const std::vector<NamedField>& point_vectors = {},
               const std::vector<NamedCellScalars>& cell_scalars = {});

/// `mesh.vtk` -> `mesh.dirichlet.json`
std::filesystem::path dirichlet_sidecar_path(const std::filesystem::path& mesh_path);
std::vector<std::size_t> load_dirichlet(const std::filesystem::path& path);
void save_dirichlet(const std::vector<std::size_t>& nodes, const std::filesystem::path& path);

/// Whitespace-separated `x y z` per line.
std::vector<Vec3> parse_point_cloud(std::string_view text);
std::string write_point_cloud(const std::vector<Vec3>& points);
std::vector<Vec3> load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const std::vector<Vec3>& points, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so a failed write leaves no partial output.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hyperreg
