#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperreg/geomdist.hpp"
#include "hyperreg/hyperelastic.hpp"
#include "hyperreg/mesh.hpp"
#include "hyperreg/rng.hpp"
#include "hyperreg/surrogate.hpp"

namespace hyperreg {

/// Distribution of local loads: a patch of boundary vertices grown from a
/// random seed vertex carries one net force with uniform direction and
/// magnitude in [gmin, gmax], spread with hat weights.
struct ForceSpec {
  std::vector<std::size_t> region;  // allowed nodes; empty means the whole boundary
  int patch_depth = 1;              // ring depth over boundary edges
  double gmin = 0.0;                // N, net force
  double gmax = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ForceSpec from_json(const nlohmann::json& j);
};

/// Boundary, non-Dirichlet nodes allowed by the spec, sorted.
std::vector<std::size_t> allowed_force_nodes(const Mesh& mesh, const ForceSpec& spec);

NodalField sample_force(const Mesh& mesh, const ForceSpec& spec, Rng& rng);

struct DatagenOptions {
  NewtonOptions newton;
  int max_attempts_per_pair = 8;
  unsigned threads = 1;
};

/// n certified pairs; pair j draws from its own stream stream_seed(spec.seed, j)
/// so the result does not depend on scheduling.
Dataset generate_dataset(const Mesh& mesh, const Material& material, const ForceSpec& spec,
                         std::size_t n, const DatagenOptions& opts = {});

void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Triangles of the deformed surface are visible when their unit normal n
/// satisfies n . direction > min_cosine and, optionally, their centroid c
/// satisfies c . plane_normal >= plane_offset.
struct VisibleRegion {
  bool whole_boundary = false;
  Vec3 direction{1.0, 1.0, 1.0};
  double min_cosine = 0.1;
  std::optional<std::pair<Vec3, double>> half_space;

  nlohmann::json to_json() const;
  static VisibleRegion from_json(const nlohmann::json& j);
};

std::vector<std::size_t> visible_triangles(const Mesh& mesh, const NodalField& u,
                                           const VisibleRegion& region);

/// Area-uniform samples over the given triangles of the deformed surface.
PointCloud sample_surface(const Mesh& mesh, const NodalField& u,
                          const std::vector<std::size_t>& triangles, std::size_t m, Rng& rng);

struct Scenario {
  NodalField g;
  NodalField u;
  PointCloud cloud;
  std::vector<std::size_t> visible;  // triangle indices into mesh.boundary()
  std::vector<std::size_t> markers;  // node ids, sorted
  std::vector<std::size_t> support;  // nodes carrying force, sorted
};

/// `markers` = 0 selects every eligible node (non-visible, boundary, non-Dirichlet).
Scenario make_scenario(const Mesh& mesh, const Material& material, const ForceSpec& spec,
                       const VisibleRegion& visible, std::size_t m, std::size_t markers, Rng& rng,
                       const NewtonOptions& newton = {});

/// Scenario from a given load instead of a sampled one.
Scenario make_scenario(const Mesh& mesh, const Material& material, const NodalField& g,
                       const VisibleRegion& visible, std::size_t m, std::size_t markers, Rng& rng,
                       const NewtonOptions& newton = {});

}  // namespace hyperreg
