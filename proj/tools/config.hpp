#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperreg/datagen.hpp"
#include "hyperreg/hyperelastic.hpp"
#include "hyperreg/mesh.hpp"
#include "hyperreg/registration.hpp"
#include "hyperreg/surrogate.hpp"

namespace hyperreg::cli {

/// Bad flags or an invalid configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeshConfig {
  std::optional<std::filesystem::path> path;  // VTK file; otherwise a generated beam
  std::array<int, 3> beam{19, 4, 4};
  std::array<double, 3> lengths{1.0, 0.2, 0.2};
  std::string cell = "hex";  // hex | tet
  double dirichlet_x = 0.0;  // clamped plane for generated beams
};

struct DatagenSection {
  std::size_t n = 1000;
  int max_attempts_per_pair = 8;
};

struct TrainSection {
  TrainConfig train;
  std::size_t transitions = 4;
  std::vector<std::size_t> hidden;  // widths of hidden layers; empty means the DOF count
};

struct ScenarioSection {
  std::size_t count = 20;
  std::vector<std::uint64_t> indices;  // overrides 0..count-1
  std::size_t points = 1000;
  std::size_t markers = 0;
  VisibleRegion visible;
  std::optional<ForceSpec> force_spec;  // defaults to the top-level one

  std::vector<std::uint64_t> scenario_indices() const;
};

struct RegistrationSection {
  RegistrationConfig cfg;
  bool alpha_given = false;  // otherwise default_alpha(mesh, gmax)
  std::string support = "true";  // true | whole_boundary
};

struct Paths {
  std::filesystem::path out_dir = ".";
  std::filesystem::path dataset = "dataset.bin";
  std::filesystem::path model = "model.bin";
  std::optional<std::filesystem::path> cloud;

  /// Relative entries resolve against out_dir.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  MeshConfig mesh;
  Material material = Material::from_young_poisson(4500.0, 0.49);
  ForceSpec force_spec;
  NewtonOptions newton;
  DatagenSection datagen;
  TrainSection train;
  ScenarioSection scenario;
  RegistrationSection registration;
  Paths paths;

  /// Full document with defaults filled in; what the manifest records.
  nlohmann::json to_json() const;
};

/// Strict parse: unknown keys and wrong types raise UsageError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

Mesh build_mesh(const MeshConfig& m);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace hyperreg::cli
