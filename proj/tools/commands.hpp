#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace hyperreg::cli {

struct Invocation {
  std::string command;
  std::vector<std::string> argv;
};

struct MeshGenArgs {
  std::array<int, 3> beam{};
  std::array<double, 3> lengths{1.0, 0.2, 0.2};
  double dirichlet_x = 0.0;
  bool tet = false;
  std::filesystem::path out;
};

void cmd_mesh_gen(const MeshGenArgs& args, const Invocation& inv);
void cmd_datagen(const RunConfig& cfg, const Invocation& inv);
void cmd_train(const RunConfig& cfg, const Invocation& inv);
void cmd_register(const RunConfig& cfg, const Invocation& inv);
void cmd_benchmark(const RunConfig& cfg, const Invocation& inv);

/// Seed of scenario `index`; kept apart from the dataset streams.
std::uint64_t scenario_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace hyperreg::cli
