#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hyperreg/errors.hpp"

using namespace hyperreg::cli;

int main(int argc, char** argv) {
  CLI::App app{"Surface registration with a hyperelastic model and a learned surrogate", "hyperreg"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed, overrides the config");
  app.add_option("--threads", threads, "Worker threads, overrides the config")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory (mesh-gen: output mesh file)");

  MeshGenArgs mg;
  auto* mesh_gen = app.add_subcommand("mesh-gen", "Write a structured beam mesh and its Dirichlet sidecar");
  mesh_gen->add_option("--beam", mg.beam, "Cell counts nx ny nz")->required();
  mesh_gen->add_option("--lengths", mg.lengths, "Edge lengths in m")->capture_default_str();
  mesh_gen->add_option("--dirichlet", mg.dirichlet_x, "Clamp the nodes on the plane x = x0")->capture_default_str();
  mesh_gen->add_flag("--tet", mg.tet, "Split each hexahedron into six tetrahedra");

  auto* datagen = app.add_subcommand("datagen", "Generate certified force/displacement pairs");
  auto* train = app.add_subcommand("train", "Train the surrogate network on a dataset");
  std::string backend;
  bool certify = false;
  auto* reg = app.add_subcommand("register", "Register a point cloud");
  auto* bench = app.add_subcommand("benchmark", "Register a batch of scenarios and summarize");
  for (auto* sub : {reg, bench}) {
    sub->add_option("--backend", backend, "newton or surrogate")->check(CLI::IsMember({"newton", "surrogate"}));
    sub->add_flag("--certify", certify, "Recompute the surrogate result with the Newton solver");
  }
  for (auto* sub : {mesh_gen, datagen, train, reg, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Invocation inv;
  inv.argv.assign(argv, argv + argc);
  try {
    auto* sub = app.get_subcommands().front();
    inv.command = sub->get_name();
    if (sub == mesh_gen) {
      mg.out = out;
      if (mg.out.empty()) throw UsageError("mesh-gen: --out is required");
      cmd_mesh_gen(mg, inv);
      return 0;
    }
    RunConfig cfg = config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!out.empty()) cfg.paths.out_dir = out;
    if (!backend.empty()) cfg.registration.cfg.backend = hyperreg::backend_from_string(backend);
    if (certify) cfg.registration.cfg.certify = true;
    if (sub == datagen) cmd_datagen(cfg, inv);
    else if (sub == train) cmd_train(cfg, inv);
    else if (sub == reg) cmd_register(cfg, inv);
    else cmd_benchmark(cfg, inv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
