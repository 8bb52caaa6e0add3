#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Core>

#include "hyperreg/datagen.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/io.hpp"
#include "hyperreg/metrics.hpp"
#include "hyperreg/registration.hpp"

#ifndef HYPERREG_VERSION
#define HYPERREG_VERSION "0.0.0"
#endif

namespace hyperreg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Files written by a command; removed again unless the command completes.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : files_) fs::remove(p, ec);
  }
  /// Runs write(path) and records the path once it succeeded.
  template <class F>
  void emit(const fs::path& p, F&& write) {
    write(p);
    files_.push_back(p);
  }
  json names() const {
    json out = json::array();
    for (const auto& p : files_) out.push_back(p.lexically_relative(dir_).generic_string());
    return out;
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool committed_ = false;
};

json versions() {
  return {{"hyperreg", HYPERREG_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

void write_manifest(const fs::path& dir, const Invocation& inv, const json& config, std::uint64_t seed,
                    const json& wall_times, Outputs& outputs, const json& extra = json::object()) {
  const std::string dumped = config.dump();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(dumped)));
  json m;
  m["command"] = inv.command;
  m["argv"] = inv.argv;
  m["config"] = config;
  m["config_hash"] = hash;
  m["seed"] = seed;
  m["versions"] = versions();
  m["wall_time_s"] = wall_times;
  m["outputs"] = outputs.names();
  for (const auto& [k, v] : extra.items()) m[k] = v;
  outputs.emit(dir / (inv.command + ".manifest.json"), [&](const fs::path& p) { write_file(p, m.dump(2) + "\n"); });
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.paths.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.paths.out_dir.string() + ": " + ec.message());
  return cfg.paths.out_dir;
}

const ForceSpec& scenario_spec(const RunConfig& cfg) {
  return cfg.scenario.force_spec ? *cfg.scenario.force_spec : cfg.force_spec;
}

double registration_alpha(const RunConfig& cfg, const Mesh& mesh) {
  return cfg.registration.alpha_given ? cfg.registration.cfg.alpha : default_alpha(mesh, scenario_spec(cfg).gmax);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

EvalReport evaluate_run(const Mesh& mesh, const PointCloud& cloud, const RegistrationResult& r, const Scenario* truth) {
  EvalReport rep;
  rep.surface = surface_error(mesh, r.u, cloud);
  rep.tre = {kNaN, kNaN};
  rep.force = {kNaN, kNaN};
  if (truth) {
    if (!truth->markers.empty()) rep.tre = tre(r.u, truth->u, truth->markers);
    if (truth->g.norm() > 0.0) rep.force = force_error(r.g, truth->g);
  }
  rep.time_forward = r.times.forward;
  rep.time_distance = r.times.distance;
  rep.time_backward = r.times.backward;
  rep.time_total = r.total_time;
  rep.iterations = r.iterations;
  return rep;
}

Scenario build_scenario(const RunConfig& cfg, const Mesh& mesh, std::uint64_t index) {
  ForceSpec spec = scenario_spec(cfg);
  spec.seed = scenario_seed(cfg.seed, index);
  Rng rng(spec.seed);
  const auto& s = cfg.scenario;
  return make_scenario(mesh, cfg.material, spec, s.visible, s.points, s.markers, rng, cfg.newton);
}

AdmissibleSet admissible_for(const RunConfig& cfg, const Mesh& mesh, const Scenario* sc) {
  if (cfg.registration.support == "true" && sc) return AdmissibleSet::from_nodes(mesh, sc->support);
  return AdmissibleSet::whole_boundary(mesh);
}

std::string history_csv(const RegistrationResult& r) {
  std::string s = "iteration,objective,projected_gradient_norm\n";
  for (std::size_t k = 0; k < r.objective.size(); ++k)
    s += std::to_string(k) + "," + format_g9(r.objective[k]) + "," + format_g9(r.gradient_norm[k]) + "\n";
  return s;
}

}  // namespace

std::uint64_t scenario_seed(std::uint64_t seed, std::uint64_t index) {
  return stream_seed(mix_seed(seed ^ 0x7363656e6172696fULL), index);
}

void cmd_mesh_gen(const MeshGenArgs& a, const Invocation& inv) {
  const auto t0 = Clock::now();
  for (int n : a.beam)
    if (n < 1) throw UsageError("--beam: cell counts must be positive");
  for (double l : a.lengths)
    if (!(l > 0)) throw UsageError("--lengths: must be positive");
  if (a.out.empty()) throw UsageError("mesh-gen: --out is required");
  Mesh mesh = a.tet ? build_tet_beam_mesh(a.beam[0], a.beam[1], a.beam[2], a.lengths)
                    : build_beam_mesh(a.beam[0], a.beam[1], a.beam[2], a.lengths);
  auto clamp = nodes_on_plane(mesh, 0, a.dirichlet_x, 1e-9);
  if (clamp.empty()) throw UsageError("--dirichlet: no nodes on the plane x = " + format_g9(a.dirichlet_x));
  mesh = mesh.with_dirichlet(std::move(clamp));

  fs::path dir = a.out.parent_path();
  if (dir.empty()) dir = ".";
  std::error_code ec;
  fs::create_directories(dir, ec);
  Outputs out(dir);
  out.emit(a.out, [&](const fs::path& p) { save_mesh(mesh, p); });
  out.emit(dirichlet_sidecar_path(a.out), [&](const fs::path& p) { save_dirichlet(mesh.dirichlet_nodes(), p); });
  const json config = {{"beam", a.beam}, {"lengths", a.lengths}, {"dirichlet", a.dirichlet_x},
                       {"cell", a.tet ? "tet" : "hex"}, {"out", a.out.string()}};
  write_manifest(dir, inv, config, 0, {{"total", since(t0)}}, out,
                 {{"nodes", mesh.node_count()}, {"cells", mesh.cell_count()}});
  out.commit();
}

void cmd_datagen(const RunConfig& cfg, const Invocation& inv) {
  const auto t0 = Clock::now();
  const fs::path dir = prepare_out_dir(cfg);
  const Mesh mesh = build_mesh(cfg.mesh);
  ForceSpec spec = cfg.force_spec;
  spec.seed = cfg.seed;
  DatagenOptions opts;
  opts.newton = cfg.newton;
  opts.max_attempts_per_pair = cfg.datagen.max_attempts_per_pair;
  opts.threads = cfg.threads;
  const auto t1 = Clock::now();
  const Dataset data = generate_dataset(mesh, cfg.material, spec, cfg.datagen.n, opts);
  const double gen = since(t1);
  Outputs out(dir);
  out.emit(cfg.paths.resolve(cfg.paths.dataset), [&](const fs::path& p) { save_dataset(data, p); });
  write_manifest(dir, inv, cfg.to_json(), cfg.seed, {{"generate", gen}, {"total", since(t0)}}, out,
                 {{"pairs", data.size()}, {"rejected_solves", data.metadata.value("rejected_solves", 0)}});
  out.commit();
}

void cmd_train(const RunConfig& cfg, const Invocation& inv) {
  const auto t0 = Clock::now();
  const fs::path dir = prepare_out_dir(cfg);
  const Mesh mesh = build_mesh(cfg.mesh);
  const Dataset data = load_dataset(cfg.paths.resolve(cfg.paths.dataset));
  if (data.mesh_hash != mesh.hash()) throw IncompatibleModel("dataset was generated for a different mesh");

  Mlp init;
  if (cfg.train.hidden.empty()) {
    init = Mlp::for_mesh(mesh, cfg.seed, cfg.train.transitions);
  } else {
    std::vector<std::size_t> sizes{mesh.dof_count()};
    sizes.insert(sizes.end(), cfg.train.hidden.begin(), cfg.train.hidden.end());
    sizes.push_back(mesh.dof_count());
    init = Mlp(sizes, cfg.seed);
    init.mesh_hash = mesh.hash();
  }
  TrainConfig tc = cfg.train.train;
  tc.seed = cfg.seed;
  const auto t1 = Clock::now();
  const TrainResult res = train(init, data, tc);
  const double fit = since(t1);

  Outputs out(dir);
  out.emit(cfg.paths.resolve(cfg.paths.model), [&](const fs::path& p) { save_mlp(res.mlp, p); });
  std::string hist = "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < res.history.size(); ++e)
    hist += std::to_string(e + 1) + "," + format_g9(res.history[e].train_mse) + "," +
            format_g9(res.history[e].val_mse) + "\n";
  out.emit(dir / "train_history.csv", [&](const fs::path& p) { write_file(p, hist); });
  write_manifest(dir, inv, cfg.to_json(), cfg.seed, {{"train", fit}, {"total", since(t0)}}, out,
                 {{"best_epoch", res.best_epoch}, {"parameters", res.mlp.parameter_count()}});
  out.commit();
}

void cmd_register(const RunConfig& cfg, const Invocation& inv) {
  const auto t0 = Clock::now();
  const fs::path dir = prepare_out_dir(cfg);
  const Mesh mesh = build_mesh(cfg.mesh);

  std::optional<Scenario> sc;
  PointCloud cloud;
  if (cfg.paths.cloud) {
    cloud = PointCloud(load_point_cloud(cfg.paths.resolve(*cfg.paths.cloud)));
  } else {
    sc = build_scenario(cfg, mesh, cfg.scenario.scenario_indices().front());
    cloud = sc->cloud;
  }
  std::optional<Mlp> model;
  if (cfg.registration.cfg.backend == Backend::Surrogate) model = load_mlp(cfg.paths.resolve(cfg.paths.model));

  RegistrationConfig rc = cfg.registration.cfg;
  rc.alpha = registration_alpha(cfg, mesh);
  const RegistrationProblem problem{&mesh, cfg.material, &cloud, admissible_for(cfg, mesh, sc ? &*sc : nullptr),
                                    model ? &*model : nullptr};
  const RegistrationResult r = register_cloud(problem, rc);
  const EvalReport rep = evaluate_run(mesh, cloud, r, sc ? &*sc : nullptr);

  Outputs out(dir);
  std::vector<NamedField> fields{{"u_registered", r.u}, {"g_registered", r.g}};
  if (sc) {
    fields.push_back({"u_true", sc->u});
    fields.push_back({"g_true", sc->g});
    out.emit(dir / "cloud.xyz", [&](const fs::path& p) { save_point_cloud(cloud.points(), p); });
  }
  out.emit(dir / "result.vtk", [&](const fs::path& p) { save_mesh(mesh, p, fields); });
  out.emit(dir / "report.csv", [&](const fs::path& p) { write_file(p, reports_csv({rep})); });
  out.emit(dir / "history.csv", [&](const fs::path& p) { write_file(p, history_csv(r)); });
  write_manifest(dir, inv, cfg.to_json(), cfg.seed,
                 {{"forward", r.times.forward}, {"distance", r.times.distance}, {"backward", r.times.backward},
                  {"registration", r.total_time}, {"total", since(t0)}},
                 out,
                 {{"alpha", rc.alpha}, {"termination", to_string(r.termination)}, {"certified", r.certified},
                  {"evaluations", r.evaluations}});
  out.commit();
}

void cmd_benchmark(const RunConfig& cfg, const Invocation& inv) {
  const auto t0 = Clock::now();
  const fs::path dir = prepare_out_dir(cfg);
  const Mesh mesh = build_mesh(cfg.mesh);
  const auto indices = cfg.scenario.scenario_indices();
  const fs::path model_path = cfg.paths.resolve(cfg.paths.model);
  std::optional<Mlp> model;
  if (cfg.registration.cfg.backend == Backend::Surrogate || fs::exists(model_path)) model = load_mlp(model_path);
  if (model) model->check_compatible(mesh);

  RegistrationConfig rc = cfg.registration.cfg;
  rc.alpha = registration_alpha(cfg, mesh);

  struct Row {
    EvalReport report;
    double newton_eval = kNaN, surrogate_eval = kNaN;
  };
  std::vector<Row> rows(indices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < indices.size(); k = next++) {
      try {
        const Scenario sc = build_scenario(cfg, mesh, indices[k]);
        const AdmissibleSet adm = admissible_for(cfg, mesh, &sc);
        const RegistrationProblem problem{&mesh, cfg.material, &sc.cloud, adm, model ? &*model : nullptr};
        const RegistrationResult r = register_cloud(problem, rc);
        rows[k].report = evaluate_run(mesh, sc.cloud, r, &sc);
        if (model) {
          // one evaluation of each chain at the true load
          HyperelasticModel hm(mesh, cfg.material);
          const auto en = eval_phi_newton(sc.g, hm, sc.cloud, rc.alpha, adm, cfg.newton);
          const auto es = eval_phi_surrogate(sc.g, *model, mesh, sc.cloud, rc.alpha, adm);
          rows[k].newton_eval = en.times.forward + en.times.backward;
          rows[k].surrogate_eval = es.times.forward + es.times.backward;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = indices.size();
      }
    }
  };
  const unsigned nthreads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(indices.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<EvalReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  auto summary = summarize_runs(reports);
  json extra = {{"alpha", rc.alpha}, {"backend", to_string(rc.backend)}, {"scenarios", indices}};
  if (model) {
    auto stat = [&](const char* name, auto get) {
      MetricSummary m{name, 0.0, 0.0};
      for (const auto& r : rows) m.mean += get(r) / static_cast<double>(rows.size());
      double ss = 0.0;
      for (const auto& r : rows) ss += std::pow(get(r) - m.mean, 2);
      m.std = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
      return m;
    };
    const auto tn = stat("newton_eval_time_s", [](const Row& r) { return r.newton_eval; });
    const auto ts = stat("surrogate_eval_time_s", [](const Row& r) { return r.surrogate_eval; });
    summary.push_back(tn);
    summary.push_back(ts);
    summary.push_back({"newton_surrogate_time_ratio", tn.mean / ts.mean, 0.0});
    extra["newton_surrogate_time_ratio"] = tn.mean / ts.mean;
  }

  Outputs out(dir);
  out.emit(dir / "benchmark.csv", [&](const fs::path& p) { write_file(p, reports_csv(reports)); });
  out.emit(dir / "summary.csv", [&](const fs::path& p) { write_file(p, summary_csv(summary)); });
  write_manifest(dir, inv, cfg.to_json(), cfg.seed, {{"total", since(t0)}}, out, extra);
  out.commit();
}

}  // namespace hyperreg::cli
