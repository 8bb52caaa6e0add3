// Acceptance checks. Usage: acceptance [criterion ...]; no argument runs all.
// Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "../support/oracles.hpp"
#include "hyperreg/datagen.hpp"
#include "hyperreg/io.hpp"
#include "hyperreg/metrics.hpp"
#include "hyperreg/registration.hpp"

#ifndef HYPERREG_CLI
#error "HYPERREG_CLI must name the command-line executable"
#endif

using namespace hyperreg;
using namespace hyperreg::testing;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Material kTissue = Material::from_young_poisson(4500.0, 0.49);

const Mesh& small_beam() {
  static const Mesh m = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2});
  return m;
}

const Mesh& paper_beam() {
  static const Mesh m = build_beam_mesh(19, 4, 4, {1, 0.2, 0.2});
  return m;
}

NodalField random_admissible(const AdmissibleSet& adm, std::size_t nodes, Rng& rng, double scale) {
  VectorXd x(static_cast<Eigen::Index>(adm.size()));
  for (auto& v : x) v = scale * rng.normal();
  return adm.expand(x, nodes);
}

using Features = std::vector<std::vector<std::size_t>>;

Features features_at(const Mesh& mesh, const NodalField& u, const PointCloud& cloud) {
  const auto e = evaluate_J(mesh, u, cloud);
  Features f;
  for (const auto& r : e.records) f.push_back(closest_feature(mesh.boundary(), r));
  return f;
}

/// Central-difference gradient over the admissible DOFs. `stable(x)` reports
/// whether the objective is smooth between the base point and x.
struct FdGradient {
  VectorXd grad;
  bool stable = true;
};

FdGradient fd_gradient(const std::function<double(const NodalField&)>& phi,
                       const std::function<bool(const NodalField&)>& same_branch, const NodalField& g,
                       const AdmissibleSet& adm, double h) {
  FdGradient out;
  out.grad.resize(static_cast<Eigen::Index>(adm.size()));
  for (std::size_t k = 0; k < adm.size(); ++k) {
    NodalField gp = g, gm = g;
    gp.vec()[static_cast<Eigen::Index>(adm.dofs[k])] += h;
    gm.vec()[static_cast<Eigen::Index>(adm.dofs[k])] -= h;
    if (!same_branch(gp) || !same_branch(gm)) {
      out.stable = false;
      return out;
    }
    out.grad[static_cast<Eigen::Index>(k)] = (phi(gp) - phi(gm)) / (2 * h);
  }
  return out;
}

// 1. surrogate gradient chain against finite differences
Outcome gradient_chain() {
  const Mesh& beam = small_beam();
  const auto adm = AdmissibleSet::whole_boundary(beam);
  Mlp mlp = Mlp::for_mesh(beam, 11);
  mlp.output_scale.setConstant(0.01);  // displacements of centimetres
  Rng rng(101);
  const PointCloud cloud = noisy_surface_cloud(beam, NodalField(beam.node_count()), 200, 0.02, rng);
  const double alpha = default_alpha(beam, 4.0);

  auto predicted = [&](const NodalField& g) {
    NodalField u = predict(mlp, g);
    zero_dirichlet(beam, u);
    return u;
  };
  auto signs = [&](const NodalField& g) {
    std::vector<bool> s;
    const auto cache = forward(mlp, g).second;
    for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l)
      for (double v : cache.pre[l]) s.push_back(v > 0);
    return s;
  };

  double worst = 0.0;
  int checked = 0, redrawn = 0;
  while (checked < 20) {
    const NodalField g = random_admissible(adm, beam.node_count(), rng, 0.1);
    const auto base_signs = signs(g);
    const auto base_features = features_at(beam, predicted(g), cloud);
    auto same = [&](const NodalField& x) {
      return signs(x) == base_signs && features_at(beam, predicted(x), cloud) == base_features;
    };
    auto phi = [&](const NodalField& x) { return eval_phi_surrogate(x, mlp, beam, cloud, alpha, adm).value; };
    const auto fd = fd_gradient(phi, same, g, adm, 1e-6);
    if (!fd.stable) {
      if (++redrawn > 40) return {false, "too many non-smooth sample points"};
      continue;
    }
    const VectorXd an = adm.restrict(eval_phi_surrogate(g, mlp, beam, cloud, alpha, adm).gradient);
    worst = std::max(worst, (fd.grad - an).norm() / an.norm());
    ++checked;
  }
  return {worst <= 1e-5, fmt("max relative error %.2e over %d points (limit 1e-5, %d redrawn at kinks)", worst,
                             checked, redrawn)};
}

// 2. Newton + adjoint gradient against finite differences of full solves
Outcome newton_adjoint() {
  const Mesh& beam = small_beam();
  const auto adm = AdmissibleSet::whole_boundary(beam);
  HyperelasticModel model(beam, kTissue);
  Rng rng(202);
  const NodalField target = random_admissible(adm, beam.node_count(), rng, 0.05);
  const PointCloud cloud = noisy_surface_cloud(beam, model.solve(target, {}).u, 200, 0.01, rng);
  const double alpha = default_alpha(beam, 4.0);
  NewtonOptions tight;
  tight.tolerance = 1e-12;

  double worst = 0.0;
  int checked = 0, redrawn = 0;
  while (checked < 5) {
    const NodalField g = random_admissible(adm, beam.node_count(), rng, 0.05);
    const auto base = features_at(beam, model.solve(g, tight).u, cloud);
    auto same = [&](const NodalField& x) { return features_at(beam, model.solve(x, tight).u, cloud) == base; };
    auto phi = [&](const NodalField& x) { return eval_phi_newton(x, model, cloud, alpha, adm, tight).value; };
    const auto fd = fd_gradient(phi, same, g, adm, 1e-6);
    if (!fd.stable) {
      if (++redrawn > 20) return {false, "too many correspondence switches"};
      continue;
    }
    const VectorXd an = adm.restrict(eval_phi_newton(g, model, cloud, alpha, adm, tight).gradient);
    worst = std::max(worst, (fd.grad - an).norm() / an.norm());
    ++checked;
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over %d points (limit 1e-4, %d redrawn)", worst, checked,
                             redrawn)};
}

// 3. energy, residual and tangent consistency; K(0) against small-strain elasticity
Outcome hyperelastic_consistency() {
  Rng rng(303);
  double worst_r = 0.0, worst_k = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Mesh mesh = random_box_mesh(rng);
    HyperelasticModel model(mesh, kTissue);
    const NodalField u = random_field(mesh, rng, 0.01);
    const VectorXd r = model.residual(u).vec();
    VectorXd fd = VectorXd::Zero(r.size());
    for (Eigen::Index d = 0; d < r.size(); ++d) {
      if (mesh.is_dirichlet(static_cast<std::size_t>(d / 3))) continue;
      const double h = 1e-6 * (1.0 + std::abs(u.vec()[d]));
      NodalField up = u, um = u;
      up.vec()[d] += h;
      um.vec()[d] -= h;
      fd[d] = (model.energy(up) - model.energy(um)) / (2 * h);
    }
    worst_r = std::max(worst_r, max_abs(fd - r) / max_abs(r));

    const NodalField delta = random_field(mesh, rng, 1.0);
    const double h = 1e-6;
    const VectorXd fk = (model.residual(u + h * delta).vec() - model.residual(u - h * delta).vec()) / (2 * h);
    const VectorXd kd = model.tangent(u) * delta.vec();
    worst_k = std::max(worst_k, (fk - kd).norm() / kd.norm());
  }
  double worst_lin = 0.0;
  for (const Mesh& mesh : {small_beam(), build_tet_beam_mesh(4, 2, 2, {1, 0.2, 0.2})}) {
    const Eigen::MatrixXd K(tangent(mesh, kTissue, NodalField(mesh.node_count())));
    const Eigen::MatrixXd ref = linear_elastic_stiffness(mesh, 4500.0, 0.49);
    worst_lin = std::max(worst_lin, (K - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
  }
  return {worst_r <= 1e-6 && worst_k <= 1e-5 && worst_lin <= 1e-9,
          fmt("residual %.2e (1e-6), tangent %.2e (1e-5), K(0) %.2e (1e-9) over 50 instances", worst_r, worst_k,
              worst_lin)};
}

// 4. surrogate chain with an exact solver equals the Newton chain
Outcome backend_agreement() {
  const Mesh& beam = small_beam();
  const auto adm = AdmissibleSet::whole_boundary(beam);
  HyperelasticModel model(beam, kTissue);
  const PerfectSurrogate perfect(beam, kTissue);
  Rng rng(404);
  double worst_v = 0.0, worst_g = 0.0;
  for (int k = 0; k < 10; ++k) {
    const NodalField g = random_admissible(adm, beam.node_count(), rng, 0.01);
    const PointCloud cloud = noisy_surface_cloud(beam, NodalField(beam.node_count()), 100, 0.02, rng);
    const auto a = eval_phi_surrogate(g, perfect, beam, cloud, 1e-3, adm);
    const auto b = eval_phi_newton(g, model, cloud, 1e-3, adm);
    worst_v = std::max(worst_v, std::abs(a.value - b.value) / std::abs(b.value));
    worst_g = std::max(worst_g, (a.gradient - b.gradient).norm() / b.gradient.norm());
  }
  return {worst_v <= 1e-10 && worst_g <= 1e-10,
          fmt("value %.2e, gradient %.2e over 10 inputs (limit 1e-10)", worst_v, worst_g)};
}

double net_force_error_pct(const NodalField& rec, const NodalField& ref) { return force_error(rec, ref).net_magnitude_pct; }

// 5. Newton-backend registration on self-generated beam scenarios
Outcome self_consistent_registration() {
  const Mesh& beam = paper_beam();
  const double length = 1.0;
  const ForceSpec spec;
  RegistrationConfig cfg;
  cfg.alpha = default_alpha(beam, spec.gmax);
  VisibleRegion whole;
  whole.whole_boundary = true;

  int ok = 0;
  double worst_dist = 0.0, worst_force = 0.0, mean_force = 0.0;
  int worst_iter = 0;
  std::string failures;
  for (int k = 0; k < 20; ++k) {
    Rng rng(stream_seed(2024, static_cast<std::uint64_t>(k)));
    const Scenario sc = make_scenario(beam, kTissue, spec, whole, 1000, 0, rng);
    const RegistrationProblem p{&beam, kTissue, &sc.cloud, AdmissibleSet::from_nodes(beam, sc.support), nullptr};
    const auto r = register_cloud(p, cfg);
    const double dist = surface_error(beam, r.u, sc.cloud).mean;
    const double ferr = net_force_error_pct(r.g, sc.g);
    const bool pass = dist <= 1e-3 * length && ferr <= 5.0 && r.termination == Termination::GradientTolerance &&
                      r.iterations <= 100;
    worst_dist = std::max(worst_dist, dist);
    worst_force = std::max(worst_force, ferr);
    worst_iter = std::max(worst_iter, r.iterations);
    mean_force += ferr / 20.0;
    if (pass)
      ++ok;
    else
      failures += fmt(" #%d(%.1f%%,%d it,%s)", k, ferr, r.iterations, to_string(r.termination));
  }
  return {ok == 20, fmt("%d/20 scenarios; worst surface %.2e m (1e-3), net force worst %.2f%% mean %.2f%% (5%%), "
                        "max iterations %d (100)%s%s",
                        ok, worst_dist, worst_force, mean_force, worst_iter, failures.empty() ? "" : "; failing:",
                        failures.c_str())};
}

// 6. surrogate trained on generated pairs; accuracy and registration quality
Outcome surrogate_quality() {
  const Mesh& beam = small_beam();
  const double length = 1.0;
  DatagenOptions opts;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());
  ForceSpec spec;
  spec.seed = 61;
  const Dataset data = generate_dataset(beam, kTissue, spec, 10000, opts);
  ForceSpec held_spec = spec;
  held_spec.seed = 62;
  const Dataset held = generate_dataset(beam, kTissue, held_spec, 500, opts);

  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 32;
  tc.epochs = 200;
  tc.seed = 63;
  const Mlp mlp = train(Mlp::for_mesh(beam, 63), data, tc).mlp;

  std::vector<double> rel;
  for (std::size_t i = 0; i < held.size(); ++i) {
    if (held.displacements[i].norm() == 0.0) continue;
    NodalField u = predict(mlp, held.forces[i]);
    zero_dirichlet(beam, u);
    rel.push_back((u - held.displacements[i]).norm() / held.displacements[i].norm());
  }
  std::nth_element(rel.begin(), rel.begin() + static_cast<long>(rel.size() / 2), rel.end());
  const double median = rel[rel.size() / 2];

  RegistrationConfig cfg;
  cfg.backend = Backend::Surrogate;
  cfg.alpha = default_alpha(beam, spec.gmax);
  VisibleRegion whole;
  whole.whole_boundary = true;
  int ok = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(stream_seed(2025, static_cast<std::uint64_t>(k)));
    const Scenario sc = make_scenario(beam, kTissue, ForceSpec{}, whole, 1000, 0, rng);
    const RegistrationProblem p{&beam, kTissue, &sc.cloud, AdmissibleSet::from_nodes(beam, sc.support), &mlp};
    const auto r = register_cloud(p, cfg);
    const double dist = surface_error(beam, r.u, sc.cloud).mean;
    worst = std::max(worst, dist);
    if (dist <= 1e-2 * length) ++ok;
  }
  return {median <= 0.05 && ok == 20,
          fmt("%zu training pairs; held-out median relative L2 %.2f%% (5%%); surrogate registration %d/20 within "
              "1e-2 m, worst %.2e m",
              data.size(), 100 * median, ok, worst)};
}

// helpers for the command-line criteria

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hyperreg_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HYPERREG_CLI + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

/// CSV rows with the timing columns removed.
std::vector<std::vector<std::string>> non_timing(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    std::vector<std::string> keep;
    for (std::size_t c = 0; c < r.size(); ++c)
      if (!is_timing_column(rows.front()[c])) keep.push_back(r[c]);
    out.push_back(keep);
  }
  return out;
}

// 7. surrogate evaluation against Newton + adjoint on the 304-cell beam
Outcome speed_ordering() {
  const fs::path dir = scratch_dir("speed");
  write_file(dir / "config.json", R"({
    "seed": 7,
    "mesh": {"beam": [19, 4, 4], "lengths": [1, 0.2, 0.2]},
    "datagen": {"n": 8},
    "train": {"epochs": 0},
    "scenario": {"count": 5, "points": 1000, "visible": {"whole_boundary": true}},
    "registration": {"backend": "surrogate", "max_iterations": 5},
    "paths": {"out_dir": "."}
  })");
  const std::string base = "--config \"" + (dir / "config.json").string() + "\" --out \"" + dir.string() + "\" ";
  if (run_cli(base + "datagen") != 0 || run_cli(base + "train") != 0 || run_cli(base + "benchmark") != 0)
    return {false, "benchmark pipeline failed"};
  std::map<std::string, double> summary;
  for (const auto& row : read_csv(dir / "summary.csv"))
    if (row.size() == 3 && row[0] != "metric") summary[row[0]] = std::stod(row[1]);
  const double ratio = summary["newton_surrogate_time_ratio"];
  return {ratio >= 10.0, fmt("Newton+adjoint %.1f ms, surrogate forward+backward %.2f ms, ratio %.1f (>= 10) "
                             "with %zu parameters",
                             1e3 * summary["newton_eval_time_s"], 1e3 * summary["surrogate_eval_time_s"], ratio,
                             Mlp::for_mesh(paper_beam(), 0).parameter_count())};
}

// 8. BVH and distance term against brute force
Outcome geometry_oracle() {
  const Mesh& beam = paper_beam();
  Rng rng(808);
  const NodalField u = random_field(beam, rng, 0.01);
  const auto x = deformed_positions(beam, u);
  const Bvh bvh(beam.boundary(), x);
  int mismatches = 0;
  for (int q = 0; q < 1000; ++q) {
    const Vec3 p(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 0.4), rng.uniform(-0.2, 0.4));
    const auto a = bvh.closest(p);
    const auto b = brute_force_closest(beam.boundary(), x, p);
    if (a.triangle != b.triangle || a.dist2 != b.dist2) ++mismatches;
  }
  double worst_j = 0.0, worst_rms = 0.0;
  for (int k = 0; k < 10; ++k) {
    const NodalField v = random_field(beam, rng, 0.01);
    const PointCloud cloud = noisy_surface_cloud(beam, v, 500, 0.05, rng);
    const double j = evaluate_J(beam, v, cloud).value;
    worst_j = std::max(worst_j, std::abs(j - brute_force_J(beam, v, cloud)) / j);
    const double rms = surface_error(beam, v, cloud).rms;
    worst_rms = std::max(worst_rms, std::abs(rms * rms - 2 * j) / (2 * j));
  }
  return {mismatches == 0 && worst_j <= 4 * std::numeric_limits<double>::epsilon() && worst_rms <= 1e-12,
          fmt("%d/1000 BVH mismatches; J vs brute force %.1e; rms^2 vs 2J %.1e", mismatches, worst_j, worst_rms)};
}

// 9. grad_J against finite differences at stable correspondences
Outcome distance_gradient() {
  const Mesh& beam = small_beam();
  Rng rng(909);
  int checked = 0, excluded = 0;
  double worst = 0.0;
  while (checked < 100) {
    const NodalField u = random_field(beam, rng, 0.005);
    const PointCloud cloud = noisy_surface_cloud(beam, u, 10, 0.03, rng);
    const NodalField delta = random_field(beam, rng, 1.0);
    const double h = 1e-7;
    const auto e0 = evaluate_J(beam, u, cloud);
    const auto ep = evaluate_J(beam, u + h * delta, cloud);
    const auto em = evaluate_J(beam, u - h * delta, cloud);
    bool stable = true;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      const auto f0 = closest_feature(beam.boundary(), e0.records[j]);
      stable = stable && f0 == closest_feature(beam.boundary(), ep.records[j]) &&
               f0 == closest_feature(beam.boundary(), em.records[j]);
    }
    if (!stable) {
      ++excluded;
      continue;
    }
    ++checked;
    const double fd = (ep.value - em.value) / (2 * h);
    const double an = grad_J(beam, u, cloud, e0).vec().dot(delta.vec());
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  const double rate = static_cast<double>(excluded) / (checked + excluded);
  return {worst <= 1e-5 && rate <= 0.2,
          fmt("max relative error %.2e (1e-5); %d excluded, rate %.1f%% (20%%)", worst, excluded, 100 * rate)};
}

// 10. reruns with fixed seeds reproduce every non-timing output
Outcome determinism() {
  const std::string config = R"({
    "seed": 5,
    "mesh": {"beam": [6, 2, 2], "lengths": [1, 0.2, 0.2]},
    "datagen": {"n": 60},
    "train": {"epochs": 4, "batch_size": 16, "learning_rate": 1e-3},
    "scenario": {"indices": [3, 3], "points": 400},
    "registration": {"backend": "newton"},
    "paths": {"out_dir": "."}
  })";
  std::vector<fs::path> dirs;
  for (const char* name : {"run_a", "run_b", "run_threads"}) {
    const fs::path d = scratch_dir(name);
    write_file(d / "config.json", config);
    const std::string threads = std::string(name) == "run_threads" ? " --threads 3" : "";
    const std::string base = "--config \"" + (d / "config.json").string() + "\" --out \"" + d.string() + "\"" + threads + " ";
    for (const char* cmd : {"datagen", "train", "register", "benchmark"})
      if (run_cli(base + cmd) != 0) return {false, std::string(cmd) + " failed in " + name};
    dirs.push_back(d);
  }
  std::vector<std::string> differing;
  for (std::size_t k = 1; k < dirs.size(); ++k) {
    for (const char* f : {"dataset.bin", "model.bin", "train_history.csv", "result.vtk", "cloud.xyz", "history.csv"})
      if (read_file(dirs[0] / f) != read_file(dirs[k] / f)) differing.push_back(dirs[k].filename().string() + "/" + f);
    for (const char* f : {"report.csv", "benchmark.csv"})
      if (non_timing(read_csv(dirs[0] / f)) != non_timing(read_csv(dirs[k] / f)))
        differing.push_back(dirs[k].filename().string() + "/" + f);
  }
  // the two benchmark rows come from the same scenario
  auto rows = non_timing(read_csv(dirs[0] / "benchmark.csv"));
  const bool twins = rows.size() == 3 && std::equal(rows[1].begin() + 1, rows[1].end(), rows[2].begin() + 1);
  std::string detail = differing.empty() ? "datagen, train, register and benchmark outputs identical across 3 runs"
                                         : "differs:";
  for (const auto& d : differing) detail += " " + d;
  if (!twins) detail += "; repeated scenario rows differ";
  return {differing.empty() && twins, detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime limit
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "surrogate gradient chain", 10, gradient_chain},
    {2, "Newton adjoint gradient", 120, newton_adjoint},
    {3, "hyperelastic consistency", 0, hyperelastic_consistency},
    {4, "backend agreement", 0, backend_agreement},
    {5, "self-consistent registration", 1800, self_consistent_registration},
    {6, "surrogate quality gate", 0, surrogate_quality},
    {7, "speed ordering", 0, speed_ordering},
    {8, "geometry oracle", 0, geometry_oracle},
    {9, "distance gradient", 0, distance_gradient},
    {10, "determinism", 0, determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; runtime exceeds %.0f s", c.limit_s);
    }
    std::printf("criterion %d %s: %s (%s; %.1f s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("hyperreg_acceptance_" + std::to_string(::getpid())), ec);
  return failed == 0 ? 0 : 1;
}
