#include "hyperreg/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "binary.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/io.hpp"

namespace hyperreg {

void ForceSpec::validate() const {
  if (!(gmin >= 0.0) || !(gmax >= gmin) || !std::isfinite(gmax))
    throw InvalidArgument("force spec needs 0 <= gmin <= gmax");
  if (patch_depth < 0) throw InvalidArgument("patch depth must be >= 0");
}

nlohmann::json ForceSpec::to_json() const {
  nlohmann::json j;
  j["region"] = region;
  j["patch_depth"] = patch_depth;
  j["gmin"] = gmin;
  j["gmax"] = gmax;
  j["seed"] = seed;
  return j;
}

ForceSpec ForceSpec::from_json(const nlohmann::json& j) {
  ForceSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "region")
      s.region = value.get<std::vector<std::size_t>>();
    else if (key == "patch_depth")
      s.patch_depth = value.get<int>();
    else if (key == "gmin")
      s.gmin = value.get<double>();
    else if (key == "gmax")
      s.gmax = value.get<double>();
    else if (key == "seed")
      s.seed = value.get<std::uint64_t>();
    else
      throw InvalidArgument("force_spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

std::vector<std::size_t> allowed_force_nodes(const Mesh& mesh, const ForceSpec& spec) {
  std::vector<std::size_t> out;
  auto eligible = [&](std::size_t i) { return i < mesh.node_count() && mesh.is_boundary(i) && !mesh.is_dirichlet(i); };
  if (spec.region.empty()) {
    for (auto i : mesh.boundary().vertex_set)
      if (eligible(i)) out.push_back(i);
  } else {
    for (auto i : spec.region)
      if (eligible(i)) out.push_back(i);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> surface_adjacency(const Mesh& mesh) {
  std::vector<std::vector<std::size_t>> adj(mesh.node_count());
  for (const auto& t : mesh.boundary().triangles)
    for (int k = 0; k < 3; ++k) {
      adj[t[k]].push_back(t[(k + 1) % 3]);
      adj[t[(k + 1) % 3]].push_back(t[k]);
    }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

Vec3 random_direction(Rng& rng) {
  for (;;) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

NodalField sample_force_impl(const Mesh& mesh, const ForceSpec& spec, const std::vector<std::size_t>& allowed,
                             const std::vector<std::vector<std::size_t>>& adj, Rng& rng) {
  const std::size_t seed_node = allowed[rng.below(allowed.size())];
  const Vec3 dir = random_direction(rng);
  const double magnitude = rng.uniform(spec.gmin, spec.gmax);

  // breadth-first rings through allowed nodes
  std::vector<int> ring(mesh.node_count(), -1);
  std::vector<char> ok(mesh.node_count(), 0);
  for (auto i : allowed) ok[i] = 1;
  std::vector<std::size_t> patch{seed_node};
  ring[seed_node] = 0;
  for (std::size_t head = 0; head < patch.size(); ++head) {
    const std::size_t i = patch[head];
    if (ring[i] == spec.patch_depth) continue;
    for (auto j : adj[i])
      if (ok[j] && ring[j] < 0) {
        ring[j] = ring[i] + 1;
        patch.push_back(j);
      }
  }
  double wsum = 0.0;
  for (auto i : patch) wsum += spec.patch_depth + 1 - ring[i];
  NodalField g(mesh.node_count());
  if (magnitude == 0.0) return g;
  for (auto i : patch) g.node(i) = (magnitude * (spec.patch_depth + 1 - ring[i]) / wsum) * dir;
  return g;
}

}  // namespace

NodalField sample_force(const Mesh& mesh, const ForceSpec& spec, Rng& rng) {
  spec.validate();
  const auto allowed = allowed_force_nodes(mesh, spec);
  if (allowed.empty()) throw InvalidArgument("sample_force: allowed region is empty");
  return sample_force_impl(mesh, spec, allowed, surface_adjacency(mesh), rng);
}

Dataset generate_dataset(const Mesh& mesh, const Material& material, const ForceSpec& spec, std::size_t n,
                         const DatagenOptions& opts) {
  spec.validate();
  if (n == 0) throw InvalidArgument("generate_dataset: n must be >= 1");
  if (opts.max_attempts_per_pair < 1) throw InvalidArgument("generate_dataset: max_attempts_per_pair must be >= 1");
  const auto allowed = allowed_force_nodes(mesh, spec);
  if (allowed.empty()) throw InvalidArgument("generate_dataset: allowed region is empty");
  const auto adj = surface_adjacency(mesh);

  Dataset d;
  d.forces.resize(n);
  d.displacements.resize(n);
  d.mesh_hash = mesh.hash();
  std::vector<int> attempts(n, 0);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    HyperelasticModel model(mesh, material);
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= n || stop) return;
      try {
        Rng rng(stream_seed(spec.seed, j));
        for (;;) {
          if (attempts[j] >= opts.max_attempts_per_pair)
            throw SpecTooAggressive("pair " + std::to_string(j) + " failed " + std::to_string(attempts[j]) +
                                    " solves in a row; reduce the force magnitude range");
          ++attempts[j];
          NodalField g = sample_force_impl(mesh, spec, allowed, adj, rng);
          try {
            NodalField u = model.solve(g, opts.newton).u;
            const double r = (model.residual(u) - g).norm();
            if (!(r <= opts.newton.tolerance * std::max(1.0, g.norm()))) continue;
            d.forces[j] = std::move(g);
            d.displacements[j] = std::move(u);
            break;
          } catch (const NoConvergence&) {
          } catch (const ElementInversion&) {
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  long total = 0;
  for (int a : attempts) total += a;
  const long rejected = total - static_cast<long>(n);
  if (2 * rejected > total)
    throw SpecTooAggressive("rejected " + std::to_string(rejected) + " of " + std::to_string(total) +
                            " solves; reduce the force magnitude range");

  d.metadata["material"] = {{"young_modulus", material.young_modulus}, {"poisson_ratio", material.poisson_ratio}};
  d.metadata["force_spec"] = spec.to_json();
  d.metadata["n"] = n;
  d.metadata["tolerance"] = opts.newton.tolerance;
  d.metadata["rejected_solves"] = rejected;
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  if (d.displacements.size() != d.forces.size()) throw InvalidArgument("save_dataset: inconsistent dataset");
  const std::size_t dofs = d.size() ? d.forces.front().dof_count() : 0;
  nlohmann::json h;
  h["format"] = "hyperreg-dataset";
  h["version"] = 1;
  h["mesh_hash"] = detail::hex64(d.mesh_hash);
  h["dofs"] = dofs;
  h["n"] = d.size();
  h["metadata"] = d.metadata;
  detail::BinaryWriter w(h);
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d.forces[j].dof_count() != dofs || d.displacements[j].dof_count() != dofs)
      throw InvalidArgument("save_dataset: inconsistent DOF counts");
    w.put(d.forces[j].vec());
    w.put(d.displacements[j].vec());
  }
  write_file(path, w.take());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  detail::BinaryReader r(bytes);
  const auto& h = r.header();
  Dataset d;
  try {
    if (h.at("format") != "hyperreg-dataset" || h.at("version") != 1) throw ParseError("not a dataset file", 0);
    const auto dofs = h.at("dofs").get<std::size_t>();
    const auto n = h.at("n").get<std::size_t>();
    if (dofs % 3 != 0) throw ParseError("dataset DOF count is not a multiple of 3", 0);
    d.mesh_hash = detail::parse_hex64(h.at("mesh_hash").get<std::string>());
    d.metadata = h.at("metadata");
    for (std::size_t j = 0; j < n; ++j) {
      Eigen::VectorXd g(dofs), u(dofs);
      r.get(g);
      r.get(u);
      d.forces.emplace_back(std::move(g));
      d.displacements.emplace_back(std::move(u));
    }
    r.expect_end();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad dataset header: ") + e.what(), 0);
  }
  return d;
}

nlohmann::json VisibleRegion::to_json() const {
  nlohmann::json j;
  j["whole_boundary"] = whole_boundary;
  j["direction"] = {direction.x(), direction.y(), direction.z()};
  j["min_cosine"] = min_cosine;
  if (half_space)
    j["half_space"] = {{"normal", {half_space->first.x(), half_space->first.y(), half_space->first.z()}},
                       {"offset", half_space->second}};
  return j;
}

VisibleRegion VisibleRegion::from_json(const nlohmann::json& j) {
  auto vec3 = [](const nlohmann::json& v) {
    const auto a = v.get<std::array<double, 3>>();
    return Vec3(a[0], a[1], a[2]);
  };
  VisibleRegion r;
  for (const auto& [key, value] : j.items()) {
    if (key == "whole_boundary")
      r.whole_boundary = value.get<bool>();
    else if (key == "direction")
      r.direction = vec3(value);
    else if (key == "min_cosine")
      r.min_cosine = value.get<double>();
    else if (key == "half_space")
      r.half_space = std::make_pair(vec3(value.at("normal")), value.at("offset").get<double>());
    else
      throw InvalidArgument("visible: unknown key '" + key + "'");
  }
  if (!r.whole_boundary && !(r.direction.norm() > 0.0)) throw InvalidArgument("visible: direction must be nonzero");
  return r;
}

std::vector<std::size_t> visible_triangles(const Mesh& mesh, const NodalField& u, const VisibleRegion& region) {
  const auto x = deformed_positions(mesh, u);
  const auto& tris = mesh.boundary().triangles;
  std::vector<std::size_t> out;
  const Vec3 dir = region.whole_boundary ? Vec3::Zero() : Vec3(region.direction.normalized());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (!region.whole_boundary) {
      const Vec3& a = x[tris[t][0]];
      const Vec3& b = x[tris[t][1]];
      const Vec3& c = x[tris[t][2]];
      const Vec3 n = (b - a).cross(c - a);
      if (!(n.norm() > 0.0) || !(n.normalized().dot(dir) > region.min_cosine)) continue;
      if (region.half_space && ((a + b + c) / 3.0).dot(region.half_space->first) < region.half_space->second) continue;
    }
    out.push_back(t);
  }
  return out;
}

PointCloud sample_surface(const Mesh& mesh, const NodalField& u, const std::vector<std::size_t>& triangles,
                          std::size_t m, Rng& rng) {
  const auto x = deformed_positions(mesh, u);
  const auto& tris = mesh.boundary().triangles;
  std::vector<double> cumulative;
  double total = 0.0;
  for (auto t : triangles) {
    if (t >= tris.size()) throw InvalidArgument("sample_surface: triangle index out of range");
    const auto& tri = tris[t];
    total += 0.5 * (x[tri[1]] - x[tri[0]]).cross(x[tri[2]] - x[tri[0]]).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw InvalidArgument("sample_surface: no visible area");
  std::vector<Vec3> pts;
  pts.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double s = rng.uniform() * total;
    const auto k = std::min<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), s) - cumulative.begin(),
                                         triangles.size() - 1);
    const auto& tri = tris[triangles[k]];
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    pts.push_back((1 - r1) * x[tri[0]] + r1 * (1 - r2) * x[tri[1]] + r1 * r2 * x[tri[2]]);
  }
  return PointCloud(std::move(pts));
}

Scenario make_scenario(const Mesh& mesh, const Material& material, const ForceSpec& spec,
                       const VisibleRegion& visible, std::size_t m, std::size_t markers, Rng& rng,
                       const NewtonOptions& newton) {
  const NodalField g = sample_force(mesh, spec, rng);
  return make_scenario(mesh, material, g, visible, m, markers, rng, newton);
}

Scenario make_scenario(const Mesh& mesh, const Material& material, const NodalField& g,
                       const VisibleRegion& visible, std::size_t m, std::size_t markers, Rng& rng,
                       const NewtonOptions& newton) {
  if (m == 0) throw InvalidArgument("make_scenario: point count must be >= 1");
  Scenario s;
  s.g = g;
  s.u = newton_solve(mesh, material, g, newton);
  s.visible = visible_triangles(mesh, s.u, visible);
  if (s.visible.empty()) throw InvalidArgument("make_scenario: visible region is empty");
  s.cloud = sample_surface(mesh, s.u, s.visible, m, rng);

  for (std::size_t i = 0; i < mesh.node_count(); ++i)
    if (g.node(i).squaredNorm() > 0.0) s.support.push_back(i);

  std::vector<char> seen(mesh.node_count(), 0);
  for (auto t : s.visible)
    for (auto v : mesh.boundary().triangles[t]) seen[v] = 1;
  std::vector<std::size_t> eligible;
  for (auto v : mesh.boundary().vertex_set)
    if (!seen[v] && !mesh.is_dirichlet(v)) eligible.push_back(v);
  const std::size_t k = markers == 0 ? eligible.size() : std::min(markers, eligible.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
  s.markers.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(s.markers.begin(), s.markers.end());
  return s;
}

}  // namespace hyperreg
