#include "config.hpp"

#include <set>

#include "hyperreg/errors.hpp"
#include "hyperreg/io.hpp"

namespace hyperreg::cli {

using nlohmann::json;

namespace {

/// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError(name_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void read(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad(key, "a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw bad(key, "a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw bad(key, "an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw bad(key, "a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad(key, "a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw bad(key, "a value of the right type");
    }
  }

  void read_path(const char* key, std::filesystem::path& out) {
    std::string s;
    read(key, s);
    if (j_.contains(key)) out = s;
  }

  const json& take(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw UsageError(name_ + ": unknown key '" + key + "'");
  }

 private:
  UsageError bad(const char* key, const char* what) const {
    return UsageError(name_ + "." + key + ": expected " + what);
  }

  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

NewtonOptions parse_newton(const json& j) {
  NewtonOptions o;
  Section s(j, "newton");
  s.read("tolerance", o.tolerance);
  s.read("max_iterations", o.max_iterations);
  s.read("initial_substeps", o.initial_substeps);
  s.read("max_substeps", o.max_substeps);
  s.read("max_halvings", o.max_halvings);
  s.finish();
  if (!(o.tolerance > 0) || o.max_iterations < 1 || o.initial_substeps < 1 || o.max_substeps < o.initial_substeps ||
      o.max_halvings < 0)
    throw UsageError("newton: invalid options");
  return o;
}

json newton_json(const NewtonOptions& o) {
  return {{"tolerance", o.tolerance},
          {"max_iterations", o.max_iterations},
          {"initial_substeps", o.initial_substeps},
          {"max_substeps", o.max_substeps},
          {"max_halvings", o.max_halvings}};
}

ForceSpec parse_force_spec(const json& j, const std::string& name) {
  if (!j.is_object()) throw UsageError(name + ": expected an object");
  if (j.contains("seed")) throw UsageError(name + ": the seed is set at the top level");
  try {
    return ForceSpec::from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(name + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

json force_spec_json(ForceSpec s) {
  json j = s.to_json();
  j.erase("seed");
  return j;
}

}  // namespace

std::vector<std::uint64_t> ScenarioSection::scenario_indices() const {
  if (!indices.empty()) return indices;
  std::vector<std::uint64_t> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = k;
  return out;
}

std::filesystem::path Paths::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : out_dir / p;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section top(j, "config");
  top.read("seed", c.seed);
  top.read("threads", c.threads);
  if (c.threads == 0) throw UsageError("config.threads: must be at least 1");

  if (top.has("mesh")) {
    Section s(top.take("mesh"), "mesh");
    std::filesystem::path p;
    s.read_path("path", p);
    if (!p.empty()) c.mesh.path = p;
    s.read("beam", c.mesh.beam);
    s.read("lengths", c.mesh.lengths);
    s.read("cell", c.mesh.cell);
    s.read("dirichlet_x", c.mesh.dirichlet_x);
    s.finish();
    if (c.mesh.cell != "hex" && c.mesh.cell != "tet") throw UsageError("mesh.cell: expected hex or tet");
    for (int n : c.mesh.beam)
      if (n < 1) throw UsageError("mesh.beam: cell counts must be positive");
    for (double l : c.mesh.lengths)
      if (!(l > 0)) throw UsageError("mesh.lengths: must be positive");
  }
  if (top.has("material")) {
    Section s(top.take("material"), "material");
    double e = c.material.young_modulus, nu = c.material.poisson_ratio;
    s.read("young_modulus", e);
    s.read("poisson_ratio", nu);
    s.finish();
    try {
      c.material = Material::from_young_poisson(e, nu);
    } catch (const InvalidArgument& ex) {
      throw UsageError(std::string("material: ") + ex.what());
    }
  }
  if (top.has("force_spec")) c.force_spec = parse_force_spec(top.take("force_spec"), "force_spec");
  if (top.has("newton")) c.newton = parse_newton(top.take("newton"));
  if (top.has("datagen")) {
    Section s(top.take("datagen"), "datagen");
    s.read("n", c.datagen.n);
    s.read("max_attempts_per_pair", c.datagen.max_attempts_per_pair);
    s.finish();
    if (c.datagen.n == 0 || c.datagen.max_attempts_per_pair < 1) throw UsageError("datagen: invalid options");
  }
  if (top.has("train")) {
    Section s(top.take("train"), "train");
    auto& t = c.train.train;
    s.read("learning_rate", t.learning_rate);
    s.read("batch_size", t.batch_size);
    s.read("epochs", t.epochs);
    s.read("validation_fraction", t.validation_fraction);
    s.read("full_batch", t.full_batch);
    s.read("transitions", c.train.transitions);
    s.read("hidden", c.train.hidden);
    s.finish();
    try {
      t.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("train: ") + e.what());
    }
    if (c.train.transitions < 1) throw UsageError("train.transitions: must be at least 1");
    if (!c.train.hidden.empty() && c.train.hidden.size() + 1 != c.train.transitions)
      throw UsageError("train.hidden: needs transitions - 1 widths");
  }
  if (top.has("scenario")) {
    Section s(top.take("scenario"), "scenario");
    auto& sc = c.scenario;
    s.read("count", sc.count);
    s.read("indices", sc.indices);
    s.read("points", sc.points);
    s.read("markers", sc.markers);
    if (s.has("visible")) {
      try {
        sc.visible = VisibleRegion::from_json(s.take("visible"));
      } catch (const json::exception& e) {
        throw UsageError(std::string("scenario.visible: ") + e.what());
      } catch (const InvalidArgument& e) {
        throw UsageError(std::string("scenario.") + e.what());
      }
    }
    if (s.has("force_spec")) sc.force_spec = parse_force_spec(s.take("force_spec"), "scenario.force_spec");
    s.finish();
    if (sc.points == 0) throw UsageError("scenario.points: must be positive");
    if (sc.count == 0 && sc.indices.empty()) throw UsageError("scenario.count: must be positive");
  }
  if (top.has("registration")) {
    Section s(top.take("registration"), "registration");
    auto& r = c.registration;
    if (s.has("alpha")) {
      s.read("alpha", r.cfg.alpha);
      r.alpha_given = true;
    }
    std::string backend = to_string(r.cfg.backend);
    s.read("backend", backend);
    try {
      r.cfg.backend = backend_from_string(backend);
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("registration.backend: ") + e.what());
    }
    s.read("tolerance", r.cfg.tolerance);
    s.read("max_iterations", r.cfg.max_iterations);
    s.read("memory", r.cfg.memory);
    s.read("certify", r.cfg.certify);
    s.read("support", r.support);
    s.finish();
    if (r.support != "true" && r.support != "whole_boundary")
      throw UsageError("registration.support: expected true or whole_boundary");
    try {
      r.cfg.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("registration: ") + e.what());
    }
  }
  if (top.has("paths")) {
    Section s(top.take("paths"), "paths");
    s.read_path("out_dir", c.paths.out_dir);
    s.read_path("dataset", c.paths.dataset);
    s.read_path("model", c.paths.model);
    std::filesystem::path cloud;
    s.read_path("cloud", cloud);
    if (!cloud.empty()) c.paths.cloud = cloud;
    s.finish();
  }
  top.finish();
  c.registration.cfg.newton = c.newton;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  return parse_config(j);
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  json m;
  if (mesh.path) m["path"] = mesh.path->string();
  m["beam"] = mesh.beam;
  m["lengths"] = mesh.lengths;
  m["cell"] = mesh.cell;
  m["dirichlet_x"] = mesh.dirichlet_x;
  j["mesh"] = m;
  j["material"] = {{"young_modulus", material.young_modulus}, {"poisson_ratio", material.poisson_ratio}};
  j["force_spec"] = force_spec_json(force_spec);
  j["newton"] = newton_json(newton);
  j["datagen"] = {{"n", datagen.n}, {"max_attempts_per_pair", datagen.max_attempts_per_pair}};
  const auto& t = train.train;
  j["train"] = {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
                {"epochs", t.epochs},               {"validation_fraction", t.validation_fraction},
                {"full_batch", t.full_batch},       {"transitions", train.transitions},
                {"hidden", train.hidden}};
  json sc = {{"count", scenario.count},   {"indices", scenario.indices},
             {"points", scenario.points}, {"markers", scenario.markers},
             {"visible", scenario.visible.to_json()}};
  if (scenario.force_spec) sc["force_spec"] = force_spec_json(*scenario.force_spec);
  j["scenario"] = sc;
  const auto& r = registration;
  json reg = {{"backend", to_string(r.cfg.backend)}, {"tolerance", r.cfg.tolerance},
              {"max_iterations", r.cfg.max_iterations}, {"memory", r.cfg.memory},
              {"certify", r.cfg.certify}, {"support", r.support}};
  if (r.alpha_given) reg["alpha"] = r.cfg.alpha;
  j["registration"] = reg;
  json p = {{"out_dir", paths.out_dir.string()}, {"dataset", paths.dataset.string()}, {"model", paths.model.string()}};
  if (paths.cloud) p["cloud"] = paths.cloud->string();
  j["paths"] = p;
  return j;
}

Mesh build_mesh(const MeshConfig& m) {
  if (m.path) return load_mesh(*m.path).mesh;
  const auto& b = m.beam;
  Mesh mesh = m.cell == "hex" ? build_beam_mesh(b[0], b[1], b[2], m.lengths)
                              : build_tet_beam_mesh(b[0], b[1], b[2], m.lengths);
  if (m.dirichlet_x != 0.0) mesh = mesh.with_dirichlet(nodes_on_plane(mesh, 0, m.dirichlet_x, 1e-9));
  return mesh;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hyperreg::cli
