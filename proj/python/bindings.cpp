#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hyperreg/datagen.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/geomdist.hpp"
#include "hyperreg/hyperelastic.hpp"
#include "hyperreg/io.hpp"
#include "hyperreg/metrics.hpp"
#include "hyperreg/registration.hpp"
#include "hyperreg/surrogate.hpp"

namespace py = pybind11;
using namespace hyperreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Nodal fields cross the boundary as (n, 3) arrays.
NodalField to_field(const Array& a, std::size_t nodes) {
  if (a.ndim() != 2 || a.shape(1) != 3 || static_cast<std::size_t>(a.shape(0)) != nodes)
    throw InvalidArgument("expected an array of shape (" + std::to_string(nodes) + ", 3)");
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(nodes));
  std::copy(a.data(), a.data() + v.size(), v.data());
  return NodalField(std::move(v));
}

Array to_array(const NodalField& f) {
  Array a({static_cast<py::ssize_t>(f.node_count()), py::ssize_t{3}});
  std::copy(f.vec().data(), f.vec().data() + f.vec().size(), a.mutable_data());
  return a;
}

Array points_array(const std::vector<Vec3>& pts) {
  Array a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k) m(static_cast<py::ssize_t>(i), k) = pts[i][k];
  return a;
}

PointCloud to_cloud(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw InvalidArgument("expected a point array of shape (m, 3)");
  std::vector<Vec3> pts(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = Vec3(r(static_cast<py::ssize_t>(i), 0), r(static_cast<py::ssize_t>(i), 1), r(static_cast<py::ssize_t>(i), 2));
  return PointCloud(std::move(pts));
}

py::dict phi_dict(const PhiEvaluation& e) {
  py::dict d;
  d["value"] = e.value;
  d["distance"] = e.distance;
  d["gradient"] = to_array(e.gradient);
  d["u"] = to_array(e.u);
  d["times"] = py::dict(py::arg("forward") = e.times.forward, py::arg("distance") = e.times.distance,
                        py::arg("backward") = e.times.backward);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Surface registration with a hyperelastic model and a learned surrogate";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<InvalidMesh>(m, "InvalidMesh", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ElementInversion>(m, "ElementInversion", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", base.ptr());
  py::register_exception<IncompatibleModel>(m, "IncompatibleModel", base.ptr());
  py::register_exception<EvaluationFailed>(m, "EvaluationFailed", base.ptr());
  py::register_exception<SpecTooAggressive>(m, "SpecTooAggressive", base.ptr());

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("node_count", &Mesh::node_count)
      .def_property_readonly("cell_count", &Mesh::cell_count)
      .def_property_readonly("dof_count", &Mesh::dof_count)
      .def_property_readonly("nodes", [](const Mesh& mesh) { return points_array(mesh.nodes()); })
      .def_property_readonly("dirichlet_nodes", &Mesh::dirichlet_nodes)
      .def_property_readonly("boundary_triangles", [](const Mesh& mesh) { return mesh.boundary().triangles; })
      .def_property_readonly("boundary_nodes", [](const Mesh& mesh) { return mesh.boundary().vertex_set; })
      .def("volume", &Mesh::volume)
      .def("diameter", &Mesh::diameter)
      .def("hash", &Mesh::hash)
      .def("with_dirichlet", &Mesh::with_dirichlet, py::arg("nodes"));

  m.def("build_beam_mesh", &build_beam_mesh, py::arg("nx"), py::arg("ny"), py::arg("nz"), py::arg("lengths"));
  m.def("build_tet_beam_mesh", &build_tet_beam_mesh, py::arg("nx"), py::arg("ny"), py::arg("nz"),
        py::arg("lengths"));
  m.def("nodes_on_plane", &nodes_on_plane, py::arg("mesh"), py::arg("axis"), py::arg("value"),
        py::arg("tol") = 1e-12);
  m.def("load_mesh", [](const std::filesystem::path& p) { return load_mesh(p).mesh; });
  m.def(
      "save_mesh",
      [](const Mesh& mesh, const std::filesystem::path& p, const std::map<std::string, Array>& fields) {
        std::vector<NamedField> named;
        for (const auto& [name, a] : fields) named.push_back({name, to_field(a, mesh.node_count())});
        save_mesh(mesh, p, named);
        save_dirichlet(mesh.dirichlet_nodes(), dirichlet_sidecar_path(p));
      },
      py::arg("mesh"), py::arg("path"), py::arg("fields") = std::map<std::string, Array>{});

  py::class_<Material>(m, "Material")
      .def(py::init(&Material::from_young_poisson), py::arg("young_modulus") = 4500.0,
           py::arg("poisson_ratio") = 0.49)
      .def_readonly("young_modulus", &Material::young_modulus)
      .def_readonly("poisson_ratio", &Material::poisson_ratio)
      .def_readonly("mu", &Material::mu)
      .def_readonly("lam", &Material::lambda);

  py::class_<NewtonOptions>(m, "NewtonOptions")
      .def(py::init<>())
      .def_readwrite("tolerance", &NewtonOptions::tolerance)
      .def_readwrite("max_iterations", &NewtonOptions::max_iterations)
      .def_readwrite("initial_substeps", &NewtonOptions::initial_substeps)
      .def_readwrite("max_substeps", &NewtonOptions::max_substeps)
      .def_readwrite("max_halvings", &NewtonOptions::max_halvings);

  py::class_<HyperelasticModel>(m, "HyperelasticModel")
      .def(py::init<const Mesh&, const Material&>(), py::keep_alive<1, 2>())
      .def("energy", [](const HyperelasticModel& h, const Array& u) { return h.energy(to_field(u, h.mesh().node_count())); })
      .def("residual",
           [](const HyperelasticModel& h, const Array& u) { return to_array(h.residual(to_field(u, h.mesh().node_count()))); })
      .def("von_mises",
           [](const HyperelasticModel& h, const Array& u) { return h.von_mises(to_field(u, h.mesh().node_count())); })
      .def(
          "solve",
          [](HyperelasticModel& h, const Array& g, const NewtonOptions& o) {
            return to_array(h.solve(to_field(g, h.mesh().node_count()), o).u);
          },
          py::arg("g"), py::arg("options") = NewtonOptions{})
      .def("adjoint_solve", [](HyperelasticModel& h, const Array& u, const Array& rhs) {
        const auto n = h.mesh().node_count();
        return to_array(h.adjoint_solve(to_field(u, n), to_field(rhs, n)));
      });

  m.def(
      "evaluate_J",
      [](const Mesh& mesh, const Array& u, const Array& cloud) {
        return evaluate_J(mesh, to_field(u, mesh.node_count()), to_cloud(cloud)).value;
      },
      py::arg("mesh"), py::arg("u"), py::arg("cloud"));
  m.def(
      "grad_J",
      [](const Mesh& mesh, const Array& u, const Array& cloud) {
        const NodalField uf = to_field(u, mesh.node_count());
        const PointCloud c = to_cloud(cloud);
        return to_array(grad_J(mesh, uf, c, evaluate_J(mesh, uf, c)));
      },
      py::arg("mesh"), py::arg("u"), py::arg("cloud"));

  py::class_<Mlp>(m, "Mlp")
      .def_static("for_mesh", &Mlp::for_mesh, py::arg("mesh"), py::arg("seed") = 0, py::arg("transitions") = 4)
      .def_property_readonly("layer_sizes", &Mlp::layer_sizes)
      .def_property_readonly("parameter_count", &Mlp::parameter_count)
      .def("predict", [](const Mlp& mlp, const Array& g) { return to_array(predict(mlp, to_field(g, mlp.input_size() / 3))); })
      .def("save", [](const Mlp& mlp, const std::filesystem::path& p) { save_mlp(mlp, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_mlp(p); })
      .def("__eq__", &Mlp::operator==);

  py::class_<ForceSpec>(m, "ForceSpec")
      .def(py::init<>())
      .def_readwrite("region", &ForceSpec::region)
      .def_readwrite("patch_depth", &ForceSpec::patch_depth)
      .def_readwrite("gmin", &ForceSpec::gmin)
      .def_readwrite("gmax", &ForceSpec::gmax)
      .def_readwrite("seed", &ForceSpec::seed);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("forces", [](const Dataset& d) {
        py::list l;
        for (const auto& f : d.forces) l.append(to_array(f));
        return l;
      })
      .def_property_readonly("displacements", [](const Dataset& d) {
        py::list l;
        for (const auto& f : d.displacements) l.append(to_array(f));
        return l;
      })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_dataset(p); })
      .def("__eq__", &Dataset::operator==);

  m.def(
      "generate_dataset",
      [](const Mesh& mesh, const Material& mat, const ForceSpec& spec, std::size_t n, unsigned threads) {
        DatagenOptions o;
        o.threads = threads;
        py::gil_scoped_release release;
        return generate_dataset(mesh, mat, spec, n, o);
      },
      py::arg("mesh"), py::arg("material"), py::arg("spec"), py::arg("n"), py::arg("threads") = 1);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
      .def_readwrite("full_batch", &TrainConfig::full_batch)
      .def_readwrite("seed", &TrainConfig::seed);

  m.def(
      "train",
      [](const Mlp& init, const Dataset& data, const TrainConfig& cfg) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(init, data, cfg);
        }
        py::list hist;
        for (const auto& e : r.history) hist.append(py::make_tuple(e.train_mse, e.val_mse));
        return py::make_tuple(r.mlp, hist, r.best_epoch);
      },
      py::arg("init"), py::arg("data"), py::arg("config"),
      "Returns (model, [(train_mse, val_mse) per epoch], best_epoch).");

  py::class_<VisibleRegion>(m, "VisibleRegion")
      .def(py::init<>())
      .def_readwrite("whole_boundary", &VisibleRegion::whole_boundary)
      .def_readwrite("direction", &VisibleRegion::direction)
      .def_readwrite("min_cosine", &VisibleRegion::min_cosine);

  py::class_<Scenario>(m, "Scenario")
      .def_property_readonly("g", [](const Scenario& s) { return to_array(s.g); })
      .def_property_readonly("u", [](const Scenario& s) { return to_array(s.u); })
      .def_property_readonly("cloud", [](const Scenario& s) { return points_array(s.cloud.points()); })
      .def_readonly("markers", &Scenario::markers)
      .def_readonly("support", &Scenario::support);

  m.def(
      "make_scenario",
      [](const Mesh& mesh, const Material& mat, const ForceSpec& spec, const VisibleRegion& vis, std::size_t points,
         std::size_t markers, std::uint64_t seed) {
        Rng rng(seed);
        return make_scenario(mesh, mat, spec, vis, points, markers, rng);
      },
      py::arg("mesh"), py::arg("material"), py::arg("spec"), py::arg("visible"), py::arg("points"),
      py::arg("markers") = 0, py::arg("seed") = 0);

  py::class_<AdmissibleSet>(m, "AdmissibleSet")
      .def_static("from_nodes", &AdmissibleSet::from_nodes, py::arg("mesh"), py::arg("nodes"))
      .def_static("whole_boundary", &AdmissibleSet::whole_boundary, py::arg("mesh"))
      .def("set_bounds", &AdmissibleSet::set_bounds)
      .def("__len__", &AdmissibleSet::size)
      .def_readonly("dofs", &AdmissibleSet::dofs);

  m.def(
      "eval_phi_newton",
      [](const Mesh& mesh, const Material& mat, const Array& g, const Array& cloud, double alpha,
         const AdmissibleSet& adm) {
        HyperelasticModel model(mesh, mat);
        return phi_dict(eval_phi_newton(to_field(g, mesh.node_count()), model, to_cloud(cloud), alpha, adm));
      },
      py::arg("mesh"), py::arg("material"), py::arg("g"), py::arg("cloud"), py::arg("alpha"), py::arg("admissible"));
  m.def(
      "eval_phi_surrogate",
      [](const Mesh& mesh, const Mlp& mlp, const Array& g, const Array& cloud, double alpha,
         const AdmissibleSet& adm) {
        return phi_dict(eval_phi_surrogate(to_field(g, mesh.node_count()), mlp, mesh, to_cloud(cloud), alpha, adm));
      },
      py::arg("mesh"), py::arg("model"), py::arg("g"), py::arg("cloud"), py::arg("alpha"), py::arg("admissible"));

  m.def("default_alpha", &default_alpha, py::arg("mesh"), py::arg("gmax"));

  m.def(
      "register_cloud",
      [](const Mesh& mesh, const Material& mat, const Array& cloud, const AdmissibleSet& adm, double alpha,
         const std::string& backend, const Mlp* model, double tolerance, int max_iterations, bool certify) {
        const PointCloud c = to_cloud(cloud);
        RegistrationConfig cfg;
        cfg.alpha = alpha;
        cfg.backend = backend_from_string(backend);
        cfg.tolerance = tolerance;
        cfg.max_iterations = max_iterations;
        cfg.certify = certify;
        RegistrationResult r;
        {
          py::gil_scoped_release release;
          r = register_cloud({&mesh, mat, &c, adm, model}, cfg);
        }
        py::dict d;
        d["g"] = to_array(r.g);
        d["u"] = to_array(r.u);
        d["objective"] = r.objective;
        d["gradient_norm"] = r.gradient_norm;
        d["iterations"] = r.iterations;
        d["evaluations"] = r.evaluations;
        d["termination"] = to_string(r.termination);
        d["certified"] = r.certified;
        d["total_time"] = r.total_time;
        return d;
      },
      py::arg("mesh"), py::arg("material"), py::arg("cloud"), py::arg("admissible"), py::arg("alpha"),
      py::arg("backend") = "newton", py::arg("model") = nullptr, py::arg("tolerance") = 1e-4,
      py::arg("max_iterations") = 100, py::arg("certify") = false);

  m.def(
      "tre",
      [](const Array& u_rec, const Array& u_ref, const std::vector<std::size_t>& markers) {
        const auto n = static_cast<std::size_t>(u_ref.shape(0));
        const auto r = tre(to_field(u_rec, n), to_field(u_ref, n), markers);
        return py::make_tuple(r.mean, r.max);
      },
      py::arg("u_rec"), py::arg("u_ref"), py::arg("markers"));
  m.def(
      "force_error",
      [](const Array& g_rec, const Array& g_ref) {
        const auto n = static_cast<std::size_t>(g_ref.shape(0));
        const auto r = force_error(to_field(g_rec, n), to_field(g_ref, n));
        return py::make_tuple(r.nodal_l2_pct, r.net_magnitude_pct);
      },
      py::arg("g_rec"), py::arg("g_ref"));
  m.def(
      "surface_error",
      [](const Mesh& mesh, const Array& u, const Array& cloud) {
        const auto r = surface_error(mesh, to_field(u, mesh.node_count()), to_cloud(cloud));
        return py::make_tuple(r.mean, r.rms);
      },
      py::arg("mesh"), py::arg("u"), py::arg("cloud"));
}
