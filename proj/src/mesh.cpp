#include "hyperreg/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "hyperreg/errors.hpp"

namespace hyperreg {
namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Mesh::Mesh(std::vector<Vec3> nodes, CellType type, std::vector<std::size_t> connectivity,
           std::vector<std::size_t> dirichlet_nodes)
    : nodes_(std::move(nodes)),
      type_(type),
      connectivity_(std::move(connectivity)),
      dirichlet_(std::move(dirichlet_nodes)) {
  const std::size_t npe = nodes_per_cell(type_);
  if (nodes_.empty()) throw InvalidMesh("mesh has no nodes");
  if (connectivity_.empty() || connectivity_.size() % npe != 0)
    throw InvalidMesh("connectivity length is not a positive multiple of " + std::to_string(npe));
  for (const auto& x : nodes_)
    if (!x.allFinite()) throw InvalidMesh("non-finite node coordinate");

  for (std::size_t e = 0; e < cell_count(); ++e) {
    auto c = cell(e);
    for (std::size_t a = 0; a < npe; ++a) {
      if (c[a] >= nodes_.size())
        throw InvalidMesh("cell " + std::to_string(e) + " references node " +
                          std::to_string(c[a]) + " out of range");
      for (std::size_t b = 0; b < a; ++b)
        if (c[a] == c[b]) throw InvalidMesh("cell " + std::to_string(e) + " is degenerate");
    }
  }

  std::sort(dirichlet_.begin(), dirichlet_.end());
  dirichlet_.erase(std::unique(dirichlet_.begin(), dirichlet_.end()), dirichlet_.end());
  dirichlet_mask_.assign(nodes_.size(), 0);
  for (std::size_t i : dirichlet_) {
    if (i >= nodes_.size()) throw InvalidMesh("Dirichlet node " + std::to_string(i) + " out of range");
    dirichlet_mask_[i] = 1;
  }

  // Reference geometry; rejects elements with non-positive Jacobian.
  const ReferenceRule& rule = reference_rule(type_);
  quad_.resize(cell_count() * rule.points);
  for (std::size_t e = 0; e < cell_count(); ++e) {
    auto c = cell(e);
    Eigen::Matrix<double, 3, 8> X = Eigen::Matrix<double, 3, 8>::Zero();
    for (std::size_t a = 0; a < npe; ++a) X.col(static_cast<Eigen::Index>(a)) = nodes_[c[a]];
    for (std::size_t q = 0; q < rule.points; ++q) {
      const Mat3 jac = X * rule.grads[q];  // dX/dxi
      const double det = jac.determinant();
      if (!(det > 0.0))
        throw InvalidMesh("cell " + std::to_string(e) + " has non-positive Jacobian");
      QuadPoint& qp = quad_[e * rule.points + q];
      qp.grad = rule.grads[q] * jac.inverse();
      qp.weight = rule.weights[q] * det;
    }
  }

  boundary_ = extract_boundary(type_, connectivity_, nodes_.size());
  boundary_mask_.assign(nodes_.size(), 0);
  for (std::size_t i : boundary_.vertex_set) boundary_mask_[i] = 1;
}

double Mesh::element_volume(std::size_t e) const {
  double v = 0.0;
  for (const auto& qp : quadrature(e)) v += qp.weight;
  return v;
}

double Mesh::volume() const {
  double v = 0.0;
  for (std::size_t e = 0; e < cell_count(); ++e) v += element_volume(e);
  return v;
}

double Mesh::diameter() const {
  Vec3 lo = nodes_.front(), hi = nodes_.front();
  for (const auto& x : nodes_) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).norm();
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const int t = vtk_cell_id(type_);
  h = fnv1a(h, &t, sizeof t);
  for (const auto& x : nodes_) h = fnv1a(h, x.data(), 3 * sizeof(double));
  for (std::size_t i : connectivity_) {
    const auto v = static_cast<std::uint64_t>(i);
    h = fnv1a(h, &v, sizeof v);
  }
  const std::uint64_t sep = ~0ULL;
  h = fnv1a(h, &sep, sizeof sep);
  for (std::size_t i : dirichlet_) {
    const auto v = static_cast<std::uint64_t>(i);
    h = fnv1a(h, &v, sizeof v);
  }
  return h;
}

Mesh Mesh::with_dirichlet(std::vector<std::size_t> dirichlet_nodes) const {
  return Mesh(nodes_, type_, connectivity_, std::move(dirichlet_nodes));
}

NodalField Mesh::positions() const {
  NodalField x(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) x.node(i) = nodes_[i];
  return x;
}

Mesh build_beam_mesh(int nx, int ny, int nz, const std::array<double, 3>& lengths) {
  if (nx < 1 || ny < 1 || nz < 1) throw InvalidArgument("beam cell counts must be >= 1");
  for (double l : lengths)
    if (!(l > 0.0)) throw InvalidArgument("beam lengths must be > 0");

  const auto id = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i + (nx + 1) * (j + (ny + 1) * k));
  };
  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        nodes.emplace_back(lengths[0] * i / nx, lengths[1] * j / ny, lengths[2] * k / nz);

  std::vector<std::size_t> conn;
  conn.reserve(static_cast<std::size_t>(8 * nx * ny * nz));
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t c[8] = {id(i, j, k),         id(i + 1, j, k),
                                  id(i + 1, j + 1, k), id(i, j + 1, k),
                                  id(i, j, k + 1),     id(i + 1, j, k + 1),
                                  id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)};
        conn.insert(conn.end(), c, c + 8);
      }

  std::vector<std::size_t> clamped;
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j) clamped.push_back(id(0, j, k));

  return Mesh(std::move(nodes), CellType::Hex8, std::move(conn), std::move(clamped));
}

Mesh build_tet_beam_mesh(int nx, int ny, int nz, const std::array<double, 3>& lengths) {
  const Mesh hex = build_beam_mesh(nx, ny, nz, lengths);
  static constexpr std::size_t kuhn[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                                             {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};
  std::vector<std::size_t> conn;
  conn.reserve(hex.cell_count() * 24);
  for (std::size_t e = 0; e < hex.cell_count(); ++e) {
    auto c = hex.cell(e);
    for (const auto& t : kuhn) {
      std::size_t v[4] = {c[t[0]], c[t[1]], c[t[2]], c[t[3]]};
      const Vec3& x0 = hex.node(v[0]);
      const double vol = (hex.node(v[1]) - x0).cross(hex.node(v[2]) - x0).dot(hex.node(v[3]) - x0);
      if (vol < 0) std::swap(v[1], v[2]);
      conn.insert(conn.end(), v, v + 4);
    }
  }
  return Mesh(hex.nodes(), CellType::Tet4, std::move(conn), hex.dirichlet_nodes());
}

SurfaceMesh extract_boundary(CellType type, std::span<const std::size_t> connectivity,
                             std::size_t node_count) {
  const std::size_t npe = nodes_per_cell(type);
  const LocalFaces& lf = local_faces(type);
  const std::size_t nv = lf.verts_per_face;

  struct FaceRecord {
    std::array<std::size_t, 4> verts;  // oriented
    int count = 0;
  };
  std::map<std::array<std::size_t, 4>, FaceRecord> faces;
  const std::size_t ncells = connectivity.size() / npe;
  for (std::size_t e = 0; e < ncells; ++e) {
    const std::size_t* c = connectivity.data() + e * npe;
    for (std::size_t f = 0; f < lf.count; ++f) {
      std::array<std::size_t, 4> oriented{};
      for (std::size_t k = 0; k < nv; ++k) oriented[k] = c[lf.faces[f][k]];
      std::array<std::size_t, 4> key = oriented;
      if (nv == 3) key[3] = static_cast<std::size_t>(-1);
      std::sort(key.begin(), key.end());
      auto [it, inserted] = faces.try_emplace(key, FaceRecord{oriented, 0});
      if (++it->second.count > 2)
        throw InvalidMesh("non-manifold face shared by more than two cells (cell " +
                          std::to_string(e) + ")");
    }
  }

  SurfaceMesh s;
  std::vector<char> on_surface(node_count, 0);
  // Emit in cell/face order for determinism.
  std::vector<std::array<std::size_t, 4>> boundary_faces;
  for (std::size_t e = 0; e < ncells; ++e) {
    const std::size_t* c = connectivity.data() + e * npe;
    for (std::size_t f = 0; f < lf.count; ++f) {
      std::array<std::size_t, 4> key{};
      for (std::size_t k = 0; k < nv; ++k) key[k] = c[lf.faces[f][k]];
      if (nv == 3) key[3] = static_cast<std::size_t>(-1);
      std::sort(key.begin(), key.end());
      const auto& rec = faces.at(key);
      if (rec.count == 1) boundary_faces.push_back(rec.verts);
    }
  }
  for (const auto& v : boundary_faces) {
    if (nv == 3) {
      s.triangles.push_back({v[0], v[1], v[2]});
    } else {
      std::size_t k = 0;
      for (std::size_t t = 1; t < 4; ++t)
        if (v[t] < v[k]) k = t;
      s.triangles.push_back({v[k], v[(k + 1) % 4], v[(k + 2) % 4]});
      s.triangles.push_back({v[k], v[(k + 2) % 4], v[(k + 3) % 4]});
    }
    for (std::size_t t = 0; t < nv; ++t) on_surface[v[t]] = 1;
  }
  for (std::size_t i = 0; i < node_count; ++i)
    if (on_surface[i]) s.vertex_set.push_back(i);

  std::map<std::pair<std::size_t, std::size_t>, int> edges;
  for (const auto& t : s.triangles)
    for (int k = 0; k < 3; ++k) {
      auto a = t[k], b = t[(k + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  for (const auto& [e, n] : edges)
    if (n != 2) ++s.open_edge_count;
  return s;
}

double enclosed_volume(const SurfaceMesh& surface, const std::vector<Vec3>& x) {
  double v = 0.0;
  for (const auto& t : surface.triangles) v += x[t[0]].dot(x[t[1]].cross(x[t[2]]));
  return v / 6.0;
}

std::vector<Vec3> deformed_positions(const Mesh& mesh, const NodalField& u) {
  if (u.node_count() != mesh.node_count())
    throw InvalidArgument("displacement length does not match mesh");
  std::vector<Vec3> x(mesh.nodes());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += u.node(i);
  return x;
}

void zero_dirichlet(const Mesh& mesh, NodalField& f) {
  if (f.node_count() != mesh.node_count()) throw InvalidArgument("field length does not match mesh");
  for (auto i : mesh.dirichlet_nodes()) f.node(i).setZero();
}

std::vector<std::size_t> nodes_on_plane(const Mesh& mesh, int axis, double value, double tol) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mesh.node_count(); ++i)
    if (std::abs(mesh.node(i)[axis] - value) <= tol) out.push_back(i);
  return out;
}

}  // namespace hyperreg
