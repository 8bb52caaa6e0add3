#pragma once
// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls the code path it is used to check.

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "hyperreg/geomdist.hpp"
#include "hyperreg/hyperelastic.hpp"
#include "hyperreg/mesh.hpp"
#include "hyperreg/rng.hpp"

namespace hyperreg::testing {

/// Random displacement with i.i.d. normal components scaled by `scale`,
/// zero on Dirichlet nodes.
inline NodalField random_field(const Mesh& mesh, Rng& rng, double scale, bool respect_dirichlet = true) {
  NodalField u(mesh.node_count());
  for (Eigen::Index i = 0; i < u.dof_count(); ++i) u.vec()[i] = scale * rng.normal();
  if (respect_dirichlet)
    for (std::size_t i : mesh.dirichlet_nodes()) u.node(i).setZero();
  return u;
}

/// Small hex or tet beam with random cell counts and edge lengths.
inline Mesh random_box_mesh(Rng& rng) {
  const int nx = 1 + static_cast<int>(rng.below(3));
  const int ny = 1 + static_cast<int>(rng.below(2));
  const int nz = 1 + static_cast<int>(rng.below(2));
  const std::array<double, 3> l{rng.uniform(0.5, 1.5), rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5)};
  return rng.below(2) ? build_beam_mesh(nx, ny, nz, l) : build_tet_beam_mesh(nx, ny, nz, l);
}

/// Small-strain isotropic stiffness assembled from B^T D B with the Voigt
/// constitutive matrix. Dirichlet rows/columns replaced by identity.
inline Eigen::MatrixXd linear_elastic_stiffness(const Mesh& mesh, double young, double nu) {
  const double lam = young * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = young / (2 * (1 + nu));
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  D.topLeftCorner<3, 3>().setConstant(lam);
  D.topLeftCorner<3, 3>().diagonal().array() += 2 * mu;
  D.bottomRightCorner<3, 3>().diagonal().setConstant(mu);

  const auto ndof = static_cast<Eigen::Index>(mesh.dof_count());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ndof, ndof);
  const std::size_t npe = nodes_per_cell(mesh.cell_type());
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    auto c = mesh.cell(e);
    for (const QuadPoint& qp : mesh.quadrature(e)) {
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(3 * npe));
      for (std::size_t a = 0; a < npe; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const double dx = qp.grad(ai, 0), dy = qp.grad(ai, 1), dz = qp.grad(ai, 2);
        B(0, 3 * ai) = dx;
        B(1, 3 * ai + 1) = dy;
        B(2, 3 * ai + 2) = dz;
        B(3, 3 * ai) = dy;  // gamma_xy
        B(3, 3 * ai + 1) = dx;
        B(4, 3 * ai + 1) = dz;  // gamma_yz
        B(4, 3 * ai + 2) = dy;
        B(5, 3 * ai) = dz;  // gamma_xz
        B(5, 3 * ai + 2) = dx;
      }
      const Eigen::MatrixXd ke = qp.weight * B.transpose() * D * B;
      for (std::size_t a = 0; a < npe; ++a)
        for (std::size_t b = 0; b < npe; ++b)
          K.block<3, 3>(3 * static_cast<Eigen::Index>(c[a]), 3 * static_cast<Eigen::Index>(c[b])) +=
              ke.block<3, 3>(3 * static_cast<Eigen::Index>(a), 3 * static_cast<Eigen::Index>(b));
    }
  }
  for (std::size_t i : mesh.dirichlet_nodes())
    for (int k = 0; k < 3; ++k) {
      const auto d = static_cast<Eigen::Index>(3 * i + static_cast<std::size_t>(k));
      K.row(d).setZero();
      K.col(d).setZero();
      K(d, d) = 1.0;
    }
  return K;
}

/// Composite Simpson on [0,1] with n (even) panels, Richardson-extrapolated
/// from n and 2n (fourth-order rule -> factor 16).
inline double richardson_simpson(const std::function<double(double)>& f, int n) {
  auto simpson = [&](int m) {
    const double h = 1.0 / m;
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return s * h / 3.0;
  };
  const double coarse = simpson(n), fine = simpson(2 * n);
  return (16.0 * fine - coarse) / 15.0;
}

/// Central difference of a scalar function along a direction.
inline double central_difference(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

/// Linear scan over all triangles, lowest index wins ties.
inline ClosestPointRecord brute_force_closest(const SurfaceMesh& s, const std::vector<Vec3>& x,
                                              const Vec3& p) {
  ClosestPointRecord best;
  best.dist2 = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < s.triangles.size(); ++t) {
    const auto& tri = s.triangles[t];
    const auto proj = closest_point_triangle(p, x[tri[0]], x[tri[1]], x[tri[2]]);
    const double d2 = (p - proj.point).squaredNorm();
    if (d2 < best.dist2) {
      best.dist2 = d2;
      best.triangle = t;
      best.barycentric = proj.barycentric;
      best.closest = proj.point;
    }
  }
  return best;
}

inline double brute_force_J(const Mesh& mesh, const NodalField& u, const PointCloud& cloud) {
  const auto x = deformed_positions(mesh, u);
  double s = 0.0;
  for (const auto& y : cloud.points()) s += brute_force_closest(mesh.boundary(), x, y).dist2;
  return s / (2.0 * static_cast<double>(cloud.size()));
}

/// Points sampled on the deformed surface and pushed off along random
/// directions by up to `spread`.
inline PointCloud noisy_surface_cloud(const Mesh& mesh, const NodalField& u, std::size_t m,
                                      double spread, Rng& rng) {
  const auto x = deformed_positions(mesh, u);
  const auto& tris = mesh.boundary().triangles;
  std::vector<Vec3> pts;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& t = tris[rng.below(tris.size())];
    double r1 = rng.uniform(), r2 = rng.uniform();
    if (r1 + r2 > 1) {
      r1 = 1 - r1;
      r2 = 1 - r2;
    }
    const Vec3 p = x[t[0]] + r1 * (x[t[1]] - x[t[0]]) + r2 * (x[t[2]] - x[t[0]]);
    pts.push_back(p + spread * Vec3(rng.normal(), rng.normal(), rng.normal()));
  }
  return PointCloud(std::move(pts));
}

/// Surrogate interface backed by the exact solver: forward is a Newton solve,
/// backward the transposed tangent solve.
struct PerfectSurrogate {
  mutable HyperelasticModel model;
  NewtonOptions opts;

  PerfectSurrogate(const Mesh& mesh, const Material& mat) : model(mesh, mat) {}
  std::pair<NodalField, NodalField> forward(const NodalField& g) const {
    NodalField u = model.solve(g, opts).u;
    return {u, u};
  }
  NodalField backward(const NodalField& u, const NodalField& cot) const { return model.adjoint_solve(u, cot); }
  void check_compatible(const Mesh&) const {}
};

}  // namespace hyperreg::testing
