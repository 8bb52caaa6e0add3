#include "hyperreg/hyperelastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "hyperreg/errors.hpp"

namespace hyperreg {

LameParameters lame_parameters(double young_modulus, double poisson_ratio) {
  if (!(young_modulus > 0.0)) throw InvalidArgument("Young modulus must be > 0");
  if (!(poisson_ratio >= 0.0))
    throw InvalidArgument("Poisson ratio must be >= 0");
  if (!(poisson_ratio < 0.5))
    throw InvalidArgument("Poisson ratio must be < 0.5 (incompressible limit unsupported)");
  const double nu = poisson_ratio;
  return {young_modulus / (2.0 * (1.0 + nu)),
          young_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))};
}

Material Material::from_young_poisson(double young_modulus, double poisson_ratio) {
  const auto lame = lame_parameters(young_modulus, poisson_ratio);
  return {young_modulus, poisson_ratio, lame.mu, lame.lambda};
}

struct HyperelasticModel::Pattern {
  SparseMatrix templ;             // structure with zero values
  std::vector<int> element_map;   // per cell, (3 npe)^2 value slots, -1 for Dirichlet
  std::vector<int> dirichlet_diag;
  std::vector<char> dof_fixed;
};

struct HyperelasticModel::Factorization {
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool analyzed = false;
};

HyperelasticModel::HyperelasticModel(const Mesh& mesh, const Material& material)
    : mesh_(&mesh),
      material_(material),
      pattern_(std::make_unique<Pattern>()),
      factor_(std::make_unique<Factorization>()) {
  if (material_.mu == 0.0 && material_.lambda == 0.0)
    material_ = Material::from_young_poisson(material.young_modulus, material.poisson_ratio);

  const std::size_t n = mesh.node_count();
  const std::size_t npe = nodes_per_cell(mesh.cell_type());
  const auto ndof = static_cast<int>(3 * n);

  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    auto c = mesh.cell(e);
    for (std::size_t a : c)
      for (std::size_t b : c) adj[a].insert(b);
  }
  std::vector<Eigen::Triplet<double, int>> trip;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t m : adj[j])
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          trip.emplace_back(static_cast<int>(3 * m) + r, static_cast<int>(3 * j) + c, 0.0);
  Pattern& p = *pattern_;
  p.templ.resize(ndof, ndof);
  p.templ.setFromTriplets(trip.begin(), trip.end());
  p.templ.makeCompressed();

  p.dof_fixed.assign(3 * n, 0);
  for (std::size_t i : mesh.dirichlet_nodes())
    for (int k = 0; k < 3; ++k) p.dof_fixed[3 * i + k] = 1;

  const int* outer = p.templ.outerIndexPtr();
  const int* inner = p.templ.innerIndexPtr();
  auto slot = [&](int row, int col) {
    const int* b = inner + outer[col];
    const int* e = inner + outer[col + 1];
    const int* it = std::lower_bound(b, e, row);
    return static_cast<int>(it - inner);
  };

  const std::size_t ld = 3 * npe;
  p.element_map.assign(mesh.cell_count() * ld * ld, -1);
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    auto c = mesh.cell(e);
    int* map = p.element_map.data() + e * ld * ld;
    for (std::size_t b = 0; b < npe; ++b)
      for (int k = 0; k < 3; ++k) {
        const int col = static_cast<int>(3 * c[b]) + k;
        for (std::size_t a = 0; a < npe; ++a)
          for (int i = 0; i < 3; ++i) {
            const int row = static_cast<int>(3 * c[a]) + i;
            if (p.dof_fixed[static_cast<std::size_t>(row)] || p.dof_fixed[static_cast<std::size_t>(col)])
              continue;
            map[(3 * b + static_cast<std::size_t>(k)) * ld + 3 * a + static_cast<std::size_t>(i)] =
                slot(row, col);
          }
      }
  }
  for (int d = 0; d < ndof; ++d)
    if (p.dof_fixed[static_cast<std::size_t>(d)]) p.dirichlet_diag.push_back(slot(d, d));
}

HyperelasticModel::~HyperelasticModel() = default;
HyperelasticModel::HyperelasticModel(HyperelasticModel&&) noexcept = default;
HyperelasticModel& HyperelasticModel::operator=(HyperelasticModel&&) noexcept = default;

void HyperelasticModel::check_field(const NodalField& f, const char* what) const {
  if (f.node_count() != mesh_->node_count())
    throw InvalidArgument(std::string(what) + " length does not match the mesh node count");
}

void HyperelasticModel::apply_dirichlet(NodalField& f) const {
  for (std::size_t i : mesh_->dirichlet_nodes()) f.node(i).setZero();
}

void HyperelasticModel::assemble(const NodalField& u, double* energy, Eigen::VectorXd* residual,
                                 SparseMatrix* tangent) const {
  check_field(u, "displacement");
  const Mesh& mesh = *mesh_;
  const std::size_t npe = nodes_per_cell(mesh.cell_type());
  const std::size_t ld = 3 * npe;
  const double mu = material_.mu;
  const double lambda = material_.lambda;

  double w_total = 0.0;
  if (residual) residual->setZero(static_cast<Eigen::Index>(mesh.dof_count()));
  double* kval = nullptr;
  if (tangent) {
    *tangent = pattern_->templ;
    kval = tangent->valuePtr();
  }

  Eigen::Matrix<double, 3, 8> ue;
  Eigen::Matrix<double, 24, 1> fe;
  Eigen::Matrix<double, 24, 24> ke;
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    auto c = mesh.cell(e);
    ue.setZero();
    for (std::size_t a = 0; a < npe; ++a) ue.col(static_cast<Eigen::Index>(a)) = u.node(c[a]);
    fe.setZero();
    if (kval) ke.setZero();
    for (const QuadPoint& qp : mesh.quadrature(e)) {
      const auto G = qp.grad.topRows(static_cast<Eigen::Index>(npe));
      const Mat3 F = Mat3::Identity() + ue.leftCols(static_cast<Eigen::Index>(npe)) * G;
      const double J = F.determinant();
      if (!(J > 0.0)) throw ElementInversion(e);
      const double lnJ = std::log(J);
      const double w = qp.weight;
      if (energy)
        w_total += w * (0.5 * mu * (F.squaredNorm() - 3.0) - mu * lnJ + 0.5 * lambda * lnJ * lnJ);
      if (!residual && !kval) continue;
      const Mat3 Finv = F.inverse();
      const Eigen::Matrix<double, 8, 3> Q = qp.grad * Finv;  // row a: F^{-T} grad N_a
      const Eigen::Matrix<double, 3, 8> FG = F * qp.grad.transpose();
      const double c2 = lambda * lnJ - mu;
      for (std::size_t a = 0; a < npe; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        fe.segment<3>(3 * ai) += w * (mu * FG.col(ai) + c2 * Q.row(ai).transpose());
      }
      if (kval) {
        const Eigen::Matrix<double, 8, 8> GG = qp.grad * qp.grad.transpose();
        for (std::size_t b = 0; b < npe; ++b) {
          const auto bi = static_cast<Eigen::Index>(b);
          for (std::size_t a = 0; a < npe; ++a) {
            const auto ai = static_cast<Eigen::Index>(a);
            // K_{ai,bk} = mu d_ik Ga.Gb + (mu - lambda lnJ) q_b,i q_a,k + lambda q_a,i q_b,k
            Mat3 blk = (-c2) * (Q.row(bi).transpose() * Q.row(ai)) +
                       lambda * (Q.row(ai).transpose() * Q.row(bi));
            blk.diagonal().array() += mu * GG(ai, bi);
            ke.block<3, 3>(3 * ai, 3 * bi) += w * blk;
          }
        }
      }
    }
    if (residual)
      for (std::size_t a = 0; a < npe; ++a)
        residual->segment<3>(3 * static_cast<Eigen::Index>(c[a])) +=
            fe.segment<3>(3 * static_cast<Eigen::Index>(a));
    if (kval) {
      const int* map = pattern_->element_map.data() + e * ld * ld;
      for (std::size_t col = 0; col < ld; ++col)
        for (std::size_t row = 0; row < ld; ++row) {
          const int s = map[col * ld + row];
          if (s >= 0)
            kval[s] += ke(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
        }
    }
  }
  if (energy) *energy = w_total;
  if (residual)
    for (std::size_t d = 0; d < pattern_->dof_fixed.size(); ++d)
      if (pattern_->dof_fixed[d]) (*residual)[static_cast<Eigen::Index>(d)] = 0.0;
  if (kval)
    for (int s : pattern_->dirichlet_diag) kval[s] = 1.0;
}

double HyperelasticModel::energy(const NodalField& u) const {
  double w = 0.0;
  assemble(u, &w, nullptr, nullptr);
  return w;
}

NodalField HyperelasticModel::residual(const NodalField& u) const {
  Eigen::VectorXd r;
  assemble(u, nullptr, &r, nullptr);
  return NodalField(std::move(r));
}

SparseMatrix HyperelasticModel::tangent(const NodalField& u) const {
  SparseMatrix k;
  assemble(u, nullptr, nullptr, &k);
  return k;
}

std::vector<double> HyperelasticModel::von_mises(const NodalField& u) const {
  check_field(u, "displacement");
  const Mesh& mesh = *mesh_;
  const std::size_t npe = nodes_per_cell(mesh.cell_type());
  std::vector<double> out(mesh.cell_count(), 0.0);
  Eigen::Matrix<double, 3, 8> ue;
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    auto c = mesh.cell(e);
    ue.setZero();
    for (std::size_t a = 0; a < npe; ++a) ue.col(static_cast<Eigen::Index>(a)) = u.node(c[a]);
    double acc = 0.0, wsum = 0.0;
    for (const QuadPoint& qp : mesh.quadrature(e)) {
      const Mat3 F = Mat3::Identity() + ue * qp.grad;
      const double J = F.determinant();
      if (!(J > 0.0)) throw ElementInversion(e);
      Mat3 sigma = material_.mu * (F * F.transpose() - Mat3::Identity());
      sigma.diagonal().array() += material_.lambda * std::log(J);
      sigma /= J;
      const Mat3 s = sigma - sigma.trace() / 3.0 * Mat3::Identity();
      acc += qp.weight * std::sqrt(1.5 * s.squaredNorm());
      wsum += qp.weight;
    }
    out[e] = acc / wsum;
  }
  return out;
}

void HyperelasticModel::factorize(const SparseMatrix& k) {
  if (!factor_->analyzed) {
    factor_->ldlt.analyzePattern(k);
    factor_->analyzed = true;
  }
  factor_->ldlt.factorize(k);
  if (factor_->ldlt.info() != Eigen::Success)
    throw EvaluationFailed("tangent factorization failed");
}

Eigen::VectorXd HyperelasticModel::solve_factored(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = factor_->ldlt.solve(rhs);
  if (factor_->ldlt.info() != Eigen::Success || !x.allFinite())
    throw EvaluationFailed("tangent solve failed");
  return x;
}

NewtonSolution HyperelasticModel::solve(const NodalField& g, const NewtonOptions& opts,
                                        const NodalField* u0) {
  check_field(g, "force");
  if (!(opts.tolerance > 0.0) || opts.max_iterations < 1 || opts.initial_substeps < 1 ||
      opts.max_substeps < opts.initial_substeps)
    throw InvalidArgument("invalid Newton options");
  if (mesh_->dirichlet_nodes().empty())
    throw InvalidArgument("mesh has no Dirichlet nodes; rigid modes are unconstrained");
  for (std::size_t i : mesh_->dirichlet_nodes())
    if (!g.node(i).isZero(0.0)) throw InvalidArgument("force is nonzero on a Dirichlet node");

  NodalField start(mesh_->node_count());
  if (u0) {
    check_field(*u0, "initial displacement");
    start = *u0;
    apply_dirichlet(start);
  }
  const Eigen::VectorXd f_start = residual(start).vec();

  NewtonSolution sol;
  double last_residual = std::numeric_limits<double>::infinity();
  for (int substeps = opts.initial_substeps; substeps <= opts.max_substeps; substeps *= 2) {
    Eigen::VectorXd u = start.vec();
    Eigen::VectorXd fu = f_start;
    bool ok = true;
    for (int k = 1; k <= substeps && ok; ++k) {
      const double t = static_cast<double>(k) / substeps;
      const Eigen::VectorXd target = f_start + t * (g.vec() - f_start);
      const double tol = opts.tolerance * std::max(1.0, target.norm());
      Eigen::VectorXd r = target - fu;
      double rnorm = r.norm();
      int it = 0;
      while (rnorm > tol) {
        if (it++ >= opts.max_iterations) {
          ok = false;
          break;
        }
        ++sol.iterations;
        Eigen::VectorXd du;
        try {
          factorize(tangent(NodalField(u)));
          du = solve_factored(r);
        } catch (const Error&) {
          ok = false;
          break;
        }
        // Accept when the total potential W(u) - target.u or the residual norm
        // decreases; otherwise (or on inversion) halve the step.
        const double pot = energy(NodalField(u)) - target.dot(u);
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
          Eigen::VectorXd trial = u + step * du;
          try {
            double wt = 0.0;
            Eigen::VectorXd ft;
            assemble(NodalField(trial), &wt, &ft, nullptr);
            Eigen::VectorXd rt = target - ft;
            const double tn = rt.norm();
            const double pt = wt - target.dot(trial);
            if (std::isfinite(tn) && (tn < rnorm || pt < pot)) {
              u = std::move(trial);
              fu = std::move(ft);
              r = std::move(rt);
              rnorm = tn;
              accepted = true;
              break;
            }
          } catch (const ElementInversion&) {
          }
        }
        if (!accepted) {
          ok = false;
          break;
        }
      }
      last_residual = rnorm;
    }
    if (ok) {
      sol.u = NodalField(std::move(u));
      sol.substeps = substeps;
      sol.residual_norm = last_residual;
      return sol;
    }
    if (substeps > opts.max_substeps / 2) break;
  }
  throw NoConvergence("Newton solve failed after " + std::to_string(opts.max_substeps) + " substeps",
                      last_residual);
}

NodalField HyperelasticModel::adjoint_solve(const NodalField& u, const NodalField& rhs) {
  check_field(rhs, "adjoint right-hand side");
  // The tangent is symmetric, so K^T p = rhs is solved with the factorization of K.
  factorize(tangent(u));
  Eigen::VectorXd b = rhs.vec();
  for (std::size_t d = 0; d < pattern_->dof_fixed.size(); ++d)
    if (pattern_->dof_fixed[d]) b[static_cast<Eigen::Index>(d)] = 0.0;
  return NodalField(solve_factored(b));
}

NodalField HyperelasticModel::linear_solve(const NodalField& g) {
  return adjoint_solve(NodalField(mesh_->node_count()), g);
}

double energy(const Mesh& mesh, const Material& material, const NodalField& u) {
  return HyperelasticModel(mesh, material).energy(u);
}
NodalField residual(const Mesh& mesh, const Material& material, const NodalField& u) {
  return HyperelasticModel(mesh, material).residual(u);
}
SparseMatrix tangent(const Mesh& mesh, const Material& material, const NodalField& u) {
  return HyperelasticModel(mesh, material).tangent(u);
}
NodalField newton_solve(const Mesh& mesh, const Material& material, const NodalField& g,
                        const NewtonOptions& opts, const NodalField* u0) {
  return HyperelasticModel(mesh, material).solve(g, opts, u0).u;
}
std::vector<double> von_mises(const Mesh& mesh, const Material& material, const NodalField& u) {
  return HyperelasticModel(mesh, material).von_mises(u);
}

}  // namespace hyperreg
