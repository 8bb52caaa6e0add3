#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "hyperreg/mesh.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

struct LameParameters {
  double mu;
  double lambda;
};

/// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)).
/// Requires E > 0 and 0 <= nu < 0.5.
LameParameters lame_parameters(double young_modulus, double poisson_ratio);

struct Material {
  double young_modulus = 4500.0;
  double poisson_ratio = 0.49;
  double mu = 0.0;
  double lambda = 0.0;

  static Material from_young_poisson(double young_modulus, double poisson_ratio);
};

struct NewtonOptions {
  double tolerance = 1e-10;  // on ||F(u) - g|| relative to max(1, ||g||)
  int max_iterations = 25;   // per substep
  int initial_substeps = 1;
  int max_substeps = 64;
  int max_halvings = 8;
};

struct NewtonSolution {
  NodalField u;
  int iterations = 0;  // total Newton iterations over all attempts
  int substeps = 0;    // substep count of the successful attempt
  double residual_norm = 0.0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Compressible Neo-Hookean finite-element model on a fixed mesh:
///   W = sum_q w_q [ mu/2 (tr(F^T F) - 3) - mu ln J + lambda/2 (ln J)^2 ].
/// Dirichlet degrees of freedom follow the reduced-system convention: residual
/// rows are zero and tangent rows/columns are replaced by the identity.
///
/// The object caches the sparsity pattern and the symbolic factorization; it is
/// not safe to share one instance between threads.
class HyperelasticModel {
 public:
  HyperelasticModel(const Mesh& mesh, const Material& material);
  ~HyperelasticModel();
  HyperelasticModel(HyperelasticModel&&) noexcept;
  HyperelasticModel& operator=(HyperelasticModel&&) noexcept;

  const Mesh& mesh() const noexcept { return *mesh_; }
  const Material& material() const noexcept { return material_; }

  double energy(const NodalField& u) const;
  NodalField residual(const NodalField& u) const;
  SparseMatrix tangent(const NodalField& u) const;
  /// Cauchy-stress Von Mises invariant averaged over each element's quadrature points.
  std::vector<double> von_mises(const NodalField& u) const;

  /// Solves F(u) = g with load substepping and residual-based step halving.
  /// Throws NoConvergence when max_substeps is exhausted.
  NewtonSolution solve(const NodalField& g, const NewtonOptions& opts,
                       const NodalField* u0 = nullptr);

  /// Solves K(u)^T p = rhs. Dirichlet entries of rhs are ignored (p is zero there).
  NodalField adjoint_solve(const NodalField& u, const NodalField& rhs);

  /// Linear solve with K(0), i.e. small-strain elasticity.
  NodalField linear_solve(const NodalField& g);

  /// Zeroes Dirichlet entries.
  void apply_dirichlet(NodalField& f) const;

 private:
  struct Pattern;
  struct Factorization;

  void assemble(const NodalField& u, double* energy, Eigen::VectorXd* residual,
                SparseMatrix* tangent) const;
  void factorize(const SparseMatrix& k);
  Eigen::VectorXd solve_factored(const Eigen::VectorXd& rhs) const;
  void check_field(const NodalField& f, const char* what) const;

  const Mesh* mesh_;
  Material material_;
  std::unique_ptr<Pattern> pattern_;
  std::unique_ptr<Factorization> factor_;
};

// Free-function forms; each builds a temporary model.
double energy(const Mesh& mesh, const Material& material, const NodalField& u);
NodalField residual(const Mesh& mesh, const Material& material, const NodalField& u);
SparseMatrix tangent(const Mesh& mesh, const Material& material, const NodalField& u);
NodalField newton_solve(const Mesh& mesh, const Material& material, const NodalField& g,
                        const NewtonOptions& opts = {}, const NodalField* u0 = nullptr);
std::vector<double> von_mises(const Mesh& mesh, const Material& material, const NodalField& u);

}  // namespace hyperreg
