#pragma once

#include <chrono>
#include <concepts>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hyperreg/errors.hpp"
#include "hyperreg/geomdist.hpp"
#include "hyperreg/hyperelastic.hpp"
#include "hyperreg/mesh.hpp"
#include "hyperreg/surrogate.hpp"

namespace hyperreg {

/// Admissible forces: nonzero only on the allowed DOFs, optionally boxed.
struct AdmissibleSet {
  std::vector<std::size_t> dofs;        // sorted, unique
  std::optional<Eigen::VectorXd> lower;  // per allowed DOF
  std::optional<Eigen::VectorXd> upper;

  /// All three components of the given nodes.
  static AdmissibleSet from_nodes(const Mesh& mesh, std::vector<std::size_t> nodes);
  /// Every boundary node that is not a Dirichlet node.
  static AdmissibleSet whole_boundary(const Mesh& mesh);

  std::size_t size() const noexcept { return dofs.size(); }
  bool bounded() const noexcept { return lower.has_value(); }
  void set_bounds(double lo, double hi);

  void validate(const Mesh& mesh) const;
  Eigen::VectorXd restrict(const NodalField& f) const;
  NodalField expand(const Eigen::VectorXd& x, std::size_t node_count) const;
  /// Clamp into the box (no-op without bounds).
  Eigen::VectorXd project(Eigen::VectorXd x) const;
  /// True when f is exactly zero outside the allowed DOFs.
  bool supports(const NodalField& f) const;
};

enum class Backend { Newton, Surrogate };
const char* to_string(Backend b);
Backend backend_from_string(const std::string& s);

enum class Termination { GradientTolerance, MaxIterations, LineSearchFailure };
const char* to_string(Termination t);

struct StageTimes {
  double forward = 0.0;   // s, Newton solve or network forward pass
  double distance = 0.0;  // s, J and its gradient
  double backward = 0.0;  // s, adjoint solve or network backward pass
};

struct PhiEvaluation {
  double value = 0.0;
  double distance = 0.0;  // the J part of value
  NodalField gradient;    // zero outside the allowed DOFs
  NodalField u;
  StageTimes times;
};

namespace detail {
using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
void check_phi_inputs(const Mesh& mesh, const NodalField& g, const PointCloud& cloud, double alpha,
                      const AdmissibleSet& admissible);
PhiEvaluation finish_phi(const Mesh& mesh, const PointCloud& cloud, double alpha,
                         const AdmissibleSet& admissible, const NodalField& g, NodalField u,
                         double forward_time,
                         const std::function<NodalField(const NodalField&)>& backward);
}  // namespace detail

/// Anything that maps forces to displacements with a matching adjoint.
template <class S>
concept SurrogateModel = requires(const S& s, const NodalField& g, const Mesh& mesh) {
  { s.forward(g) };
  { s.backward(s.forward(g).second, g) } -> std::convertible_to<NodalField>;
  { s.forward(g).first } -> std::convertible_to<NodalField>;
  s.check_compatible(mesh);
};

/// Adapter exposing an Mlp through the SurrogateModel interface.
struct MlpSurrogate {
  const Mlp* mlp;
  std::pair<NodalField, ForwardCache> forward(const NodalField& g) const { return hyperreg::forward(*mlp, g); }
  NodalField backward(const ForwardCache& c, const NodalField& cot) const {
    return backward_adjoint(*mlp, c, cot);
  }
  void check_compatible(const Mesh& mesh) const { mlp->check_compatible(mesh); }
};

/// Phi(g) = J(N(g)) + alpha/2 |g|^2 and its gradient through the surrogate's adjoint.
/// The prediction is clamped on Dirichlet nodes like the physical solution, so
/// the chain uses grad J with Dirichlet rows removed.
template <SurrogateModel S>
PhiEvaluation eval_phi_surrogate(const NodalField& g, const S& surrogate, const Mesh& mesh,
                                 const PointCloud& cloud, double alpha,
                                 const AdmissibleSet& admissible) {
  surrogate.check_compatible(mesh);
  detail::check_phi_inputs(mesh, g, cloud, alpha, admissible);
  const auto t0 = detail::Clock::now();
  auto [u, cache] = surrogate.forward(g);
  zero_dirichlet(mesh, u);
  const double tf = detail::seconds_since(t0);
  return detail::finish_phi(mesh, cloud, alpha, admissible, g, std::move(u), tf,
                            [&](const NodalField& dj) { return NodalField(surrogate.backward(cache, dj)); });
}

inline PhiEvaluation eval_phi_surrogate(const NodalField& g, const Mlp& mlp, const Mesh& mesh,
                                        const PointCloud& cloud, double alpha,
                                        const AdmissibleSet& admissible) {
  return eval_phi_surrogate(g, MlpSurrogate{&mlp}, mesh, cloud, alpha, admissible);
}

/// Phi(g) with u_g from the Newton solver and the gradient from K(u_g)^T p = grad J.
/// Solver failures are reported as EvaluationFailed.
PhiEvaluation eval_phi_newton(const NodalField& g, HyperelasticModel& model, const PointCloud& cloud,
                              double alpha, const AdmissibleSet& admissible,
                              const NewtonOptions& newton = {}, const NodalField* u0 = nullptr);

struct LbfgsOptions {
  double tolerance = 1e-4;
  int max_iterations = 100;
  int memory = 10;
  double c1 = 1e-4;
  int max_backtracks = 40;
  /// Reference for the relative gradient test; <= 0 uses max(1, |pg_0|).
  double gradient_reference = 0.0;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::vector<double> values;          // per accepted iterate, starting at x0
  std::vector<double> gradient_norms;  // projected gradient norms, same length
  int iterations = 0;
  int evaluations = 0;
  Termination termination = Termination::MaxIterations;
};

/// Returns f(x) and writes its gradient. Throwing EvaluationFailed during a line
/// search counts as an infinite value.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Two-loop L-BFGS with Armijo backtracking (halving). With box bounds trial
/// points are projected and the stop test uses the projected gradient.
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0,
                           const std::optional<Eigen::VectorXd>& lower,
                           const std::optional<Eigen::VectorXd>& upper, const LbfgsOptions& opts);

struct RegistrationConfig {
  double alpha = 1e-8;
  Backend backend = Backend::Newton;
  double tolerance = 1e-4;  // relative to the projected gradient norm at g = 0
  int max_iterations = 100;
  int memory = 10;
  bool certify = false;  // recompute u_opt with the Newton solver (surrogate backend)
  NewtonOptions newton;

  void validate() const;
};

/// alpha = 1e-8 diam^2 / gmax^2: the penalty stays well below J at typical loads.
double default_alpha(const Mesh& mesh, double gmax);

struct RegistrationResult {
  NodalField g;
  NodalField u;
  std::vector<double> objective;
  std::vector<double> gradient_norm;
  int iterations = 0;
  int evaluations = 0;
  Termination termination = Termination::MaxIterations;
  StageTimes times;         // summed over all evaluations
  double total_time = 0.0;  // s, wall time of the whole registration
  bool certified = false;
};

struct RegistrationProblem {
  const Mesh* mesh = nullptr;
  Material material;
  const PointCloud* cloud = nullptr;
  AdmissibleSet admissible;
  const Mlp* model = nullptr;  // required by the surrogate backend
};

RegistrationResult register_cloud(const RegistrationProblem& problem, const RegistrationConfig& cfg,
                                  const NodalField* g0 = nullptr);

/// Registers each cloud in order, warm-starting from the previous g_opt.
std::vector<RegistrationResult> register_sequence(const RegistrationProblem& problem,
                                                  const std::vector<PointCloud>& clouds,
                                                  const RegistrationConfig& cfg,
                                                  const NodalField* g0 = nullptr);

}  // namespace hyperreg
