#include "hyperreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace hyperreg {

using Eigen::VectorXd;

AdmissibleSet AdmissibleSet::from_nodes(const Mesh& mesh, std::vector<std::size_t> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  AdmissibleSet a;
  for (auto i : nodes)
    for (std::size_t c = 0; c < 3; ++c) a.dofs.push_back(3 * i + c);
  a.validate(mesh);
  return a;
}

AdmissibleSet AdmissibleSet::whole_boundary(const Mesh& mesh) {
  std::vector<std::size_t> nodes;
  for (auto i : mesh.boundary().vertex_set)
    if (!mesh.is_dirichlet(i)) nodes.push_back(i);
  return from_nodes(mesh, std::move(nodes));
}

void AdmissibleSet::set_bounds(double lo, double hi) {
  if (!(lo <= 0.0 && 0.0 <= hi)) throw InvalidArgument("admissible bounds need lo <= 0 <= hi");
  lower = VectorXd::Constant(static_cast<Eigen::Index>(dofs.size()), lo);
  upper = VectorXd::Constant(static_cast<Eigen::Index>(dofs.size()), hi);
}

void AdmissibleSet::validate(const Mesh& mesh) const {
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    if (k > 0 && dofs[k] <= dofs[k - 1]) throw InvalidArgument("admissible DOFs must be sorted and unique");
    const std::size_t node = dofs[k] / 3;
    if (node >= mesh.node_count()) throw InvalidArgument("admissible DOF out of range");
    if (!mesh.is_boundary(node) || mesh.is_dirichlet(node))
      throw InvalidArgument("admissible DOFs must lie on non-Dirichlet boundary nodes (node " +
                            std::to_string(node) + ")");
  }
  if (lower.has_value() != upper.has_value()) throw InvalidArgument("admissible bounds need both sides");
  if (lower) {
    if (static_cast<std::size_t>(lower->size()) != dofs.size() || static_cast<std::size_t>(upper->size()) != dofs.size())
      throw InvalidArgument("admissible bounds have the wrong length");
    if ((lower->array() > 0.0).any() || (upper->array() < 0.0).any())
      throw InvalidArgument("admissible bounds need lo <= 0 <= hi");
  }
}

VectorXd AdmissibleSet::restrict(const NodalField& f) const {
  VectorXd x(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) x[static_cast<Eigen::Index>(k)] = f.vec()[static_cast<Eigen::Index>(dofs[k])];
  return x;
}

NodalField AdmissibleSet::expand(const VectorXd& x, std::size_t node_count) const {
  if (static_cast<std::size_t>(x.size()) != dofs.size()) throw InvalidArgument("expand: wrong reduced length");
  NodalField f(node_count);
  for (std::size_t k = 0; k < dofs.size(); ++k) f.vec()[static_cast<Eigen::Index>(dofs[k])] = x[static_cast<Eigen::Index>(k)];
  return f;
}

VectorXd AdmissibleSet::project(VectorXd x) const {
  if (lower) x = x.cwiseMax(*lower).cwiseMin(*upper);
  return x;
}

bool AdmissibleSet::supports(const NodalField& f) const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < f.dof_count(); ++i) {
    while (k < dofs.size() && dofs[k] < i) ++k;
    if (k < dofs.size() && dofs[k] == i) continue;
    if (f.vec()[static_cast<Eigen::Index>(i)] != 0.0) return false;
  }
  return true;
}

const char* to_string(Backend b) { return b == Backend::Newton ? "newton" : "surrogate"; }

Backend backend_from_string(const std::string& s) {
  if (s == "newton") return Backend::Newton;
  if (s == "surrogate") return Backend::Surrogate;
  throw InvalidArgument("unknown backend '" + s + "' (expected newton or surrogate)");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

namespace detail {

void check_phi_inputs(const Mesh& mesh, const NodalField& g, const PointCloud& cloud, double alpha,
                      const AdmissibleSet& admissible) {
  if (g.node_count() != mesh.node_count()) throw InvalidArgument("force length does not match the mesh");
  if (cloud.empty()) throw InvalidArgument("point cloud is empty");
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  if (!admissible.supports(g)) throw InvalidArgument("force is nonzero outside the admissible DOFs");
}

PhiEvaluation finish_phi(const Mesh& mesh, const PointCloud& cloud, double alpha, const AdmissibleSet& admissible,
                         const NodalField& g, NodalField u, double forward_time,
                         const std::function<NodalField(const NodalField&)>& backward) {
  PhiEvaluation e;
  e.times.forward = forward_time;
  auto t0 = Clock::now();
  const auto dist = evaluate_J(mesh, u, cloud);
  const NodalField dj = grad_J(mesh, u, cloud, dist);
  e.times.distance = seconds_since(t0);
  t0 = Clock::now();
  const NodalField p = backward(dj);
  e.times.backward = seconds_since(t0);
  e.distance = dist.value;
  e.value = dist.value + 0.5 * alpha * g.vec().squaredNorm();
  e.gradient = admissible.expand(admissible.restrict(p + alpha * g), mesh.node_count());
  e.u = std::move(u);
  return e;
}

}  // namespace detail

PhiEvaluation eval_phi_newton(const NodalField& g, HyperelasticModel& model, const PointCloud& cloud, double alpha,
                              const AdmissibleSet& admissible, const NewtonOptions& newton, const NodalField* u0) {
  const Mesh& mesh = model.mesh();
  detail::check_phi_inputs(mesh, g, cloud, alpha, admissible);
  const auto t0 = detail::Clock::now();
  NodalField u;
  try {
    u = model.solve(g, newton, u0).u;
  } catch (const NoConvergence& e) {
    throw EvaluationFailed(std::string("forward solve failed: ") + e.what());
  } catch (const ElementInversion& e) {
    throw EvaluationFailed(std::string("forward solve failed: ") + e.what());
  }
  const double tf = detail::seconds_since(t0);
  const NodalField uu = u;
  return detail::finish_phi(mesh, cloud, alpha, admissible, g, std::move(u), tf,
                            [&](const NodalField& dj) { return model.adjoint_solve(uu, dj); });
}

namespace {

VectorXd projected_gradient(const VectorXd& x, const VectorXd& g, const std::optional<VectorXd>& lo,
                            const std::optional<VectorXd>& hi) {
  if (!lo) return g;
  return x - (x - g).cwiseMax(*lo).cwiseMin(*hi);
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, VectorXd x0, const std::optional<VectorXd>& lower,
                           const std::optional<VectorXd>& upper, const LbfgsOptions& opts) {
  if (!(opts.tolerance > 0.0) || opts.memory < 1 || opts.max_iterations < 0 || !(opts.c1 > 0.0 && opts.c1 < 1.0))
    throw InvalidArgument("lbfgs: invalid options");
  if (lower.has_value() != upper.has_value()) throw InvalidArgument("lbfgs: bounds need both sides");
  if (lower && (lower->size() != x0.size() || upper->size() != x0.size()))
    throw InvalidArgument("lbfgs: bounds have the wrong length");
  auto project = [&](VectorXd x) {
    if (lower) x = x.cwiseMax(*lower).cwiseMin(*upper);
    return x;
  };

  LbfgsResult r;
  r.x = project(std::move(x0));
  r.gradient = VectorXd::Zero(r.x.size());
  try {
    r.value = f(r.x, r.gradient);
  } catch (const EvaluationFailed& e) {
    throw EvaluationFailed(std::string("objective failed at the initial iterate: ") + e.what());
  }
  ++r.evaluations;
  if (!std::isfinite(r.value)) throw EvaluationFailed("objective is not finite at the initial iterate");

  VectorXd pg = projected_gradient(r.x, r.gradient, lower, upper);
  const double ref = opts.gradient_reference > 0.0 ? opts.gradient_reference : std::max(1.0, pg.norm());
  r.values.push_back(r.value);
  r.gradient_norms.push_back(pg.norm());

  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  double gamma = 0.0;  // initial inverse-Hessian scale; 0 until the first curvature pair
  for (;;) {
    if (pg.norm() <= opts.tolerance * ref) {
      r.termination = Termination::GradientTolerance;
      return r;
    }
    if (r.iterations >= opts.max_iterations) {
      r.termination = Termination::MaxIterations;
      return r;
    }

    // two-loop recursion
    VectorXd q = r.gradient;
    std::vector<double> a(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      a[i] = rho[i] * S[i].dot(q);
      q -= a[i] * Y[i];
    }
    if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    q *= gamma > 0.0 ? gamma : 1.0 / std::max(q.norm(), 1e-300);
    for (std::size_t i = 0; i < S.size(); ++i) q += S[i] * (a[i] - rho[i] * Y[i].dot(q));
    VectorXd d = -q;
    if (lower)
      for (Eigen::Index i = 0; i < d.size(); ++i)
        if ((r.x[i] <= (*lower)[i] && d[i] < 0) || (r.x[i] >= (*upper)[i] && d[i] > 0)) d[i] = 0;
    if (!(r.gradient.dot(d) < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -(gamma > 0.0 ? gamma : 1.0 / std::max(pg.norm(), 1e-300)) * pg;
    }

    double t = 1.0;
    bool accepted = false;
    VectorXd xt, gt(r.x.size());
    double ft = 0.0;
    for (int b = 0; b <= opts.max_backtracks; ++b, t *= 0.5) {
      xt = project(r.x + t * d);
      if (xt == r.x) break;
      try {
        ft = f(xt, gt);
      } catch (const EvaluationFailed&) {
        ft = std::numeric_limits<double>::infinity();
      }
      ++r.evaluations;
      if (std::isfinite(ft) && ft <= r.value + opts.c1 * r.gradient.dot(xt - r.x) && ft <= r.value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      r.termination = Termination::LineSearchFailure;
      return r;
    }

    VectorXd s = xt - r.x, y = gt - r.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opts.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    } else {
      // Armijo steps do not guarantee positive curvature; stale pairs stall progress
      S.clear();
      Y.clear();
      rho.clear();
    }
    r.x = std::move(xt);
    r.gradient = gt;
    r.value = ft;
    pg = projected_gradient(r.x, r.gradient, lower, upper);
    ++r.iterations;
    r.values.push_back(r.value);
    r.gradient_norms.push_back(pg.norm());
  }
}

void RegistrationConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iterations < 0) throw InvalidArgument("max_iterations must be >= 0");
  if (memory < 1) throw InvalidArgument("memory must be >= 1");
}

double default_alpha(const Mesh& mesh, double gmax) {
  if (!(gmax > 0.0)) throw InvalidArgument("default_alpha: gmax must be positive");
  const double d = mesh.diameter();
  return 1e-8 * d * d / (gmax * gmax);
}

RegistrationResult register_cloud(const RegistrationProblem& problem, const RegistrationConfig& cfg,
                                  const NodalField* g0) {
  if (!problem.mesh) throw InvalidArgument("register: no mesh");
  if (!problem.cloud || problem.cloud->empty()) throw InvalidArgument("register: point cloud is empty");
  cfg.validate();
  const Mesh& mesh = *problem.mesh;
  const PointCloud& cloud = *problem.cloud;
  const AdmissibleSet& adm = problem.admissible;
  adm.validate(mesh);
  if (cfg.backend == Backend::Surrogate) {
    if (!problem.model) throw InvalidArgument("register: surrogate backend needs a trained model");
    problem.model->check_compatible(mesh);
  }
  if (g0 && !adm.supports(*g0)) throw InvalidArgument("register: warm start is not admissible");

  const auto start = detail::Clock::now();
  RegistrationResult res;
  HyperelasticModel model(mesh, problem.material);
  NodalField warm(mesh.node_count());

  auto evaluate = [&](const VectorXd& x) {
    const NodalField g = adm.expand(x, mesh.node_count());
    PhiEvaluation e = cfg.backend == Backend::Newton
                          ? eval_phi_newton(g, model, cloud, cfg.alpha, adm, cfg.newton, &warm)
                          : eval_phi_surrogate(g, *problem.model, mesh, cloud, cfg.alpha, adm);
    ++res.evaluations;
    res.times.forward += e.times.forward;
    res.times.distance += e.times.distance;
    res.times.backward += e.times.backward;
    if (cfg.backend == Backend::Newton) warm = e.u;
    return e;
  };
  Objective f = [&](const VectorXd& x, VectorXd& grad) {
    PhiEvaluation e = evaluate(x);
    grad = adm.restrict(e.gradient);
    return e.value;
  };

  const VectorXd zero = VectorXd::Zero(static_cast<Eigen::Index>(adm.size()));
  const VectorXd x0 = g0 ? adm.project(adm.restrict(*g0)) : zero;
  // the stop test is relative to the projected gradient at zero force
  LbfgsOptions opts;
  opts.tolerance = cfg.tolerance;
  opts.max_iterations = cfg.max_iterations;
  opts.memory = cfg.memory;
  {
    const PhiEvaluation e0 = evaluate(zero);
    VectorXd gz = adm.restrict(e0.gradient);
    if (adm.bounded()) gz = zero - (zero - gz).cwiseMax(*adm.lower).cwiseMin(*adm.upper);
    opts.gradient_reference = gz.norm();
  }

  const LbfgsResult lr = lbfgs_minimize(f, x0, adm.lower, adm.upper, opts);
  res.g = adm.expand(lr.x, mesh.node_count());
  res.objective = lr.values;
  res.gradient_norm = lr.gradient_norms;
  res.iterations = lr.iterations;
  res.termination = lr.termination;

  if (cfg.backend == Backend::Newton || cfg.certify) {
    try {
      res.u = model.solve(res.g, cfg.newton, cfg.backend == Backend::Newton ? &warm : nullptr).u;
    } catch (const NoConvergence& e) {
      throw EvaluationFailed(std::string("certification solve failed: ") + e.what());
    }
    res.certified = true;
  } else {
    res.u = predict(*problem.model, res.g);
    zero_dirichlet(mesh, res.u);
  }
  res.total_time = detail::seconds_since(start);
  return res;
}

std::vector<RegistrationResult> register_sequence(const RegistrationProblem& problem,
                                                  const std::vector<PointCloud>& clouds,
                                                  const RegistrationConfig& cfg, const NodalField* g0) {
  std::vector<RegistrationResult> out;
  RegistrationProblem p = problem;
  for (const auto& c : clouds) {
    p.cloud = &c;
    out.push_back(register_cloud(p, cfg, out.empty() ? g0 : &out.back().g));
  }
  return out;
}

}  // namespace hyperreg
