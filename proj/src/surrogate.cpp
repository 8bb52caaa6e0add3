#include "hyperreg/surrogate.hpp"

#include <cmath>
#include <numeric>

#include "binary.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/io.hpp"
#include "hyperreg/rng.hpp"

namespace hyperreg {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double prelu(double x, double a) { return x >= 0.0 ? x : a * x; }
double prelu_derivative(double x, double a) { return x >= 0.0 ? 1.0 : a; }

namespace {

MatrixXd prelu(const MatrixXd& p, double a) { return (p.array() >= 0.0).select(p, a * p); }

MatrixXd prelu_derivative(const MatrixXd& p, double a) {
  return (p.array() >= 0.0).select(MatrixXd::Ones(p.rows(), p.cols()), MatrixXd::Constant(p.rows(), p.cols(), a));
}

VectorXd positive_scale(VectorXd s) {
  for (auto& x : s) x = x > 0.0 ? x : 1.0;
  return s;
}

}  // namespace

Mlp::Mlp(const std::vector<std::size_t>& sizes, std::uint64_t seed_) : seed(seed_) {
  if (sizes.size() < 2) throw InvalidArgument("Mlp needs at least two layer sizes");
  for (auto s : sizes)
    if (s == 0) throw InvalidArgument("Mlp layer sizes must be positive");
  Rng rng(seed_);
  const double a0 = 0.25;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    MlpLayer L;
    const auto in = static_cast<Eigen::Index>(sizes[i]), out = static_cast<Eigen::Index>(sizes[i + 1]);
    const bool last = i + 2 == sizes.size();
    // He initialization adjusted for the PReLU slope
    const double sd = std::sqrt((last ? 1.0 : 2.0 / (1.0 + a0 * a0)) / static_cast<double>(in));
    L.W.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) L.W(r, c) = sd * rng.normal();
    L.b = VectorXd::Zero(out);
    L.a = a0;
    layers_.push_back(std::move(L));
  }
  input_mean = VectorXd::Zero(sizes.front());
  input_scale = VectorXd::Ones(sizes.front());
  output_mean = VectorXd::Zero(sizes.back());
  output_scale = VectorXd::Ones(sizes.back());
}

Mlp Mlp::for_mesh(const Mesh& mesh, std::uint64_t seed, std::size_t transitions) {
  if (transitions == 0) throw InvalidArgument("Mlp needs at least one transition");
  Mlp m(std::vector<std::size_t>(transitions + 1, mesh.dof_count()), seed);
  m.mesh_hash = mesh.hash();
  return m;
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> s;
  if (layers_.empty()) return s;
  s.push_back(input_size());
  for (const auto& L : layers_) s.push_back(L.W.rows());
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += L.W.size() + L.b.size() + 1;
  return n;
}

void Mlp::check_compatible(const Mesh& mesh) const {
  if (mesh_hash != mesh.hash())
    throw IncompatibleModel("model was trained for mesh " + detail::hex64(mesh_hash) + ", got " +
                            detail::hex64(mesh.hash()));
  if (input_size() != mesh.dof_count() || output_size() != mesh.dof_count())
    throw IncompatibleModel("model size does not match the mesh DOF count");
}

bool Mlp::operator==(const Mlp& o) const {
  if (layers_.size() != o.layers_.size() || seed != o.seed || mesh_hash != o.mesh_hash) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto &x = layers_[i], &y = o.layers_[i];
    if (x.W.rows() != y.W.rows() || x.W.cols() != y.W.cols() || x.W != y.W || x.b != y.b || x.a != y.a) return false;
  }
  return input_mean == o.input_mean && input_scale == o.input_scale && output_mean == o.output_mean &&
         output_scale == o.output_scale;
}

std::pair<NodalField, ForwardCache> forward(const Mlp& mlp, const NodalField& g) {
  if (mlp.transitions() == 0) throw InvalidArgument("forward: empty network");
  if (g.dof_count() != mlp.input_size())
    throw InvalidArgument("forward: input has " + std::to_string(g.dof_count()) + " DOFs, network expects " +
                          std::to_string(mlp.input_size()));
  ForwardCache cache;
  cache.z0 = (g.vec() - mlp.input_mean).cwiseQuotient(mlp.input_scale);
  VectorXd z = cache.z0;
  const auto& layers = mlp.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    VectorXd p = layers[i].W * z + layers[i].b;
    if (i + 1 < layers.size())
      z = p.unaryExpr([a = layers[i].a](double x) { return prelu(x, a); });
    else
      z = p;
    cache.pre.push_back(std::move(p));
  }
  VectorXd u = mlp.output_mean + mlp.output_scale.cwiseProduct(z);
  return {NodalField(std::move(u)), std::move(cache)};
}

NodalField predict(const Mlp& mlp, const NodalField& g) { return forward(mlp, g).first; }

NodalField backward_adjoint(const Mlp& mlp, const ForwardCache& cache, const NodalField& cotangent) {
  const auto& layers = mlp.layers();
  if (cache.pre.size() != layers.size() || static_cast<std::size_t>(cache.z0.size()) != mlp.input_size())
    throw InvalidArgument("backward_adjoint: cache does not belong to this network");
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (cache.pre[i].size() != layers[i].W.rows())
      throw InvalidArgument("backward_adjoint: cache does not belong to this network");
  if (cotangent.dof_count() != mlp.output_size()) throw InvalidArgument("backward_adjoint: cotangent size mismatch");

  VectorXd s = mlp.output_scale.cwiseProduct(cotangent.vec());
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (k + 1 < layers.size())
      s = s.cwiseProduct(cache.pre[k].unaryExpr([a = layers[k].a](double x) { return prelu_derivative(x, a); }));
    s = layers[k].W.transpose() * s;
  }
  return NodalField(s.cwiseQuotient(mlp.input_scale));
}

bool Dataset::operator==(const Dataset& o) const {
  return forces == o.forces && displacements == o.displacements && mesh_hash == o.mesh_hash &&
         metadata == o.metadata;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be positive");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InvalidArgument("validation fraction must lie in (0, 1)");
}

namespace {

struct Stats {
  VectorXd mean, scale;
};

Stats column_stats(const MatrixXd& X) {
  Stats s;
  s.mean = X.rowwise().mean();
  const MatrixXd c = X.colwise() - s.mean;
  s.scale = positive_scale((c.rowwise().squaredNorm() / static_cast<double>(X.cols())).cwiseSqrt());
  return s;
}

struct Grads {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;
  std::vector<double> a;
};

// Loss (mean over batch and outputs) and its parameter gradient.
double batch_loss(const std::vector<MlpLayer>& layers, const MatrixXd& X, const MatrixXd& Y, Grads* grads) {
  const std::size_t L = layers.size();
  std::vector<MatrixXd> Z(L + 1), P(L);
  Z[0] = X;
  for (std::size_t i = 0; i < L; ++i) {
    P[i] = (layers[i].W * Z[i]).colwise() + layers[i].b;
    Z[i + 1] = i + 1 < L ? prelu(P[i], layers[i].a) : P[i];
  }
  const double denom = static_cast<double>(Y.rows() * Y.cols());
  MatrixXd dZ = Z[L] - Y;
  const double loss = dZ.squaredNorm() / denom;
  if (!grads) return loss;
  dZ *= 2.0 / denom;
  for (std::size_t k = L; k-- > 0;) {
    MatrixXd dP;
    if (k + 1 < L) {
      grads->a[k] = (P[k].array() < 0.0).select(dZ.array() * P[k].array(), 0.0).sum();
      dP = dZ.cwiseProduct(prelu_derivative(P[k], layers[k].a));
    } else {
      grads->a[k] = 0.0;
      dP = std::move(dZ);
    }
    grads->W[k].noalias() = dP * Z[k].transpose();
    grads->b[k] = dP.rowwise().sum();
    if (k > 0) dZ.noalias() = layers[k].W.transpose() * dP;
  }
  return loss;
}

class Adam {
 public:
  explicit Adam(const std::vector<MlpLayer>& layers, double lr) : lr_(lr) {
    for (const auto& L : layers) {
      mW_.push_back(MatrixXd::Zero(L.W.rows(), L.W.cols()));
      vW_.push_back(MatrixXd::Zero(L.W.rows(), L.W.cols()));
      mb_.push_back(VectorXd::Zero(L.b.size()));
      vb_.push_back(VectorXd::Zero(L.b.size()));
      ma_.push_back(0.0);
      va_.push_back(0.0);
    }
  }

  void step(std::vector<MlpLayer>& layers, const Grads& g, bool learn_slopes) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    const double step = lr_ * std::sqrt(c2) / c1;
    const double eps = eps_ * std::sqrt(c2);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].W, mW_[i], vW_[i], g.W[i], step, eps);
      update(layers[i].b, mb_[i], vb_[i], g.b[i], step, eps);
      if (learn_slopes && i + 1 < layers.size()) {
        ma_[i] = b1_ * ma_[i] + (1 - b1_) * g.a[i];
        va_[i] = b2_ * va_[i] + (1 - b2_) * g.a[i] * g.a[i];
        layers[i].a -= step * ma_[i] / (std::sqrt(va_[i]) + eps);
      }
    }
  }

 private:
  template <class T>
  void update(T& p, T& m, T& v, const T& g, double step, double eps) {
    m = b1_ * m + (1 - b1_) * g;
    v = b2_ * v + (1 - b2_) * g.cwiseAbs2();
    p.array() -= step * m.array() / (v.array().sqrt() + eps);
  }

  double lr_, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<MatrixXd> mW_, vW_;
  std::vector<VectorXd> mb_, vb_;
  std::vector<double> ma_, va_;
};

MatrixXd stack(const std::vector<NodalField>& f, std::size_t begin, std::size_t end) {
  MatrixXd M(f.front().dof_count(), end - begin);
  for (std::size_t j = begin; j < end; ++j) M.col(j - begin) = f[j].vec();
  return M;
}

void check_dataset(const Mlp& mlp, const Dataset& data) {
  if (data.size() == 0) throw InvalidArgument("dataset is empty");
  if (data.displacements.size() != data.forces.size()) throw InvalidArgument("dataset force/displacement count mismatch");
  for (std::size_t j = 0; j < data.size(); ++j)
    if (data.forces[j].dof_count() != mlp.input_size() || data.displacements[j].dof_count() != mlp.output_size())
      throw InvalidArgument("dataset pair " + std::to_string(j) + " has inconsistent DOF count");
}

}  // namespace

double normalized_mse(const Mlp& mlp, const Dataset& data, std::size_t begin, std::size_t end) {
  check_dataset(mlp, data);
  if (begin >= end || end > data.size()) throw InvalidArgument("normalized_mse: bad range");
  const MatrixXd X = (stack(data.forces, begin, end).colwise() - mlp.input_mean).array().colwise() / mlp.input_scale.array();
  const MatrixXd Y =
      (stack(data.displacements, begin, end).colwise() - mlp.output_mean).array().colwise() / mlp.output_scale.array();
  return batch_loss(mlp.layers(), X, Y, nullptr);
}

TrainResult train(const Mlp& init, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset(init, data);
  const std::size_t n = data.size();
  const auto n_val = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * n)));
  const std::size_t n_train = n - n_val;

  TrainResult res{init, {}, 0};
  if (cfg.epochs == 0) return res;
  Mlp& mlp = res.mlp;

  const MatrixXd Graw = stack(data.forces, 0, n), Uraw = stack(data.displacements, 0, n);
  const Stats sx = column_stats(Graw.leftCols(n_train)), sy = column_stats(Uraw.leftCols(n_train));
  auto pick = [](const VectorXd& given, const VectorXd& computed, std::size_t size, const char* what) {
    if (given.size() == 0) return computed;
    if (static_cast<std::size_t>(given.size()) != size) throw InvalidArgument(std::string("train: bad ") + what + " size");
    return given;
  };
  mlp.input_mean = pick(cfg.input_mean, sx.mean, mlp.input_size(), "input mean");
  mlp.input_scale = positive_scale(pick(cfg.input_scale, sx.scale, mlp.input_size(), "input scale"));
  mlp.output_mean = pick(cfg.output_mean, sy.mean, mlp.output_size(), "output mean");
  mlp.output_scale = positive_scale(pick(cfg.output_scale, sy.scale, mlp.output_size(), "output scale"));

  const MatrixXd X = (Graw.colwise() - mlp.input_mean).array().colwise() / mlp.input_scale.array();
  const MatrixXd Y = (Uraw.colwise() - mlp.output_mean).array().colwise() / mlp.output_scale.array();
  const MatrixXd Xv = X.rightCols(n_val), Yv = Y.rightCols(n_val);

  auto& layers = mlp.layers();
  Grads grads{std::vector<MatrixXd>(layers.size()), std::vector<VectorXd>(layers.size()),
              std::vector<double>(layers.size())};
  Adam adam(layers, cfg.learning_rate);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  Mlp best = mlp;
  double best_score = n_val > 0 ? batch_loss(layers, Xv, Yv, nullptr) : batch_loss(layers, X.leftCols(n_train), Y.leftCols(n_train), nullptr);
  const std::size_t bs = cfg.full_batch ? n_train : std::min(cfg.batch_size, n_train);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (!cfg.full_batch)
      for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += bs) {
      const std::size_t end = std::min(start + bs, n_train);
      MatrixXd Xb(X.rows(), end - start), Yb(Y.rows(), end - start);
      for (std::size_t j = start; j < end; ++j) {
        Xb.col(j - start) = X.col(order[j]);
        Yb.col(j - start) = Y.col(order[j]);
      }
      const double loss = batch_loss(layers, Xb, Yb, &grads);
      if (!std::isfinite(loss)) throw TrainingDiverged(static_cast<int>(epoch));
      sum += loss * static_cast<double>(end - start);
      adam.step(layers, grads, true);
    }
    EpochRecord rec{sum / static_cast<double>(n_train), 0.0};
    rec.val_mse = n_val > 0 ? batch_loss(layers, Xv, Yv, nullptr) : rec.train_mse;
    if (!std::isfinite(rec.val_mse)) throw TrainingDiverged(static_cast<int>(epoch));
    res.history.push_back(rec);
    if (rec.val_mse < best_score) {
      best_score = rec.val_mse;
      best = mlp;
      res.best_epoch = epoch;
    }
  }
  res.mlp = std::move(best);
  return res;
}

namespace {
nlohmann::json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const nlohmann::json& j, std::size_t n, const char* what) {
  const auto v = j.at(what).get<std::vector<double>>();
  if (v.size() != n) throw ParseError(std::string(what) + " has wrong length", 0);
  return Eigen::Map<const VectorXd>(v.data(), v.size());
}
}  // namespace

std::string serialize_mlp(const Mlp& mlp) {
  nlohmann::json h;
  h["format"] = "hyperreg-mlp";
  h["version"] = 1;
  h["layer_sizes"] = mlp.layer_sizes();
  h["seed"] = mlp.seed;
  h["mesh_hash"] = detail::hex64(mlp.mesh_hash);
  h["input_mean"] = vec_json(mlp.input_mean);
  h["input_scale"] = vec_json(mlp.input_scale);
  h["output_mean"] = vec_json(mlp.output_mean);
  h["output_scale"] = vec_json(mlp.output_scale);
  detail::BinaryWriter w(h);
  for (const auto& L : mlp.layers()) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Wr = L.W;
    w.put(Wr.data(), Wr.size());
    w.put(L.b);
    w.put(L.a);
  }
  return w.take();
}

Mlp deserialize_mlp(const std::string& bytes) {
  detail::BinaryReader r(bytes);
  const auto& h = r.header();
  try {
    if (h.at("format") != "hyperreg-mlp" || h.at("version") != 1) throw ParseError("not a model file", 0);
    const auto sizes = h.at("layer_sizes").get<std::vector<std::size_t>>();
    Mlp m(sizes, h.at("seed").get<std::uint64_t>());
    m.mesh_hash = detail::parse_hex64(h.at("mesh_hash").get<std::string>());
    m.input_mean = json_vec(h, sizes.front(), "input_mean");
    m.input_scale = json_vec(h, sizes.front(), "input_scale");
    m.output_mean = json_vec(h, sizes.back(), "output_mean");
    m.output_scale = json_vec(h, sizes.back(), "output_scale");
    for (auto& L : m.layers()) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Wr(L.W.rows(), L.W.cols());
      r.get(Wr.data(), Wr.size());
      L.W = Wr;
      r.get(L.b);
      L.a = r.get();
    }
    r.expect_end();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model header: ") + e.what(), 0);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("bad model header: ") + e.what(), 0);
  }
}

void save_mlp(const Mlp& mlp, const std::filesystem::path& path) { write_file(path, serialize_mlp(mlp)); }

Mlp load_mlp(const std::filesystem::path& path) { return deserialize_mlp(read_file(path)); }

}  // namespace hyperreg
