#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "hyperreg/mesh.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

double prelu(double x, double a);
double prelu_derivative(double x, double a);

struct MlpLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  double a = 0.25;  // unused on the output transition
};

/// Fully connected network with PReLU on hidden transitions and an identity
/// output transition. Inputs and outputs are standardized per DOF.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& sizes, std::uint64_t seed);

  /// Default architecture for a mesh: `transitions` layers, all of width dof_count.
  static Mlp for_mesh(const Mesh& mesh, std::uint64_t seed, std::size_t transitions = 4);

  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().W.cols(); }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().W.rows(); }
  std::size_t transitions() const { return layers_.size(); }
  std::vector<std::size_t> layer_sizes() const;
  std::size_t parameter_count() const;

  std::vector<MlpLayer>& layers() { return layers_; }
  const std::vector<MlpLayer>& layers() const { return layers_; }

  Eigen::VectorXd input_mean, input_scale, output_mean, output_scale;
  std::uint64_t seed = 0;
  std::uint64_t mesh_hash = 0;

  void check_compatible(const Mesh& mesh) const;
  bool operator==(const Mlp& o) const;

 private:
  std::vector<MlpLayer> layers_;
};

struct ForwardCache {
  Eigen::VectorXd z0;
  std::vector<Eigen::VectorXd> pre;  // W_i z_{i-1} + b_i
};

std::pair<NodalField, ForwardCache> forward(const Mlp& mlp, const NodalField& g);
NodalField predict(const Mlp& mlp, const NodalField& g);
NodalField backward_adjoint(const Mlp& mlp, const ForwardCache& cache, const NodalField& cotangent);

struct Dataset {
  std::vector<NodalField> forces;
  std::vector<NodalField> displacements;
  std::uint64_t mesh_hash = 0;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return forces.size(); }
  bool operator==(const Dataset& o) const;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double validation_fraction = 0.1;
  bool full_batch = false;
  std::uint64_t seed = 0;
  // Per-DOF statistics; computed from the training split when left empty.
  Eigen::VectorXd input_mean, input_scale, output_mean, output_scale;

  void validate() const;
};

struct EpochRecord {
  double train_mse;
  double val_mse;
};

struct TrainResult {
  Mlp mlp;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial parameters
};

/// Training and validation splits are positional: the trailing fraction of
/// the dataset is held out.
TrainResult train(const Mlp& init, const Dataset& data, const TrainConfig& cfg);

/// Mean squared error in normalized output space.
double normalized_mse(const Mlp& mlp, const Dataset& data, std::size_t begin, std::size_t end);

void save_mlp(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);
std::string serialize_mlp(const Mlp& mlp);
Mlp deserialize_mlp(const std::string& bytes);

}  // namespace hyperreg
