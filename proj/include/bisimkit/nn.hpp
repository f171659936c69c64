#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bisimkit/random.hpp"

namespace bisimkit::nn {

// Batches are stored column-wise: features x batch.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kIdentity, kRelu, kTanh, kSoftplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpSpec {
  // Input width followed by every layer's output width; at least two entries.
  std::vector<int> layer_widths;
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kIdentity;

  bool operator==(const MlpSpec&) const = default;
  void validate() const;
};

// Mutable view of one parameter array and its gradient buffer.
struct ParamView {
  double* value;
  double* grad;
  std::size_t size;
};

class Mlp {
 public:
  // Activations kept by forward() for backward().
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
    const Mlp* owner = nullptr;
    std::uint64_t version = 0;
  };

  Mlp() = default;
  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(MlpSpec spec, Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.layer_widths.front(); }
  int output_dim() const { return spec_.layer_widths.back(); }
  int n_layers() const { return static_cast<int>(w_.size()); }

  Matrix forward(const Matrix& x) const;
  const Matrix& forward(const Matrix& x, Cache& cache) const;

  // Reverse pass for upstream gradient dL/d(output). Accumulates parameter
  // gradients unless accumulate is false; returns dL/d(input). Throws
  // std::logic_error if parameters changed since the cache was filled.
  Matrix backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);

  void zero_grad();
  // Views over weights and biases, layer by layer. Counts as a mutation.
  std::vector<ParamView> params();
  std::size_t parameter_count() const;

  const Matrix& weight(int layer) const { return w_[layer]; }
  const Vector& bias(int layer) const { return b_[layer]; }
  Matrix& weight(int layer) {
    ++version_;
    return w_[layer];
  }
  Vector& bias(int layer) {
    ++version_;
    return b_[layer];
  }
  const Matrix& weight_grad(int layer) const { return gw_[layer]; }
  const Vector& bias_grad(int layer) const { return gb_[layer]; }

  std::vector<double> flat_parameters() const;
  std::vector<double> flat_gradients() const;
  void set_flat_parameters(const std::vector<double>& values);

  std::uint64_t version() const { return version_; }

  bool same_parameters(const Mlp& other) const;

 private:
  friend void polyak_update(Mlp& target, const Mlp& online, double tau);

  MlpSpec spec_;
  std::vector<Matrix> w_, gw_;
  std::vector<Vector> b_, gb_;
  std::uint64_t version_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are laid out in the order of the
// views passed to the first step(); later calls must pass the same shapes.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(const std::vector<ParamView>& params);
  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

// target <- tau * online + (1 - tau) * target.
void polyak_update(Mlp& target, const Mlp& online, double tau);

// Concatenation helper for building optimizer parameter lists.
std::vector<ParamView> join(std::initializer_list<std::vector<ParamView>> groups);

nlohmann::json to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace bisimkit::nn
