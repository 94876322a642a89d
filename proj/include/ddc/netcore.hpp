#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ddc/matrix.hpp"

namespace ddc {

enum class RunMode { kTrain, kInfer };

double sigmoid(double x);
// Derivative of the sigmoid expressed through its output y = sigmoid(x).
double sigmoid_grad(double y);

struct DenseLayer {
  Matrix weights;            // out_dim x in_dim
  std::vector<double> bias;  // out_dim

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

struct BatchNormLayer {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  int dim() const { return static_cast<int>(gamma.size()); }
};

// Everything a forward pass has to remember for the backward passes.
struct ForwardCache {
  bool valid = false;
  RunMode mode = RunMode::kInfer;
  Matrix input;
  std::vector<Matrix> dense_inputs;             // input fed to each dense layer
  std::vector<Matrix> bn_normalized;            // x_hat, before gamma/beta
  std::vector<std::vector<double>> bn_inv_std;  // 1/sqrt(var + eps) actually used
  std::vector<Matrix> activations;              // sigmoid outputs per hidden layer
};

// Feedforward stack: dense -> batchnorm -> sigmoid for every hidden layer,
// final dense layer with neither. dims = {in, hidden..., out}.
//
// Parameter flattening order (params_flat, set_params_flat, backward_params):
// per layer, weights row-major then bias, then gamma and beta when the layer
// has a batchnorm attached.
class Network {
 public:
  Network() = default;
  Network(const std::vector<int>& dims, std::uint64_t seed);

  int in_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  int out_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  int dense_count() const { return static_cast<int>(dense_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  // Train mode normalizes with batch statistics (batch of at least two rows)
  // and updates the running statistics; infer mode reads the running
  // statistics and leaves the network untouched.
  Matrix forward(const Matrix& batch, RunMode mode, ForwardCache* cache = nullptr);
  Matrix forward_infer(const Matrix& batch, ForwardCache* cache = nullptr) const;

  // Gradient of a scalar loss w.r.t. every parameter, given the gradient
  // w.r.t. the network output. Needs a train-mode cache.
  std::vector<double> backward_params(const ForwardCache& cache,
                                      const Matrix& output_grad) const;
  // Gradient w.r.t. the input batch. Accepts either mode's cache; with an
  // infer cache the running statistics are treated as constants.
  Matrix backward_input(const ForwardCache& cache, const Matrix& output_grad) const;

  std::size_t param_count() const;
  std::vector<double> params_flat() const;
  void set_params_flat(std::span<const double> params);

  std::vector<DenseLayer>& dense_layers() { return dense_; }
  const std::vector<DenseLayer>& dense_layers() const { return dense_; }
  std::vector<BatchNormLayer>& batchnorm_layers() { return bn_; }
  const std::vector<BatchNormLayer>& batchnorm_layers() const { return bn_; }

 private:
  Matrix run(const Matrix& batch, RunMode mode, ForwardCache* cache);

  std::vector<int> dims_;
  std::vector<DenseLayer> dense_;
  std::vector<BatchNormLayer> bn_;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

// In-place Adam update with bias correction. Moment buffers are sized on
// first use and must keep that length afterwards.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace ddc
