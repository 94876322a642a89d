#include "ddc/netcore.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace ddc {
namespace {

void check_finite(const Matrix& m, const char* stage, std::size_t layer) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite value after " + std::string(stage) +
                               " layer " + std::to_string(layer));
    }
  }
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  const std::size_t b = x.rows();
  const std::size_t in = layer.weights.cols();
  const std::size_t out = layer.weights.rows();
  Matrix y(b, out);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      double acc = layer.bias[j];
      for (std::size_t k = 0; k < in; ++k) acc += x(i, k) * layer.weights(j, k);
      y(i, j) = acc;
    }
  }
  return y;
}

// y = x @ W, i.e. propagate an output gradient back through the weights.
Matrix matmul_weights(const Matrix& g, const Matrix& w) {
  const std::size_t b = g.rows();
  const std::size_t out = w.rows();
  const std::size_t in = w.cols();
  Matrix y(b, in);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      const double gij = g(i, j);
      if (gij == 0.0) continue;
      for (std::size_t k = 0; k < in; ++k) y(i, k) += gij * w(j, k);
    }
  }
  return y;
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sigmoid_grad(double y) { return y * (1.0 - y); }

Network::Network(const std::vector<int>& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.size() < 2) {
    throw std::invalid_argument("network needs an input and an output dimension");
  }
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("network dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    // Glorot uniform: U(-sqrt(6/(in+out)), +sqrt(6/(in+out))).
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weights.data()) w = dist(rng);
    layer.bias.assign(out, 0.0);
    dense_.push_back(std::move(layer));
    if (l + 2 < dims.size()) {
      BatchNormLayer bn;
      bn.gamma.assign(out, 1.0);
      bn.beta.assign(out, 0.0);
      bn.running_mean.assign(out, 0.0);
      bn.running_var.assign(out, 1.0);
      bn_.push_back(std::move(bn));
    }
  }
}

Matrix Network::run(const Matrix& batch, RunMode mode, ForwardCache* cache) {
  if (dense_.empty()) throw std::logic_error("forward pass on an empty network");
  if (static_cast<int>(batch.cols()) != in_dim()) {
    throw std::invalid_argument("forward: expected " + std::to_string(in_dim()) +
                                " input columns, got " + std::to_string(batch.cols()));
  }
  if (batch.rows() == 0) throw std::invalid_argument("forward: empty batch");
  if (mode == RunMode::kTrain && batch.rows() < 2) {
    throw std::invalid_argument("train-mode forward needs a batch of at least 2 rows");
  }

  if (cache) {
    *cache = ForwardCache{};
    cache->valid = true;
    cache->mode = mode;
    cache->input = batch;
  }

  const std::size_t b = batch.rows();
  Matrix x = batch;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    if (cache) cache->dense_inputs.push_back(x);
    x = dense_forward(dense_[l], x);
    check_finite(x, "dense", l);
    if (l + 1 == dense_.size()) break;

    BatchNormLayer& bn = bn_[l];
    const std::size_t d = bn.gamma.size();
    std::vector<double> mean(d, 0.0);
    std::vector<double> inv_std(d, 0.0);
    if (mode == RunMode::kTrain) {
      std::vector<double> var(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < b; ++i) m += x(i, j);
        m /= static_cast<double>(b);
        double v = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
          const double c = x(i, j) - m;
          v += c * c;
        }
        v /= static_cast<double>(b);  // biased variance
        mean[j] = m;
        var[j] = v;
        inv_std[j] = 1.0 / std::sqrt(v + bn.epsilon);
      }
      for (std::size_t j = 0; j < d; ++j) {
        bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
        bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j];
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] = bn.running_mean[j];
        inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.epsilon);
      }
    }

    Matrix xhat(b, d);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        xhat(i, j) = (x(i, j) - mean[j]) * inv_std[j];
      }
    }
    if (cache) {
      cache->bn_normalized.push_back(xhat);
      cache->bn_inv_std.push_back(inv_std);
    }
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        x(i, j) = sigmoid(bn.gamma[j] * xhat(i, j) + bn.beta[j]);
      }
    }
    check_finite(x, "batchnorm+sigmoid", l);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

Matrix Network::forward(const Matrix& batch, RunMode mode, ForwardCache* cache) {
  return run(batch, mode, cache);
}

Matrix Network::forward_infer(const Matrix& batch, ForwardCache* cache) const {
  // Infer mode never mutates the network, so the cast stays safe.
  return const_cast<Network*>(this)->run(batch, RunMode::kInfer, cache);
}

std::vector<double> Network::backward_params(const ForwardCache& cache,
                                             const Matrix& output_grad) const {
  if (!cache.valid) throw std::invalid_argument("backward_params: cache not filled by a forward pass");
  if (cache.mode != RunMode::kTrain) {
    throw std::invalid_argument("backward_params needs a train-mode cache");
  }
  const std::size_t b = cache.input.rows();
  if (output_grad.rows() != b || static_cast<int>(output_grad.cols()) != out_dim()) {
    throw std::invalid_argument("backward_params: output gradient shape mismatch");
  }

  const int layers = dense_count();
  std::vector<Matrix> dense_w_grad(layers);
  std::vector<std::vector<double>> dense_b_grad(layers);
  std::vector<std::vector<double>> gamma_grad(bn_.size());
  std::vector<std::vector<double>> beta_grad(bn_.size());

  Matrix g = output_grad;
  for (int l = layers - 1; l >= 0; --l) {
    if (l < layers - 1) {
      const Matrix& y = cache.activations[l];
      const Matrix& xhat = cache.bn_normalized[l];
      const std::vector<double>& inv_std = cache.bn_inv_std[l];
      const BatchNormLayer& bn = bn_[l];
      const std::size_t d = bn.gamma.size();

      // Through the sigmoid.
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < d; ++j) g(i, j) *= sigmoid_grad(y(i, j));
      }
      // Batchnorm parameter gradients and the train-mode input gradient.
      gamma_grad[l].assign(d, 0.0);
      beta_grad[l].assign(d, 0.0);
      std::vector<double> sum_dxhat(d, 0.0);
      std::vector<double> sum_dxhat_xhat(d, 0.0);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          gamma_grad[l][j] += g(i, j) * xhat(i, j);
          beta_grad[l][j] += g(i, j);
          const double dxhat = g(i, j) * bn.gamma[j];
          sum_dxhat[j] += dxhat;
          sum_dxhat_xhat[j] += dxhat * xhat(i, j);
        }
      }
      const double bn_d = static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double dxhat = g(i, j) * bn.gamma[j];
          g(i, j) = (inv_std[j] / bn_d) *
                    (bn_d * dxhat - sum_dxhat[j] - xhat(i, j) * sum_dxhat_xhat[j]);
        }
      }
    }

    const DenseLayer& layer = dense_[l];
    const Matrix& x = cache.dense_inputs[l];
    const std::size_t out = layer.weights.rows();
    const std::size_t in = layer.weights.cols();
    dense_w_grad[l] = Matrix(out, in);
    dense_b_grad[l].assign(out, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        const double gij = g(i, j);
        dense_b_grad[l][j] += gij;
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < in; ++k) dense_w_grad[l](j, k) += gij * x(i, k);
      }
    }
    if (l > 0) g = matmul_weights(g, layer.weights);
  }

  std::vector<double> flat;
  flat.reserve(param_count());
  for (int l = 0; l < layers; ++l) {
    flat.insert(flat.end(), dense_w_grad[l].data().begin(), dense_w_grad[l].data().end());
    flat.insert(flat.end(), dense_b_grad[l].begin(), dense_b_grad[l].end());
    if (l < layers - 1) {
      flat.insert(flat.end(), gamma_grad[l].begin(), gamma_grad[l].end());
      flat.insert(flat.end(), beta_grad[l].begin(), beta_grad[l].end());
    }
  }
  return flat;
}

Matrix Network::backward_input(const ForwardCache& cache, const Matrix& output_grad) const {
  if (!cache.valid) throw std::invalid_argument("backward_input: cache not filled by a forward pass");
  const std::size_t b = cache.input.rows();
  if (output_grad.rows() != b || static_cast<int>(output_grad.cols()) != out_dim()) {
    throw std::invalid_argument("backward_input: output gradient shape mismatch");
  }

  const int layers = dense_count();
  Matrix g = output_grad;
  for (int l = layers - 1; l >= 0; --l) {
    if (l < layers - 1) {
      const Matrix& y = cache.activations[l];
      const std::vector<double>& inv_std = cache.bn_inv_std[l];
      const BatchNormLayer& bn = bn_[l];
      const std::size_t d = bn.gamma.size();
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < d; ++j) g(i, j) *= sigmoid_grad(y(i, j));
      }
      if (cache.mode == RunMode::kTrain) {
        const Matrix& xhat = cache.bn_normalized[l];
        std::vector<double> sum_dxhat(d, 0.0);
        std::vector<double> sum_dxhat_xhat(d, 0.0);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = g(i, j) * bn.gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * xhat(i, j);
          }
        }
        const double bn_d = static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = g(i, j) * bn.gamma[j];
            g(i, j) = (inv_std[j] / bn_d) *
                      (bn_d * dxhat - sum_dxhat[j] - xhat(i, j) * sum_dxhat_xhat[j]);
          }
        }
      } else {
        // Running statistics are constants here, so the map is elementwise.
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < d; ++j) g(i, j) *= bn.gamma[j] * inv_std[j];
        }
      }
    }
    g = matmul_weights(g, dense_[l].weights);
  }
  return g;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : dense_) {
    n += layer.weights.data().size() + layer.bias.size();
  }
  for (const BatchNormLayer& bn : bn_) n += 2 * bn.gamma.size();
  return n;
}

std::vector<double> Network::params_flat() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (int l = 0; l < dense_count(); ++l) {
    const DenseLayer& layer = dense_[l];
    flat.insert(flat.end(), layer.weights.data().begin(), layer.weights.data().end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    if (l < dense_count() - 1) {
      const BatchNormLayer& bn = bn_[l];
      flat.insert(flat.end(), bn.gamma.begin(), bn.gamma.end());
      flat.insert(flat.end(), bn.beta.begin(), bn.beta.end());
    }
  }
  return flat;
}

void Network::set_params_flat(std::span<const double> params) {
  if (params.size() != param_count()) {
    throw std::invalid_argument("set_params_flat: expected " + std::to_string(param_count()) +
                                " values, got " + std::to_string(params.size()));
  }
  std::size_t pos = 0;
  for (int l = 0; l < dense_count(); ++l) {
    DenseLayer& layer = dense_[l];
    for (double& w : layer.weights.data()) w = params[pos++];
    for (double& v : layer.bias) v = params[pos++];
    if (l < dense_count() - 1) {
      BatchNormLayer& bn = bn_[l];
      for (double& v : bn.gamma) v = params[pos++];
      for (double& v : bn.beta) v = params[pos++];
    }
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: moment buffers sized for a different parameter count");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace ddc
