#include "ddc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ddc {

void ControllerConfig::validate() const {
  if (alpha < 0.0) throw std::invalid_argument("controller: alpha must be non-negative");
  if (!(stage1_step_deg > 0.0) || !(stage2_step_deg > 0.0)) {
    throw std::invalid_argument("controller: step sizes must be positive");
  }
  if (stage2_step_deg >= stage1_step_deg) {
    throw std::invalid_argument("controller: stage 2 step must be finer than stage 1");
  }
  if (batch_count < 1 || stage1_iters < 1 || stage2_iters < 1) {
    throw std::invalid_argument("controller: candidate and iteration counts must be positive");
  }
  if (noise_half_range_deg < 0.0) {
    throw std::invalid_argument("controller: noise range must be non-negative");
  }
  if (!(u_min_deg < u_max_deg)) throw std::invalid_argument("controller: need u_min < u_max");
}

double adjacent_error(std::span<const double> u_seq, int control_dim) {
  if (control_dim <= 0) throw std::invalid_argument("adjacent_error: control_dim must be positive");
  if (u_seq.size() % control_dim != 0) {
    throw std::invalid_argument("adjacent_error: sequence length not a multiple of control_dim");
  }
  const int steps = static_cast<int>(u_seq.size()) / control_dim;
  if (steps < 2) return 0.0;
  double acc = 0.0;
  for (int k = 0; k + 1 < steps; ++k) {
    for (int d = 0; d < control_dim; ++d) {
      const double diff = u_seq[(k + 1) * control_dim + d] - u_seq[k * control_dim + d];
      acc += diff * diff;
    }
  }
  return acc / static_cast<double>((steps - 1) * control_dim);
}

double control_loss(std::span<const double> s_pred, std::span<const double> s_target,
                    std::span<const double> u_seq, double alpha, int control_dim) {
  if (s_pred.size() != s_target.size()) {
    throw std::invalid_argument("control_loss: prediction/target length mismatch");
  }
  if (s_pred.empty() || u_seq.empty()) throw std::invalid_argument("control_loss: empty inputs");
  double mse = 0.0;
  for (std::size_t i = 0; i < s_pred.size(); ++i) {
    const double d = s_pred[i] - s_target[i];
    mse += d * d;
  }
  mse /= static_cast<double>(s_pred.size());
  return mse + alpha * adjacent_error(u_seq, control_dim);
}

std::vector<double> gradient_step(std::span<const double> u_seq, std::span<const double> grad,
                                  double step_deg, double u_min_deg, double u_max_deg) {
  if (u_seq.size() != grad.size()) {
    throw std::invalid_argument("gradient_step: sequence/gradient length mismatch");
  }
  double norm2 = 0.0;
  for (double g : grad) {
    if (!std::isfinite(g)) throw std::invalid_argument("gradient_step: non-finite gradient");
    norm2 += g * g;
  }
  std::vector<double> out(u_seq.begin(), u_seq.end());
  const double norm = std::sqrt(norm2);
  if (norm < 1e-12) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] - step_deg * grad[i] / norm, u_min_deg, u_max_deg);
  }
  return out;
}

LossGrad control_loss_and_u_gradient(const TrainedModel& model,
                                     std::span<const double> init_state,
                                     std::span<const double> u_seq,
                                     std::span<const double> s_target, double alpha) {
  const ModelConfig& cfg = model.config();
  if (static_cast<int>(s_target.size()) != cfg.network_output_dim()) {
    throw std::invalid_argument("expected " + std::to_string(cfg.network_output_dim()) +
                                " target values, got " + std::to_string(s_target.size()));
  }
  const std::vector<double> raw = network_input_vector(cfg, init_state, u_seq);
  const std::vector<double> z = normalizer_apply(model.input_normalizer(), raw);
  Matrix x(1, z.size());
  std::copy(z.begin(), z.end(), x.data().begin());

  ForwardCache cache;
  const Matrix y = model.network().forward_infer(x, &cache);
  const std::vector<double> s_pred = normalizer_invert(model.output_normalizer(), y.data());

  LossGrad result;
  result.loss = control_loss(s_pred, s_target, u_seq, alpha, cfg.control_dim);

  // d(mse)/d(network output): chain through the output denormalization.
  const int out_dim = cfg.network_output_dim();
  Matrix out_grad(1, out_dim);
  for (int j = 0; j < out_dim; ++j) {
    out_grad(0, j) = 2.0 * (s_pred[j] - s_target[j]) / static_cast<double>(out_dim) *
                     model.output_normalizer().stddev[j];
  }
  const Matrix in_grad = model.network().backward_input(cache, out_grad);

  const int steps = cfg.horizon;
  const int cd = cfg.control_dim;
  result.u_grad.assign(u_seq.size(), 0.0);
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    // Undo the input normalization of the command entries.
    const std::size_t col = cfg.init_dim + k;
    result.u_grad[k] = in_grad(0, col) / model.input_normalizer().stddev[col];
  }
  if (steps >= 2 && alpha != 0.0) {
    const double scale = 2.0 * alpha / static_cast<double>((steps - 1) * cd);
    for (int k = 0; k < steps; ++k) {
      for (int d = 0; d < cd; ++d) {
        const std::size_t i = static_cast<std::size_t>(k) * cd + d;
        double g = 0.0;
        if (k > 0) g += u_seq[i] - u_seq[i - cd];
        if (k + 1 < steps) g -= u_seq[i + cd] - u_seq[i];
        result.u_grad[i] += scale * g;
      }
    }
  }
  return result;
}

std::vector<double> warm_start_shift(const std::vector<double>& prev_u_seq, int control_dim) {
  if (control_dim <= 0) throw std::invalid_argument("warm_start_shift: control_dim must be positive");
  if (prev_u_seq.empty() || prev_u_seq.size() % control_dim != 0) {
    throw std::invalid_argument("warm_start_shift: bad previous sequence length");
  }
  std::vector<double> out(prev_u_seq.begin() + control_dim, prev_u_seq.end());
  out.insert(out.end(), prev_u_seq.end() - control_dim, prev_u_seq.end());
  return out;
}

std::vector<std::vector<double>> cold_start_batch(const ControllerConfig& config, int horizon,
                                                  int control_dim, std::mt19937_64& rng) {
  config.validate();
  if (horizon <= 0 || control_dim <= 0) {
    throw std::invalid_argument("cold_start_batch: horizon and control_dim must be positive");
  }
  std::uniform_real_distribution<double> level(config.u_min_deg, config.u_max_deg);
  std::vector<std::vector<double>> batch;
  batch.reserve(config.batch_count);
  for (int c = 0; c < config.batch_count; ++c) {
    batch.emplace_back(static_cast<std::size_t>(horizon) * control_dim, level(rng));
  }
  return batch;
}

Controller::Controller(const TrainedModel& model, const ControllerConfig& config,
                       std::uint64_t seed)
    : model_(&model), config_(config), rng_(seed) {
  config_.validate();
  if (config_.u_min_deg < model.config().u_min_deg - 1e-9 ||
      config_.u_max_deg > model.config().u_max_deg + 1e-9) {
    throw std::invalid_argument("controller: pedal range wider than the model was trained for");
  }
}

std::vector<double> Controller::warm_start() const {
  if (!prev_u_seq_) {
    throw std::logic_error("warm_start: no previous solution, use cold_start_batch");
  }
  return warm_start_shift(*prev_u_seq_, model_->config().control_dim);
}

OptimizeResult Controller::optimize(const std::vector<double>& init_state,
                                    const std::vector<double>& s_target) {
  const ModelConfig& mc = model_->config();
  OptimizeDiagnostics diag;

  std::vector<std::vector<double>> candidates;
  if (prev_u_seq_) {
    std::vector<double> base = warm_start_shift(*prev_u_seq_, mc.control_dim);
    for (double& u : base) u = std::clamp(u, config_.u_min_deg, config_.u_max_deg);
    diag.unperturbed_start = base;
    candidates.push_back(base);
    std::uniform_real_distribution<double> noise(-config_.noise_half_range_deg,
                                                 config_.noise_half_range_deg);
    for (int c = 0; c < config_.batch_count; ++c) {
      std::vector<double> seq = base;
      for (double& u : seq) u = std::clamp(u + noise(rng_), config_.u_min_deg, config_.u_max_deg);
      candidates.push_back(std::move(seq));
    }
  } else {
    diag.cold_start = true;
    candidates = cold_start_batch(config_, mc.horizon, mc.control_dim, rng_);
  }
  diag.stage1_candidates = static_cast<int>(candidates.size());
  diag.stage1_rounds = config_.stage1_iters;
  diag.stage2_rounds = config_.stage2_iters;
  diag.stage1_losses.resize(candidates.size());

  std::vector<double> best_seq;
  double best_loss = std::numeric_limits<double>::infinity();
  const auto consider = [&](double loss, const std::vector<double>& seq) {
    if (loss < best_loss) {
      best_loss = loss;
      best_seq = seq;
    }
  };

  std::vector<double> final_losses(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<double> u = candidates[c];
    for (int it = 0; it < config_.stage1_iters; ++it) {
      const LossGrad lg =
          control_loss_and_u_gradient(*model_, init_state, u, s_target, config_.alpha);
      diag.stage1_losses[c].push_back(lg.loss);
      ++diag.forward_backward_pairs;
      consider(lg.loss, u);
      u = gradient_step(u, lg.u_grad, config_.stage1_step_deg, config_.u_min_deg,
                        config_.u_max_deg);
    }
    final_losses[c] = diag.stage1_losses[c].back();
    candidates[c] = std::move(u);
  }

  // The candidate with the lowest last recorded loss moves on; ties keep the
  // lowest index.
  std::size_t winner = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (final_losses[c] < final_losses[winner]) winner = c;
  }
  diag.stage2_seed_candidate = static_cast<int>(winner);

  std::vector<double> u = candidates[winner];
  for (int it = 0; it < config_.stage2_iters; ++it) {
    const LossGrad lg =
        control_loss_and_u_gradient(*model_, init_state, u, s_target, config_.alpha);
    diag.stage2_losses.push_back(lg.loss);
    ++diag.forward_backward_pairs;
    consider(lg.loss, u);
    u = gradient_step(u, lg.u_grad, config_.stage2_step_deg, config_.u_min_deg,
                      config_.u_max_deg);
  }

  diag.best_loss = best_loss;
  diag.warm_start_loss = diag.cold_start ? std::numeric_limits<double>::quiet_NaN()
                                         : diag.stage1_losses[0][0];

  OptimizeResult result;
  result.u_seq = std::move(best_seq);
  result.loss = best_loss;
  result.diagnostics = std::move(diag);
  return result;
}

double Controller::control_step(const Observation& obs, double target_kmh,
                                OptimizeDiagnostics* diagnostics) {
  const ModelConfig& mc = model_->config();
  if (mc.init_dim != 4) {
    throw std::logic_error("control_step: expects the 4-feature initial state layout");
  }
  if (mc.control_dim != 1 || mc.state_dim != 1) {
    throw std::logic_error("control_step: expects scalar command and state models");
  }
  const std::vector<double> init = {obs.v_kmh, obs.a_kmh_per_s, obs.pedal_deg,
                                    obs.pedal_rate_deg_per_s};
  const std::vector<double> s_target(mc.network_output_dim(), target_kmh);
  OptimizeResult result = optimize(init, s_target);
  prev_u_seq_ = result.u_seq;
  if (diagnostics) *diagnostics = std::move(result.diagnostics);
  return result.u_seq.front();
}

}  // namespace ddc
