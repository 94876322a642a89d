#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/plant.hpp"

namespace ddc {

struct ControllerConfig {
  double alpha = 30.0;               // weight of the command-smoothness penalty
  double stage1_step_deg = 3.0;      // normalized-gradient step, coarse stage
  double stage2_step_deg = 0.5;      // normalized-gradient step, fine stage
  int batch_count = 10;              // perturbed candidates per tick
  int stage1_iters = 10;
  int stage2_iters = 20;
  double noise_half_range_deg = 5.0; // warm-start perturbation, uniform +-
  double u_min_deg = 0.0;
  double u_max_deg = 50.0;

  void validate() const;
};

struct OptimizeDiagnostics {
  bool cold_start = false;
  int stage1_candidates = 0;
  int stage1_rounds = 0;
  int stage2_rounds = 0;
  // Loss evaluated at each candidate before each stage-1 step.
  std::vector<std::vector<double>> stage1_losses;
  std::vector<double> stage2_losses;
  int stage2_seed_candidate = -1;
  double best_loss = 0.0;
  // Warm ticks only: the shifted, clamped previous solution (candidate 0)
  // and its loss before any optimization.
  std::vector<double> unperturbed_start;
  double warm_start_loss = 0.0;
  int forward_backward_pairs = 0;
};

struct OptimizeResult {
  std::vector<double> u_seq;
  double loss = 0.0;
  OptimizeDiagnostics diagnostics;
};

// Mean squared tracking error over the horizon plus alpha times the mean
// squared difference between consecutive commands.
double control_loss(std::span<const double> s_pred, std::span<const double> s_target,
                    std::span<const double> u_seq, double alpha, int control_dim = 1);
double adjacent_error(std::span<const double> u_seq, int control_dim = 1);

// One normalized-gradient descent step, clamped to the pedal range. Gradients
// with norm below 1e-12 leave the sequence unchanged.
std::vector<double> gradient_step(std::span<const double> u_seq, std::span<const double> grad,
                                  double step_deg, double u_min_deg, double u_max_deg);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> u_grad;
};

// Control loss and its exact gradient w.r.t. the command sequence, obtained
// by backpropagating the tracking error through the model (normalizers
// included) and adding the smoothness term's derivative.
LossGrad control_loss_and_u_gradient(const TrainedModel& model,
                                     std::span<const double> init_state,
                                     std::span<const double> u_seq,
                                     std::span<const double> s_target, double alpha);

// Drops the first command of the previous solution and repeats the last one.
std::vector<double> warm_start_shift(const std::vector<double>& prev_u_seq, int control_dim);

// Constant sequences with levels drawn uniformly from the pedal range, one
// draw per candidate.
std::vector<std::vector<double>> cold_start_batch(const ControllerConfig& config, int horizon,
                                                  int control_dim, std::mt19937_64& rng);

// Two-stage shooting optimizer over the learned model. Each tick refines a
// batch of candidate command sequences with coarse normalized-gradient steps,
// then polishes the best candidate with fine steps, and returns the lowest
// loss sequence evaluated anywhere in the process.
class Controller {
 public:
  Controller(const TrainedModel& model, const ControllerConfig& config, std::uint64_t seed);

  // Builds the initial condition from the observation, tracks a constant
  // target over the horizon and returns the first command of the solution.
  double control_step(const Observation& obs, double target_kmh,
                      OptimizeDiagnostics* diagnostics = nullptr);

  OptimizeResult optimize(const std::vector<double>& init_state,
                          const std::vector<double>& s_target);

  // Shifted previous solution; throws until a first tick has run.
  std::vector<double> warm_start() const;
  bool has_previous() const { return prev_u_seq_.has_value(); }
  void reset() { prev_u_seq_.reset(); }

  const ControllerConfig& config() const { return config_; }

 private:
  const TrainedModel* model_;
  ControllerConfig config_;
  std::optional<std::vector<double>> prev_u_seq_;
  std::mt19937_64 rng_;
};

}  // namespace ddc
