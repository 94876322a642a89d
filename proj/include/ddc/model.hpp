#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddc/netcore.hpp"

namespace ddc {

// One logged plant step: commanded pedal angle and the velocity it produced.
struct TrajectoryRow {
  double time_s = 0.0;
  double u_deg = 0.0;
  double v_kmh = 0.0;
};

struct Trajectory {
  double period_s = 0.2;
  std::vector<TrajectoryRow> rows;
};

// CSV with header "time_s,u_deg,v_kmh". The loader checks the header, a
// constant sample period and pedal commands inside [u_min, u_max].
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path, double u_min_deg = 0.0,
                               double u_max_deg = 50.0);

// One supervised sample: initial condition i_t, the next N pedal commands and
// the N velocities they led to.
struct WindowSample {
  std::vector<double> init_state;  // v, dv/dt, u, du/dt at time t
  std::vector<double> u_seq;       // u_{t+1} .. u_{t+N}
  std::vector<double> s_seq;       // v_{t+1} .. v_{t+N}
};

// Slides a length-N window over the trajectory; derivatives are backward
// differences, zero on the first row. Yields T - N samples.
std::vector<WindowSample> window_trajectory(const Trajectory& traj, int horizon);

// Per-feature standardization fitted on data columns. Zero-variance features
// keep sigma = 1 so they pass through centered.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  int dim() const { return static_cast<int>(mean.size()); }
};

Normalizer fit_normalizer(const std::vector<std::vector<double>>& rows);
std::vector<double> normalizer_apply(const Normalizer& n, std::span<const double> x);
std::vector<double> normalizer_invert(const Normalizer& n, std::span<const double> z);

struct ModelConfig {
  int horizon = 30;       // N prediction steps
  int state_dim = 1;      // velocity
  int init_dim = 4;       // v, dv/dt, u, du/dt
  int control_dim = 1;    // pedal angle
  double period_s = 0.2;
  double u_min_deg = 0.0;
  double u_max_deg = 50.0;
  std::vector<int> hidden_sizes = {80, 50, 20, 20};

  int network_input_dim() const { return init_dim + horizon * control_dim; }
  int network_output_dim() const { return horizon * state_dim; }
  std::vector<int> network_dims() const;
  void validate() const;
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 2e-3;
  std::uint64_t seed = 5;
};

struct TrainReport {
  // Entry 0 is the untrained network; one entry per epoch after that.
  std::vector<double> test_loss_history;
  double best_test_loss = 0.0;
  int best_epoch = 0;
  int train_count = 0;
  int test_count = 0;
};

// Concatenates [init_state; u_seq] in the layout the network consumes.
std::vector<double> network_input_vector(const ModelConfig& config,
                                         std::span<const double> init_state,
                                         std::span<const double> u_seq);

// A trained forward model plus the normalizers it was fitted with.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(Network net, Normalizer input_norm, Normalizer output_norm,
               ModelConfig config);

  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const Normalizer& input_normalizer() const { return input_norm_; }
  const Normalizer& output_normalizer() const { return output_norm_; }
  const ModelConfig& config() const { return config_; }

  std::uint64_t seed = 0;
  int epochs_run = 0;
  double best_test_loss = 0.0;

  // Normalize, run the network in infer mode, denormalize.
  std::vector<double> predict(std::span<const double> init_state,
                              std::span<const double> u_seq) const;

  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);

 private:
  Network net_;
  Normalizer input_norm_;
  Normalizer output_norm_;
  ModelConfig config_;
};

// Shuffled 1/5 test split, minibatch Adam on normalized MSE, keeps the
// network snapshot with the lowest test loss seen across the epochs.
TrainedModel train_model(const std::vector<WindowSample>& samples, const ModelConfig& config,
                         const TrainOptions& options, TrainReport* report = nullptr);

}  // namespace ddc
