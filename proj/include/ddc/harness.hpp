#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddc/baselines.hpp"
#include "ddc/config_file.hpp"
#include "ddc/controller.hpp"
#include "ddc/model.hpp"
#include "ddc/plant.hpp"

namespace ddc {

// Everything one experiment needs; member initializers are the shipped
// defaults and configs/default.cfg mirrors them.
struct ExperimentConfig {
  std::string controller = "proposed";  // proposed | pid1 | pid2 | random
  double target_kmh = 5.0;
  double collect_target_kmh = 10.0;  // random-walk set point during data collection
  double duration_s = 60.0;
  std::uint64_t seed = 1;

  PlantParams plant;
  ControllerConfig mpc;
  Pid1Gains pid1;
  Pid2Gains pid2;
  RandomPolicyConfig random_policy;
  ModelConfig model;
  TrainOptions train;

  std::string trajectory_path = "trajectory.csv";
  std::string model_path = "model.ddcn";
  std::string log_path = "run.csv";
  std::string summary_path = "summary.txt";
  std::string plot_path = "run.svg";

  void validate() const;
};

ExperimentConfig experiment_config_from(const ConfigFile& file);
ExperimentConfig load_experiment_config(const std::string& path);
// DDCN_SEED replaces the seed; DDCN_OUT_DIR is prepended to relative output
// paths (and created by the CLI).
void apply_env_overrides(ExperimentConfig& config);

struct RunRow {
  double time_s = 0.0;
  double u_cmd_deg = 0.0;
  double theta_deg = 0.0;
  double v_kmh = 0.0;
  double v_target_kmh = 0.0;
  double loss_if_proposed = 0.0;
  double step_compute_ms = 0.0;
};

struct RunSummary {
  std::string controller;
  double target_kmh = 0.0;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  double band_primary_pct = 20.0;
  std::optional<double> t_conv_primary_s;
  std::optional<double> t_conv_20_s;
  double final_error_kmh = 0.0;  // mean |v - target| over the last 5 s
  double mean_step_ms = 0.0;
  double max_step_ms = 0.0;
};

struct RunResult {
  std::vector<RunRow> rows;
  RunSummary summary;
};

// Earliest time after which the velocity stays inside +-band_percent% of the
// target for the rest of the run; empty when the run never settles.
std::optional<double> t_conv(std::span<const double> time_s, std::span<const double> v_kmh,
                             double v_target_kmh, double band_percent);
// Tight targets get the tight band.
double primary_band_percent(double target_kmh);

// Runs the random exploration policy against the plant and writes the
// trajectory CSV (unless the path is empty).
Trajectory collect_data(const ExperimentConfig& config);

// Loads the trajectory, windows it and trains the forward model; saves it to
// config.model_path unless empty.
TrainedModel train_from_config(const ExperimentConfig& config, TrainReport* report = nullptr);

// Closed loop: observe, command, step. Writes the run log and the summary
// (unless those paths are empty).
RunResult run_experiment(const ExperimentConfig& config);

RunSummary summarize_run(const std::vector<RunRow>& rows, const std::string& controller,
                         double target_kmh, double duration_s, std::uint64_t seed);

void write_run_log_csv(const std::vector<RunRow>& rows, const std::string& path);
std::vector<RunRow> load_run_log_csv(const std::string& path);

void write_summary(const RunSummary& summary, const std::string& path);
RunSummary load_summary(const std::string& path);

// Side-by-side table of at least two runs against the same target, with a
// line that flags convergence-time orderings that break the expected
// proposed < pid2 < pid1 ranking.
std::string compare_summaries(const std::vector<RunSummary>& summaries);

// Two-panel SVG: velocity against its target band on top, pedal command and
// actual pedal angle below.
void emit_plot(const std::string& log_path, const std::string& out_path);
std::string render_run_svg(const std::vector<RunRow>& rows);

}  // namespace ddc
