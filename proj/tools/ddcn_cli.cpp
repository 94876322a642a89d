#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddc/harness.hpp"

namespace {

ddc::ExperimentConfig make_config(const std::string& config_path) {
  ddc::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ddc::load_experiment_config(config_path);
  ddc::apply_env_overrides(cfg);
  if (const char* d = std::getenv("DDCN_OUT_DIR")) {
    if (*d != '\0') std::filesystem::create_directories(d);
  }
  return cfg;
}

void print_summary(const ddc::RunSummary& s) {
  const auto conv = [](const std::optional<double>& t) {
    return t ? std::to_string(*t).substr(0, std::to_string(*t).find('.') + 3)
             : std::string("never");
  };
  std::cout << "controller " << s.controller << ", target " << s.target_kmh << " km/h, seed "
            << s.seed << "\n";
  std::cout << "t_conv(" << s.band_primary_pct << "%) = " << conv(s.t_conv_primary_s)
            << " s, t_conv(20%) = " << conv(s.t_conv_20_s) << " s\n";
  std::cout << "final error " << s.final_error_kmh << " km/h, step compute mean "
            << s.mean_step_ms << " ms / max " << s.max_step_ms << " ms\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned pedal-dynamics MPC toolkit"};
  app.require_subcommand(1);
  app.footer(
      "Environment:\n"
      "  DDCN_SEED     overrides the experiment seed\n"
      "  DDCN_OUT_DIR  created if needed and prepended to relative artifact paths");

  // collect
  auto* collect =
      app.add_subcommand("collect", "Drive the plant with the random policy, log a trajectory");
  std::string collect_config;
  std::optional<double> collect_target;
  std::optional<double> collect_duration;
  std::optional<std::uint64_t> collect_seed;
  std::optional<std::string> collect_out;
  collect->add_option("--config", collect_config, "Experiment config file");
  collect->add_option("--target-kmh", collect_target, "Set point of the random walk");
  collect->add_option("--duration-s", collect_duration, "Length of the collection run");
  collect->add_option("--seed", collect_seed, "Experiment seed");
  collect->add_option("--out", collect_out, "Trajectory CSV path");
  collect->callback([&] {
    ddc::ExperimentConfig cfg = make_config(collect_config);
    if (collect_seed) {
      cfg.seed = *collect_seed;
      cfg.train.seed = *collect_seed;
    }
    if (collect_target) cfg.collect_target_kmh = *collect_target;
    if (collect_duration) cfg.duration_s = *collect_duration;
    if (collect_out) cfg.trajectory_path = *collect_out;
    const ddc::Trajectory traj = ddc::collect_data(cfg);
    std::cout << "wrote " << cfg.trajectory_path << " (" << traj.rows.size() << " rows)\n";
  });

  // train
  auto* train = app.add_subcommand("train", "Fit the forward model on a logged trajectory");
  std::string train_config;
  std::optional<std::string> train_trajectory;
  std::optional<std::string> train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  train->add_option("--config", train_config, "Experiment config file");
  train->add_option("--trajectory", train_trajectory, "Trajectory CSV to train on");
  train->add_option("--out", train_out, "Model output path");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--epochs", train_epochs, "Training epochs");
  train->callback([&] {
    ddc::ExperimentConfig cfg = make_config(train_config);
    if (train_seed) {
      cfg.seed = *train_seed;
      cfg.train.seed = *train_seed;
    }
    if (train_trajectory) cfg.trajectory_path = *train_trajectory;
    if (train_out) cfg.model_path = *train_out;
    if (train_epochs) cfg.train.epochs = *train_epochs;
    ddc::TrainReport report;
    ddc::train_from_config(cfg, &report);
    std::cout << "trained on " << report.train_count << " samples, " << report.test_count
              << " held out\n";
    std::cout << "best test loss " << report.best_test_loss << " at epoch " << report.best_epoch
              << " of " << cfg.train.epochs << "\n";
    std::cout << "wrote " << cfg.model_path << "\n";
  });

  // run
  auto* run = app.add_subcommand("run", "Track a target velocity in closed loop");
  std::string run_config;
  std::optional<std::string> run_controller;
  std::optional<double> run_target;
  std::optional<double> run_duration;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_model;
  std::optional<std::string> run_log;
  std::optional<std::string> run_summary;
  run->add_option("--config", run_config, "Experiment config file");
  run->add_option("--controller", run_controller, "proposed, pid1, pid2 or random");
  run->add_option("--target-kmh", run_target, "Target velocity");
  run->add_option("--duration-s", run_duration, "Run length");
  run->add_option("--seed", run_seed, "Experiment seed");
  run->add_option("--model", run_model, "Trained model path (proposed controller)");
  run->add_option("--log", run_log, "Run log CSV path");
  run->add_option("--summary", run_summary, "Summary output path");
  run->callback([&] {
    ddc::ExperimentConfig cfg = make_config(run_config);
    if (run_seed) {
      cfg.seed = *run_seed;
      cfg.train.seed = *run_seed;
    }
    if (run_controller) cfg.controller = *run_controller;
    if (run_target) cfg.target_kmh = *run_target;
    if (run_duration) cfg.duration_s = *run_duration;
    if (run_model) cfg.model_path = *run_model;
    if (run_log) cfg.log_path = *run_log;
    if (run_summary) cfg.summary_path = *run_summary;
    const ddc::RunResult result = ddc::run_experiment(cfg);
    print_summary(result.summary);
    if (!cfg.log_path.empty()) std::cout << "wrote " << cfg.log_path << "\n";
    if (!cfg.summary_path.empty()) std::cout << "wrote " << cfg.summary_path << "\n";
  });

  // plot
  auto* plot = app.add_subcommand("plot", "Render a run log as an SVG");
  std::string plot_config;
  std::optional<std::string> plot_log;
  std::optional<std::string> plot_out;
  plot->add_option("--config", plot_config, "Experiment config file");
  plot->add_option("--log", plot_log, "Run log CSV to render");
  plot->add_option("--out", plot_out, "SVG output path");
  plot->callback([&] {
    ddc::ExperimentConfig cfg = make_config(plot_config);
    if (plot_log) cfg.log_path = *plot_log;
    if (plot_out) cfg.plot_path = *plot_out;
    ddc::emit_plot(cfg.log_path, cfg.plot_path);
    std::cout << "wrote " << cfg.plot_path << "\n";
  });

  // compare
  auto* compare = app.add_subcommand("compare", "Tabulate run summaries against the same target");
  std::vector<std::string> compare_files;
  compare->add_option("summaries", compare_files, "Run summary files (two or more)")->required();
  compare->callback([&] {
    std::vector<ddc::RunSummary> summaries;
    summaries.reserve(compare_files.size());
    for (const std::string& path : compare_files) summaries.push_back(ddc::load_summary(path));
    std::cout << ddc::compare_summaries(summaries);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
