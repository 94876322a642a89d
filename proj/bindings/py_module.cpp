#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "ddc/harness.hpp"

namespace py = pybind11;

namespace {

ddc::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("batch must have at least one row");
  const std::size_t cols = rows.front().size();
  ddc::Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw std::invalid_argument("batch rows have unequal lengths");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> from_matrix(const ddc::Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned pedal-dynamics MPC toolkit";
  m.attr("__version__") = DDCN_VERSION;

  m.def("sigmoid", &ddc::sigmoid, py::arg("x"));

  py::class_<ddc::Network>(m, "Network")
      .def(py::init<const std::vector<int>&, std::uint64_t>(), py::arg("dims"), py::arg("seed"))
      .def_property_readonly("dims", &ddc::Network::dims)
      .def_property_readonly("in_dim", &ddc::Network::in_dim)
      .def_property_readonly("out_dim", &ddc::Network::out_dim)
      .def_property_readonly("dense_count", &ddc::Network::dense_count)
      .def("param_count", &ddc::Network::param_count)
      .def("params_flat", &ddc::Network::params_flat)
      .def("set_params_flat",
           [](ddc::Network& net, const std::vector<double>& p) { net.set_params_flat(p); },
           py::arg("params"))
      .def("forward_infer",
           [](const ddc::Network& net, const std::vector<std::vector<double>>& batch) {
             return from_matrix(net.forward_infer(to_matrix(batch)));
           },
           py::arg("batch"))
      .def("forward_train",
           [](ddc::Network& net, const std::vector<std::vector<double>>& batch) {
             return from_matrix(net.forward(to_matrix(batch), ddc::RunMode::kTrain));
           },
           py::arg("batch"));

  py::class_<ddc::TrajectoryRow>(m, "TrajectoryRow")
      .def(py::init<>())
      .def_readwrite("time_s", &ddc::TrajectoryRow::time_s)
      .def_readwrite("u_deg", &ddc::TrajectoryRow::u_deg)
      .def_readwrite("v_kmh", &ddc::TrajectoryRow::v_kmh);

  py::class_<ddc::Trajectory>(m, "Trajectory")
      .def(py::init<>())
      .def_readwrite("period_s", &ddc::Trajectory::period_s)
      .def_readwrite("rows", &ddc::Trajectory::rows);

  m.def("write_trajectory_csv", &ddc::write_trajectory_csv, py::arg("trajectory"),
        py::arg("path"));
  m.def("load_trajectory_csv", &ddc::load_trajectory_csv, py::arg("path"),
        py::arg("u_min_deg") = 0.0, py::arg("u_max_deg") = 50.0);

  py::class_<ddc::WindowSample>(m, "WindowSample")
      .def(py::init<>())
      .def_readwrite("init_state", &ddc::WindowSample::init_state)
      .def_readwrite("u_seq", &ddc::WindowSample::u_seq)
      .def_readwrite("s_seq", &ddc::WindowSample::s_seq);

  m.def("window_trajectory", &ddc::window_trajectory, py::arg("trajectory"), py::arg("horizon"));

  py::class_<ddc::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &ddc::ModelConfig::horizon)
      .def_readwrite("state_dim", &ddc::ModelConfig::state_dim)
      .def_readwrite("init_dim", &ddc::ModelConfig::init_dim)
      .def_readwrite("control_dim", &ddc::ModelConfig::control_dim)
      .def_readwrite("period_s", &ddc::ModelConfig::period_s)
      .def_readwrite("u_min_deg", &ddc::ModelConfig::u_min_deg)
      .def_readwrite("u_max_deg", &ddc::ModelConfig::u_max_deg)
      .def_readwrite("hidden_sizes", &ddc::ModelConfig::hidden_sizes)
      .def("network_dims", &ddc::ModelConfig::network_dims);

  py::class_<ddc::TrainOptions>(m, "TrainOptions")
      .def(py::init<>())
      .def_readwrite("epochs", &ddc::TrainOptions::epochs)
      .def_readwrite("batch_size", &ddc::TrainOptions::batch_size)
      .def_readwrite("learning_rate", &ddc::TrainOptions::learning_rate)
      .def_readwrite("seed", &ddc::TrainOptions::seed);

  py::class_<ddc::TrainReport>(m, "TrainReport")
      .def(py::init<>())
      .def_readonly("test_loss_history", &ddc::TrainReport::test_loss_history)
      .def_readonly("best_test_loss", &ddc::TrainReport::best_test_loss)
      .def_readonly("best_epoch", &ddc::TrainReport::best_epoch)
      .def_readonly("train_count", &ddc::TrainReport::train_count)
      .def_readonly("test_count", &ddc::TrainReport::test_count);

  py::class_<ddc::TrainedModel>(m, "TrainedModel")
      .def_property_readonly("config", &ddc::TrainedModel::config)
      .def_readonly("best_test_loss", &ddc::TrainedModel::best_test_loss)
      .def_readonly("epochs_run", &ddc::TrainedModel::epochs_run)
      .def_readonly("seed", &ddc::TrainedModel::seed)
      .def("predict",
           [](const ddc::TrainedModel& model, const std::vector<double>& init_state,
              const std::vector<double>& u_seq) { return model.predict(init_state, u_seq); },
           py::arg("init_state"), py::arg("u_seq"))
      .def("save", &ddc::TrainedModel::save, py::arg("path"))
      .def_static("load", &ddc::TrainedModel::load, py::arg("path"));

  m.def("train_model",
        [](const std::vector<ddc::WindowSample>& samples, const ddc::ModelConfig& config,
           const ddc::TrainOptions& options) {
          ddc::TrainReport report;
          ddc::TrainedModel model = ddc::train_model(samples, config, options, &report);
          return py::make_tuple(std::move(model), std::move(report));
        },
        py::arg("samples"), py::arg("config"), py::arg("options"),
        "Returns (model, report)");

  py::class_<ddc::Observation>(m, "Observation")
      .def(py::init<>())
      .def_readwrite("v_kmh", &ddc::Observation::v_kmh)
      .def_readwrite("a_kmh_per_s", &ddc::Observation::a_kmh_per_s)
      .def_readwrite("pedal_deg", &ddc::Observation::pedal_deg)
      .def_readwrite("pedal_rate_deg_per_s", &ddc::Observation::pedal_rate_deg_per_s);

  py::class_<ddc::PlantParams>(m, "PlantParams")
      .def(py::init<>())
      .def_readwrite("tau_act_s", &ddc::PlantParams::tau_act_s)
      .def_readwrite("theta_dead_deg", &ddc::PlantParams::theta_dead_deg)
      .def_readwrite("theta_max_deg", &ddc::PlantParams::theta_max_deg)
      .def_readwrite("drive_gain", &ddc::PlantParams::drive_gain)
      .def_readwrite("drag", &ddc::PlantParams::drag)
      .def_readwrite("rolling", &ddc::PlantParams::rolling)
      .def_readwrite("sigma_v_kmh", &ddc::PlantParams::sigma_v_kmh)
      .def_readwrite("command_delay_steps", &ddc::PlantParams::command_delay_steps);

  py::class_<ddc::Plant>(m, "Plant")
      .def(py::init<const ddc::PlantParams&, std::uint64_t>(), py::arg("params"), py::arg("seed"))
      .def("step", &ddc::Plant::step, py::arg("u_cmd_deg"), py::arg("dt_s"))
      .def("observe", &ddc::Plant::observe)
      .def_property_readonly("velocity_kmh", &ddc::Plant::velocity_kmh)
      .def_property_readonly("pedal_deg", &ddc::Plant::pedal_deg);

  py::class_<ddc::Pid1Gains>(m, "Pid1Gains")
      .def(py::init<>())
      .def_readwrite("kp", &ddc::Pid1Gains::kp)
      .def_readwrite("ki", &ddc::Pid1Gains::ki)
      .def_readwrite("kd", &ddc::Pid1Gains::kd);

  py::class_<ddc::Pid1>(m, "Pid1")
      .def(py::init<const ddc::Pid1Gains&, double, double, double>(), py::arg("gains"),
           py::arg("period_s"), py::arg("u_min_deg") = 0.0, py::arg("u_max_deg") = 50.0)
      .def("step", &ddc::Pid1::step, py::arg("v_kmh"), py::arg("v_target_kmh"))
      .def("reset", &ddc::Pid1::reset);

  py::class_<ddc::Pid2Gains>(m, "Pid2Gains")
      .def(py::init<>())
      .def_readwrite("kp", &ddc::Pid2Gains::kp)
      .def_readwrite("kd", &ddc::Pid2Gains::kd)
      .def_readwrite("t_delay_s", &ddc::Pid2Gains::t_delay_s);

  py::class_<ddc::Pid2>(m, "Pid2")
      .def(py::init<const ddc::Pid2Gains&, double, double, double>(), py::arg("gains"),
           py::arg("period_s"), py::arg("u_min_deg") = 0.0, py::arg("u_max_deg") = 50.0)
      .def("step", &ddc::Pid2::step, py::arg("v_kmh"), py::arg("v_target_kmh"))
      .def("reset", &ddc::Pid2::reset);

  py::class_<ddc::RandomPolicyConfig>(m, "RandomPolicyConfig")
      .def(py::init<>())
      .def_readwrite("increment_min_deg", &ddc::RandomPolicyConfig::increment_min_deg)
      .def_readwrite("increment_max_deg", &ddc::RandomPolicyConfig::increment_max_deg)
      .def_readwrite("u_min_deg", &ddc::RandomPolicyConfig::u_min_deg)
      .def_readwrite("u_max_deg", &ddc::RandomPolicyConfig::u_max_deg);

  py::class_<ddc::RandomPolicy>(m, "RandomPolicy")
      .def(py::init<const ddc::RandomPolicyConfig&, std::uint64_t>(), py::arg("config"),
           py::arg("seed"))
      .def("step", &ddc::RandomPolicy::step, py::arg("v_kmh"), py::arg("v_target_kmh"))
      .def("reset", &ddc::RandomPolicy::reset);

  py::class_<ddc::ControllerConfig>(m, "ControllerConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &ddc::ControllerConfig::alpha)
      .def_readwrite("stage1_step_deg", &ddc::ControllerConfig::stage1_step_deg)
      .def_readwrite("stage2_step_deg", &ddc::ControllerConfig::stage2_step_deg)
      .def_readwrite("batch_count", &ddc::ControllerConfig::batch_count)
      .def_readwrite("stage1_iters", &ddc::ControllerConfig::stage1_iters)
      .def_readwrite("stage2_iters", &ddc::ControllerConfig::stage2_iters)
      .def_readwrite("noise_half_range_deg", &ddc::ControllerConfig::noise_half_range_deg)
      .def_readwrite("u_min_deg", &ddc::ControllerConfig::u_min_deg)
      .def_readwrite("u_max_deg", &ddc::ControllerConfig::u_max_deg);

  py::class_<ddc::OptimizeDiagnostics>(m, "OptimizeDiagnostics")
      .def(py::init<>())
      .def_readonly("cold_start", &ddc::OptimizeDiagnostics::cold_start)
      .def_readonly("stage1_candidates", &ddc::OptimizeDiagnostics::stage1_candidates)
      .def_readonly("stage1_losses", &ddc::OptimizeDiagnostics::stage1_losses)
      .def_readonly("stage2_losses", &ddc::OptimizeDiagnostics::stage2_losses)
      .def_readonly("stage2_seed_candidate", &ddc::OptimizeDiagnostics::stage2_seed_candidate)
      .def_readonly("best_loss", &ddc::OptimizeDiagnostics::best_loss)
      .def_readonly("warm_start_loss", &ddc::OptimizeDiagnostics::warm_start_loss)
      .def_readonly("forward_backward_pairs", &ddc::OptimizeDiagnostics::forward_backward_pairs);

  py::class_<ddc::OptimizeResult>(m, "OptimizeResult")
      .def_readonly("u_seq", &ddc::OptimizeResult::u_seq)
      .def_readonly("loss", &ddc::OptimizeResult::loss)
      .def_readonly("diagnostics", &ddc::OptimizeResult::diagnostics);

  m.def("control_loss", &ddc::control_loss, py::arg("s_pred"), py::arg("s_target"),
        py::arg("u_seq"), py::arg("alpha"), py::arg("control_dim") = 1);
  m.def("gradient_step", &ddc::gradient_step, py::arg("u_seq"), py::arg("grad"),
        py::arg("step_deg"), py::arg("u_min_deg"), py::arg("u_max_deg"));
  m.def("control_loss_and_u_gradient",
        [](const ddc::TrainedModel& model, const std::vector<double>& init_state,
           const std::vector<double>& u_seq, const std::vector<double>& s_target, double alpha) {
          const ddc::LossGrad lg =
              ddc::control_loss_and_u_gradient(model, init_state, u_seq, s_target, alpha);
          return py::make_tuple(lg.loss, lg.u_grad);
        },
        py::arg("model"), py::arg("init_state"), py::arg("u_seq"), py::arg("s_target"),
        py::arg("alpha"), "Returns (loss, u_gradient)");

  py::class_<ddc::Controller>(m, "Controller")
      .def(py::init<const ddc::TrainedModel&, const ddc::ControllerConfig&, std::uint64_t>(),
           py::arg("model"), py::arg("config"), py::arg("seed"), py::keep_alive<1, 2>())
      .def("control_step",
           [](ddc::Controller& c, const ddc::Observation& obs, double target_kmh) {
             return c.control_step(obs, target_kmh);
           },
           py::arg("observation"), py::arg("target_kmh"))
      .def("optimize", &ddc::Controller::optimize, py::arg("init_state"), py::arg("s_target"))
      .def("warm_start", &ddc::Controller::warm_start)
      .def("reset", &ddc::Controller::reset)
      .def_property_readonly("has_previous", &ddc::Controller::has_previous);

  py::class_<ddc::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("controller", &ddc::ExperimentConfig::controller)
      .def_readwrite("target_kmh", &ddc::ExperimentConfig::target_kmh)
      .def_readwrite("collect_target_kmh", &ddc::ExperimentConfig::collect_target_kmh)
      .def_readwrite("duration_s", &ddc::ExperimentConfig::duration_s)
      .def_readwrite("seed", &ddc::ExperimentConfig::seed)
      .def_readwrite("plant", &ddc::ExperimentConfig::plant)
      .def_readwrite("mpc", &ddc::ExperimentConfig::mpc)
      .def_readwrite("pid1", &ddc::ExperimentConfig::pid1)
      .def_readwrite("pid2", &ddc::ExperimentConfig::pid2)
      .def_readwrite("random_policy", &ddc::ExperimentConfig::random_policy)
      .def_readwrite("model", &ddc::ExperimentConfig::model)
      .def_readwrite("train", &ddc::ExperimentConfig::train)
      .def_readwrite("trajectory_path", &ddc::ExperimentConfig::trajectory_path)
      .def_readwrite("model_path", &ddc::ExperimentConfig::model_path)
      .def_readwrite("log_path", &ddc::ExperimentConfig::log_path)
      .def_readwrite("summary_path", &ddc::ExperimentConfig::summary_path)
      .def_readwrite("plot_path", &ddc::ExperimentConfig::plot_path);

  m.def("load_experiment_config", &ddc::load_experiment_config, py::arg("path"));

  py::class_<ddc::RunRow>(m, "RunRow")
      .def(py::init<>())
      .def_readonly("time_s", &ddc::RunRow::time_s)
      .def_readonly("u_cmd_deg", &ddc::RunRow::u_cmd_deg)
      .def_readonly("theta_deg", &ddc::RunRow::theta_deg)
      .def_readonly("v_kmh", &ddc::RunRow::v_kmh)
      .def_readonly("v_target_kmh", &ddc::RunRow::v_target_kmh)
      .def_readonly("loss_if_proposed", &ddc::RunRow::loss_if_proposed)
      .def_readonly("step_compute_ms", &ddc::RunRow::step_compute_ms);

  py::class_<ddc::RunSummary>(m, "RunSummary")
      .def(py::init<>())
      .def_readonly("controller", &ddc::RunSummary::controller)
      .def_readonly("target_kmh", &ddc::RunSummary::target_kmh)
      .def_readonly("duration_s", &ddc::RunSummary::duration_s)
      .def_readonly("seed", &ddc::RunSummary::seed)
      .def_readonly("band_primary_pct", &ddc::RunSummary::band_primary_pct)
      .def_readonly("t_conv_primary_s", &ddc::RunSummary::t_conv_primary_s)
      .def_readonly("t_conv_20_s", &ddc::RunSummary::t_conv_20_s)
      .def_readonly("final_error_kmh", &ddc::RunSummary::final_error_kmh)
      .def_readonly("mean_step_ms", &ddc::RunSummary::mean_step_ms)
      .def_readonly("max_step_ms", &ddc::RunSummary::max_step_ms);

  py::class_<ddc::RunResult>(m, "RunResult")
      .def_readonly("rows", &ddc::RunResult::rows)
      .def_readonly("summary", &ddc::RunResult::summary);

  m.def("collect_data", &ddc::collect_data, py::arg("config"));
  m.def("train_from_config",
        [](const ddc::ExperimentConfig& config) {
          ddc::TrainReport report;
          ddc::TrainedModel model = ddc::train_from_config(config, &report);
          return py::make_tuple(std::move(model), std::move(report));
        },
        py::arg("config"), "Returns (model, report)");
  m.def("run_experiment", &ddc::run_experiment, py::arg("config"));
  m.def("t_conv",
        [](const std::vector<double>& time_s, const std::vector<double>& v_kmh,
           double v_target_kmh, double band_percent) {
          return ddc::t_conv(time_s, v_kmh, v_target_kmh, band_percent);
        },
        py::arg("time_s"), py::arg("v_kmh"), py::arg("v_target_kmh"), py::arg("band_percent"));
  m.def("primary_band_percent", &ddc::primary_band_percent, py::arg("target_kmh"));
  m.def("summarize_run", &ddc::summarize_run, py::arg("rows"), py::arg("controller"),
        py::arg("target_kmh"), py::arg("duration_s"), py::arg("seed"));
  m.def("load_run_log_csv", &ddc::load_run_log_csv, py::arg("path"));
  m.def("load_summary", &ddc::load_summary, py::arg("path"));
  m.def("compare_summaries", &ddc::compare_summaries, py::arg("summaries"));
  m.def("compare_summary_files",
        [](const std::vector<std::string>& paths) {
          std::vector<ddc::RunSummary> summaries;
          summaries.reserve(paths.size());
          for (const std::string& p : paths) summaries.push_back(ddc::load_summary(p));
          return ddc::compare_summaries(summaries);
        },
        py::arg("paths"));
  m.def("emit_plot", &ddc::emit_plot, py::arg("log_path"), py::arg("out_path"));
  m.def("render_run_svg", &ddc::render_run_svg, py::arg("rows"));
}
