"""Learned pedal-dynamics MPC toolkit.

Collect trajectories from the simulated pedal/vehicle plant, fit the forward
model, and track target velocities by backpropagating the tracking error
through the model to the command sequence.
"""

from ._core import (
    Controller,
    ControllerConfig,
    ExperimentConfig,
    ModelConfig,
    Network,
    Observation,
    OptimizeDiagnostics,
    OptimizeResult,
    Pid1,
    Pid1Gains,
    Pid2,
    Pid2Gains,
    Plant,
    PlantParams,
    RandomPolicy,
    RandomPolicyConfig,
    RunResult,
    RunRow,
    RunSummary,
    TrainedModel,
    TrainOptions,
    TrainReport,
    Trajectory,
    TrajectoryRow,
    WindowSample,
    __version__,
    collect_data,
    compare_summaries,
    compare_summary_files,
    control_loss,
    control_loss_and_u_gradient,
    emit_plot,
    gradient_step,
    load_experiment_config,
    load_run_log_csv,
    load_summary,
    load_trajectory_csv,
    primary_band_percent,
    render_run_svg,
    run_experiment,
    sigmoid,
    summarize_run,
    t_conv,
    train_from_config,
    train_model,
    window_trajectory,
    write_trajectory_csv,
)

__all__ = [
    "Controller",
    "ControllerConfig",
    "ExperimentConfig",
    "ModelConfig",
    "Network",
    "Observation",
    "OptimizeDiagnostics",
    "OptimizeResult",
    "Pid1",
    "Pid1Gains",
    "Pid2",
    "Pid2Gains",
    "Plant",
    "PlantParams",
    "RandomPolicy",
    "RandomPolicyConfig",
    "RunResult",
    "RunRow",
    "RunSummary",
    "TrainedModel",
    "TrainOptions",
    "TrainReport",
    "Trajectory",
    "TrajectoryRow",
    "WindowSample",
    "__version__",
    "collect_data",
    "compare_summaries",
    "compare_summary_files",
    "control_loss",
    "control_loss_and_u_gradient",
    "emit_plot",
    "gradient_step",
    "load_experiment_config",
    "load_run_log_csv",
    "load_summary",
    "load_trajectory_csv",
    "primary_band_percent",
    "render_run_svg",
    "run_experiment",
    "sigmoid",
    "summarize_run",
    "t_conv",
    "train_from_config",
    "train_model",
    "window_trajectory",
    "write_trajectory_csv",
]
