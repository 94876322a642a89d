#include "ddc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ddc {
namespace {

constexpr char kRunLogHeader[] =
    "time_s,u_cmd_deg,theta_deg,v_kmh,v_target_kmh,loss_if_proposed,step_compute_ms";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": not a number: '" + s + "'");
  }
}

std::vector<int> parse_int_list(const std::string& value, const std::string& what) {
  std::vector<int> out;
  std::string token;
  std::istringstream in(value);
  std::string normalized = value;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream in2(normalized);
  while (in2 >> token) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(token, &pos);
      if (pos != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(what + ": not an integer list: '" + value + "'");
    }
  }
  if (out.empty()) throw std::runtime_error(what + ": empty list");
  return out;
}

int step_count(double duration_s, double period_s) {
  const int steps = static_cast<int>(std::llround(duration_s / period_s));
  if (steps < 1) throw std::invalid_argument("duration shorter than one control period");
  return steps;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (controller != "proposed" && controller != "pid1" && controller != "pid2" &&
      controller != "random") {
    throw std::invalid_argument("unknown controller '" + controller +
                                "' (expected proposed, pid1, pid2 or random)");
  }
  if (!(target_kmh > 0.0)) throw std::invalid_argument("target velocity must be positive");
  if (!(collect_target_kmh > 0.0)) {
    throw std::invalid_argument("collection target velocity must be positive");
  }
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  plant.validate();
  mpc.validate();
  model.validate();
}

ExperimentConfig experiment_config_from(const ConfigFile& f) {
  ExperimentConfig c;

  c.controller = f.get_string("experiment", "controller", c.controller);
  c.target_kmh = f.get_double("experiment", "target_kmh", c.target_kmh);
  c.collect_target_kmh = f.get_double("experiment", "collect_target_kmh", c.collect_target_kmh);
  c.duration_s = f.get_double("experiment", "duration_s", c.duration_s);
  c.seed = f.get_uint64("experiment", "seed", c.seed);

  c.plant.tau_act_s = f.get_double("plant", "tau_act_s", c.plant.tau_act_s);
  c.plant.theta_dead_deg = f.get_double("plant", "theta_dead_deg", c.plant.theta_dead_deg);
  c.plant.theta_max_deg = f.get_double("plant", "theta_max_deg", c.plant.theta_max_deg);
  c.plant.drive_gain = f.get_double("plant", "drive_gain", c.plant.drive_gain);
  c.plant.drag = f.get_double("plant", "drag", c.plant.drag);
  c.plant.rolling = f.get_double("plant", "rolling", c.plant.rolling);
  c.plant.sigma_v_kmh = f.get_double("plant", "sigma_v_kmh", c.plant.sigma_v_kmh);
  c.plant.command_delay_steps =
      static_cast<int>(f.get_int("plant", "command_delay_steps", c.plant.command_delay_steps));

  c.mpc.alpha = f.get_double("controller", "alpha", c.mpc.alpha);
  c.mpc.stage1_step_deg = f.get_double("controller", "stage1_step_deg", c.mpc.stage1_step_deg);
  c.mpc.stage2_step_deg = f.get_double("controller", "stage2_step_deg", c.mpc.stage2_step_deg);
  c.mpc.batch_count = static_cast<int>(f.get_int("controller", "batch_count", c.mpc.batch_count));
  c.mpc.stage1_iters = static_cast<int>(f.get_int("controller", "stage1_iters", c.mpc.stage1_iters));
  c.mpc.stage2_iters = static_cast<int>(f.get_int("controller", "stage2_iters", c.mpc.stage2_iters));
  c.mpc.noise_half_range_deg =
      f.get_double("controller", "noise_half_range_deg", c.mpc.noise_half_range_deg);
  c.mpc.u_min_deg = f.get_double("controller", "u_min_deg", c.mpc.u_min_deg);
  c.mpc.u_max_deg = f.get_double("controller", "u_max_deg", c.mpc.u_max_deg);

  c.pid1.kp = f.get_double("pid1", "kp", c.pid1.kp);
  c.pid1.ki = f.get_double("pid1", "ki", c.pid1.ki);
  c.pid1.kd = f.get_double("pid1", "kd", c.pid1.kd);

  c.pid2.kp = f.get_double("pid2", "kp", c.pid2.kp);
  c.pid2.kd = f.get_double("pid2", "kd", c.pid2.kd);
  c.pid2.t_delay_s = f.get_double("pid2", "t_delay_s", c.pid2.t_delay_s);

  c.random_policy.increment_min_deg =
      f.get_double("random", "increment_min_deg", c.random_policy.increment_min_deg);
  c.random_policy.increment_max_deg =
      f.get_double("random", "increment_max_deg", c.random_policy.increment_max_deg);
  c.random_policy.u_min_deg = f.get_double("random", "u_min_deg", c.random_policy.u_min_deg);
  c.random_policy.u_max_deg = f.get_double("random", "u_max_deg", c.random_policy.u_max_deg);

  c.model.horizon = static_cast<int>(f.get_int("model", "horizon", c.model.horizon));
  c.model.period_s = f.get_double("model", "period_s", c.model.period_s);
  c.model.u_min_deg = f.get_double("model", "u_min_deg", c.model.u_min_deg);
  c.model.u_max_deg = f.get_double("model", "u_max_deg", c.model.u_max_deg);
  if (f.has("model", "hidden_sizes")) {
    c.model.hidden_sizes =
        parse_int_list(f.get_string("model", "hidden_sizes", ""), "config [model] hidden_sizes");
  }

  c.train.epochs = static_cast<int>(f.get_int("train", "epochs", c.train.epochs));
  c.train.batch_size = static_cast<int>(f.get_int("train", "batch_size", c.train.batch_size));
  c.train.learning_rate = f.get_double("train", "learning_rate", c.train.learning_rate);
  c.train.seed = f.get_uint64("train", "seed", c.seed);

  c.trajectory_path = f.get_string("paths", "trajectory", c.trajectory_path);
  c.model_path = f.get_string("paths", "model", c.model_path);
  c.log_path = f.get_string("paths", "log", c.log_path);
  c.summary_path = f.get_string("paths", "summary", c.summary_path);
  c.plot_path = f.get_string("paths", "plot", c.plot_path);

  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(ConfigFile::parse_file(path));
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* s = std::getenv("DDCN_SEED")) {
    const std::string v = s;
    try {
      std::size_t pos = 0;
      config.seed = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw std::runtime_error("DDCN_SEED: not an unsigned integer: '" + v + "'");
    }
    config.train.seed = config.seed;
  }
  if (const char* d = std::getenv("DDCN_OUT_DIR")) {
    const std::string dir = d;
    if (!dir.empty()) {
      const auto prefix = [&](std::string& p) {
        if (!p.empty() && p.front() != '/') p = dir + "/" + p;
      };
      prefix(config.trajectory_path);
      prefix(config.model_path);
      prefix(config.log_path);
      prefix(config.summary_path);
      prefix(config.plot_path);
    }
  }
}

double primary_band_percent(double target_kmh) { return target_kmh >= 7.5 ? 10.0 : 20.0; }

std::optional<double> t_conv(std::span<const double> time_s, std::span<const double> v_kmh,
                             double v_target_kmh, double band_percent) {
  if (time_s.size() != v_kmh.size()) throw std::invalid_argument("t_conv: series length mismatch");
  if (time_s.empty()) throw std::invalid_argument("t_conv: empty series");
  if (v_target_kmh == 0.0) {
    throw std::invalid_argument("t_conv: percentage band is undefined for a zero target");
  }
  if (!(band_percent > 0.0)) throw std::invalid_argument("t_conv: band must be positive");
  const double band = band_percent / 100.0 * std::abs(v_target_kmh);
  // Walk backwards through the trailing in-band run; its first sample is the
  // convergence time.
  std::optional<double> result;
  for (std::size_t i = time_s.size(); i-- > 0;) {
    if (std::abs(v_kmh[i] - v_target_kmh) <= band) {
      result = time_s[i];
    } else {
      break;
    }
  }
  return result;
}

Trajectory collect_data(const ExperimentConfig& config) {
  config.validate();
  const double period = config.model.period_s;
  const int steps = step_count(config.duration_s, period);
  Plant plant(config.plant, config.seed);
  RandomPolicy policy(config.random_policy, config.seed + 1);
  Trajectory traj;
  traj.period_s = period;
  traj.rows.reserve(steps);
  for (int k = 1; k <= steps; ++k) {
    const double u = policy.step(plant.velocity_kmh(), config.collect_target_kmh);
    const Observation obs = plant.step(u, period);
    traj.rows.push_back({k * period, u, obs.v_kmh});
  }
  if (!config.trajectory_path.empty()) write_trajectory_csv(traj, config.trajectory_path);
  return traj;
}

TrainedModel train_from_config(const ExperimentConfig& config, TrainReport* report) {
  Trajectory traj =
      load_trajectory_csv(config.trajectory_path, config.model.u_min_deg, config.model.u_max_deg);
  ModelConfig mc = config.model;
  mc.period_s = traj.period_s;
  const std::vector<WindowSample> samples = window_trajectory(traj, mc.horizon);
  TrainedModel model = train_model(samples, mc, config.train, report);
  if (!config.model_path.empty()) model.save(config.model_path);
  return model;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const double period = config.model.period_s;
  const int steps = step_count(config.duration_s, period);

  Plant plant(config.plant, config.seed);
  std::optional<TrainedModel> model;
  std::optional<Controller> mpc;
  std::optional<Pid1> pid1;
  std::optional<Pid2> pid2;
  std::optional<RandomPolicy> random;
  if (config.controller == "proposed") {
    model.emplace(TrainedModel::load(config.model_path));
    mpc.emplace(*model, config.mpc, config.seed + 1);
  } else if (config.controller == "pid1") {
    pid1.emplace(config.pid1, period, config.mpc.u_min_deg, config.mpc.u_max_deg);
  } else if (config.controller == "pid2") {
    pid2.emplace(config.pid2, period, config.mpc.u_min_deg, config.mpc.u_max_deg);
  } else {
    random.emplace(config.random_policy, config.seed + 1);
  }

  std::vector<RunRow> rows;
  rows.reserve(steps);
  double prev_cmd = 0.0;
  double prev_prev_cmd = 0.0;
  for (int k = 1; k <= steps; ++k) {
    Observation obs = plant.observe();
    // The pedal features come from the command history: the controller reads
    // what it asked for, not the plant's internal pedal state.
    obs.pedal_deg = prev_cmd;
    obs.pedal_rate_deg_per_s = (prev_cmd - prev_prev_cmd) / period;

    const auto t0 = std::chrono::steady_clock::now();
    double u = 0.0;
    double loss = 0.0;
    if (mpc) {
      OptimizeDiagnostics diag;
      u = mpc->control_step(obs, config.target_kmh, &diag);
      loss = diag.best_loss;
    } else if (pid1) {
      u = pid1->step(obs.v_kmh, config.target_kmh);
    } else if (pid2) {
      u = pid2->step(obs.v_kmh, config.target_kmh);
    } else {
      u = random->step(obs.v_kmh, config.target_kmh);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const Observation after = plant.step(u, period);
    rows.push_back({k * period, u, after.pedal_deg, after.v_kmh, config.target_kmh, loss, ms});
    prev_prev_cmd = prev_cmd;
    prev_cmd = u;
  }

  RunResult result;
  result.summary =
      summarize_run(rows, config.controller, config.target_kmh, config.duration_s, config.seed);
  result.rows = std::move(rows);
  if (!config.log_path.empty()) write_run_log_csv(result.rows, config.log_path);
  if (!config.summary_path.empty()) write_summary(result.summary, config.summary_path);
  return result;
}

RunSummary summarize_run(const std::vector<RunRow>& rows, const std::string& controller,
                         double target_kmh, double duration_s, std::uint64_t seed) {
  if (rows.empty()) throw std::invalid_argument("summarize_run: no rows");
  RunSummary s;
  s.controller = controller;
  s.target_kmh = target_kmh;
  s.duration_s = duration_s;
  s.seed = seed;
  s.band_primary_pct = primary_band_percent(target_kmh);

  std::vector<double> times;
  std::vector<double> vs;
  times.reserve(rows.size());
  vs.reserve(rows.size());
  for (const RunRow& r : rows) {
    times.push_back(r.time_s);
    vs.push_back(r.v_kmh);
  }
  s.t_conv_primary_s = t_conv(times, vs, target_kmh, s.band_primary_pct);
  s.t_conv_20_s = t_conv(times, vs, target_kmh, 20.0);

  const double period = rows.size() >= 2 ? rows[1].time_s - rows[0].time_s : duration_s;
  const std::size_t tail =
      std::min(rows.size(), static_cast<std::size_t>(std::max<long long>(
                                1, std::llround(5.0 / std::max(period, 1e-9)))));
  double err = 0.0;
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) {
    err += std::abs(rows[i].v_kmh - target_kmh);
  }
  s.final_error_kmh = err / static_cast<double>(tail);

  double total_ms = 0.0;
  double max_ms = 0.0;
  for (const RunRow& r : rows) {
    total_ms += r.step_compute_ms;
    max_ms = std::max(max_ms, r.step_compute_ms);
  }
  s.mean_step_ms = total_ms / static_cast<double>(rows.size());
  s.max_step_ms = max_ms;
  return s;
}

void write_run_log_csv(const std::vector<RunRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kRunLogHeader << "\n";
  for (const RunRow& r : rows) {
    char t[32];
    std::snprintf(t, sizeof(t), "%.3f", r.time_s);
    char ms[32];
    std::snprintf(ms, sizeof(ms), "%.6f", r.step_compute_ms);
    out << t << "," << fmt(r.u_cmd_deg) << "," << fmt(r.theta_deg) << "," << fmt(r.v_kmh) << ","
        << fmt(r.v_target_kmh) << "," << fmt(r.loss_if_proposed) << "," << ms << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<RunRow> load_run_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != kRunLogHeader) {
    throw std::runtime_error(path + ": expected header '" + std::string(kRunLogHeader) + "'");
  }
  std::vector<RunRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 7) throw std::runtime_error(where + ": expected 7 columns");
    RunRow r;
    r.time_s = parse_double(cells[0], where);
    r.u_cmd_deg = parse_double(cells[1], where);
    r.theta_deg = parse_double(cells[2], where);
    r.v_kmh = parse_double(cells[3], where);
    r.v_target_kmh = parse_double(cells[4], where);
    r.loss_if_proposed = parse_double(cells[5], where);
    r.step_compute_ms = parse_double(cells[6], where);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string conv_to_string(const std::optional<double>& t) {
  return t ? fmt(*t) : std::string("never");
}

std::optional<double> conv_from_string(const std::string& s, const std::string& where) {
  if (s == "never") return std::nullopt;
  return parse_double(s, where);
}

}  // namespace

void write_summary(const RunSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "[summary]\n";
  out << "controller = " << summary.controller << "\n";
  out << "target_kmh = " << fmt(summary.target_kmh) << "\n";
  out << "duration_s = " << fmt(summary.duration_s) << "\n";
  out << "seed = " << summary.seed << "\n";
  out << "band_primary_pct = " << fmt(summary.band_primary_pct) << "\n";
  out << "t_conv_primary_s = " << conv_to_string(summary.t_conv_primary_s) << "\n";
  out << "t_conv_20_s = " << conv_to_string(summary.t_conv_20_s) << "\n";
  out << "final_error_kmh = " << fmt(summary.final_error_kmh) << "\n";
  out << "mean_step_ms = " << fmt(summary.mean_step_ms) << "\n";
  out << "max_step_ms = " << fmt(summary.max_step_ms) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

RunSummary load_summary(const std::string& path) {
  const ConfigFile f = ConfigFile::parse_file(path);
  if (!f.has("summary", "controller")) {
    throw std::runtime_error(path + ": not a run summary (missing [summary] controller)");
  }
  RunSummary s;
  s.controller = f.get_string("summary", "controller", "");
  s.target_kmh = f.get_double("summary", "target_kmh", 0.0);
  s.duration_s = f.get_double("summary", "duration_s", 0.0);
  s.seed = f.get_uint64("summary", "seed", 0);
  s.band_primary_pct = f.get_double("summary", "band_primary_pct", 20.0);
  s.t_conv_primary_s =
      conv_from_string(f.get_string("summary", "t_conv_primary_s", "never"), path);
  s.t_conv_20_s = conv_from_string(f.get_string("summary", "t_conv_20_s", "never"), path);
  s.final_error_kmh = f.get_double("summary", "final_error_kmh", 0.0);
  s.mean_step_ms = f.get_double("summary", "mean_step_ms", 0.0);
  s.max_step_ms = f.get_double("summary", "max_step_ms", 0.0);
  return s;
}

std::string compare_summaries(const std::vector<RunSummary>& summaries) {
  if (summaries.size() < 2) {
    throw std::invalid_argument("compare needs at least two run summaries");
  }
  for (const RunSummary& s : summaries) {
    if (std::abs(s.target_kmh - summaries.front().target_kmh) > 1e-9) {
      throw std::invalid_argument("compare: runs track different targets (" +
                                  fmt(summaries.front().target_kmh) + " vs " +
                                  fmt(s.target_kmh) + " km/h)");
    }
  }

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "target %.6g km/h, primary band %.6g%%\n",
                summaries.front().target_kmh, summaries.front().band_primary_pct);
  out << line;
  std::snprintf(line, sizeof(line), "%-10s %14s %14s %16s %12s\n", "controller", "t_conv[s]",
                "t_conv20[s]", "final_err[km/h]", "mean_ms");
  out << line;
  const auto conv_cell = [](const std::optional<double>& t) {
    char cell[32];
    if (t) {
      std::snprintf(cell, sizeof(cell), "%.2f", *t);
    } else {
      std::snprintf(cell, sizeof(cell), "never");
    }
    return std::string(cell);
  };
  for (const RunSummary& s : summaries) {
    std::snprintf(line, sizeof(line), "%-10s %14s %14s %16.3f %12.3f\n", s.controller.c_str(),
                  conv_cell(s.t_conv_primary_s).c_str(), conv_cell(s.t_conv_20_s).c_str(),
                  s.final_error_kmh, s.mean_step_ms);
    out << line;
  }

  const auto conv_of = [&](const std::string& name) -> std::optional<double> {
    for (const RunSummary& s : summaries) {
      if (s.controller == name) {
        return s.t_conv_primary_s ? *s.t_conv_primary_s
                                  : std::numeric_limits<double>::infinity();
      }
    }
    return std::nullopt;
  };
  const std::optional<double> proposed = conv_of("proposed");
  const std::optional<double> p1 = conv_of("pid1");
  const std::optional<double> p2 = conv_of("pid2");
  std::vector<std::string> violations;
  if (proposed && p2 && !(*proposed < *p2)) violations.push_back("proposed < pid2");
  if (proposed && p1 && !(*proposed < *p1)) violations.push_back("proposed < pid1");
  if (p2 && p1 && !(*p2 < *p1)) violations.push_back("pid2 < pid1");
  // Label only the controllers actually present so two files never produce a
  // claim about a third.
  std::string chain;
  for (const auto& [name, t] : {std::pair{"proposed", proposed}, {"pid2", p2}, {"pid1", p1}}) {
    if (!t) continue;
    if (!chain.empty()) chain += " < ";
    chain += name;
  }
  const int named = (proposed ? 1 : 0) + (p1 ? 1 : 0) + (p2 ? 1 : 0);
  if (named >= 2) {
    if (violations.empty()) {
      out << "ordering " << chain << ": holds\n";
    } else {
      out << "ordering " << chain << ": VIOLATED (";
      for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) out << ", ";
        out << violations[i];
      }
      out << ")\n";
    }
  }
  return out.str();
}

}  // namespace ddc
