#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddc/harness.hpp"
#include "doctest.h"

using ddc::ConfigFile;
using ddc::ExperimentConfig;
using ddc::RunResult;
using ddc::RunRow;
using ddc::RunSummary;
using ddc::Trajectory;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("tmp_harness") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Reference implementation: earliest index whose suffix stays inside the band.
std::optional<double> t_conv_by_suffix_scan(const std::vector<double>& times,
                                            const std::vector<double>& vs, double target,
                                            double band_pct) {
  const double band = band_pct / 100.0 * std::abs(target);
  for (std::size_t i = 0; i < times.size(); ++i) {
    bool ok = true;
    for (std::size_t j = i; j < vs.size(); ++j) {
      if (std::abs(vs[j] - target) > band) {
        ok = false;
        break;
      }
    }
    if (ok) return times[i];
  }
  return std::nullopt;
}

std::vector<RunRow> synthetic_rows(double period, int n, auto v_of) {
  std::vector<RunRow> rows;
  for (int k = 1; k <= n; ++k) {
    RunRow r;
    r.time_s = k * period;
    r.u_cmd_deg = 10.0 + (k % 5);
    r.theta_deg = 9.0 + (k % 5);
    r.v_kmh = v_of(k);
    r.v_target_kmh = 5.0;
    r.step_compute_ms = 0.5 + 0.01 * (k % 3);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config file parsing basics") {
  const ConfigFile f = ConfigFile::parse_string(
      "# leading comment\n"
      "[alpha]\n"
      "key = 1.5\n"
      "other =  spaced value \n"
      "flag = true\n"
      "count = 42\n"
      "; another comment style\n"
      "[beta]\n"
      "key = first\n"
      "key = second\n");
  CHECK(f.has("alpha", "key"));
  CHECK_FALSE(f.has("alpha", "missing"));
  CHECK(f.get_double("alpha", "key", 0.0) == 1.5);
  CHECK(f.get_string("alpha", "other", "") == "spaced value");
  CHECK(f.get_bool("alpha", "flag", false));
  CHECK(f.get_int("alpha", "count", 0) == 42);
  CHECK(f.get_string("beta", "key", "") == "second");  // later duplicate wins
  CHECK(f.get_double("beta", "absent", 7.5) == 7.5);
  CHECK(f.sections().size() == 2);
}

TEST_CASE("config file rejects malformed input") {
  CHECK_THROWS_WITH_AS(ConfigFile::parse_string("[s]\nno_equals_here\n"),
                       doctest::Contains("key = value"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ConfigFile::parse_string("orphan = 1\n"),
                       doctest::Contains("before any"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ConfigFile::parse_string("[unterminated\nkey = 1\n"),
                       doctest::Contains("section header"), std::runtime_error);
  CHECK_THROWS_AS(ConfigFile::parse_file("does_not_exist.cfg"), std::runtime_error);
  const ConfigFile f = ConfigFile::parse_string("[s]\nk = not_a_number\n");
  CHECK_THROWS_AS(f.get_double("s", "k", 0.0), std::runtime_error);
  CHECK_THROWS_AS(f.get_int("s", "k", 0), std::runtime_error);
}

TEST_CASE("experiment config defaults survive an empty file") {
  const ExperimentConfig defaults;
  const ExperimentConfig c = ddc::experiment_config_from(ConfigFile::parse_string(""));
  CHECK(c.controller == defaults.controller);
  CHECK(c.target_kmh == defaults.target_kmh);
  CHECK(c.collect_target_kmh == defaults.collect_target_kmh);
  CHECK(c.duration_s == defaults.duration_s);
  CHECK(c.seed == defaults.seed);
  CHECK(c.plant.tau_act_s == defaults.plant.tau_act_s);
  CHECK(c.plant.sigma_v_kmh == defaults.plant.sigma_v_kmh);
  CHECK(c.mpc.alpha == defaults.mpc.alpha);
  CHECK(c.mpc.batch_count == defaults.mpc.batch_count);
  CHECK(c.pid1.kp == defaults.pid1.kp);
  CHECK(c.pid2.t_delay_s == defaults.pid2.t_delay_s);
  CHECK(c.model.hidden_sizes == defaults.model.hidden_sizes);
  CHECK(c.train.epochs == defaults.train.epochs);
  CHECK(c.train.seed == defaults.seed);  // falls back to the experiment seed
  CHECK(c.trajectory_path == defaults.trajectory_path);
  CHECK(c.plot_path == defaults.plot_path);
}

TEST_CASE("experiment config reads every section") {
  const ExperimentConfig c = ddc::experiment_config_from(ConfigFile::parse_string(
      "[experiment]\n"
      "controller = pid2\n"
      "target_kmh = 10\n"
      "collect_target_kmh = 8\n"
      "duration_s = 30\n"
      "seed = 9\n"
      "[plant]\n"
      "tau_act_s = 0.5\n"
      "theta_dead_deg = 4\n"
      "theta_max_deg = 45\n"
      "drive_gain = 2\n"
      "drag = 0.2\n"
      "rolling = 0.25\n"
      "sigma_v_kmh = 0\n"
      "command_delay_steps = 2\n"
      "[controller]\n"
      "alpha = 10\n"
      "stage1_step_deg = 2\n"
      "stage2_step_deg = 0.25\n"
      "batch_count = 4\n"
      "stage1_iters = 5\n"
      "stage2_iters = 6\n"
      "noise_half_range_deg = 3\n"
      "u_min_deg = 0\n"
      "u_max_deg = 45\n"
      "[pid1]\n"
      "kp = 1.5\n"
      "ki = 0.1\n"
      "kd = 0.05\n"
      "[pid2]\n"
      "kp = 2\n"
      "kd = 0.2\n"
      "t_delay_s = 0.8\n"
      "[random]\n"
      "increment_min_deg = -0.5\n"
      "increment_max_deg = 1.5\n"
      "u_min_deg = 0\n"
      "u_max_deg = 45\n"
      "[model]\n"
      "horizon = 10\n"
      "period_s = 0.1\n"
      "u_min_deg = 0\n"
      "u_max_deg = 45\n"
      "hidden_sizes = 64, 32 16\n"
      "[train]\n"
      "epochs = 20\n"
      "batch_size = 16\n"
      "learning_rate = 0.01\n"
      "seed = 77\n"
      "[paths]\n"
      "trajectory = a.csv\n"
      "model = b.ddcn\n"
      "log = c.csv\n"
      "summary = d.txt\n"
      "plot = e.svg\n"));
  CHECK(c.controller == "pid2");
  CHECK(c.target_kmh == 10.0);
  CHECK(c.collect_target_kmh == 8.0);
  CHECK(c.duration_s == 30.0);
  CHECK(c.seed == 9);
  CHECK(c.plant.tau_act_s == 0.5);
  CHECK(c.plant.theta_dead_deg == 4.0);
  CHECK(c.plant.theta_max_deg == 45.0);
  CHECK(c.plant.drive_gain == 2.0);
  CHECK(c.plant.drag == 0.2);
  CHECK(c.plant.rolling == 0.25);
  CHECK(c.plant.sigma_v_kmh == 0.0);
  CHECK(c.plant.command_delay_steps == 2);
  CHECK(c.mpc.alpha == 10.0);
  CHECK(c.mpc.stage1_step_deg == 2.0);
  CHECK(c.mpc.stage2_step_deg == 0.25);
  CHECK(c.mpc.batch_count == 4);
  CHECK(c.mpc.stage1_iters == 5);
  CHECK(c.mpc.stage2_iters == 6);
  CHECK(c.mpc.noise_half_range_deg == 3.0);
  CHECK(c.mpc.u_max_deg == 45.0);
  CHECK(c.pid1.kp == 1.5);
  CHECK(c.pid1.ki == 0.1);
  CHECK(c.pid1.kd == 0.05);
  CHECK(c.pid2.kp == 2.0);
  CHECK(c.pid2.kd == 0.2);
  CHECK(c.pid2.t_delay_s == 0.8);
  CHECK(c.random_policy.increment_min_deg == -0.5);
  CHECK(c.random_policy.increment_max_deg == 1.5);
  CHECK(c.random_policy.u_max_deg == 45.0);
  CHECK(c.model.horizon == 10);
  CHECK(c.model.period_s == 0.1);
  CHECK(c.model.u_max_deg == 45.0);
  CHECK(c.model.hidden_sizes == std::vector<int>{64, 32, 16});
  CHECK(c.train.epochs == 20);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.learning_rate == 0.01);
  CHECK(c.train.seed == 77);
  CHECK(c.trajectory_path == "a.csv");
  CHECK(c.model_path == "b.ddcn");
  CHECK(c.log_path == "c.csv");
  CHECK(c.summary_path == "d.txt");
  CHECK(c.plot_path == "e.svg");
}

TEST_CASE("experiment config rejects a bad hidden size list") {
  CHECK_THROWS_WITH_AS(ddc::experiment_config_from(ConfigFile::parse_string(
                           "[model]\nhidden_sizes = 64 banana\n")),
                       doctest::Contains("integer list"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ddc::experiment_config_from(ConfigFile::parse_string(
                           "[model]\nhidden_sizes =\n")),
                       doctest::Contains("empty list"), std::runtime_error);
}

TEST_CASE("shipped default config mirrors the built-in defaults") {
  const ExperimentConfig defaults;
  const ExperimentConfig c =
      ddc::load_experiment_config(std::string(DDCN_SOURCE_DIR) + "/configs/default.cfg");
  CHECK(c.controller == defaults.controller);
  CHECK(c.target_kmh == defaults.target_kmh);
  CHECK(c.collect_target_kmh == defaults.collect_target_kmh);
  CHECK(c.duration_s == defaults.duration_s);
  CHECK(c.seed == defaults.seed);
  CHECK(c.plant.tau_act_s == defaults.plant.tau_act_s);
  CHECK(c.plant.theta_dead_deg == defaults.plant.theta_dead_deg);
  CHECK(c.plant.theta_max_deg == defaults.plant.theta_max_deg);
  CHECK(c.plant.drive_gain == defaults.plant.drive_gain);
  CHECK(c.plant.drag == defaults.plant.drag);
  CHECK(c.plant.rolling == defaults.plant.rolling);
  CHECK(c.plant.sigma_v_kmh == defaults.plant.sigma_v_kmh);
  CHECK(c.plant.command_delay_steps == defaults.plant.command_delay_steps);
  CHECK(c.mpc.alpha == defaults.mpc.alpha);
  CHECK(c.mpc.stage1_step_deg == defaults.mpc.stage1_step_deg);
  CHECK(c.mpc.stage2_step_deg == defaults.mpc.stage2_step_deg);
  CHECK(c.mpc.batch_count == defaults.mpc.batch_count);
  CHECK(c.mpc.stage1_iters == defaults.mpc.stage1_iters);
  CHECK(c.mpc.stage2_iters == defaults.mpc.stage2_iters);
  CHECK(c.mpc.noise_half_range_deg == defaults.mpc.noise_half_range_deg);
  CHECK(c.pid1.kp == defaults.pid1.kp);
  CHECK(c.pid1.ki == defaults.pid1.ki);
  CHECK(c.pid1.kd == defaults.pid1.kd);
  CHECK(c.pid2.kp == defaults.pid2.kp);
  CHECK(c.pid2.kd == defaults.pid2.kd);
  CHECK(c.pid2.t_delay_s == defaults.pid2.t_delay_s);
  CHECK(c.random_policy.increment_min_deg == defaults.random_policy.increment_min_deg);
  CHECK(c.random_policy.increment_max_deg == defaults.random_policy.increment_max_deg);
  CHECK(c.model.horizon == defaults.model.horizon);
  CHECK(c.model.period_s == defaults.model.period_s);
  CHECK(c.model.hidden_sizes == defaults.model.hidden_sizes);
  CHECK(c.train.epochs == defaults.train.epochs);
  CHECK(c.train.batch_size == defaults.train.batch_size);
  CHECK(c.train.learning_rate == defaults.train.learning_rate);
}

TEST_CASE("environment overrides") {
  unsetenv("DDCN_SEED");
  unsetenv("DDCN_OUT_DIR");

  ExperimentConfig c;
  setenv("DDCN_SEED", "42", 1);
  ddc::apply_env_overrides(c);
  CHECK(c.seed == 42);
  CHECK(c.train.seed == 42);

  setenv("DDCN_SEED", "banana", 1);
  CHECK_THROWS_WITH_AS(ddc::apply_env_overrides(c), doctest::Contains("DDCN_SEED"),
                       std::runtime_error);
  unsetenv("DDCN_SEED");

  c = ExperimentConfig{};
  c.model_path = "/abs/model.ddcn";
  c.summary_path = "";
  setenv("DDCN_OUT_DIR", "out/dir", 1);
  ddc::apply_env_overrides(c);
  CHECK(c.trajectory_path == "out/dir/trajectory.csv");
  CHECK(c.log_path == "out/dir/run.csv");
  CHECK(c.plot_path == "out/dir/run.svg");
  CHECK(c.model_path == "/abs/model.ddcn");  // absolute paths stay put
  CHECK(c.summary_path.empty());             // empty means "do not write"
  unsetenv("DDCN_OUT_DIR");

  c = ExperimentConfig{};
  ddc::apply_env_overrides(c);
  CHECK(c.seed == 1);
  CHECK(c.trajectory_path == "trajectory.csv");
}

TEST_CASE("primary band is 10 percent from 7.5 km/h upwards") {
  CHECK(ddc::primary_band_percent(5.0) == 20.0);
  CHECK(ddc::primary_band_percent(7.49) == 20.0);
  CHECK(ddc::primary_band_percent(7.5) == 10.0);
  CHECK(ddc::primary_band_percent(10.0) == 10.0);
}

TEST_CASE("t_conv finds the start of the trailing in-band run") {
  const std::vector<double> times = {1.0, 2.0, 3.0, 4.0};
  // 20% of 5 km/h: the band is +-1
  CHECK(ddc::t_conv(times, std::vector<double>{10.0, 5.0, 5.0, 5.0}, 5.0, 20.0) == 2.0);
  CHECK(ddc::t_conv(times, std::vector<double>{5.0, 5.0, 5.0, 5.0}, 5.0, 20.0) == 1.0);
  CHECK_FALSE(ddc::t_conv(times, std::vector<double>{5.0, 5.0, 5.0, 10.0}, 5.0, 20.0));
  // the band edge itself counts as inside
  CHECK(ddc::t_conv(times, std::vector<double>{10.0, 4.0, 6.0, 4.0}, 5.0, 20.0) == 2.0);
  // a single excursion restarts the run
  CHECK(ddc::t_conv(times, std::vector<double>{5.0, 6.5, 5.0, 5.0}, 5.0, 20.0) == 3.0);
}

TEST_CASE("t_conv input validation") {
  const std::vector<double> times = {1.0, 2.0};
  const std::vector<double> vs = {5.0, 5.0};
  CHECK_THROWS_AS(ddc::t_conv({}, {}, 5.0, 20.0), std::invalid_argument);
  CHECK_THROWS_AS(ddc::t_conv(times, std::vector<double>{5.0}, 5.0, 20.0), std::invalid_argument);
  CHECK_THROWS_AS(ddc::t_conv(times, vs, 0.0, 20.0), std::invalid_argument);
  CHECK_THROWS_AS(ddc::t_conv(times, vs, 5.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ddc::t_conv(times, vs, 5.0, -5.0), std::invalid_argument);
}

TEST_CASE("t_conv agrees with a brute-force suffix scan") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len_d(1, 50);
  std::uniform_real_distribution<double> v_d(3.0, 7.0);
  std::uniform_real_distribution<double> band_d(5.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len_d(rng);
    std::vector<double> times(n);
    std::vector<double> vs(n);
    for (int i = 0; i < n; ++i) {
      times[i] = 0.2 * (i + 1);
      vs[i] = v_d(rng);
    }
    const double band = band_d(rng);
    const auto got = ddc::t_conv(times, vs, 5.0, band);
    const auto want = t_conv_by_suffix_scan(times, vs, 5.0, band);
    CHECK(got == want);
  }
}

TEST_CASE("summarize_run computes the tail error and timing stats") {
  // 60 s at 0.2 s: constant 5 km/h except one 10 km/h spike at t = 57
  auto rows = synthetic_rows(0.2, 300, [](int k) { return k == 285 ? 10.0 : 5.0; });
  const RunSummary s = ddc::summarize_run(rows, "pid1", 5.0, 60.0, 3);
  CHECK(s.controller == "pid1");
  CHECK(s.target_kmh == 5.0);
  CHECK(s.seed == 3);
  CHECK(s.band_primary_pct == 20.0);
  // the spike breaks the trailing run; it resumes at the next sample
  REQUIRE(s.t_conv_primary_s.has_value());
  CHECK(*s.t_conv_primary_s == doctest::Approx(57.2).epsilon(1e-12));
  // final error: 24 exact samples and one 5 km/h miss over the last 25
  CHECK(s.final_error_kmh == doctest::Approx(5.0 / 25.0).epsilon(1e-12));
  // step_compute_ms cycles 0.51, 0.52, 0.50 per the generator
  CHECK(s.max_step_ms == doctest::Approx(0.52).epsilon(1e-12));
  CHECK(s.mean_step_ms == doctest::Approx(0.51).epsilon(1e-3));
  CHECK_THROWS_AS(ddc::summarize_run({}, "pid1", 5.0, 60.0, 1), std::invalid_argument);
}

TEST_CASE("run log csv round trips") {
  const fs::path dir = fresh_dir("runlog");
  auto rows = synthetic_rows(0.2, 40, [](int k) { return 5.0 + 1.0 / (k + 2.0); });
  rows[7].loss_if_proposed = 0.12345678901234567;
  const std::string path = (dir / "run.csv").string();
  ddc::write_run_log_csv(rows, path);
  const auto back = ddc::load_run_log_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].time_s == doctest::Approx(rows[i].time_s).epsilon(1e-12));
    CHECK(back[i].u_cmd_deg == rows[i].u_cmd_deg);
    CHECK(back[i].theta_deg == rows[i].theta_deg);
    CHECK(back[i].v_kmh == rows[i].v_kmh);
    CHECK(back[i].v_target_kmh == rows[i].v_target_kmh);
    CHECK(back[i].loss_if_proposed == rows[i].loss_if_proposed);
  }
  // load -> write is stable byte for byte
  const std::string path2 = (dir / "run2.csv").string();
  ddc::write_run_log_csv(back, path2);
  CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("run log loader validates the format") {
  const fs::path dir = fresh_dir("runlog_bad");
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return (dir / name).string();
  };
  CHECK_THROWS_WITH_AS(ddc::load_run_log_csv(write("h.csv", "wrong,header\n1,2\n")),
                       doctest::Contains("header"), std::runtime_error);
  const std::string header =
      "time_s,u_cmd_deg,theta_deg,v_kmh,v_target_kmh,loss_if_proposed,step_compute_ms";
  CHECK_THROWS_WITH_AS(ddc::load_run_log_csv(write("c.csv", header + "\n1,2,3\n")),
                       doctest::Contains("columns"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      ddc::load_run_log_csv(write("n.csv", header + "\n1,2,3,4,x,6,7\n")),
      doctest::Contains("number"), std::runtime_error);
  CHECK_THROWS_AS(ddc::load_run_log_csv((dir / "absent.csv").string()), std::runtime_error);
}

TEST_CASE("summary files round trip including unconverged runs") {
  const fs::path dir = fresh_dir("summary");
  RunSummary s;
  s.controller = "pid2";
  s.target_kmh = 10.0;
  s.duration_s = 60.0;
  s.seed = 17;
  s.band_primary_pct = 10.0;
  s.t_conv_primary_s = std::nullopt;
  s.t_conv_20_s = 12.34;
  s.final_error_kmh = 0.456;
  s.mean_step_ms = 1.25;
  s.max_step_ms = 3.5;
  const std::string path = (dir / "summary.txt").string();
  ddc::write_summary(s, path);

  const RunSummary back = ddc::load_summary(path);
  CHECK(back.controller == s.controller);
  CHECK(back.target_kmh == s.target_kmh);
  CHECK(back.duration_s == s.duration_s);
  CHECK(back.seed == s.seed);
  CHECK(back.band_primary_pct == s.band_primary_pct);
  CHECK_FALSE(back.t_conv_primary_s.has_value());
  CHECK(back.t_conv_20_s == s.t_conv_20_s);
  CHECK(back.final_error_kmh == s.final_error_kmh);
  CHECK(back.mean_step_ms == s.mean_step_ms);
  CHECK(back.max_step_ms == s.max_step_ms);

  std::ofstream other(dir / "other.txt");
  other << "[something]\nelse = 1\n";
  other.close();
  CHECK_THROWS_WITH_AS(ddc::load_summary((dir / "other.txt").string()),
                       doctest::Contains("not a run summary"), std::runtime_error);
}

TEST_CASE("compare_summaries reports the convergence ordering") {
  const auto make = [](const std::string& name, std::optional<double> conv) {
    RunSummary s;
    s.controller = name;
    s.target_kmh = 5.0;
    s.duration_s = 60.0;
    s.band_primary_pct = 20.0;
    s.t_conv_primary_s = conv;
    s.t_conv_20_s = conv;
    return s;
  };

  const std::string good =
      ddc::compare_summaries({make("proposed", 1.0), make("pid2", 2.0), make("pid1", 3.0)});
  CHECK(good.find("proposed") != std::string::npos);
  CHECK(good.find("pid2") != std::string::npos);
  CHECK(good.find("ordering proposed < pid2 < pid1: holds") != std::string::npos);

  const std::string bad =
      ddc::compare_summaries({make("proposed", 3.0), make("pid2", 2.0), make("pid1", 2.5)});
  CHECK(bad.find("VIOLATED") != std::string::npos);
  CHECK(bad.find("proposed < pid2") != std::string::npos);
  CHECK(bad.find("pid2 < pid1") != std::string::npos);

  // a run that never converges counts as infinitely slow
  const std::string never =
      ddc::compare_summaries({make("proposed", std::nullopt), make("pid2", 2.0)});
  CHECK(never.find("never") != std::string::npos);
  CHECK(never.find("VIOLATED") != std::string::npos);

  // no ordering line without at least two of the named controllers
  const std::string unnamed = ddc::compare_summaries({make("random", 1.0), make("other", 2.0)});
  CHECK(unnamed.find("ordering") == std::string::npos);

  CHECK_THROWS_AS(ddc::compare_summaries({make("pid1", 1.0)}), std::invalid_argument);
  auto off_target = make("pid2", 2.0);
  off_target.target_kmh = 10.0;
  CHECK_THROWS_WITH_AS(ddc::compare_summaries({make("pid1", 1.0), off_target}),
                       doctest::Contains("different targets"), std::invalid_argument);
}

TEST_CASE("collect_data logs one row per control period") {
  const fs::path dir = fresh_dir("collect");
  ExperimentConfig c;
  c.trajectory_path = (dir / "traj.csv").string();
  const Trajectory traj = ddc::collect_data(c);
  REQUIRE(traj.rows.size() == 300);
  CHECK(traj.rows.front().time_s == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(traj.rows.back().time_s == doctest::Approx(60.0).epsilon(1e-12));
  for (const auto& r : traj.rows) {
    CHECK(r.u_deg >= 0.0);
    CHECK(r.u_deg <= 50.0);
    CHECK(r.v_kmh >= 0.0);
  }

  // the file holds exactly what was returned
  const Trajectory loaded = ddc::load_trajectory_csv(c.trajectory_path);
  REQUIRE(loaded.rows.size() == traj.rows.size());
  for (std::size_t i = 0; i < traj.rows.size(); ++i) {
    CHECK(loaded.rows[i].u_deg == traj.rows[i].u_deg);
    CHECK(loaded.rows[i].v_kmh == traj.rows[i].v_kmh);
  }

  // deterministic per seed
  c.trajectory_path.clear();
  const Trajectory again = ddc::collect_data(c);
  REQUIRE(again.rows.size() == traj.rows.size());
  for (std::size_t i = 0; i < traj.rows.size(); ++i) {
    CHECK(again.rows[i].u_deg == traj.rows[i].u_deg);
    CHECK(again.rows[i].v_kmh == traj.rows[i].v_kmh);
  }

  ExperimentConfig too_short;
  too_short.duration_s = 0.05;
  too_short.trajectory_path.clear();
  CHECK_THROWS_AS(ddc::collect_data(too_short), std::invalid_argument);
}

TEST_CASE("run_experiment drives a pid controller against the plant") {
  const fs::path dir = fresh_dir("run_pid1");
  ExperimentConfig c;
  c.controller = "pid1";
  c.duration_s = 10.0;
  c.log_path = (dir / "run.csv").string();
  c.summary_path = (dir / "summary.txt").string();
  const RunResult result = ddc::run_experiment(c);
  REQUIRE(result.rows.size() == 50);
  CHECK(result.rows.front().time_s == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(result.rows.back().time_s == doctest::Approx(10.0).epsilon(1e-12));
  bool theta_lags = false;
  for (const auto& r : result.rows) {
    CHECK(r.loss_if_proposed == 0.0);  // only the proposed controller reports a loss
    CHECK(r.v_target_kmh == 5.0);
    CHECK(r.u_cmd_deg >= 0.0);
    CHECK(r.u_cmd_deg <= 50.0);
    CHECK(r.step_compute_ms >= 0.0);
    if (std::abs(r.theta_deg - r.u_cmd_deg) > 0.5) theta_lags = true;
  }
  CHECK(theta_lags);  // the actuator cannot follow the command instantly

  const auto logged = ddc::load_run_log_csv(c.log_path);
  CHECK(logged.size() == result.rows.size());
  const RunSummary s = ddc::load_summary(c.summary_path);
  CHECK(s.controller == "pid1");
  CHECK(s.duration_s == 10.0);

  ExperimentConfig bad;
  bad.controller = "fuzzy";
  CHECK_THROWS_AS(ddc::run_experiment(bad), std::invalid_argument);
}

TEST_CASE("run_experiment supports the random baseline") {
  ExperimentConfig c;
  c.controller = "random";
  c.duration_s = 5.0;
  c.log_path.clear();
  c.summary_path.clear();
  const RunResult result = ddc::run_experiment(c);
  CHECK(result.rows.size() == 25);
  CHECK(result.summary.controller == "random");
}

TEST_CASE("run_experiment closes the loop with the trained model") {
  const fs::path dir = fresh_dir("run_proposed");
  ExperimentConfig c;
  c.duration_s = 30.0;
  c.seed = 5;
  c.trajectory_path = (dir / "traj.csv").string();
  c.model_path = (dir / "model.ddcn").string();
  ddc::collect_data(c);
  c.train.epochs = 2;  // only the wiring is under test here
  ddc::train_from_config(c);

  c.controller = "proposed";
  c.duration_s = 4.0;
  c.log_path = (dir / "run.csv").string();
  c.summary_path.clear();
  const RunResult result = ddc::run_experiment(c);
  REQUIRE(result.rows.size() == 20);
  bool any_loss = false;
  for (const auto& r : result.rows) {
    CHECK(r.u_cmd_deg >= 0.0);
    CHECK(r.u_cmd_deg <= 50.0);
    CHECK(r.loss_if_proposed >= 0.0);
    if (r.loss_if_proposed > 0.0) any_loss = true;
  }
  CHECK(any_loss);
  CHECK(fs::exists(c.log_path));
}

TEST_CASE("emit_plot renders a two-panel svg") {
  const fs::path dir = fresh_dir("plot");
  auto rows = synthetic_rows(0.2, 50, [](int k) { return 5.0 - 4.0 / k; });
  const std::string log_path = (dir / "run.csv").string();
  ddc::write_run_log_csv(rows, log_path);

  const std::string svg_path = (dir / "run.svg").string();
  ddc::emit_plot(log_path, svg_path);
  const std::string svg = read_file(svg_path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);

  // rendering is deterministic
  const std::string svg_path2 = (dir / "run2.svg").string();
  ddc::emit_plot(log_path, svg_path2);
  CHECK(svg == read_file(svg_path2));

  // a bad log must fail before the output file is created
  const std::string bad_log = (dir / "bad.csv").string();
  std::ofstream bad(bad_log);
  bad << "wrong,header\n";
  bad.close();
  const std::string bad_svg = (dir / "bad.svg").string();
  CHECK_THROWS_AS(ddc::emit_plot(bad_log, bad_svg), std::runtime_error);
  CHECK_FALSE(fs::exists(bad_svg));

  CHECK_THROWS_AS(ddc::render_run_svg({}), std::invalid_argument);
}

}  // TEST_SUITE
