#pragma once

#include <cstdint>
#include <random>

namespace ddc {

struct Pid1Gains {
  double kp = 2.5;
  double ki = 0.25;
  double kd = 0.0;
};

// Velocity-error PID with conditional integration: the integral only
// accumulates while the raw output stays inside the pedal range.
class Pid1 {
 public:
  Pid1(const Pid1Gains& gains, double period_s, double u_min_deg, double u_max_deg);

  double step(double v_kmh, double v_target_kmh);
  void reset();

 private:
  Pid1Gains gains_;
  double period_;
  double u_min_, u_max_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool first_ = true;
};

struct Pid2Gains {
  double kp = 1.2;
  double kd = 0.3;
  double t_delay_s = 2.0;  // horizon used to turn the velocity error into a target acceleration
};

// Acceleration-tracking PID: derives a target acceleration from the velocity
// error, estimates the actual acceleration by differencing, and integrates a
// PD correction into the pedal command. The integrated output is clamped to
// the pedal range, which is what keeps it from winding up.
class Pid2 {
 public:
  Pid2(const Pid2Gains& gains, double period_s, double u_min_deg, double u_max_deg);

  double step(double v_kmh, double v_target_kmh);
  void reset();

 private:
  Pid2Gains gains_;
  double period_;
  double u_min_, u_max_;
  double u_ = 0.0;
  double prev_v_ = 0.0;
  double prev_e_a_ = 0.0;
  bool first_ = true;
};

struct RandomPolicyConfig {
  double increment_min_deg = -1.0;
  double increment_max_deg = 2.0;
  double u_min_deg = 0.0;
  double u_max_deg = 50.0;
};

// One update of the random exploration policy with the uniform draw already
// made, so tests can drive it with chosen values.
double random_policy_apply(double u_deg, double v_kmh, double v_target_kmh, double draw_deg,
                           double u_min_deg, double u_max_deg);

// Drifts the pedal up while below the target velocity and down while above,
// by a uniform random increment each tick. Used to collect training data.
class RandomPolicy {
 public:
  RandomPolicy(const RandomPolicyConfig& config, std::uint64_t seed);

  double step(double v_kmh, double v_target_kmh);
  double current_u_deg() const { return u_; }
  void reset();

 private:
  RandomPolicyConfig config_;
  std::mt19937_64 rng_;
  double u_ = 0.0;
};

}  // namespace ddc
