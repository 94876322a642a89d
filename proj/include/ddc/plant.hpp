#pragma once

#include <cstdint>
#include <deque>
#include <random>

namespace ddc {

// What a controller gets to see each tick.
struct Observation {
  double v_kmh = 0.0;
  double a_kmh_per_s = 0.0;
  double pedal_deg = 0.0;
  double pedal_rate_deg_per_s = 0.0;
};

struct PlantParams {
  double tau_act_s = 0.4;          // first-order pedal actuator time constant
  double theta_dead_deg = 5.0;     // no drive below this angle
  double theta_max_deg = 50.0;
  double drive_gain = 2.4;         // km/h per second at full throttle
  double drag = 0.18;              // 1/s, velocity-proportional resistance
  double rolling = 0.3;            // km/h per second, constant resistance
  double sigma_v_kmh = 0.05;       // per-step velocity noise
  int command_delay_steps = 1;

  void validate() const;
};

// Pedal actuator with lag, deadzone and command delay driving a one-state
// longitudinal vehicle. Velocity never goes negative.
class Plant {
 public:
  explicit Plant(const PlantParams& params, std::uint64_t seed);

  Observation step(double u_cmd_deg, double dt_s);
  // State after the most recent step; all zeros right after construction.
  const Observation& observe() const { return last_; }

  double velocity_kmh() const { return v_; }
  double pedal_deg() const { return theta_; }
  const PlantParams& params() const { return params_; }

 private:
  PlantParams params_;
  std::mt19937_64 rng_;
  double v_ = 0.0;
  double theta_ = 0.0;
  std::deque<double> pending_;
  Observation last_;
};

}  // namespace ddc
