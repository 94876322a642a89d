#include "ddc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ddc {

void PlantParams::validate() const {
  if (tau_act_s <= 0.0) throw std::invalid_argument("plant: actuator time constant must be positive");
  if (theta_dead_deg < 0.0 || theta_dead_deg >= theta_max_deg) {
    throw std::invalid_argument("plant: need 0 <= deadzone < max pedal angle");
  }
  if (drive_gain < 0.0 || drag < 0.0 || rolling < 0.0) {
    throw std::invalid_argument("plant: gains and resistances must be non-negative");
  }
  if (sigma_v_kmh < 0.0) throw std::invalid_argument("plant: noise level must be non-negative");
  if (command_delay_steps < 0) throw std::invalid_argument("plant: command delay must be non-negative");
}

Plant::Plant(const PlantParams& params, std::uint64_t seed) : params_(params), rng_(seed) {
  params_.validate();
  pending_.assign(params_.command_delay_steps, 0.0);
}

Observation Plant::step(double u_cmd_deg, double dt_s) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("plant: step needs dt > 0");
  if (!(u_cmd_deg >= 0.0 && u_cmd_deg <= params_.theta_max_deg)) {
    throw std::invalid_argument("plant: pedal command " + std::to_string(u_cmd_deg) +
                                " outside [0, " + std::to_string(params_.theta_max_deg) + "]");
  }

  pending_.push_back(u_cmd_deg);
  const double u_eff = pending_.front();
  pending_.pop_front();

  const double prev_theta = theta_;
  const double prev_v = v_;

  theta_ = u_eff + (theta_ - u_eff) * std::exp(-dt_s / params_.tau_act_s);
  const double span = params_.theta_max_deg - params_.theta_dead_deg;
  const double throttle = std::clamp((theta_ - params_.theta_dead_deg) / span, 0.0, 1.0);
  const double accel = params_.drive_gain * throttle - params_.drag * v_ - params_.rolling;
  double noise = 0.0;
  if (params_.sigma_v_kmh > 0.0) {
    noise = std::normal_distribution<double>(0.0, params_.sigma_v_kmh)(rng_);
  }
  v_ = std::max(0.0, v_ + accel * dt_s + noise);

  last_.v_kmh = v_;
  last_.a_kmh_per_s = (v_ - prev_v) / dt_s;
  last_.pedal_deg = theta_;
  last_.pedal_rate_deg_per_s = (theta_ - prev_theta) / dt_s;
  return last_;
}

}  // namespace ddc
