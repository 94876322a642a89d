#include "ddc/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace ddc {
namespace {

void check_range(double period_s, double u_min, double u_max) {
  if (!(period_s > 0.0)) throw std::invalid_argument("controller period must be positive");
  if (!(u_min < u_max)) throw std::invalid_argument("need u_min < u_max");
}

}  // namespace

Pid1::Pid1(const Pid1Gains& gains, double period_s, double u_min_deg, double u_max_deg)
    : gains_(gains), period_(period_s), u_min_(u_min_deg), u_max_(u_max_deg) {
  check_range(period_s, u_min_deg, u_max_deg);
}

void Pid1::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  first_ = true;
}

double Pid1::step(double v_kmh, double v_target_kmh) {
  const double e = v_target_kmh - v_kmh;
  if (first_) {
    prev_error_ = e;  // no derivative kick on the first sample
    first_ = false;
  }
  const double derivative = (e - prev_error_) / period_;
  const double grown_integral = integral_ + e * period_;
  double u = gains_.kp * e + gains_.ki * grown_integral + gains_.kd * derivative;
  if (u > u_max_ || u < u_min_) {
    u = gains_.kp * e + gains_.ki * integral_ + gains_.kd * derivative;
  } else {
    integral_ = grown_integral;
  }
  prev_error_ = e;
  return std::clamp(u, u_min_, u_max_);
}

Pid2::Pid2(const Pid2Gains& gains, double period_s, double u_min_deg, double u_max_deg)
    : gains_(gains), period_(period_s), u_min_(u_min_deg), u_max_(u_max_deg) {
  check_range(period_s, u_min_deg, u_max_deg);
  if (!(gains_.t_delay_s > 0.0)) throw std::invalid_argument("pid2: t_delay must be positive");
}

void Pid2::reset() {
  u_ = 0.0;
  prev_v_ = 0.0;
  prev_e_a_ = 0.0;
  first_ = true;
}

double Pid2::step(double v_kmh, double v_target_kmh) {
  const double a_target = (v_target_kmh - v_kmh) / gains_.t_delay_s;
  if (first_) prev_v_ = v_kmh;
  const double a = (v_kmh - prev_v_) / period_;
  const double e_a = a_target - a;
  if (first_) {
    prev_e_a_ = e_a;
    first_ = false;
  }
  const double e_a_dot = (e_a - prev_e_a_) / period_;
  u_ = std::clamp(u_ + (gains_.kp * e_a + gains_.kd * e_a_dot) * period_, u_min_, u_max_);
  prev_v_ = v_kmh;
  prev_e_a_ = e_a;
  return u_;
}

double random_policy_apply(double u_deg, double v_kmh, double v_target_kmh, double draw_deg,
                           double u_min_deg, double u_max_deg) {
  const double next = v_kmh <= v_target_kmh ? u_deg + draw_deg : u_deg - draw_deg;
  return std::clamp(next, u_min_deg, u_max_deg);
}

RandomPolicy::RandomPolicy(const RandomPolicyConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed) {
  check_range(1.0, config.u_min_deg, config.u_max_deg);
  if (!(config.increment_min_deg <= config.increment_max_deg)) {
    throw std::invalid_argument("random policy: increment range is inverted");
  }
}

void RandomPolicy::reset() { u_ = 0.0; }

double RandomPolicy::step(double v_kmh, double v_target_kmh) {
  const double draw =
      std::uniform_real_distribution<double>(config_.increment_min_deg, config_.increment_max_deg)(rng_);
  u_ = random_policy_apply(u_, v_kmh, v_target_kmh, draw, config_.u_min_deg, config_.u_max_deg);
  return u_;
}

}  // namespace ddc
