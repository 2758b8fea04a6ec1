// One-dimensional point mass pushed toward the origin. Deterministic
// transitions; only the start state is random. Used for smoke training.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "metaland/lander_env.hpp"

namespace metaland {

struct PointMassConfig {
  double x0_range = 10.0;  // x(0) ~ U(-x0_range, x0_range), v(0) = 0
  double max_accel = 1.0;
  double dt = 0.2;
  int steps = 60;
  double success_radius = 0.5;
  double eta = 10.0;  // terminal bonus inside success_radius
};

class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassConfig config = {}) : config_(config) {}

  int obs_dim() const { return 2; }
  int act_dim() const { return 1; }
  double position() const { return x_; }
  double velocity() const { return v_; }

  Eigen::VectorXd reset(Rng& rng) {
    x_ = rng.uniform(-config_.x0_range, config_.x0_range);
    v_ = 0.0;
    steps_ = 0;
    fuel_ = 0.0;
    summary_ = EpisodeSummary{};
    return observe();
  }

  StepOutcome step(std::span<const double> action, Rng&) {
    const double a = config_.max_accel * std::clamp(action[0], -1.0, 1.0);
    x_ += v_ * config_.dt + 0.5 * a * config_.dt * config_.dt;
    v_ += a * config_.dt;
    fuel_ += std::abs(a) * config_.dt;
    ++steps_;
    StepOutcome out;
    out.r2 = -0.1 * std::abs(x_) - 0.01 * std::abs(a);
    out.done = steps_ >= config_.steps;
    if (out.done) {
      const bool success = std::abs(x_) < config_.success_radius;
      out.r1 = success ? config_.eta : 0.0;
      out.cause = success ? TerminationCause::LandedSuccess
                          : TerminationCause::LandedMiss;
      summary_.position_error = std::abs(x_);
      summary_.velocity_error = std::abs(v_);
      summary_.fuel = fuel_;
      summary_.steps = steps_;
      summary_.cause = out.cause;
    }
    out.reward = out.r1 + out.r2;
    out.observation = observe();
    return out;
  }

  const EpisodeSummary& summary() const { return summary_; }

 private:
  Eigen::VectorXd observe() const {
    Eigen::VectorXd o(2);
    o << x_, v_;
    return o;
  }

  PointMassConfig config_;
  double x_ = 0.0;
  double v_ = 0.0;
  double fuel_ = 0.0;
  int steps_ = 0;
  EpisodeSummary summary_;
};

}  // namespace metaland
