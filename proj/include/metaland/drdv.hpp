// Energy-optimal terminal guidance (DR/DV) baseline with a numerically
// selected time-to-go.
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "metaland/lander_env.hpp"

namespace metaland {

struct DrdvConfig {
  // Gravity assumed by the law; the episode's true gravity when empty.
  std::optional<Vec3> gravity;
  // Two legs: first to a gate above the target, arriving with gate_velocity,
  // then a vertical leg to the target arriving with touchdown_velocity. The
  // second leg starts once the first leg's time-to-go drops below
  // gate_switch_tgo.
  bool use_gate = true;
  Vec3 gate_point{0.0, 0.0, 10.0};
  Vec3 gate_velocity{0.0, 0.0, -2.0};
  double gate_switch_tgo = 1.0;
  Vec3 touchdown_velocity{0.0, 0.0, -1.0};
  double hover_tgo = 0.5;  // below this the law only cancels gravity
  // t_go minimizes w * a_max^2 * t_go + 0.5 * integral |u|^2 over the arc,
  // with w = time_weight and a_max the thrust acceleration limit.
  double time_weight = 0.5;
  // Solve t_go once per leg and count it down instead of re-solving it
  // every step.
  bool fixed_horizon = false;
  double tgo_lo = 0.1;
  double tgo_hi = 5000.0;
  int grid_points = 60;
  int refine_iterations = 40;
};

// a = -6 r / t^2 - (4 v + 2 v_f) / t - g. With v_f = 0 this is the
// zero-miss / zero-velocity law.
inline Vec3 accel_command(const Vec3& r, const Vec3& v, const Vec3& g,
                          double t_go, const Vec3& v_f = Vec3::Zero()) {
  if (!(t_go > 0.0)) throw Error(ErrorCode::ConfigError, "t_go must be positive");
  return -6.0 * r / (t_go * t_go) - (4.0 * v + 2.0 * v_f) / t_go - g;
}

// Closed-form trajectory commanded by the law over a fixed horizon: the
// thrust acceleration is linear in time, u(s) = c + q s for s in [0, t_go].
struct PredictedArc {
  Vec3 c;
  Vec3 q;
  double t_go = 0.0;

  double energy() const {
    return c.squaredNorm() * t_go + c.dot(q) * t_go * t_go +
           q.squaredNorm() * t_go * t_go * t_go / 3.0;
  }
  // |u| is convex in s, so its peak sits at an end point.
  double peak_accel() const {
    return std::max(c.norm(), (c + q * t_go).norm());
  }
};

inline PredictedArc predict_arc(const Vec3& r, const Vec3& v, const Vec3& g,
                                double t_go, const Vec3& v_f = Vec3::Zero()) {
  const Vec3 dv = v_f - v;
  const Vec3 dr = -r - v * t_go;
  PredictedArc arc;
  arc.t_go = t_go;
  arc.q = (6.0 * dv * t_go - 12.0 * dr) / (t_go * t_go * t_go);
  arc.c = dv / t_go - arc.q * t_go / 2.0 - g;
  return arc;
}

struct TgoSolution {
  double t_go = 0.0;
  bool feasible = true;  // false: fallback 1.5 |r| / |v| was used
};

// Time-to-go minimizing the time-weighted control energy of the predicted
// arc, restricted to arcs whose peak thrust acceleration stays within
// `max_accel`. A log-spaced grid brackets the optimum and golden-section
// search refines it.
inline TgoSolution solve_tgo(const Vec3& r, const Vec3& v, const Vec3& g,
                             double max_accel, const Vec3& v_f = Vec3::Zero(),
                             const DrdvConfig& cfg = {}) {
  if (!(r.norm() > 0.0)) {
    throw Error(ErrorCode::ConfigError, "solve_tgo needs a nonzero position");
  }
  const double time_cost = cfg.time_weight * max_accel * max_accel;
  auto cost = [&](double t) {
    const PredictedArc arc = predict_arc(r, v, g, t, v_f);
    const double excess = arc.peak_accel() - max_accel;
    if (excess > 0.0) return std::numeric_limits<double>::infinity();
    return time_cost * t + 0.5 * arc.energy();
  };
  const int n = std::max(cfg.grid_points, 3);
  const double log_lo = std::log(cfg.tgo_lo);
  const double step = (std::log(cfg.tgo_hi) - log_lo) / (n - 1);
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double f = cost(std::exp(log_lo + step * i));
    if (f < best_cost) {
      best_cost = f;
      best = i;
    }
  }
  if (best < 0) {
    return {1.5 * r.norm() / std::max(v.norm(), 1e-6), false};
  }
  double a = log_lo + step * std::max(best - 1, 0);
  double b = log_lo + step * std::min(best + 1, n - 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = cost(std::exp(x1));
  double f2 = cost(std::exp(x2));
  for (int it = 0; it < cfg.refine_iterations; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = cost(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = cost(std::exp(x2));
    }
  }
  double t = std::exp(f1 <= f2 ? x1 : x2);
  if (std::min(f1, f2) > best_cost) t = std::exp(log_lo + step * best);
  return {t, true};
}

// Guidance loop state for one episode: the mass estimate is the wet mass at
// the first call and is never updated.
class DrdvController {
 public:
  explicit DrdvController(DrdvConfig config = {}) : config_(std::move(config)) {}

  const DrdvConfig& config() const { return config_; }
  double last_tgo() const { return last_tgo_; }
  bool last_feasible() const { return last_feasible_; }
  bool final_leg() const { return final_leg_; }

  void reset() {
    mass_estimate_.reset();
    final_leg_ = false;
    leg_tgo_.reset();
  }

  // Normalized action (thrust / t_max) for the env's current state.
  Vec3 action(const LanderEnv& env) {
    const LanderState& s = env.state();
    const EnvConfig& c = env.config();
    if (!mass_estimate_) mass_estimate_ = s.m;
    const Vec3 g = config_.gravity.value_or(env.body().g);
    const double max_accel = c.t_max / *mass_estimate_;
    if (!config_.use_gate) final_leg_ = true;
    if (!final_leg_) {
      const Vec3 r = s.r - config_.gate_point;
      const double t_go = leg_tgo(r, s, g, max_accel, config_.gate_velocity);
      if (t_go >= config_.gate_switch_tgo) {
        const Vec3 a = accel_command(r, s.v, g, t_go, config_.gate_velocity);
        return *mass_estimate_ * a / c.t_max;
      }
      final_leg_ = true;
      leg_tgo_.reset();
    }
    const double t_go = leg_tgo(s.r, s, g, max_accel, config_.touchdown_velocity);
    const Vec3 a = t_go < config_.hover_tgo
                       ? Vec3(-g)
                       : accel_command(s.r, s.v, g, t_go, config_.touchdown_velocity);
    return *mass_estimate_ * a / c.t_max;
  }

 private:
  // Re-solved every call, or solved once per leg and counted down.
  double leg_tgo(const Vec3& r, const LanderState& s, const Vec3& g,
                 double max_accel, const Vec3& v_f) {
    if (config_.fixed_horizon && leg_tgo_) {
      last_tgo_ = leg_tgo_->first - (s.t - leg_tgo_->second);
      return last_tgo_;
    }
    if (!(r.norm() > 0.0)) {
      last_tgo_ = 0.0;
      last_feasible_ = true;
    } else {
      const TgoSolution sol = solve_tgo(r, s.v, g, max_accel, v_f, config_);
      last_tgo_ = sol.t_go;
      last_feasible_ = sol.feasible;
    }
    leg_tgo_ = std::make_pair(last_tgo_, s.t);
    return last_tgo_;
  }

  DrdvConfig config_;
  std::optional<double> mass_estimate_;
  std::optional<std::pair<double, double>> leg_tgo_;  // (t_go, time solved)
  double last_tgo_ = 0.0;
  bool last_feasible_ = true;
  bool final_leg_ = false;
};

// Defaults per thrust model: the magnitude band flies the gated two-leg
// profile; pulsed thrusters aim straight at the target with a slow touchdown
// rate.
inline DrdvConfig drdv_defaults(const EnvConfig& env) {
  DrdvConfig d;
  d.touchdown_velocity = Vec3(0.0, 0.0, -0.5 * env.v_lim);
  if (env.thrust_mode == ThrustMode::Pulsed) {
    d.use_gate = false;
    d.touchdown_velocity = Vec3(0.0, 0.0, -0.25 * env.v_lim);
  }
  return d;
}

// Flies one episode under DR/DV from env.reset(rng).
inline EpisodeSummary run_drdv_episode(LanderEnv& env, Rng& rng,
                                       const DrdvConfig& config) {
  DrdvController ctl(config);
  env.reset(rng);
  while (!env.done()) {
    const Vec3 a = ctl.action(env);
    env.step(std::span<const double>(a.data(), 3), rng);
  }
  return env.summary();
}

}  // namespace metaland
