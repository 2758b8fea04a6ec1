// Powered-descent episode state machine: randomized reset, thrust mapping,
// shaping reward, termination and observation for every lander scenario.
#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>

#include "metaland/altimeter.hpp"
#include "metaland/core.hpp"
#include "metaland/dynamics.hpp"
#include "metaland/env_config.hpp"
#include "metaland/terrain.hpp"

namespace metaland {

struct FailureState {
  Vec3 multipliers = Vec3::Ones();
  bool failed() const { return (multipliers.array() < 1.0).any(); }
};

enum class TerminationCause {
  None,
  LandedSuccess,
  LandedMiss,
  CrashLimitViolation,
  Timeout,
  MassDepleted,
};

inline const char* to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::None: return "none";
    case TerminationCause::LandedSuccess: return "landed-success";
    case TerminationCause::LandedMiss: return "landed-miss";
    case TerminationCause::CrashLimitViolation: return "crash-limit-violation";
    case TerminationCause::Timeout: return "timeout";
    case TerminationCause::MassDepleted: return "mass-depleted";
  }
  return "unknown";
}

// Terminal quantities reported for every finished episode.
struct EpisodeSummary {
  double position_error = 0.0;  // |r| at touchdown (or at abort), m
  double velocity_error = 0.0;  // |v|, m/s
  double glideslope = 0.0;
  double fuel = 0.0;  // kg
  int steps = 0;
  TerminationCause cause = TerminationCause::None;
};

struct StepOutcome {
  Eigen::VectorXd observation;
  double reward = 0.0;
  double r1 = 0.0;  // terminal-bonus channel
  double r2 = 0.0;  // shaping channel
  bool done = false;
  TerminationCause cause = TerminationCause::None;
  LanderState state;  // ground truth, logging only
};

// ---------------------------------------------------------------------------
// engine failure

inline FailureState sample_engine_failure(Rng& rng, const EnvConfig& config) {
  FailureState f;
  if (config.p_fail <= 0.0) return f;
  if (rng.bernoulli(config.p_fail)) {
    const int lateral_axis = rng.bernoulli(0.5) ? 0 : 1;
    f.multipliers[lateral_axis] = 1.0 / config.lateral_failure_factor;
    f.multipliers[2] = 1.0 / config.vertical_failure_factor;
  }
  return f;
}

// ---------------------------------------------------------------------------
// thrust mapping

// Magnitude band: T = t_max * action with its norm clamped to
// [t_min, t_max], then per-axis caps t_max * multiplier, then the norm is
// raised back toward t_min as far as the caps allow. Pulsed: each axis is
// -t_max, 0 or +t_max with the deadband |a| <= 1/3.
inline ThrustCommand map_action_to_thrust(std::span<const double> action,
                                          const EnvConfig& config,
                                          const FailureState& failure) {
  ThrustCommand cmd;
  const Vec3 a(action[0], action[1], action[2]);
  if (config.thrust_mode == ThrustMode::Pulsed) {
    for (int i = 0; i < 3; ++i) {
      if (a[i] > 1.0 / 3.0) cmd.T[i] = config.t_max;
      else if (a[i] < -1.0 / 3.0) cmd.T[i] = -config.t_max;
      else cmd.T[i] = 0.0;
    }
    return cmd;
  }

  Vec3 t = config.t_max * a;
  double n = t.norm();
  if (!(n > 1e-12)) {
    t = Vec3(0.0, 0.0, config.t_min);
  } else if (n > config.t_max) {
    t *= config.t_max / n;
  } else if (n < config.t_min) {
    t *= config.t_min / n;
  }
  const Vec3 caps = config.t_max * failure.multipliers;
  for (int i = 0; i < 3; ++i) t[i] = std::clamp(t[i], -caps[i], caps[i]);
  n = t.norm();
  if (n < config.t_min && n > 0.0) {
    double scale = config.t_min / n;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(t[i]) > 0.0) scale = std::min(scale, caps[i] / std::abs(t[i]));
    }
    t *= scale;
  }
  cmd.T = t;
  return cmd;
}

// ---------------------------------------------------------------------------
// shaping

inline constexpr double kTgoSentinel = 1e4;

struct TargetVelocity {
  Vec3 v_targ = Vec3::Zero();
  double t_go = 0.0;
  double tau = 0.0;
  bool below_hover = false;
  bool degenerate = false;
};

// Target velocity field toward a point hover_altitude above the target,
// switching to a vertical descent below it. `v_o` is the episode's reference
// speed.
inline TargetVelocity target_velocity(const Vec3& r, const Vec3& v,
                                      const EnvConfig& config, double v_o) {
  TargetVelocity out;
  Vec3 r_hat;
  Vec3 v_hat;
  if (config.shaping == ShapingMode::SingleBranch) {
    r_hat = r;
    v_hat = v;
    out.tau = config.tau1;
  } else if (r.z() > config.hover_altitude) {
    r_hat = r - Vec3(0.0, 0.0, config.hover_altitude);
    v_hat = v - Vec3(0.0, 0.0, config.vz_target_high);
    out.tau = config.tau1;
  } else {
    r_hat = Vec3(0.0, 0.0, r.z());
    v_hat = v - Vec3(0.0, 0.0, config.vz_target_low);
    out.tau = config.tau2;
    out.below_hover = true;
  }
  const double r_norm = r_hat.norm();
  const double v_norm = v_hat.norm();
  if (!(r_norm > 0.0)) {
    out.v_targ = Vec3::Zero();
    out.t_go = 0.0;
    out.degenerate = !(v_norm > 0.0);
    return out;
  }
  double decay = 1.0;
  if (v_norm > 0.0) {
    out.t_go = std::min(r_norm / v_norm, kTgoSentinel);
    decay = 1.0 - std::exp(-out.t_go / out.tau);
  } else {
    out.t_go = kTgoSentinel;
    out.degenerate = true;
  }
  out.v_targ = -v_o * (r_hat / r_norm) * decay;
  return out;
}

// alpha |v - v_targ| + beta |T| / t_max + gamma.
inline double shaping_reward(const Vec3& v, const Vec3& v_targ,
                             const ThrustCommand& cmd, const EnvConfig& config) {
  return config.alpha * (v - v_targ).norm() +
         config.beta * cmd.T.norm() / config.t_max + config.gamma_const;
}

// ---------------------------------------------------------------------------
// termination

inline double glideslope(const Vec3& v) {
  return std::abs(v.z()) / std::max(v.head<2>().norm(), 1e-8);
}

struct TerminalCheck {
  bool done = false;
  TerminationCause cause = TerminationCause::None;
  double glideslope = 0.0;
  double r1 = 0.0;
};

inline TerminalCheck terminal_check(const LanderState& state,
                                    const EnvConfig& config, int steps = 0,
                                    bool mass_depleted = false) {
  TerminalCheck out;
  out.glideslope = glideslope(state.v);
  if (state.r.z() <= 0.0) {
    out.done = true;
    const bool success = state.r.norm() < config.r_lim &&
                         state.v.norm() < config.v_lim &&
                         out.glideslope > config.gs_lim;
    out.cause = success ? TerminationCause::LandedSuccess
                        : TerminationCause::LandedMiss;
    out.r1 = success ? config.eta : 0.0;
  } else if (mass_depleted) {
    out.done = true;
    out.cause = TerminationCause::MassDepleted;
    out.r1 = config.abort_penalty;
  } else if (config.range_limit > 0.0 && state.r.norm() > config.range_limit) {
    out.done = true;
    out.cause = TerminationCause::CrashLimitViolation;
    out.r1 = config.abort_penalty;
  } else if (steps >= config.max_steps) {
    out.done = true;
    out.cause = TerminationCause::Timeout;
  }
  return out;
}

// ---------------------------------------------------------------------------
// environment

inline constexpr int kObservationDim = 5;
inline constexpr int kActionDim = 3;

class LanderEnv {
 public:
  explicit LanderEnv(EnvConfig config,
                     std::shared_ptr<const TerrainMap> terrain = nullptr)
      : config_(std::move(config)), terrain_(std::move(terrain)) {
    config_.validate();
    if (config_.obs_mode != ObservationMode::State && !terrain_) {
      throw Error(ErrorCode::ConfigError,
                  "altimeter observation mode needs a terrain map");
    }
  }

  int obs_dim() const { return kObservationDim; }
  int act_dim() const { return kActionDim; }
  const EnvConfig& config() const { return config_; }
  const LanderState& state() const { return state_; }
  const BodyParams& body() const { return body_; }
  const FailureState& failure() const { return failure_; }
  double v_o() const { return v_o_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

  // Draws initial conditions and body parameters, returns the first
  // observation.
  Eigen::VectorXd reset(Rng& rng) {
    const EnvConfig& c = config_;
    for (int i = 0; i < 3; ++i) {
      state_.r[i] = rng.uniform(c.position.lo[i], c.position.hi[i]);
    }
    for (int i = 0; i < 3; ++i) {
      state_.v[i] = rng.uniform(c.velocity.lo[i], c.velocity.hi[i]);
    }
    state_.m = rng.uniform(c.wet_mass.lo, c.wet_mass.hi);
    state_.t = 0.0;
    state_.fuel_used = 0.0;

    body_ = BodyParams{};
    if (c.g_componentwise) {
      for (int i = 0; i < 3; ++i) {
        body_.g[i] = rng.uniform(c.g_range.lo[i], c.g_range.hi[i]);
      }
    } else {
      const double spread = c.g_spread * c.g_nominal.norm();
      for (int i = 0; i < 3; ++i) {
        body_.g[i] = c.g_nominal[i] + spread * rng.uniform(-1.0, 1.0);
      }
    }
    for (int i = 0; i < 3; ++i) {
      body_.omega[i] = rng.uniform(c.omega_range.lo[i], c.omega_range.hi[i]);
    }
    for (int i = 0; i < 3; ++i) {
      body_.srp[i] = rng.uniform(c.srp_range.lo[i], c.srp_range.hi[i]);
    }
    body_.r_offset = c.r_offset;
    body_.isp = c.isp;
    body_.g_ref = c.g_ref;
    body_.f_env_sigma = c.f_env_sigma;
    body_.dry_mass = c.dry_mass;

    failure_ = sample_engine_failure(rng, c);
    v_o_ = c.capture_v_o ? state_.v.norm() : c.v_o;
    steps_ = 0;
    done_ = false;
    summary_ = EpisodeSummary{};
    return observe();
  }

  // Applies one action for dt seconds. `rng` drives the disturbance draw.
  StepOutcome step(std::span<const double> action, Rng& rng) {
    if (done_) {
      throw Error(ErrorCode::ConfigError, "step called on finished episode");
    }
    const ThrustCommand cmd = map_action_to_thrust(action, config_, failure_);
    return apply(cmd, rng);
  }

  // Same as step() with an explicit thrust command; used by the guidance
  // baseline, which maps its own thrust.
  StepOutcome apply(const ThrustCommand& cmd, Rng& rng) {
    const Vec3 f_env = sample_disturbance(rng, body_);
    const LanderState prev = state_;
    bool depleted = false;
    if (state_.m - propellant_for_step(cmd, body_, config_.dt) <=
        body_.dry_mass) {
      depleted = true;
      state_.t += config_.dt;
    } else {
      state_ = step_dynamics(state_, cmd, body_, f_env, config_.dt);
    }
    ++steps_;

    // Touchdown is placed at the plane crossing inside the step.
    if (state_.r.z() <= 0.0 && prev.r.z() > 0.0) {
      const double f = prev.r.z() / (prev.r.z() - state_.r.z());
      state_.r = prev.r + f * (state_.r - prev.r);
      state_.v = prev.v + f * (state_.v - prev.v);
      state_.r.z() = std::min(state_.r.z(), 0.0);
    }

    StepOutcome out;
    const TargetVelocity tv =
        target_velocity(state_.r, state_.v, config_, v_o_);
    out.r2 = shaping_reward(state_.v, tv.v_targ, cmd, config_);
    const TerminalCheck term = terminal_check(state_, config_, steps_, depleted);
    out.r1 = term.r1;
    out.reward = out.r1 + out.r2;
    out.done = term.done;
    out.cause = term.cause;
    out.state = state_;
    done_ = term.done;
    if (done_) {
      summary_.position_error = state_.r.norm();
      summary_.velocity_error = state_.v.norm();
      summary_.glideslope = term.glideslope;
      summary_.fuel = state_.fuel_used;
      summary_.steps = steps_;
      summary_.cause = term.cause;
    }
    out.observation = observe();
    return out;
  }

  const EpisodeSummary& summary() const { return summary_; }

  Eigen::VectorXd observe() const {
    Eigen::VectorXd obs(kObservationDim);
    const TargetVelocity tv =
        target_velocity(state_.r, state_.v, config_, v_o_);
    if (config_.obs_mode == ObservationMode::State) {
      obs.head<3>() = state_.v - tv.v_targ;
      obs[3] = state_.r.z();
    } else {
      const AltimeterReading reading = altimeter_reading();
      for (int k = 0; k < 4; ++k) {
        obs[k] = reading.range[k] / config_.altimeter_scale;
      }
    }
    obs[4] = tv.t_go;
    return obs;
  }

  AltimeterReading altimeter_reading() const {
    const Vec3 p = state_.r + config_.dtm_target;
    const BeamPointing mode =
        config_.obs_mode == ObservationMode::AltimeterTargetPointing
            ? BeamPointing::TargetPointing
            : BeamPointing::VelocityAveraged;
    try {
      const BeamSet beams = beam_directions(p, state_.v, mode, config_.dtm_target);
      return measure(*terrain_, p, beams);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDirection) throw;
      return AltimeterReading{};
    }
  }

 private:
  EnvConfig config_;
  std::shared_ptr<const TerrainMap> terrain_;
  LanderState state_;
  BodyParams body_;
  FailureState failure_;
  EpisodeSummary summary_;
  double v_o_ = 1.0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace metaland
