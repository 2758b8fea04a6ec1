// 3-DOF point-mass lander dynamics with thrust, gravity, environmental
// disturbance and rotating-frame accelerations.
#pragma once

#include "metaland/core.hpp"

namespace metaland {

struct LanderState {
  Vec3 r = Vec3::Zero();  // target-centered position, m
  Vec3 v = Vec3::Zero();  // m/s
  double m = 1.0;         // kg
  double t = 0.0;         // s
  double fuel_used = 0.0; // kg
};

struct BodyParams {
  Vec3 g = Vec3::Zero();         // m/s^2, target-centered frame
  Vec3 omega = Vec3::Zero();     // rad/s, body-centered frame
  Vec3 r_offset = Vec3::Zero();  // body rotation center -> target, m
  Vec3 srp = Vec3::Zero();       // solar radiation pressure accel, m/s^2
  double isp = 225.0;            // s
  double g_ref = 9.8;            // m/s^2
  Vec3 f_env_sigma = Vec3::Zero();  // N, per axis
  double dry_mass = 0.0;         // kg
};

struct ThrustCommand {
  Vec3 T = Vec3::Zero();  // N
};

// Rotating-frame terms with the sign convention 2 v x w + (w x r) x w.
inline Vec3 rotational_accel(const Vec3& r_a, const Vec3& v_a,
                             const Vec3& omega) {
  return 2.0 * v_a.cross(omega) + omega.cross(r_a).cross(omega);
}

// Mass flow over one control step (Euler on mdot = -|T| / (isp g_ref)).
inline double propellant_for_step(const ThrustCommand& cmd,
                                  const BodyParams& body, double dt) {
  return dt * cmd.T.norm() / (body.isp * body.g_ref);
}

namespace detail {

inline Vec3 acceleration(const Vec3& r, const Vec3& v, const Vec3& force,
                         double mass, const BodyParams& body) {
  return force / mass + body.g + body.srp +
         rotational_accel(r + body.r_offset, v, body.omega);
}

}  // namespace detail

// Advances (r, v) with classical RK4, holding mass, thrust and disturbance
// constant over the step. Throws DepletedMass when the post-step mass reaches
// the dry-mass floor.
inline LanderState step_dynamics(const LanderState& state,
                                 const ThrustCommand& cmd,
                                 const BodyParams& body, const Vec3& f_env,
                                 double dt) {
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::ConfigError, "step_dynamics: dt must be positive");
  }
  const Vec3 force = cmd.T + f_env;
  const double m = state.m;
  auto accel = [&](const Vec3& r, const Vec3& v) {
    return detail::acceleration(r, v, force, m, body);
  };

  const Vec3& r0 = state.r;
  const Vec3& v0 = state.v;
  const Vec3 k1r = v0;
  const Vec3 k1v = accel(r0, v0);
  const Vec3 k2r = v0 + 0.5 * dt * k1v;
  const Vec3 k2v = accel(r0 + 0.5 * dt * k1r, k2r);
  const Vec3 k3r = v0 + 0.5 * dt * k2v;
  const Vec3 k3v = accel(r0 + 0.5 * dt * k2r, k3r);
  const Vec3 k4r = v0 + dt * k3v;
  const Vec3 k4v = accel(r0 + dt * k3r, k4r);

  LanderState next;
  next.r = r0 + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
  next.v = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  const double burned = propellant_for_step(cmd, body, dt);
  next.m = state.m - burned;
  next.fuel_used = state.fuel_used + burned;
  next.t = state.t + dt;
  if (next.m <= body.dry_mass) {
    throw Error(ErrorCode::DepletedMass, "lander mass reached dry-mass floor");
  }
  return next;
}

// Zero-mean Gaussian disturbance force, independent per axis.
inline Vec3 sample_disturbance(Rng& rng, const BodyParams& body) {
  Vec3 f;
  for (int i = 0; i < 3; ++i) {
    const double sigma = body.f_env_sigma[i];
    f[i] = sigma > 0.0 ? sigma * rng.normal() : 0.0;
  }
  return f;
}

}  // namespace metaland
