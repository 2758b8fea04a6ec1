#include <cmath>

#include <gtest/gtest.h>

#include "metaland/drdv.hpp"

using namespace metaland;

namespace {

const Vec3 kMarsG(0.0, 0.0, -3.7114);

}  // namespace

TEST(DrdvLaw, VerticalHandValue) {
  const Vec3 a = accel_command(Vec3(0, 0, 1000), Vec3(0, 0, -50), kMarsG, 40.0);
  EXPECT_NEAR(a.z(), -6.0 * 1000.0 / 1600.0 + 200.0 / 40.0 + 3.7114, 1e-12);
  EXPECT_NEAR(a.z(), 4.9614, 1e-12);
  EXPECT_EQ(a.x(), 0.0);
  EXPECT_EQ(a.y(), 0.0);
}

TEST(DrdvLaw, LinearInState) {
  const Vec3 r(300.0, -120.0, 900.0);
  const Vec3 v(-20.0, 4.0, -45.0);
  const Vec3 a1 = accel_command(r, v, kMarsG, 33.0) + kMarsG;
  const Vec3 a2 = accel_command(2.0 * r, 2.0 * v, kMarsG, 33.0) + kMarsG;
  EXPECT_LT((a2 - 2.0 * a1).norm(), 1e-12);
}

TEST(DrdvLaw, RejectsNonPositiveTgo) {
  EXPECT_THROW(accel_command(Vec3(0, 0, 1), Vec3::Zero(), kMarsG, 0.0), Error);
}

TEST(DrdvLaw, HoverFallbackThrust) {
  // At rest on the target the controller only cancels gravity.
  EnvConfig c = deterministic(mars_nominal_config());
  c.position = {Vec3(0.0, 0.0, 1e-3), Vec3(0.0, 0.0, 1e-3)};
  c.velocity = {Vec3::Zero(), Vec3::Zero()};
  c.wet_mass = {2000.0, 2000.0};
  c.g_spread = 0.0;
  LanderEnv env(c);
  Rng rng(0);
  env.reset(rng);
  DrdvConfig d;
  d.use_gate = false;
  d.touchdown_velocity = Vec3::Zero();
  DrdvController ctl(d);
  const Vec3 action = ctl.action(env);
  const Vec3 thrust = action * c.t_max;
  EXPECT_LT(ctl.last_tgo(), d.hover_tgo);
  EXPECT_NEAR(thrust.x(), 0.0, 1e-9);
  EXPECT_NEAR(thrust.y(), 0.0, 1e-9);
  EXPECT_NEAR(thrust.z(), 7422.8, 1e-6);
}

TEST(PredictedArc, ReachesTheTarget) {
  // Integrating u(s) + g over the arc lands exactly at the origin with v_f.
  const Vec3 r(800.0, 200.0, 2000.0);
  const Vec3 v(-30.0, 10.0, -70.0);
  const Vec3 vf(0.0, 0.0, -1.0);
  const double T = 45.0;
  const PredictedArc arc = predict_arc(r, v, kMarsG, T, vf);
  const Vec3 a0 = arc.c + kMarsG;
  const Vec3 v_end = v + a0 * T + 0.5 * arc.q * T * T;
  const Vec3 r_end = r + v * T + 0.5 * a0 * T * T + arc.q * T * T * T / 6.0;
  EXPECT_LT((v_end - vf).norm(), 1e-9);
  EXPECT_LT(r_end.norm(), 1e-8);
  // Initial command of the arc is the law's command.
  EXPECT_LT((arc.c - accel_command(r, v, kMarsG, T, vf)).norm(), 1e-12);
}

TEST(PredictedArc, EnergyMatchesQuadrature) {
  const PredictedArc arc = predict_arc(Vec3(100, 50, 900), Vec3(-5, 2, -40), kMarsG, 30.0);
  const int n = 20000;
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) * 30.0 / n;
    e += (arc.c + arc.q * s).squaredNorm() * 30.0 / n;
  }
  EXPECT_NEAR(arc.energy(), e, 1e-6 * e);
}

TEST(SolveTgo, RespectsThrustLimit) {
  const Vec3 r(1500.0, -600.0, 2350.0);
  const Vec3 v(-40.0, 20.0, -80.0);
  const double amax = 15000.0 / 2000.0;
  const TgoSolution s = solve_tgo(r, v, kMarsG, amax);
  ASSERT_TRUE(s.feasible);
  EXPECT_LE(predict_arc(r, v, kMarsG, s.t_go).peak_accel(), amax * (1.0 + 1e-9));
  EXPECT_GT(s.t_go, 0.0);
}

TEST(SolveTgo, TimeRescaling) {
  // r -> k^2 r, v -> k v, g -> g, a_max -> a_max maps t -> k t when the
  // thrust bound and gravity are unchanged.
  const Vec3 r(400.0, 100.0, 1200.0);
  const Vec3 v(-10.0, 5.0, -40.0);
  const double amax = 7.5;
  const double k = 1.7;
  const TgoSolution a = solve_tgo(r, v, kMarsG, amax);
  const TgoSolution b = solve_tgo(k * k * r, k * v, kMarsG, amax);
  ASSERT_TRUE(a.feasible && b.feasible);
  // Energy scales by k, the time term by k: the argmin scales by k.
  EXPECT_NEAR(b.t_go / a.t_go, k, 1e-4 * k);
}

TEST(SolveTgo, SmallDropIsFeasible) {
  const TgoSolution s = solve_tgo(Vec3(0, 0, 1), Vec3::Zero(), kMarsG, 1e3);
  EXPECT_TRUE(s.feasible);
  EXPECT_GT(s.t_go, 0.0);
}

TEST(SolveTgo, InfeasibleFallsBack) {
  const Vec3 r(0.0, 0.0, 100.0);
  const Vec3 v(0.0, 0.0, -80.0);
  const TgoSolution s = solve_tgo(r, v, kMarsG, 0.5);
  EXPECT_FALSE(s.feasible);
  EXPECT_NEAR(s.t_go, 1.5 * 100.0 / 80.0, 1e-12);
}

TEST(SolveTgo, ZeroRangeRejected) {
  EXPECT_THROW(solve_tgo(Vec3::Zero(), Vec3(0, 0, -1), kMarsG, 5.0), Error);
}

TEST(DrdvEpisode, DeterministicMarsLandsPrecisely) {
  const EnvConfig c = deterministic(mars_nominal_config());
  LanderEnv env(c);
  Rng rng(1);
  const EpisodeSummary s = run_drdv_episode(env, rng, drdv_defaults(c));
  EXPECT_EQ(s.cause, TerminationCause::LandedSuccess);
  EXPECT_LT(s.position_error, 1.0);
  EXPECT_LT(s.velocity_error, 2.0);
}

TEST(DrdvEpisode, ExactDynamicsDriveStateToTarget) {
  // No disturbance, exact g and m, unsaturated thrust: a fixed-horizon arc
  // ends at the target within integration tolerance.
  EnvConfig c = deterministic(mars_nominal_config());
  c.position = {Vec3(100.0, 50.0, 500.0), Vec3(100.0, 50.0, 500.0)};
  c.velocity = {Vec3(-5.0, 0.0, -20.0), Vec3(-5.0, 0.0, -20.0)};
  c.isp = 1e12;  // constant mass keeps the mass estimate exact
  c.t_min = 0.0;
  c.dt = 0.05;
  c.max_steps = 100000;
  LanderEnv env(c);
  Rng rng(0);
  env.reset(rng);
  const double T = 40.0;
  const double m = env.state().m;
  const Vec3 g = env.body().g;
  while (!env.done() && env.state().t < T - 1e-9) {
    const LanderState& s = env.state();
    const double t_go = T - s.t;
    // Hold the arc's own command profile over the step midpoint.
    const PredictedArc arc = predict_arc(s.r, s.v, g, t_go);
    const Vec3 u = arc.c + arc.q * (0.5 * c.dt);
    ASSERT_LT(m * u.norm(), c.t_max);
    ThrustCommand cmd;
    cmd.T = m * u;
    env.apply(cmd, rng);
  }
  EXPECT_LT(env.state().r.norm(), 0.05);
  EXPECT_LT(env.state().v.norm(), 0.05);
}

TEST(DrdvEpisode, ThrustAlwaysWithinLimits) {
  const EnvConfig c = mars_engine_failure_config();
  LanderEnv env(c);
  Rng rng(3);
  DrdvController ctl(drdv_defaults(c));
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(rng);
    ctl.reset();
    while (!env.done()) {
      const Vec3 a = ctl.action(env);
      const ThrustCommand cmd = map_action_to_thrust(
          std::span<const double>(a.data(), 3), c, env.failure());
      EXPECT_LE(cmd.T.norm(), c.t_max + 1e-9);
      EXPECT_GE(cmd.T.norm(), c.t_min - 1e-9);
      for (int k = 0; k < 3; ++k) {
        EXPECT_LE(std::abs(cmd.T[k]), c.t_max * env.failure().multipliers[k] + 1e-9);
      }
      env.step(std::span<const double>(a.data(), 3), rng);
    }
  }
}
