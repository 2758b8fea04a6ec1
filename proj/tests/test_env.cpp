#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "metaland/env_config.hpp"
#include "metaland/lander_env.hpp"

using namespace metaland;

namespace {

Vec3 thrust(std::array<double, 3> a, const EnvConfig& c,
            const FailureState& f = {}) {
  return map_action_to_thrust(std::span<const double>(a.data(), 3), c, f).T;
}

}  // namespace

TEST(InitialConditions, MarsRanges) {
  LanderEnv env(mars_nominal_config());
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    env.reset(rng);
    const LanderState& s = env.state();
    EXPECT_GE(s.r.x(), 0.0);
    EXPECT_LE(s.r.x(), 2000.0);
    EXPECT_GE(s.r.y(), -1000.0);
    EXPECT_LE(s.r.y(), 1000.0);
    EXPECT_GE(s.r.z(), 2300.0);
    EXPECT_LE(s.r.z(), 2400.0);
    EXPECT_GE(s.v.x(), -70.0);
    EXPECT_LE(s.v.x(), -10.0);
    EXPECT_GE(s.v.y(), -30.0);
    EXPECT_LE(s.v.y(), 30.0);
    EXPECT_GE(s.v.z(), -90.0);
    EXPECT_LE(s.v.z(), -70.0);
  }
}

TEST(InitialConditions, AsteroidBody) {
  LanderEnv env(asteroid_config());
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    env.reset(rng);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LE(std::abs(env.body().omega[k]), 1e-3);
      EXPECT_LE(std::abs(env.body().srp[k]), 1e-6);
      EXPECT_GE(env.body().g[k], -100e-6);
      EXPECT_LE(env.body().g[k], -1e-6);
    }
  }
}

TEST(InitialConditions, CollapsedRangesAreDeterministic) {
  EnvConfig c = deterministic(mars_nominal_config());
  c.position = {c.position.lo, c.position.lo};
  c.velocity = {c.velocity.hi, c.velocity.hi};
  LanderEnv a(c), b(c);
  Rng ra(1), rb(12345);
  const Eigen::VectorXd oa = a.reset(ra);
  const Eigen::VectorXd ob = b.reset(rb);
  EXPECT_EQ(oa, ob);
  EXPECT_EQ(a.state().r, b.state().r);
  EXPECT_EQ(a.state().v, b.state().v);
  EXPECT_EQ(a.state().m, b.state().m);
  EXPECT_EQ(a.body().g, b.body().g);
}

TEST(EngineFailure, NeverWhenProbabilityZero) {
  EnvConfig c = mars_nominal_config();
  c.p_fail = 0.0;
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_engine_failure(rng, c).multipliers, Vec3::Ones());
  }
}

TEST(EngineFailure, DownrangeCaps) {
  const EnvConfig c = mars_engine_failure_config();
  Rng rng(4);
  FailureState f;
  do {
    f = sample_engine_failure(rng, c);
  } while (!(f.failed() && f.multipliers.x() < 1.0));
  const Vec3 caps = c.t_max * f.multipliers;
  EXPECT_NEAR(caps.x(), 12000.0, 1e-9);
  EXPECT_NEAR(caps.y(), 24000.0, 1e-9);
  EXPECT_NEAR(caps.z(), 16000.0, 1e-9);
  const Vec3 t = thrust({1.0, 0.0, 0.0}, c, f);
  EXPECT_NEAR(t.x(), 12000.0, 1e-9);
}

TEST(EngineFailure, Frequency) {
  EnvConfig c = mars_engine_failure_config();
  c.p_fail = 0.5;
  Rng rng(6);
  int failed = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) failed += sample_engine_failure(rng, c).failed();
  EXPECT_NEAR(double(failed) / n, 0.5, 0.02);
}

TEST(ThrustMapping, PulsedThresholds) {
  const EnvConfig c = asteroid_config();
  const Vec3 t = thrust({0.6, -0.1, -0.9}, c);
  EXPECT_EQ(t, Vec3(2.0, 0.0, -2.0));
  EXPECT_EQ(thrust({0.0, 0.0, 0.0}, c), Vec3::Zero());
}

TEST(ThrustMapping, MagnitudeBandFuzz) {
  const EnvConfig c = mars_nominal_config();
  Rng rng(21);
  for (int i = 0; i < 20000; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-4.0, 1.0));
    const std::array<double, 3> a{scale * rng.normal(), scale * rng.normal(),
                                  scale * rng.normal()};
    const double n = thrust(a, c).norm();
    EXPECT_GE(n, 2000.0 - 1e-9);
    EXPECT_LE(n, 15000.0 + 1e-9);
  }
}

TEST(ThrustMapping, FailedAxesRespectCaps) {
  const EnvConfig c = mars_engine_failure_config();
  FailureState f;
  f.multipliers = Vec3(1.0, 0.5, 1.0 / 1.5);
  Rng rng(22);
  for (int i = 0; i < 5000; ++i) {
    const std::array<double, 3> a{rng.normal(), rng.normal(), rng.normal()};
    const Vec3 t = thrust(a, c, f);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LE(std::abs(t[k]), c.t_max * f.multipliers[k] + 1e-9);
    }
    EXPECT_LE(t.norm(), c.t_max + 1e-9);
  }
}

TEST(Shaping, HighBranchTimeToGo) {
  const EnvConfig c = mars_nominal_config();
  const TargetVelocity tv = target_velocity(Vec3(0.0, 0.0, 115.0),
                                            Vec3(0.0, 0.0, -12.0), c, 80.0);
  EXPECT_NEAR(tv.t_go, 10.0, 1e-12);
  EXPECT_EQ(tv.tau, 20.0);
}

TEST(Shaping, HighBranchTargetVelocity) {
  const EnvConfig c = mars_nominal_config();
  const TargetVelocity tv = target_velocity(Vec3(0.0, 0.0, 115.0),
                                            Vec3(0.0, 0.0, -12.0), c, 80.0);
  EXPECT_NEAR(tv.v_targ.z(), -80.0 * (1.0 - std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(tv.v_targ.z(), -31.477, 1e-3);
  EXPECT_EQ(tv.v_targ.x(), 0.0);
  EXPECT_EQ(tv.v_targ.y(), 0.0);
}

TEST(Shaping, BelowHoverIsVertical) {
  const EnvConfig c = mars_nominal_config();
  const TargetVelocity tv = target_velocity(Vec3(40.0, -25.0, 10.0),
                                            Vec3(3.0, 1.0, -4.0), c, 80.0);
  EXPECT_TRUE(tv.below_hover);
  EXPECT_EQ(tv.tau, 100.0);
  EXPECT_EQ(tv.v_targ.x(), 0.0);
  EXPECT_EQ(tv.v_targ.y(), 0.0);
  EXPECT_NEAR(tv.t_go, 10.0 / Vec3(3.0, 1.0, -3.0).norm(), 1e-12);
}

TEST(Shaping, SingleBranch) {
  const EnvConfig c = asteroid_config();
  const Vec3 r(300.0, 400.0, 0.0);
  const Vec3 v(-1.0, 0.0, 0.0);
  const TargetVelocity tv = target_velocity(r, v, c, 1.0);
  EXPECT_NEAR(tv.t_go, 500.0, 1e-12);
  const Vec3 expect = -(r / 500.0) * (1.0 - std::exp(-500.0 / 300.0));
  EXPECT_NEAR((tv.v_targ - expect).norm(), 0.0, 1e-12);
}

TEST(Reward, ZeroErrorZeroEffort) {
  const EnvConfig c = mars_nominal_config();
  EXPECT_NEAR(shaping_reward(Vec3::Zero(), Vec3::Zero(), ThrustCommand{}, c), 0.01, 1e-15);
}

TEST(Reward, MarsWeights) {
  const EnvConfig c = mars_nominal_config();
  ThrustCommand cmd;
  cmd.T = Vec3(0.0, 6000.0, 8000.0);
  const double r = shaping_reward(Vec3(3.0, 4.0, 0.0), Vec3::Zero(), cmd, c);
  EXPECT_NEAR(r, -0.01 * 5.0 - 0.05 * 10000.0 / 15000.0 + 0.01, 1e-12);
  EXPECT_NEAR(r, -0.07333, 1e-5);
}

TEST(Reward, AsteroidWeights) {
  const EnvConfig c = asteroid_config();
  const double r = shaping_reward(Vec3(0.1, 0.0, 0.0), Vec3::Zero(), ThrustCommand{}, c);
  EXPECT_NEAR(r, -0.09, 1e-12);
}

TEST(Terminal, SuccessfulLanding) {
  LanderState s;
  s.r = Vec3(1.0, 2.0, -0.01);
  s.v = Vec3(0.1, 0.0, -1.2);
  const TerminalCheck t = terminal_check(s, mars_nominal_config());
  EXPECT_TRUE(t.done);
  EXPECT_NEAR(t.glideslope, 12.0, 1e-12);
  EXPECT_EQ(t.cause, TerminationCause::LandedSuccess);
  EXPECT_EQ(t.r1, 10.0);
}

TEST(Terminal, GlideslopeDefinition) {
  EXPECT_NEAR(glideslope(Vec3(0.1, 0.0, -1.0)), 10.0, 1e-12);
}

TEST(Terminal, AirborneContinues) {
  LanderState s;
  s.r = Vec3(30.0, 0.0, 5.0);
  s.v = Vec3(-40.0, 10.0, -30.0);
  const TerminalCheck t = terminal_check(s, mars_nominal_config());
  EXPECT_FALSE(t.done);
  EXPECT_EQ(t.r1, 0.0);
}

TEST(Terminal, HardLandingMisses) {
  LanderState s;
  s.r = Vec3(1.0, 0.0, 0.0);
  s.v = Vec3(0.0, 0.0, -2.5);
  const TerminalCheck t = terminal_check(s, mars_nominal_config());
  EXPECT_EQ(t.cause, TerminationCause::LandedMiss);
  EXPECT_EQ(t.r1, 0.0);
}

TEST(Terminal, RangeLimitAborts) {
  EnvConfig c = mars_nominal_config();
  LanderState s;
  s.r = Vec3(7000.0, 0.0, 100.0);
  const TerminalCheck t = terminal_check(s, c);
  EXPECT_EQ(t.cause, TerminationCause::CrashLimitViolation);
  EXPECT_EQ(t.r1, c.abort_penalty);
}

TEST(Observation, StateModeComposition) {
  EnvConfig c = deterministic(mars_nominal_config());
  c.position = {Vec3(0.0, 0.0, 115.0), Vec3(0.0, 0.0, 115.0)};
  c.velocity = {Vec3(0.0, 0.0, -10.0), Vec3(0.0, 0.0, -10.0)};
  c.capture_v_o = false;
  c.v_o = 80.0;
  LanderEnv env(c);
  Rng rng(0);
  const Eigen::VectorXd obs = env.reset(rng);
  // Above the hover point: r_hat = [0,0,100], v_hat = [0,0,-8].
  const double t_go = 100.0 / 8.0;
  const double vt = -80.0 * (1.0 - std::exp(-t_go / 20.0));
  ASSERT_EQ(obs.size(), 5);
  EXPECT_NEAR(obs[0], 0.0, 1e-12);
  EXPECT_NEAR(obs[1], 0.0, 1e-12);
  EXPECT_NEAR(obs[2], -10.0 - vt, 1e-12);
  EXPECT_NEAR(obs[3], 115.0, 1e-12);
  EXPECT_NEAR(obs[4], t_go, 1e-12);
}

TEST(Observation, ResetIsFinite) {
  LanderEnv env(mars_nominal_config());
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd obs = env.reset(rng);
    EXPECT_TRUE(obs.allFinite());
    EXPECT_EQ(obs[3], env.state().r.z());
  }
}

TEST(Episode, TimeoutAndSummary) {
  EnvConfig c = deterministic(mars_nominal_config());
  c.max_steps = 5;
  LanderEnv env(c);
  Rng rng(0);
  env.reset(rng);
  const std::array<double, 3> hover{0.0, 0.0, 0.5};
  StepOutcome out;
  while (!env.done()) out = env.step(std::span<const double>(hover.data(), 3), rng);
  EXPECT_EQ(out.cause, TerminationCause::Timeout);
  EXPECT_EQ(env.summary().steps, 5);
  EXPECT_GT(env.summary().fuel, 0.0);
}

TEST(Episode, TouchdownIsInterpolatedToTheSurface) {
  EnvConfig c = deterministic(mars_nominal_config());
  c.position = {Vec3(0.0, 0.0, 30.0), Vec3(0.0, 0.0, 30.0)};
  c.velocity = {Vec3(0.0, 0.0, -20.0), Vec3(0.0, 0.0, -20.0)};
  LanderEnv env(c);
  Rng rng(0);
  env.reset(rng);
  const std::array<double, 3> idle{0.0, 0.0, 0.0};
  while (!env.done()) env.step(std::span<const double>(idle.data(), 3), rng);
  EXPECT_NEAR(env.state().r.z(), 0.0, 1e-9);
  EXPECT_EQ(env.summary().cause, TerminationCause::LandedMiss);
}

TEST(Config, IniOverrides) {
  const auto tree = parse_config_text(
      "[scenario]\nbase = mars-failure\n[thrust]\nt_max = 20000\n"
      "[terminal]\nr_lim = 4\n");
  const EnvConfig c = env_config_from_tree(tree, "mars");
  EXPECT_EQ(c.t_max, 20000.0);
  EXPECT_EQ(c.r_lim, 4.0);
  EXPECT_EQ(c.p_fail, 0.5);
}

TEST(Config, UnknownKeyRejected) {
  const auto tree = parse_config_text("[thrust]\nt_mx = 1\n");
  try {
    env_config_from_tree(tree, "mars");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(Config, UnknownScenarioRejected) {
  EXPECT_THROW(scenario_config("venus"), Error);
}
