#include <gtest/gtest.h>

#include "metaland/dynamics.hpp"

using namespace metaland;

TEST(RotationalAccel, ZeroRotation) {
  const Vec3 a = rotational_accel(Vec3(12.0, -4.0, 900.0), Vec3(3.0, 1.0, -7.0),
                                  Vec3::Zero());
  EXPECT_EQ(a, Vec3::Zero());
}

TEST(RotationalAccel, CentrifugalTerm) {
  const Vec3 a = rotational_accel(Vec3(1000.0, 0.0, 0.0), Vec3::Zero(),
                                  Vec3(0.0, 0.0, 1e-3));
  EXPECT_NEAR(a.x(), 1e-3, 1e-15);
  EXPECT_NEAR(a.y(), 0.0, 1e-15);
  EXPECT_NEAR(a.z(), 0.0, 1e-15);
}

TEST(RotationalAccel, CoriolisTerm) {
  const Vec3 a = rotational_accel(Vec3::Zero(), Vec3(1.0, 0.0, 0.0),
                                  Vec3(0.0, 0.0, 1e-3));
  EXPECT_NEAR(a.x(), 0.0, 1e-15);
  EXPECT_NEAR(a.y(), -2e-3, 1e-15);
  EXPECT_NEAR(a.z(), 0.0, 1e-15);
}

TEST(StepDynamics, FreeDrift) {
  LanderState s;
  s.r = Vec3(0.0, 0.0, 100.0);
  s.v = Vec3(0.0, 0.0, -10.0);
  s.m = 1900.0;
  BodyParams body;
  const LanderState n = step_dynamics(s, ThrustCommand{}, body, Vec3::Zero(), 0.1);
  EXPECT_NEAR(n.r.z(), 99.0, 1e-12);
  EXPECT_EQ(n.v, s.v);
  EXPECT_EQ(n.m, s.m);
  EXPECT_NEAR(n.t, 0.1, 1e-15);
}

TEST(StepDynamics, ConstantGravityIsExact) {
  LanderState s;
  s.r = Vec3(0.0, 0.0, 100.0);
  s.v = Vec3(0.0, 0.0, -10.0);
  s.m = 1900.0;
  BodyParams body;
  body.g = Vec3(0.0, 0.0, -3.7114);
  const LanderState n = step_dynamics(s, ThrustCommand{}, body, Vec3::Zero(), 0.1);
  EXPECT_NEAR(n.v.z(), -10.37114, 1e-12);
  EXPECT_NEAR(n.r.z(), 100.0 - 1.0 - 0.5 * 3.7114 * 0.01, 1e-12);
  EXPECT_NEAR(n.r.z(), 98.98144, 1e-5);
}

TEST(StepDynamics, MassFlow) {
  LanderState s;
  s.m = 2000.0;
  s.r = Vec3(0.0, 0.0, 1000.0);
  BodyParams body;
  body.isp = 225.0;
  body.g_ref = 9.8;
  ThrustCommand cmd;
  cmd.T = Vec3(0.0, 9000.0, 12000.0);  // |T| = 15000
  const LanderState n = step_dynamics(s, cmd, body, Vec3::Zero(), 1.0);
  EXPECT_NEAR(s.m - n.m, 15000.0 / (225.0 * 9.8), 1e-9);
  EXPECT_NEAR(s.m - n.m, 6.80272, 1e-5);
  EXPECT_NEAR(n.fuel_used, s.m - n.m, 1e-12);
}

TEST(StepDynamics, DryMassFloorThrows) {
  LanderState s;
  s.m = 1000.5;
  BodyParams body;
  body.dry_mass = 1000.0;
  ThrustCommand cmd;
  cmd.T = Vec3(0.0, 0.0, 15000.0);
  try {
    step_dynamics(s, cmd, body, Vec3::Zero(), 1.0);
    FAIL() << "expected DepletedMass";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DepletedMass);
  }
}

TEST(StepDynamics, RungeKuttaOrderUnderRotation) {
  // Halving dt must cut the one-second error by roughly 2^4 against a fine
  // reference.
  LanderState s;
  s.r = Vec3(300.0, -200.0, 500.0);
  s.v = Vec3(-0.4, 0.3, -0.2);
  s.m = 1000.0;
  BodyParams body;
  body.omega = Vec3(2e-3, -1e-3, 3e-3);
  body.r_offset = Vec3(0.0, 0.0, 5000.0);
  body.g = Vec3(0.0, 0.0, -1e-4);
  auto run = [&](int n) {
    LanderState x = s;
    for (int i = 0; i < n; ++i) {
      x = step_dynamics(x, ThrustCommand{}, body, Vec3::Zero(), 200.0 / n);
    }
    return x.r;
  };
  const Vec3 ref = run(4096);
  const double e1 = (run(8) - ref).norm();
  const double e2 = (run(16) - ref).norm();
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Disturbance, ZeroSigma) {
  Rng rng(3);
  BodyParams body;
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_disturbance(rng, body), Vec3::Zero());
}

TEST(Disturbance, SampleMean) {
  Rng rng(11);
  BodyParams body;
  body.f_env_sigma = Vec3(100.0, 100.0, 100.0);
  Vec3 sum = Vec3::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_disturbance(rng, body);
  const Vec3 mean = sum / n;
  for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(mean[k]), 1.5);
}

TEST(Disturbance, SameSeedSameSequence) {
  BodyParams body;
  body.f_env_sigma = Vec3(1.0, 2.0, 3.0);
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(sample_disturbance(a, body), sample_disturbance(b, body));
  }
}
