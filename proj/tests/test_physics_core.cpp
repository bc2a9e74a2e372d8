#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "atomsense/physics_core.hpp"
#include "atomsense/rng.hpp"

using namespace atomsense;

TEST(Frame, SensitiveAxisCompletesRightHandedTriad) {
  const Vec3 s = sensitive_axis();
  EXPECT_DOUBLE_EQ(s.x(), 0.0);
  EXPECT_DOUBLE_EQ(s.y(), -1.0);
  EXPECT_DOUBLE_EQ(s.z(), 0.0);
  const Vec3 z = s.cross(Vec3::UnitX());
  EXPECT_DOUBLE_EQ(z.z(), 1.0);
}

TEST(Species, EffectiveWaveVector) {
  const Species rb;
  EXPECT_NEAR(rb.k_eff(), 1.61058e7, 1e2);
  EXPECT_NEAR(rb.k_eff(), 4.0 * std::numbers::pi / 780.241209686e-9, 1e-6);
}

TEST(Species, VelocityDispersionAtOneMicrokelvin) {
  const Species rb;
  EXPECT_NEAR(rb.velocity_dispersion(1e-6), 9.78e-3, 1e-5);
}

TEST(Species, RejectsNonPhysicalMass) {
  Species s;
  s.mass = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Propagate, ClosedFormFreeFall) {
  BallisticState s{Vec3(0.01, 0.0, 0.0), Vec3(0.082, 0.0, -0.1), 1.0};
  const Vec3 g(0.0, 0.0, 9.81);
  const BallisticState out = propagate(s, 0.08, g);
  EXPECT_NEAR(out.position.x(), 0.01 + 0.082 * 0.08, 1e-15);
  EXPECT_NEAR(out.position.z(), -0.1 * 0.08 + 0.5 * 9.81 * 0.0064, 1e-15);
  EXPECT_NEAR(out.velocity.z(), -0.1 + 9.81 * 0.08, 1e-15);
  EXPECT_DOUBLE_EQ(out.time, 1.08);
}

TEST(Propagate, ComposesOverSubsteps) {
  BallisticState s{Vec3(0.0, 0.0, 0.0), Vec3(0.082, 0.01, 0.0), 0.0};
  const Vec3 g(0.0, 0.0, 9.80883);
  const BallisticState once = propagate(s, 0.08, g);
  const BallisticState twice = propagate(propagate(s, 0.03, g), 0.05, g);
  EXPECT_NEAR((once.position - twice.position).norm(), 0.0, 1e-15);
  EXPECT_NEAR((once.velocity - twice.velocity).norm(), 0.0, 1e-15);
}

TEST(Propagate, NegativeStepThrows) {
  EXPECT_THROW(propagate(BallisticState{}, -1e-3, Vec3::Zero()), std::invalid_argument);
}

TEST(Launch, ImpulseScalesWithGradientAndDuration) {
  const Species rb;
  LaunchPulse p{0.1, 1e-3, 2, 1};
  const double v = launch_velocity(rb, p);
  const double expected = constants::bohr_magneton * 2 * 0.5 * 0.1 * 1e-3 / rb.mass;
  EXPECT_NEAR(v, expected, 1e-15);
  p.sign = -1;
  EXPECT_DOUBLE_EQ(launch_velocity(rb, p), -v);
  p.duration = 2e-3;
  p.sign = 1;
  EXPECT_NEAR(launch_velocity(rb, p), 2.0 * v, 1e-15);
}

TEST(CounterRng, SameCounterSameDraw) {
  const CounterRng a(42, 7), b(42, 7);
  for (std::uint64_t c = 0; c < 100; ++c) EXPECT_EQ(a.bits(c), b.bits(c));
  const CounterRng other(42, 8);
  EXPECT_NE(a.bits(0), other.bits(0));
}

TEST(CounterRng, NormalMoments) {
  const CounterRng r(1, 2);
  const int n = 200000;
  double m = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal(static_cast<std::uint64_t>(i));
    m += x;
    m2 += x * x;
  }
  m /= n;
  m2 /= n;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(m2, 1.0, 0.01);
}

TEST(CounterRng, UniformInOpenInterval) {
  const CounterRng r(3, 0);
  for (std::uint64_t c = 0; c < 10000; ++c) {
    const double u = r.uniform(c);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-9);
  EXPECT_NEAR(normal_quantile(0.841344746), 1.0, 1e-6);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963985, 1e-6);
}
