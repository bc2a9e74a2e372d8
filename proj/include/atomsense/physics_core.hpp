#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "atomsense/constants.hpp"

namespace atomsense {

using Vec3 = Eigen::Vector3d;

// Frame used throughout: z along the downward vertical (parallel to k_eff
// for k_sign = +1), x along the launch axis, and the gyroscope sensitive
// axis x × z (= -y).
inline Vec3 sensitive_axis() { return Vec3::UnitX().cross(Vec3::UnitZ()); }

struct Species {
  double mass = constants::rb87_mass;
  double lambda_raman = constants::rb87_d2_wavelength;
  double g_f = constants::rb87_gf_f2;
  double hyperfine_splitting = constants::rb87_hyperfine;

  // Two-photon counter-propagating wave number, 2 * (2 pi / lambda).
  double k_eff() const { return 4.0 * constants::pi / lambda_raman; }

  // hbar k^2 / 2m, in rad/s.
  double recoil() const {
    const double k = k_eff();
    return constants::hbar * k * k / (2.0 * mass);
  }

  double velocity_dispersion(double temperature) const {
    return std::sqrt(constants::boltzmann * temperature / mass);
  }

  void validate() const {
    if (!(mass > 0.0) || !(lambda_raman > 0.0)) {
      throw std::invalid_argument("Species: mass and wavelength must be positive");
    }
  }

  static Species rb87() { return {}; }
};

struct LaunchPulse {
  double gradient = 0.0;  // T/m
  double duration = 0.0;  // s
  int m_f = 0;
  int sign = 1;

  void validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("LaunchPulse: duration must be > 0");
    if (std::abs(m_f) > 2) throw std::invalid_argument("LaunchPulse: |m_F| must be <= 2");
    if (sign != 1 && sign != -1) throw std::invalid_argument("LaunchPulse: sign must be +-1");
  }
};

struct BallisticState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double time = 0.0;
};

/// Velocity imparted by a uniform gradient pulse in the impulse
/// approximation: F = mu_B m_F g_F |grad B|, v = sign F tau / m.
inline double launch_velocity(const Species& species, const LaunchPulse& pulse) {
  const double force = constants::bohr_magneton * pulse.m_f * species.g_f * pulse.gradient;
  return pulse.sign * force / species.mass * pulse.duration;
}

/// Closed-form free fall over dt under a uniform acceleration.
inline BallisticState propagate(const BallisticState& state, double dt, const Vec3& gravity) {
  if (dt < 0.0) throw std::invalid_argument("propagate: dt must be >= 0");
  BallisticState out;
  out.position = state.position + state.velocity * dt + 0.5 * gravity * dt * dt;
  out.velocity = state.velocity + gravity * dt;
  out.time = state.time + dt;
  return out;
}

}  // namespace atomsense
