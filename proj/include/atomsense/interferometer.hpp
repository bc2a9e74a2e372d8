#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "atomsense/errors.hpp"
#include "atomsense/parallel.hpp"
#include "atomsense/physics_core.hpp"
#include "atomsense/rng.hpp"

namespace atomsense {

struct InterferometerConfig {
  double T = 0.040;           // s, pulse separation
  int k_sign = 1;
  int v_sign = 1;
  double alpha = 0.0;         // rad/s^2, chirp rate
  double beam_waist = 10.1e-3;  // m, 1/e^2 radius
  double t_pi = 0.0;          // s, absolute time of the pi pulse
  double k_eff = Species{}.k_eff();
  bool rabi_weighting = false;  // Gaussian-beam contrast weighting

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("InterferometerConfig: T must be > 0");
    if (!(beam_waist > 0.0)) throw std::invalid_argument("InterferometerConfig: waist must be > 0");
    if (std::abs(k_sign) != 1 || std::abs(v_sign) != 1) {
      throw std::invalid_argument("InterferometerConfig: k_sign and v_sign must be +-1");
    }
  }

  double first_pulse() const { return t_pi - T; }
  double last_pulse() const { return t_pi + T; }
};

/// Mach-Zehnder phase for constant a, Omega and dOmega/dt:
///   [k . (a - 2 Omega x v - dOmega x r - Omega x (Omega x r)) - alpha] T^2
/// with k = k_sign k_eff z and the launch velocity multiplied by v_sign.
inline double phase_closed_form(const InterferometerConfig& cfg, const Vec3& accel,
                                const Vec3& omega, const Vec3& omega_dot, const Vec3& r,
                                const Vec3& v_launch) {
  const Vec3 k = cfg.k_sign * cfg.k_eff * Vec3::UnitZ();
  const Vec3 v = cfg.v_sign * v_launch;
  const Vec3 inertial =
      accel - 2.0 * omega.cross(v) - omega_dot.cross(r) - omega.cross(omega.cross(r));
  return (k.dot(inertial) - cfg.alpha) * cfg.T * cfg.T;
}

// Coriolis, Euler and centrifugal pieces of the closed form, for budgets and
// parity tests.
struct PhaseTerms {
  double acceleration = 0.0;
  double coriolis = 0.0;
  double euler = 0.0;
  double centrifugal = 0.0;
  double chirp = 0.0;
  double total() const { return acceleration + coriolis + euler + centrifugal + chirp; }
};

inline PhaseTerms phase_terms(const InterferometerConfig& cfg, const Vec3& accel,
                              const Vec3& omega, const Vec3& omega_dot, const Vec3& r,
                              const Vec3& v_launch) {
  const Vec3 k = cfg.k_sign * cfg.k_eff * Vec3::UnitZ();
  const Vec3 v = cfg.v_sign * v_launch;
  const double t2 = cfg.T * cfg.T;
  return {k.dot(accel) * t2, -2.0 * k.dot(omega.cross(v)) * t2,
          -k.dot(omega_dot.cross(r)) * t2, -k.dot(omega.cross(omega.cross(r))) * t2,
          -cfg.alpha * t2};
}

inline constexpr double kSmallAngleLimit = 10e-3;  // rad

using TimeFunction = std::function<double(double)>;

/// Three-pulse laser-phase model valid for time-dependent mirror motion.
/// `atom` is the atom state at the first pulse (t_pi - T) and `accel` the
/// atom's free-fall acceleration in the mirror-centred frame. The imprinted
/// phase at pulse i is
///   k_sign k_eff (z_i - z_mirror(t_i) - x_i theta(t_i)) - alpha (t_i - t_1)^2 / 2
/// where theta is the mirror tilt about the sensitive axis and x the atom's
/// horizontal distance from the rotation centre. Returns phi1 - 2 phi2 + phi3.
inline double phase_oracle(const InterferometerConfig& cfg, const BallisticState& atom,
                           const Vec3& accel, const TimeFunction& mirror_tilt,
                           const TimeFunction& mirror_displacement) {
  const double k = cfg.k_sign * cfg.k_eff;
  const double t1 = cfg.first_pulse();
  static constexpr double weight[3] = {1.0, -2.0, 1.0};
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double dt = i * cfg.T;
    const double t = t1 + dt;
    const BallisticState s = propagate(atom, dt, accel);
    const double theta = mirror_tilt ? mirror_tilt(t) : 0.0;
    if (std::abs(theta) >= kSmallAngleLimit) {
      throw SmallAngleViolation("mirror tilt " + std::to_string(theta) + " rad at t=" +
                                std::to_string(t));
    }
    const double z_mirror = mirror_displacement ? mirror_displacement(t) : 0.0;
    const double laser = k * (s.position.z() - z_mirror - s.position.x() * theta);
    const double chirp = 0.5 * cfg.alpha * dt * dt;
    total += weight[i] * (laser - chirp);
  }
  return total;
}

/// exp(-2 k^2 sigma_v^2 T^4 Omega_d^2)
inline double contrast_decay(double k_eff, double sigma_v, double T, double omega_d) {
  if (k_eff < 0 || sigma_v < 0 || T < 0 || omega_d < 0) {
    throw std::invalid_argument("contrast_decay: inputs must be >= 0");
  }
  const double x = k_eff * sigma_v * T * T * omega_d;
  return std::exp(-2.0 * x * x);
}

// Rotation amplitude at which contrast_decay falls to 1/e.
inline double contrast_decay_1e(double k_eff, double sigma_v, double T) {
  return 1.0 / (std::sqrt(2.0) * k_eff * sigma_v * T * T);
}

// Monte Carlo cloud. Each Cartesian coordinate is drawn by Latin-hypercube
// stratification of the Gaussian quantile function, which keeps the sample
// moments close to nominal at modest atom numbers.
struct AtomEnsemble {
  std::size_t n_atoms = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::uint64_t rng_seed = 0;
  double temperature = 0.0;

  struct Params {
    std::size_t n_atoms = 1000;
    double temperature = 1e-6;      // K
    double position_sigma = 0.0;    // m, rms cloud radius per axis
    Vec3 mean_position = Vec3::Zero();
    Vec3 mean_velocity = Vec3::Zero();
    std::uint64_t seed = 0;
    bool stratified = true;
  };

  static AtomEnsemble generate(const Params& p, const Species& species = {}) {
    if (p.n_atoms == 0) throw std::invalid_argument("AtomEnsemble: n_atoms must be >= 1");
    AtomEnsemble e;
    e.n_atoms = p.n_atoms;
    e.rng_seed = p.seed;
    e.temperature = p.temperature;
    e.positions.assign(p.n_atoms, p.mean_position);
    e.velocities.assign(p.n_atoms, p.mean_velocity);
    const double sigma_v = species.velocity_dispersion(p.temperature);
    const CounterRng root(p.seed, 0xa70e);
    for (int dim = 0; dim < 6; ++dim) {
      const double sigma = dim < 3 ? p.position_sigma : sigma_v;
      if (sigma == 0.0) continue;
      const std::vector<double> z = gaussian_column(root.substream(dim), p.n_atoms, p.stratified);
      for (std::size_t i = 0; i < p.n_atoms; ++i) {
        if (dim < 3) {
          e.positions[i][dim] += sigma * z[i];
        } else {
          e.velocities[i][dim - 3] += sigma * z[i];
        }
      }
    }
    return e;
  }

  double velocity_sigma(int axis) const {
    double mean = 0.0;
    for (const auto& v : velocities) mean += v[axis];
    mean /= static_cast<double>(n_atoms);
    double var = 0.0;
    for (const auto& v : velocities) var += (v[axis] - mean) * (v[axis] - mean);
    return std::sqrt(var / static_cast<double>(n_atoms - 1));
  }

 private:
  static std::vector<double> gaussian_column(const CounterRng& rng, std::size_t n,
                                             bool stratified) {
    std::vector<double> out(n);
    if (!stratified) {
      for (std::size_t i = 0; i < n; ++i) out[i] = rng.normal(i);
      return out;
    }
    // Random permutation of strata by sorting hashed keys.
    std::vector<std::uint64_t> keys(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = rng.bits(2 * i);
      order[i] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(order[i]) + rng.uniform(2 * i + 1)) /
                       static_cast<double>(n);
      out[i] = normal_quantile(u);
    }
    return out;
  }
};

/// Per-atom oracle phases for a whole ensemble. Positions and velocities
/// are taken at the first pulse.
inline std::vector<double> ensemble_phases(const InterferometerConfig& cfg,
                                           const AtomEnsemble& ensemble, const Vec3& accel,
                                           const TimeFunction& mirror_tilt,
                                           const TimeFunction& mirror_displacement,
                                           unsigned threads = 1) {
  std::vector<double> phases(ensemble.n_atoms);
  parallel_for(ensemble.n_atoms, threads, [&](std::size_t i) {
    BallisticState s{ensemble.positions[i], ensemble.velocities[i], cfg.first_pulse()};
    phases[i] = phase_oracle(cfg, s, accel, mirror_tilt, mirror_displacement);
  });
  return phases;
}

struct PhasorMean {
  double magnitude = 0.0;  // |<exp(i phi)>|
  double phase = 0.0;      // arg <exp(i phi)>
};

inline PhasorMean phasor_mean(std::span<const double> phases) {
  double c = 0.0, s = 0.0;
  for (double p : phases) {
    c += std::cos(p);
    s += std::sin(p);
  }
  const double n = static_cast<double>(phases.size());
  return {std::hypot(c, s) / n, std::atan2(s, c)};
}

struct FringeOutput {
  double p2 = 0.0;
  double contrast = 0.0;  // realized contrast C |<exp(i phi)>|
  double mean = 0.5;
  double delta_phi = 0.0;
  bool clamped = false;
};

struct DetectionModel {
  double contrast = 1.0;
  double mean = 0.5;
  double detection_noise = 0.0;  // rms on P2
  bool projection_noise = true;
  // Above this atom number the Bernoulli sum is drawn from its normal
  // approximation with the exact per-atom variance.
  std::size_t exact_bernoulli_limit = 20000;
};

/// Fluorescence readout. `phases` samples the per-atom phase distribution;
/// when it holds fewer entries than n_atoms each sample stands for
/// n_atoms / phases.size() atoms.
inline FringeOutput detect(std::span<const double> phases, std::size_t n_atoms,
                           const DetectionModel& model, RngStream& rng) {
  if (n_atoms < 1) throw std::invalid_argument("detect: n_atoms must be >= 1");
  if (phases.empty()) throw std::invalid_argument("detect: no phases");
  FringeOutput out;
  out.mean = model.mean;
  const PhasorMean pm = phasor_mean(phases);
  out.contrast = model.contrast * pm.magnitude;
  out.delta_phi = pm.phase;

  auto prob = [&](double phi) {
    return std::clamp(model.mean - 0.5 * model.contrast * std::cos(phi), 0.0, 1.0);
  };

  double p2 = 0.0;
  if (!model.projection_noise) {
    for (double phi : phases) p2 += prob(phi);
    p2 /= static_cast<double>(phases.size());
  } else if (phases.size() == n_atoms && n_atoms <= model.exact_bernoulli_limit) {
    std::size_t hits = 0;
    for (double phi : phases) hits += rng.uniform() < prob(phi) ? 1 : 0;
    p2 = static_cast<double>(hits) / static_cast<double>(n_atoms);
  } else {
    double mean_p = 0.0, mean_var = 0.0;
    for (double phi : phases) {
      const double p = prob(phi);
      mean_p += p;
      mean_var += p * (1.0 - p);
    }
    mean_p /= static_cast<double>(phases.size());
    mean_var /= static_cast<double>(phases.size());
    p2 = mean_p + std::sqrt(mean_var / static_cast<double>(n_atoms)) * rng.normal();
  }
  if (model.detection_noise > 0.0) p2 += model.detection_noise * rng.normal();
  if (p2 < 0.0 || p2 > 1.0) {
    out.clamped = true;
    p2 = std::clamp(p2, 0.0, 1.0);
  }
  out.p2 = p2;
  return out;
}

/// Per-shot phase noise 1/(C sqrt(N)) expressed as a rotation-rate
/// amplitude spectral density for a dual +-v gyroscope at the given shot rate.
inline double projection_noise_rotation_asd(double contrast, double n_atoms, double k_eff,
                                            double v_launch, double T, double shot_rate) {
  const double sigma_phi = 1.0 / (contrast * std::sqrt(n_atoms));
  return sigma_phi / (2.0 * k_eff * v_launch * T * T * std::sqrt(shot_rate));
}

}  // namespace atomsense
