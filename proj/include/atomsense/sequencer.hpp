#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "atomsense/analysis.hpp"
#include "atomsense/errors.hpp"
#include "atomsense/interferometer.hpp"
#include "atomsense/parallel.hpp"
#include "atomsense/physics_core.hpp"
#include "atomsense/rng.hpp"
#include "atomsense/sensors_noise.hpp"

namespace atomsense {

// Index of the four (k, v) configurations in every per-configuration array.
inline constexpr int kPkPv = 0;
inline constexpr int kPkMv = 1;
inline constexpr int kMkPv = 2;
inline constexpr int kMkMv = 3;

template <class Real>
using BasicConfigQuad = std::array<Real, 4>;
using ConfigQuad = BasicConfigQuad<double>;

inline int config_index(int k_sign, int v_sign) {
  if (k_sign > 0) return v_sign > 0 ? kPkPv : kPkMv;
  return v_sign > 0 ? kMkPv : kMkMv;
}

struct ShotSlot {
  int k_sign = 1;
  int v_sign = 1;
  int side = 1;  // +1: alpha + delta, -1: alpha - delta
  int config = kPkPv;
};

/// Position of a shot inside the 8-shot static pattern
/// (+k,+v)x2 (-k,+v)x2 (+k,-v)x2 (-k,-v)x2, each pair probing both fringe sides.
inline ShotSlot static_slot(std::size_t shot) {
  const std::size_t j = shot % 8;
  ShotSlot s;
  s.v_sign = j < 4 ? 1 : -1;
  s.k_sign = (j / 2) % 2 == 0 ? 1 : -1;
  s.side = j % 2 == 0 ? 1 : -1;
  s.config = config_index(s.k_sign, s.v_sign);
  return s;
}

/// Chirp rate nulling the phase for constant a and Omega along the
/// sensitive axis: k_sign k (a - 2 v_sign v Omega).
template <class Real = double>
Real ideal_alpha(int k_sign, int v_sign, std::type_identity_t<Real> a, std::type_identity_t<Real> omega,
                 std::type_identity_t<Real> v, std::type_identity_t<Real> k) {
  return Real(k_sign) * k * (a - Real(2) * Real(v_sign) * v * omega);
}

template <class Real = double>
BasicConfigQuad<Real> ideal_alphas(std::type_identity_t<Real> a, std::type_identity_t<Real> omega,
                                   std::type_identity_t<Real> v, std::type_identity_t<Real> k) {
  BasicConfigQuad<Real> out{};
  for (int ks : {1, -1}) {
    for (int vs : {1, -1}) out[config_index(ks, vs)] = ideal_alpha<Real>(ks, vs, a, omega, v, k);
  }
  return out;
}

template <class Real>
struct BasicStaticEstimate {
  Real a = 0;
  Real omega = 0;       // vibration corrected
  Real omega_raw = 0;   // before the classical correction
  Real correction = 0;  // Delta a_corr / 8 v
};
using StaticEstimate = BasicStaticEstimate<double>;

/// a     = [(a+k,-v - a-k,-v) + (a+k,+v - a-k,+v)] / 4k
/// Omega = [(a+k,-v - a-k,-v) - (a+k,+v - a-k,+v)] / 8 v k + Delta a_corr / 8 v
/// with Delta a_corr built from the classical accelerometer's convolved
/// readings per configuration.
template <class Real = double>
BasicStaticEstimate<Real> demodulate_static(const std::type_identity_t<BasicConfigQuad<Real>>& alpha,
                                            const std::type_identity_t<BasicConfigQuad<Real>>& a_conv,
                                            std::type_identity_t<Real> v, std::type_identity_t<Real> k) {
  if (!(v > 0) || !(k > 0)) throw std::invalid_argument("demodulate_static: v and k must be > 0");
  const Real minus_v = alpha[kPkMv] - alpha[kMkMv];
  const Real plus_v = alpha[kPkPv] - alpha[kMkPv];
  BasicStaticEstimate<Real> out;
  out.a = (minus_v + plus_v) / (Real(4) * k);
  out.omega_raw = (minus_v - plus_v) / (Real(8) * v * k);
  const Real delta = a_conv[kPkPv] + a_conv[kMkPv] - a_conv[kPkMv] - a_conv[kMkMv];
  out.correction = delta / (Real(8) * v);
  out.omega = out.omega_raw + out.correction;
  return out;
}

// ------------------------------------------------------------ fringe lock ----

inline double mid_fringe_offset(double T) { return constants::pi / (2.0 * T * T); }

struct MidFringeLock {
  double alpha = 0.0;     // rad/s^2, current fringe-centre estimate
  double contrast = 1.0;  // nominal contrast used to scale the error signal
  double T = 0.040;
  double gain = 0.6;
  double threshold = 0.9;  // |P+ - P-| / C beyond which the update is not linear
  int max_strikes = 3;
  int strikes = 0;
};

struct LockStep {
  double alpha_estimate = 0.0;  // in-loop estimate from this pair
  double error = 0.0;           // (P+ - P-) / C = -sin(psi)
};

/// One servo update from the pair measured at alpha +- pi / 2T^2.
/// P+ - P- = -C sin(psi) with psi the phase of the fringe centre relative to
/// the current lock point.
inline LockStep mid_fringe_step(MidFringeLock& lock, double p_plus, double p_minus) {
  const double err = (p_plus - p_minus) / lock.contrast;
  if (std::abs(err) > lock.threshold) {
    if (++lock.strikes >= lock.max_strikes) {
      throw FringeLost(std::to_string(lock.strikes) +
                       " consecutive updates outside the linear range");
    }
  } else {
    lock.strikes = 0;
  }
  const double correction = -err / (lock.T * lock.T);
  LockStep step{lock.alpha + correction, err};
  lock.alpha += lock.gain * correction;
  return step;
}

// -------------------------------------------------------- atomic drifts ----

/// Slow drift of an atomic output: a bias random walk plus a flicker-like
/// floor built from Gauss-Markov terms whose correlation times are spaced
/// by 4x; with unit variance each, their sum gives an Allan deviation close
/// to flicker_floor between about 8 tau_min and half the longest time.
struct AtomicDrift {
  double rw_coeff = 0.0;       // unit/sqrt(s)
  double flicker_floor = 0.0;  // unit
  double tau_min = 30.0;       // s
  int terms = 6;

  bool enabled() const { return rw_coeff > 0.0 || flicker_floor > 0.0; }
};

inline std::vector<double> drift_series(const AtomicDrift& d, std::size_t n, double dt,
                                        std::uint64_t seed, std::uint64_t stream) {
  std::vector<double> out(n, 0.0);
  if (!d.enabled()) return out;
  const CounterRng rng(seed, stream);
  double walk = 0.0;
  std::vector<double> gm(static_cast<std::size_t>(std::max(d.terms, 0)), 0.0);
  const double walk_sigma = d.rw_coeff * std::sqrt(dt);
  std::uint64_t c = 0;
  for (std::size_t j = 0; j < gm.size(); ++j) gm[j] = d.flicker_floor * rng.normal(c++);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = walk;
    double tau = d.tau_min;
    for (std::size_t j = 0; j < gm.size(); ++j, tau *= 4.0) {
      const double phi = std::exp(-dt / tau);
      if (i > 0) gm[j] = phi * gm[j] + d.flicker_floor * std::sqrt(1.0 - phi * phi) * rng.normal(c++);
      sum += gm[j];
    }
    out[i] = sum;
    if (walk_sigma > 0.0) walk += walk_sigma * rng.normal(c++);
  }
  return out;
}

// ------------------------------------------------------- static campaign ----

struct CycleConfig {
  double cycle_period = 0.5;  // s per shot
  double T = 0.040;
  double v_launch = 0.082;  // m/s
  double pi_delay = 0.1;    // s from cycle start to the pi pulse
  double lock_gain = 0.6;
  double lock_threshold = 0.9;

  void validate() const {
    if (!(cycle_period > 0.0) || !(T > 0.0) || !(v_launch > 0.0)) {
      throw std::invalid_argument("CycleConfig: period, T and v must be > 0");
    }
    if (pi_delay < T || pi_delay + T > cycle_period) {
      throw std::invalid_argument("CycleConfig: pulses must fit inside one cycle");
    }
    if (!(lock_gain > 0.0 && lock_gain <= 1.0)) {
      throw std::invalid_argument("CycleConfig: lock gain must be in (0,1]");
    }
  }
};

struct StaticScene {
  Species species;
  CycleConfig cycle;
  double gravity = 9.80883;     // m/s^2 along z
  double vertical_tilt = 0.0;   // rad, k_eff misalignment from vertical
  double omega = 4.82e-5;       // rad/s along the sensitive axis
  VibrationModel vibration;
  double vibration_rate = 250.0;  // Hz
  bool vibration_correction = true;
  ClassicalSensorModel accelerometer;
  ClassicalSensorModel gyroscope;
  DetectionModel detection;
  double n_atoms = 1.0e5;
  std::size_t macro_atoms = 16;
  double temperature = 1.0e-6;   // K
  double launch_jitter = 0.0;    // m/s rms per shot
  AtomicDrift accel_drift;
  AtomicDrift rotation_drift;
  std::optional<WavefrontSpec> wavefront;
  double wavefront_dx = 0.0;  // m, offset between the +v and -v trajectories
  bool rabi_weighting = false;
  double beam_waist = 10.1e-3;

  void validate() const {
    species.validate();
    cycle.validate();
    vibration.validate();
    accelerometer.validate();
    gyroscope.validate();
    if (!(n_atoms >= 1.0) || macro_atoms < 1) {
      throw std::invalid_argument("StaticScene: need at least one atom");
    }
    if (temperature < 0.0 || launch_jitter < 0.0) {
      throw std::invalid_argument("StaticScene: temperature and jitter must be >= 0");
    }
  }
};

struct MeasurementRecord {
  double t = 0.0;  // start of the 8-shot block
  ConfigQuad alpha{};
  ConfigQuad a_conv{};      // classical convolved reading per configuration
  double a = 0.0;
  double omega = 0.0;
  double omega_raw = 0.0;
  double correction = 0.0;  // Delta a_corr / 8 v
};

struct ShotRecord {
  double t_pi = 0.0;
  int k_sign = 1;
  int v_sign = 1;
  int side = 1;
  double alpha = 0.0;  // chirp applied
  double p2 = 0.0;
  double a_conv_true = 0.0;
  double a_conv_classical = 0.0;
};

struct StaticCampaign {
  std::vector<MeasurementRecord> records;
  std::vector<ShotRecord> shots;
  SensorTrace accelerometer;  // cycle-rate classical outputs
  SensorTrace gyroscope;
  double record_period = 0.0;
};

namespace detail {

// Fraction of atoms addressed with full Rabi frequency in a Gaussian beam,
// applied as a contrast reduction.
inline double rabi_contrast_weight(const AtomEnsemble& ens, double v, double T, double waist) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.n_atoms; ++i) {
    double w = 1.0;
    for (int p = 0; p < 3; ++p) {
      const double x = ens.positions[i].x() + (ens.velocities[i].x() + v) * p * T;
      const double y = ens.positions[i].y() + ens.velocities[i].y() * p * T;
      w *= std::exp(-(x * x + y * y) / (waist * waist));
    }
    acc += w;
  }
  return acc / static_cast<double>(ens.n_atoms);
}

}  // namespace detail

/// Closed-loop static campaign. Every shot samples one side of the fringe of
/// its (k, v) configuration; pairs update that configuration's mid-fringe
/// lock and every 8 shots produce one MeasurementRecord. The mirror follows
/// the generated vibration; the classical accelerometer sees the same
/// vibration plus an independent residual_fraction-weighted copy.
inline StaticCampaign run_static_campaign(const StaticScene& scene, double duration,
                                          std::uint64_t seed, unsigned threads = 1) {
  scene.validate();
  const CycleConfig& cyc = scene.cycle;
  const double k = scene.species.k_eff();
  const double T = cyc.T;
  const double v = cyc.v_launch;
  const auto blocks = static_cast<std::size_t>(std::floor(duration / (8.0 * cyc.cycle_period) + 1e-9));
  if (blocks < 1) throw std::invalid_argument("run_static_campaign: duration shorter than one block");
  const std::size_t n_shots = blocks * 8;
  const double span = static_cast<double>(n_shots) * cyc.cycle_period;

  const SensorTrace vib = gen_vibration(scene.vibration, span, scene.vibration_rate, seed ^ 0x01);
  VibrationModel residual_model = scene.vibration;
  const SensorTrace residual =
      gen_vibration(residual_model, span, scene.vibration_rate, seed ^ 0x02);
  const double rf = scene.vibration.residual_fraction;

  // Convolved vibration per shot; independent work, so threads are safe here.
  std::vector<double> conv_true(n_shots), conv_residual(n_shots);
  parallel_for(n_shots, threads, [&](std::size_t i) {
    const double t_pi = static_cast<double>(i) * cyc.cycle_period + cyc.pi_delay;
    conv_true[i] = convolve_sensitivity(vib, t_pi, T);
    conv_residual[i] = convolve_sensitivity(residual, t_pi, T);
  });

  const double a_true = scene.gravity * std::cos(scene.vertical_tilt);
  const double rec_period = 8.0 * cyc.cycle_period;
  const std::vector<double> drift_a = drift_series(scene.accel_drift, n_shots, cyc.cycle_period, seed, 0xd1);
  const std::vector<double> drift_w = drift_series(scene.rotation_drift, n_shots, cyc.cycle_period, seed, 0xd2);

  AtomEnsemble ens = AtomEnsemble::generate(
      {scene.macro_atoms, scene.temperature, 0.0, Vec3::Zero(), Vec3::Zero(), seed ^ 0xe5, true},
      scene.species);
  DetectionModel det = scene.detection;
  if (scene.rabi_weighting) {
    det.contrast *= detail::rabi_contrast_weight(ens, v, T, scene.beam_waist);
  }

  std::array<MidFringeLock, 4> locks;
  for (int ks : {1, -1}) {
    for (int vs : {1, -1}) {
      MidFringeLock& l = locks[config_index(ks, vs)];
      l.alpha = ideal_alpha(ks, vs, a_true, scene.omega, v, k);
      l.contrast = scene.detection.contrast;
      l.T = T;
      l.gain = cyc.lock_gain;
      l.threshold = cyc.lock_threshold;
    }
  }

  StaticCampaign out;
  out.record_period = rec_period;
  out.records.reserve(blocks);
  out.shots.reserve(n_shots);
  const CounterRng jitter_rng(seed, 0x7a);
  const double delta = mid_fringe_offset(T);
  std::vector<double> phases(ens.n_atoms);
  MeasurementRecord rec;
  std::array<double, 2> pair_p{};
  std::array<double, 2> pair_cl{};

  for (std::size_t i = 0; i < n_shots; ++i) {
    const ShotSlot slot = static_slot(i);
    const double t_pi = static_cast<double>(i) * cyc.cycle_period + cyc.pi_delay;
    const double dv = scene.launch_jitter > 0.0 ? scene.launch_jitter * jitter_rng.normal(i) : 0.0;
    MidFringeLock& lock = locks[slot.config];
    const double alpha = lock.alpha + slot.side * delta;

    // Mirror vibration and atomic drifts enter as accelerations / rates.
    const double a_eff = a_true - conv_true[i] + drift_a[i];
    const double w_eff = scene.omega + drift_w[i];
    double extra = 0.0;
    if (scene.wavefront) {
      extra = -slot.k_sign * wavefront_phase(*scene.wavefront, v, scene.wavefront_dx, T, slot.v_sign);
    }
    const double kk = slot.k_sign * k;
    for (std::size_t j = 0; j < ens.n_atoms; ++j) {
      // Thermal spread along the launch axis is not reversed with v.
      const double vx = slot.v_sign * (v + dv) + ens.velocities[j].x();
      phases[j] = (kk * (a_eff - 2.0 * vx * w_eff) - alpha) * T * T + extra;
    }
    RngStream rng(CounterRng(seed, 0x5e7).substream(i));
    const FringeOutput fo = detect(phases, static_cast<std::size_t>(scene.n_atoms), det, rng);

    const double cl = a_true - conv_true[i] - rf * conv_residual[i];
    out.shots.push_back({t_pi, slot.k_sign, slot.v_sign, slot.side, alpha, fo.p2, conv_true[i], cl});
    const std::size_t pos = i % 2;
    pair_p[pos] = fo.p2;
    pair_cl[pos] = cl;
    if (pos == 1) {
      const LockStep step = mid_fringe_step(lock, pair_p[0], pair_p[1]);
      rec.alpha[slot.config] = step.alpha_estimate;
      rec.a_conv[slot.config] = 0.5 * (pair_cl[0] + pair_cl[1]);
    }
    if (i % 8 == 7) {
      rec.t = static_cast<double>(i - 7) * cyc.cycle_period;
      ConfigQuad conv = rec.a_conv;
      if (!scene.vibration_correction) conv.fill(0.0);
      const StaticEstimate est = demodulate_static(rec.alpha, conv, v, k);
      rec.a = est.a;
      rec.omega = est.omega;
      rec.omega_raw = est.omega_raw;
      rec.correction = est.correction;
      out.records.push_back(rec);
    }
  }

  // Classical sensors sampled once per cycle, averaging over the cycle.
  const double rate = 1.0 / cyc.cycle_period;
  SensorTrace accel_truth{rate, 0.0, std::vector<double>(n_shots)};
  SensorTrace gyro_truth{rate, 0.0, std::vector<double>(n_shots, scene.omega)};
  const std::size_t per_cycle = static_cast<std::size_t>(std::llround(cyc.cycle_period * vib.sample_rate));
  for (std::size_t i = 0; i < n_shots; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < per_cycle; ++j) {
      const std::size_t idx = i * per_cycle + j;
      s += vib.samples[idx] + rf * residual.samples[idx];
    }
    accel_truth.samples[i] = a_true - s / static_cast<double>(per_cycle);
  }
  out.accelerometer = sample_classical(scene.accelerometer, accel_truth, seed ^ 0xacc);
  out.gyroscope = sample_classical(scene.gyroscope, gyro_truth, seed ^ 0x9e0);
  return out;
}

// ------------------------------------------------------- dynamic rotation ----

struct DynamicDrive {
  double omega_d = 0.0;      // rad/s amplitude
  double phi0 = 0.0;         // rad
  Vec3 axis = Vec3::UnitX(); // drive axis in the gyro frame (X: sensitive axis, Z: vertical)
  double beta_plus = 0.0;    // rad, sensitive-axis tilt of the +v trajectory
  double beta_minus = 0.0;   // rad, same for -v

  double beta(int v_sign) const { return v_sign > 0 ? beta_plus : beta_minus; }
  // Projection of the drive onto the sensitive axis of one trajectory.
  double projection(int v_sign) const {
    const double b = beta(v_sign);
    return axis.normalized().dot(Vec3(std::cos(b), std::sin(b), 0.0));
  }

  void validate() const {
    if (omega_d < 0.0) throw std::invalid_argument("DynamicDrive: omega_d must be >= 0");
    if (!(axis.norm() > 0.0)) throw std::invalid_argument("DynamicDrive: axis must be non-zero");
  }
};

/// Rotation seen by a single-axis reading tilted by beta in the X-Y plane.
inline double project_classical_rotation(double omega_x, double omega_y, double beta) {
  return omega_x * std::cos(beta) + omega_y * std::sin(beta);
}

struct DynamicScene {
  Species species;
  CycleConfig cycle;
  double gravity = 9.80883;
  double omega_static = 4.82e-5;  // rad/s along the sensitive axis
  DynamicDrive drive;
  double d0 = 0.0;                // m, trajectory offset from the rotation axis at the pi pulse
  VibrationModel vibration;
  double vibration_rate = 250.0;
  bool vibration_correction = true;
  DetectionModel detection;
  double n_atoms = 1.0e5;
  std::size_t macro_atoms = 400;
  double temperature = 1.0e-6;
  std::size_t shots_per_scan = 200;
  double span_fringes = 2.0;

  void validate() const {
    species.validate();
    cycle.validate();
    vibration.validate();
    if (shots_per_scan < 4) throw std::invalid_argument("DynamicScene: need at least 4 shots");
    if (span_fringes < 1.5) throw std::invalid_argument("DynamicScene: scan must span 1.5 fringes");
    if (macro_atoms < 1) throw std::invalid_argument("DynamicScene: need at least one atom");
    drive.validate();
  }

  DriveWaveform waveform(double omega_d) const {
    return {omega_d, drive.phi0, cycle.cycle_period, cycle.T};
  }
};

/// Rate a single interferometer actually integrates: the tilt change between
/// the outer pulses divided by 2T.
inline double coriolis_weighted_rate(const DriveWaveform& wave) {
  return (wave.tilt(2.0 * wave.T) - wave.tilt(0.0)) / (2.0 * wave.T);
}

struct FringeScanResult {
  int k_sign = 1;
  int v_sign = 1;
  double omega_d = 0.0;
  double alpha_center = 0.0;
  double alpha_star = 0.0;
  double alpha_star_err = 0.0;
  double contrast = 0.0;
  std::vector<double> alphas;
  std::vector<double> alphas_corrected;
  std::vector<double> p2;
};

/// Scans alpha over the configured number of fringes with the drive running,
/// moves each shot by its classically measured vibration, fits the fringe and
/// returns the centring chirp rate nearest the scan centre. The scan is
/// centred on the rotation the classical gyroscope reports, which resolves
/// the fringe ambiguity once the drive moves the phase by more than pi.
inline FringeScanResult run_fringe_scan(const DynamicScene& scene, int k_sign, int v_sign,
                                        double omega_d, std::uint64_t seed,
                                        unsigned threads = 1) {
  scene.validate();
  const CycleConfig& cyc = scene.cycle;
  const double k = scene.species.k_eff();
  const double T = cyc.T;
  const double v = cyc.v_launch;
  const std::size_t n = scene.shots_per_scan;
  const DriveWaveform wave = scene.waveform(omega_d);
  const double proj = scene.drive.projection(v_sign);

  const double span_t = static_cast<double>(n) * cyc.cycle_period;
  const SensorTrace vib = gen_vibration(scene.vibration, span_t, scene.vibration_rate, seed ^ 0x11);
  const SensorTrace residual = gen_vibration(scene.vibration, span_t, scene.vibration_rate, seed ^ 0x12);
  const double rf = scene.vibration.residual_fraction;

  AtomEnsemble ens = AtomEnsemble::generate(
      {scene.macro_atoms, scene.temperature, 0.0, Vec3::Zero(), Vec3::Zero(), seed ^ 0xe6, true},
      scene.species);

  FringeScanResult out;
  out.k_sign = k_sign;
  out.v_sign = v_sign;
  out.omega_d = omega_d;
  const double omega_prior = scene.omega_static + proj * coriolis_weighted_rate(wave);
  out.alpha_center = ideal_alpha(k_sign, v_sign, scene.gravity, omega_prior, v, k);
  const double fringe = 2.0 * constants::pi / (T * T);
  out.alphas.resize(n);
  out.alphas_corrected.resize(n);
  out.p2.resize(n);
  std::vector<double> conv_cl(n);
  const Vec3 accel(0.0, 0.0, scene.gravity);

  for (std::size_t i = 0; i < n; ++i) {
    const double t_pi = static_cast<double>(i) * cyc.cycle_period + cyc.pi_delay;
    const double t1 = t_pi - T;
    const double rel = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) - 0.5 : 0.0;
    const double alpha = out.alpha_center + scene.span_fringes * fringe * rel;
    InterferometerConfig cfg;
    cfg.T = T;
    cfg.k_sign = k_sign;
    cfg.v_sign = v_sign;
    cfg.alpha = alpha;
    cfg.t_pi = t_pi;
    cfg.k_eff = k;
    const TimeFunction tilt = [&](double t) {
      return scene.omega_static * (t - t_pi) + proj * wave.tilt(t - t1);
    };
    const double c_true = convolve_sensitivity(vib, t_pi, T);
    const double c_res = convolve_sensitivity(residual, t_pi, T);
    conv_cl[i] = -c_true - rf * c_res;
    const double vib_phase = -k_sign * k * c_true * T * T;

    std::vector<double> phases(ens.n_atoms);
    parallel_for(ens.n_atoms, threads, [&](std::size_t j) {
      const double vx = v_sign * v + ens.velocities[j].x();
      BallisticState s{Vec3(scene.d0 - vx * T + ens.positions[j].x(), ens.positions[j].y(),
                            ens.positions[j].z()),
                       Vec3(vx, ens.velocities[j].y(), ens.velocities[j].z()), t1};
      phases[j] = phase_oracle(cfg, s, accel, tilt, nullptr) + vib_phase;
    });
    RngStream rng(CounterRng(seed, 0x5ca).substream(i));
    out.p2[i] = detect(phases, static_cast<std::size_t>(scene.n_atoms), scene.detection, rng).p2;
    out.alphas[i] = alpha;
  }

  double mean_cl = 0.0;
  for (double c : conv_cl) mean_cl += c;
  mean_cl /= static_cast<double>(n);
  std::vector<double> rel_alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double shift = scene.vibration_correction ? k_sign * k * (conv_cl[i] - mean_cl) : 0.0;
    out.alphas_corrected[i] = out.alphas[i] - shift;
    rel_alpha[i] = out.alphas_corrected[i] - out.alpha_center;
  }
  const FringeFit fit = fit_fringe(rel_alpha, out.p2, T, 0.0);
  out.alpha_star = out.alpha_center - fit.phase_offset / (T * T);
  out.alpha_star_err = std::sqrt(fit.covariance(2, 2)) / (T * T);
  out.contrast = fit.contrast;
  return out;
}

struct ScanAlphas {
  double pk_drive = 0.0;
  double mk_drive = 0.0;
  double pk_ref = 0.0;  // Omega_d = 0
  double mk_ref = 0.0;
};

/// Rotation from the +-k fringe centres with and without the drive:
///   Omega = [(a+k - a-k)_drive - (a+k - a-k)_ref] / (-4 v k)
/// with v the signed launch velocity of the dataset. For the -v dataset
/// this is the usual form with |v|; the sign follows the static convention.
inline double demodulate_dynamic(const ScanAlphas& s, double v_signed, double k) {
  if (v_signed == 0.0 || !(k > 0.0)) throw std::invalid_argument("demodulate_dynamic: v and k must be non-zero");
  return ((s.pk_drive - s.mk_drive) - (s.pk_ref - s.mk_ref)) / (-4.0 * v_signed * k);
}


}  // namespace atomsense
