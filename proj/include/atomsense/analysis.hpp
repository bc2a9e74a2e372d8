#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "atomsense/constants.hpp"
#include "atomsense/errors.hpp"
#include "atomsense/physics_core.hpp"

namespace atomsense {

// ---------------------------------------------------------------- Allan ----

struct AdevCurve {
  std::vector<double> taus;
  std::vector<double> sigmas;
  std::vector<double> ci_low;   // 1-sigma (68.3 %) chi-square interval
  std::vector<double> ci_high;
  std::vector<double> edf;

  std::size_t size() const { return taus.size(); }
};

// Equivalent degrees of freedom of the overlapping estimator, white FM
// approximation (Howe, Allan and Barnes 1981).
inline double adev_edf(std::size_t n, std::size_t m) {
  const double N = static_cast<double>(n);
  const double M = static_cast<double>(m);
  const double edf = (3.0 * (N - 1.0) / (2.0 * M) - 2.0 * (N - 2.0) / N) *
                     (4.0 * M * M) / (4.0 * M * M + 5.0);
  return std::max(edf, 1.0);
}

/// Overlapping Allan deviation of a series of fractional/rate samples taken
/// every dt. Each requested tau is rounded to a whole number of samples.
inline AdevCurve allan_deviation(std::span<const double> series, double dt,
                                 std::span<const double> taus) {
  if (!(dt > 0.0)) throw std::invalid_argument("allan_deviation: dt must be > 0");
  const std::size_t n = series.size();
  double tau_max = 0.0;
  for (double t : taus) tau_max = std::max(tau_max, t);
  if (static_cast<double>(n) < 3.0 * tau_max / dt - 1e-9 || n < 3) {
    throw SeriesTooShort("need " + std::to_string(3.0 * tau_max / dt) + " samples, have " +
                         std::to_string(n));
  }
  // Phase-like cumulative sum.
  std::vector<double> x(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) x[i + 1] = x[i] + series[i] * dt;

  AdevCurve curve;
  std::size_t last_m = 0;
  for (double tau : taus) {
    const auto m = static_cast<std::size_t>(std::max(1.0, std::round(tau / dt)));
    if (m <= last_m) throw std::invalid_argument("allan_deviation: taus must increase");
    last_m = m;
    const double t = static_cast<double>(m) * dt;
    const std::size_t terms = n + 1 - 2 * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < terms; ++j) {
      const double d = x[j + 2 * m] - 2.0 * x[j + m] + x[j];
      acc += d * d;
    }
    const double avar = acc / (2.0 * t * t * static_cast<double>(terms));
    const double sigma = std::sqrt(avar);
    const double edf = adev_edf(n, m);
    boost::math::chi_squared chi(edf);
    const double q_hi = boost::math::quantile(chi, 0.841344746);
    const double q_lo = boost::math::quantile(chi, 0.158655254);
    curve.taus.push_back(t);
    curve.sigmas.push_back(sigma);
    curve.ci_low.push_back(sigma * std::sqrt(edf / q_hi));
    curve.ci_high.push_back(sigma * std::sqrt(edf / q_lo));
    curve.edf.push_back(edf);
  }
  return curve;
}

// Octave-spaced taus from dt up to a third of the record.
inline std::vector<double> octave_taus(std::size_t n, double dt) {
  std::vector<double> out;
  for (std::size_t m = 1; 3 * m <= n; m *= 2) out.push_back(static_cast<double>(m) * dt);
  return out;
}

/// Fit sigma(tau) = h / sqrt(tau) over taus in [tau_lo, tau_hi] (log-space
/// mean of sigma sqrt(tau)); returns h, the white-noise amplitude density.
inline double white_floor(const AdevCurve& curve, double tau_lo, double tau_hi) {
  double acc = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve.taus[i] < tau_lo || curve.taus[i] > tau_hi) continue;
    acc += std::log(curve.sigmas[i] * std::sqrt(curve.taus[i]));
    ++count;
  }
  if (count == 0) throw std::invalid_argument("white_floor: no taus in range");
  return std::exp(acc / count);
}

/// Least-squares slope of log sigma against log tau over [tau_lo, tau_hi].
inline double adev_slope(const AdevCurve& curve, double tau_lo, double tau_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve.taus[i] < tau_lo || curve.taus[i] > tau_hi) continue;
    const double x = std::log(curve.taus[i]);
    const double y = std::log(curve.sigmas[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("adev_slope: need two taus in range");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// -------------------------------------------------------- fringe fitting ----

inline constexpr double kMinFitContrast = 0.02;

struct FringeFit {
  double mean = 0.0;
  double contrast = 0.0;
  double phase_offset = 0.0;  // wrapped to the branch nearest the hint
  std::vector<double> residuals;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (mean, contrast, phase)

  double model(double alpha, double T) const {
    return mean - 0.5 * contrast * std::cos(alpha * T * T + phase_offset);
  }
};

inline double wrap_near(double phase, double reference) {
  const double two_pi = 2.0 * std::numbers::pi;
  return phase - two_pi * std::round((phase - reference) / two_pi);
}

/// Least-squares fit of P2 = mean - (C/2) cos(alpha T^2 + phi). With the fringe
/// period fixed by T the model is linear in (mean, C cos phi, C sin phi);
/// solving that projection is the periodogram peak at the known frequency and
/// is already the least-squares optimum, so no iteration is needed.
inline FringeFit fit_fringe(std::span<const double> alphas, std::span<const double> p2s,
                            double T, double phase_hint = 0.0) {
  if (alphas.size() != p2s.size() || alphas.size() < 4) {
    throw FitFailed("need at least four matching points");
  }
  const auto [lo, hi] = std::minmax_element(alphas.begin(), alphas.end());
  const double span = (*hi - *lo) * T * T;
  if (span < 1.5 * 2.0 * std::numbers::pi - 1e-9) {
    throw FitFailed("scan spans " + std::to_string(span / (2 * std::numbers::pi)) +
                    " fringes, need 1.5");
  }
  const auto m = static_cast<Eigen::Index>(alphas.size());
  Eigen::MatrixXd design(m, 3);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = alphas[i] * T * T;
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(x);
    design(i, 2) = std::sin(x);
    y[i] = p2s[i];
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - design * coef;
  // -(C/2) cos(x + phi) = A cos x + B sin x with A = -(C/2) cos phi, B = (C/2) sin phi.
  const double a = coef[1];
  const double b = coef[2];
  FringeFit fit;
  fit.mean = coef[0];
  fit.contrast = 2.0 * std::hypot(a, b);
  fit.phase_offset = wrap_near(std::atan2(b, -a), phase_hint);
  fit.residuals.assign(res.data(), res.data() + m);
  if (fit.contrast < kMinFitContrast) {
    throw FitFailed("contrast " + std::to_string(fit.contrast) + " below threshold");
  }
  const double dof = static_cast<double>(std::max<Eigen::Index>(m - 3, 1));
  const Eigen::Matrix3d cov_lin =
      (design.transpose() * design).inverse() * (res.squaredNorm() / dof);
  const double r2 = a * a + b * b;
  Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
  jac(0, 0) = 1.0;
  jac(1, 1) = 2.0 * a / std::sqrt(r2);
  jac(1, 2) = 2.0 * b / std::sqrt(r2);
  // phi = atan2(b, -a)
  jac(2, 1) = b / r2;
  jac(2, 2) = -a / r2;
  fit.covariance = jac * cov_lin * jac.transpose();
  return fit;
}

struct ContrastDecayFit {
  double contrast0 = 0.0;
  double sigma_v = 0.0;      // m/s
  double temperature = 0.0;  // K
};

/// Fits C(Omega_d) = C0 exp(-2 k^2 sigma_v^2 T^4 Omega_d^2) by linear regression
/// of ln C on Omega_d^2 and converts sigma_v to an equivalent temperature.
inline ContrastDecayFit fit_contrast_decay(std::span<const double> omegas,
                                           std::span<const double> contrasts, double k_eff,
                                           double T, const Species& species = {}) {
  if (omegas.size() != contrasts.size() || omegas.size() < 2) {
    throw FitFailed("contrast decay fit needs two or more points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    if (!(contrasts[i] > 0.0)) throw FitFailed("non-positive contrast");
    const double x = omegas[i] * omegas[i];
    const double yv = std::log(contrasts[i]);
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  if (slope >= 0.0) throw FitFailed("contrast does not decay with rotation rate");
  ContrastDecayFit fit;
  fit.contrast0 = std::exp(intercept);
  fit.sigma_v = std::sqrt(-slope / (2.0 * k_eff * k_eff * std::pow(T, 4)));
  fit.temperature = species.mass * fit.sigma_v * fit.sigma_v / constants::boltzmann;
  return fit;
}

// --------------------------------------------------------------- wavefront --

struct WavefrontSpec {
  int order = 3;
  double amplitude = 0.0;        // rad / m^order
  double waist = 10.1e-3;        // m
  double optical_quality = 0.0;  // m, peak-to-valley wavefront error
  double wavelength = constants::rb87_d2_wavelength;

  /// Cubic aberration whose phase reaches 2 k OQ at the beam waist
  /// (double pass through the viewport): A3 = (2 pi / lambda) 2 OQ / w^3.
  static WavefrontSpec from_optical_quality(double oq, double waist,
                                            double wavelength = constants::rb87_d2_wavelength) {
    WavefrontSpec s;
    s.order = 3;
    s.optical_quality = oq;
    s.waist = waist;
    s.wavelength = wavelength;
    s.amplitude = (2.0 * constants::pi / wavelength * 2.0 * oq) / std::pow(waist, 3);
    return s;
  }

  void validate() const {
    if (order < 2) throw std::invalid_argument("WavefrontSpec: order must be >= 2");
    if (!(waist > 0.0)) throw std::invalid_argument("WavefrontSpec: waist must be > 0");
  }
};

/// Aberration phase phi1 - 2 phi2 + phi3 of one interferometer whose pulse
/// positions are x_i = side (dx + v t_i), t_i in {-T, 0, T}.
inline double wavefront_phase(const WavefrontSpec& spec, double v, double dx, double T,
                              int side) {
  static constexpr double weight[3] = {1.0, -2.0, 1.0};
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double t = (i - 1) * T;
    const double x = side * (dx + v * t);
    total += weight[i] * spec.amplitude * std::pow(x, spec.order);
  }
  return total;
}

/// Rotation error from a polynomial wavefront when the +v and -v
/// interferometers are offset by dx: (dPhi+ - dPhi-) / (4 v k T^2).
inline double wavefront_rotation_bias_polynomial(const WavefrontSpec& spec, double v, double dx,
                                                 double k_eff, double T) {
  spec.validate();
  const double plus = wavefront_phase(spec, v, dx, T, +1);
  const double minus = wavefront_phase(spec, v, dx, T, -1);
  return (plus - minus) / (4.0 * v * k_eff * T * T);
}

/// Cubic closed form 3 A3 v dx / k; even orders vanish identically.
inline double wavefront_rotation_bias(const WavefrontSpec& spec, double v, double dx,
                                      double k_eff, double T) {
  spec.validate();
  if (spec.order % 2 == 0) return 0.0;
  if (spec.order == 3) return 3.0 * spec.amplitude * v * dx / k_eff;
  return wavefront_rotation_bias_polynomial(spec, v, dx, k_eff, T);
}

// -------------------------------------------------------------- budget -----

// Sinusoidal drive Omega(t) = Omega_d cos(2 pi (t - T) / T_c + phi0), t from
// the first pulse. The mirror tilt is its integral, zero at the pi pulse
// when phi0 = 0.
struct DriveWaveform {
  double omega_d = 0.0;
  double phi0 = 0.0;
  double cycle_period = 0.5;
  double T = 0.040;

  double angular_frequency() const { return 2.0 * constants::pi / cycle_period; }
  double rate(double t) const {
    return omega_d * std::cos(angular_frequency() * (t - T) + phi0);
  }
  double rate_derivative(double t) const {
    const double w = angular_frequency();
    return -omega_d * w * std::sin(w * (t - T) + phi0);
  }
  double tilt(double t) const {
    const double w = angular_frequency();
    return omega_d / w * (std::sin(w * (t - T) + phi0) - std::sin(phi0));
  }
};

struct EulerCoriolis {
  double coriolis_phase = 0.0;  // rad
  double euler_phase = 0.0;     // rad
  double euler_fraction() const { return coriolis_phase == 0.0 ? 0.0 : euler_phase / coriolis_phase; }
};

/// Splits the oracle's -k x theta contribution for an atom at horizontal
/// offset d0 (at the pi pulse) moving at v into its Coriolis (v) and Euler
/// (d0) parts, using the exact drive tilt at the three pulses.
inline EulerCoriolis euler_coriolis_phases(const DriveWaveform& drive, double k_eff, double v,
                                           double d0) {
  const double T = drive.T;
  const double th1 = drive.tilt(0.0), th2 = drive.tilt(T), th3 = drive.tilt(2 * T);
  EulerCoriolis out;
  out.coriolis_phase = -k_eff * v * T * (th3 - th1);
  out.euler_phase = -k_eff * d0 * (th1 - 2.0 * th2 + th3);
  return out;
}

struct BudgetInputs {
  // wavefront
  WavefrontSpec wavefront = WavefrontSpec::from_optical_quality(
      constants::rb87_d2_wavelength / 6.0, 10.1e-3);
  double asymmetry_dx = 0.0;
  // geometry
  double v_launch = 0.082;
  double k_eff = Species{}.k_eff();
  double T = 0.040;
  // dynamic Euler term
  double d0 = 0.0;
  double phi0 = 0.0;
  double omega_d = 0.0;
  double cycle_period = 0.5;
  // centrifugal term: static rotation and atom offset from the rotation axis
  double omega_static = 0.0;
  Vec3 atom_offset = Vec3::Zero();
  // vertical misalignment
  double tilt = 0.0;
  double gravity = 9.80883;
};

struct BudgetRow {
  std::string term;
  std::string axis;
  double value = 0.0;
  std::string units;
};

/// Named bias terms for the configured geometry.
inline std::vector<BudgetRow> systematic_budget(const BudgetInputs& in) {
  std::vector<BudgetRow> rows;
  const double wf = in.asymmetry_dx == 0.0
                        ? 0.0
                        : wavefront_rotation_bias(in.wavefront, in.v_launch, in.asymmetry_dx,
                                                  in.k_eff, in.T);
  rows.push_back({"wavefront_order" + std::to_string(in.wavefront.order), "rotation", wf, "rad/s"});

  const DriveWaveform drive{in.omega_d, in.phi0, in.cycle_period, in.T};
  const EulerCoriolis ec = euler_coriolis_phases(drive, in.k_eff, in.v_launch, in.d0);
  const double scale = 2.0 * in.k_eff * in.v_launch * in.T * in.T;
  const double euler_rate = in.omega_d == 0.0 ? 0.0 : -ec.euler_phase / scale;
  rows.push_back({"euler", "rotation", euler_rate, "rad/s"});
  rows.push_back({"euler_fraction_of_coriolis", "rotation", ec.euler_fraction(), "1"});

  const Vec3 omega = in.omega_static * sensitive_axis();
  const double centrifugal = -Vec3::UnitZ().dot(omega.cross(omega.cross(in.atom_offset)));
  rows.push_back({"centrifugal", "acceleration", centrifugal, "m/s^2"});
  // Even in the launch direction, so the +-v difference cancels it.
  rows.push_back({"centrifugal_after_v_reversal", "rotation", 0.0, "rad/s"});

  rows.push_back({"vertical_misalignment", "acceleration",
                  in.gravity * (1.0 - std::cos(in.tilt)), "m/s^2"});
  return rows;
}

}  // namespace atomsense
