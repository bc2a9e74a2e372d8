#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atomsense/constants.hpp"
#include "atomsense/errors.hpp"
#include "atomsense/least_squares.hpp"
#include "atomsense/physics_core.hpp"
#include "atomsense/rng.hpp"

namespace atomsense {

enum class RamanBranch { co_prop, counter_prop_plus, counter_prop_minus };

struct RamanLine {
  double center = 0.0;     // Hz, relative to the hyperfine splitting
  double width = 1.0;      // Hz, Fourier width 1 / tau
  double amplitude = 0.0;
  RamanBranch branch = RamanBranch::co_prop;
};

struct TplsParams {
  double rabi = 0.0;     // rad/s, effective Rabi frequency
  double doppler = 0.0;  // rad/s, k v
  double recoil = 0.0;   // rad/s, hbar k^2 / 2m
};

inline constexpr double kTplsPoleEpsilon = 1e-6;  // relative to 16 omega_r

/// Two-photon light shift of the counter-propagating splitting:
///   -Omega^2 [1/(4 wD) + 1/(8 wD + 16 wr) + 1/(8 wD - 16 wr)]
inline double tpls_shift(const TplsParams& p) {
  if (!(p.recoil > 0.0)) throw std::invalid_argument("tpls_shift: recoil must be > 0");
  if (p.doppler == 0.0) throw DegenerateDoppler("Doppler frequency is zero");
  const double eps = kTplsPoleEpsilon * 16.0 * p.recoil;
  const double minus = 8.0 * p.doppler - 16.0 * p.recoil;
  const double plus = 8.0 * p.doppler + 16.0 * p.recoil;
  if (std::abs(minus) < eps || std::abs(plus) < eps) {
    throw DegenerateDoppler("8 wD = +-16 wr resonance");
  }
  const double w2 = p.rabi * p.rabi;
  return -w2 * (1.0 / (4.0 * p.doppler) + 1.0 / plus + 1.0 / minus);
}

/// v = pi dnu / k_eff
inline double velocity_from_splitting(double splitting_hz, double k_eff) {
  return constants::pi * splitting_hz / k_eff;
}

inline double splitting_from_velocity(double v, double k_eff) {
  return k_eff * v / constants::pi;
}

// Two-level Rabi transition probability for a square pulse, detuning in rad/s.
inline double rabi_probability(double detuning, double rabi, double duration) {
  const double w2 = rabi * rabi + detuning * detuning;
  if (w2 == 0.0) return 0.0;
  const double s = std::sin(0.5 * std::sqrt(w2) * duration);
  return rabi * rabi / w2 * s * s;
}

struct SpectrumPoint {
  double freq_offset_hz = 0.0;
  double p2 = 0.0;
  double p2_err = 0.0;
};

struct Spectrum {
  std::vector<SpectrumPoint> points;
  double pulse_duration = 20e-6;
  double rabi = constants::pi / 20e-6;
  std::vector<RamanLine> lines;  // generating lines, for reference
};

struct SpectrumModel {
  double side_amplitude = 0.45;
  double co_prop_amplitude = 0.20;
  double noise_sigma = 0.0;       // rms on each P2 point
  double k_eff = Species{}.k_eff();
  double recoil = Species{}.recoil();
  bool include_tpls = true;
};

inline double spectrum_value(std::span<const RamanLine> lines, double f_hz, double rabi,
                             double duration) {
  double p = 0.0;
  for (const auto& line : lines) {
    p += line.amplitude *
         rabi_probability(2.0 * constants::pi * (f_hz - line.center), rabi, duration);
  }
  return p;
}

/// Counter-propagating lines sit at +-wD + wr (the recoil cancels in their
/// difference) and each is pulled by the light shift, so the splitting moves
/// by 2 tpls_shift. The co-propagating pair is Doppler free at zero offset.
inline std::vector<RamanLine> raman_lines(double v, double pulse_duration, double rabi,
                                          const SpectrumModel& model) {
  const double wd = model.k_eff * v;
  double shift = 0.0;
  if (model.include_tpls && wd != 0.0) {
    shift = tpls_shift({rabi, wd, model.recoil});
  }
  const double two_pi = 2.0 * constants::pi;
  const double width = 1.0 / pulse_duration;
  return {
      {(wd + model.recoil + shift) / two_pi, width, model.side_amplitude,
       RamanBranch::counter_prop_plus},
      {(-wd + model.recoil - shift) / two_pi, width, model.side_amplitude,
       RamanBranch::counter_prop_minus},
      {0.0, width, model.co_prop_amplitude, RamanBranch::co_prop},
  };
}

// Default scan: n points symmetric about zero covering both side peaks plus
// two Fourier widths.
inline std::vector<double> default_grid(double v_expected, double pulse_duration, double k_eff,
                                        std::size_t n = 100) {
  const double half = 0.5 * splitting_from_velocity(std::abs(v_expected), k_eff) +
                      2.0 / pulse_duration;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

inline Spectrum simulate_spectrum(double v, double pulse_duration, double rabi,
                                  std::span<const double> grid, const SpectrumModel& model,
                                  RngStream& rng) {
  if (grid.size() < 5) throw GridTooNarrow("fewer than five grid points");
  Spectrum s;
  s.pulse_duration = pulse_duration;
  s.rabi = rabi;
  s.lines = raman_lines(v, pulse_duration, rabi, model);
  const double margin = 1.0 / pulse_duration;
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  for (const auto& line : s.lines) {
    if (line.center - margin < *lo || line.center + margin > *hi) {
      throw GridTooNarrow("grid [" + std::to_string(*lo) + ", " + std::to_string(*hi) +
                          "] Hz misses line at " + std::to_string(line.center) + " Hz");
    }
  }
  s.points.reserve(grid.size());
  for (double f : grid) {
    double p = spectrum_value(s.lines, f, rabi, pulse_duration);
    if (model.noise_sigma > 0.0) p += model.noise_sigma * rng.normal();
    s.points.push_back({f, p, model.noise_sigma});
  }
  return s;
}

struct VelocityFit {
  double v = 0.0;
  double stat_err = 0.0;
  double splitting_raw = 0.0;  // Hz, as fitted
  double splitting = 0.0;      // Hz, after optional light-shift removal
  double center_plus = 0.0;
  double center_minus = 0.0;
};

struct PeakSearch {
  double exclusion_fraction = 0.5;  // central window half-width, in units of 1 / tau
  double candidate_threshold = 0.5; // relative to the tallest off-centre maximum
};

namespace detail {

inline double parabolic_vertex(double x0, double x1, double x2, double y0, double y1, double y2) {
  const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
  if (a >= 0.0) return x1;
  return -b / (2.0 * a);
}

}  // namespace detail

/// Locates the two counter-propagating peaks (highest local maxima outside
/// the central window, parabolic vertex as the starting point), refines all
/// line centres and amplitudes by least squares against the Rabi line shape,
/// and converts the splitting to a velocity.
inline VelocityFit fit_velocity(const Spectrum& spectrum, double k_eff, bool correct_tpls,
                                const TplsParams& tpls, const PeakSearch& search = {}) {
  const auto& pts = spectrum.points;
  const std::size_t n = pts.size();
  if (n < 5) throw PeakNotFound("spectrum too short");
  const double exclusion = search.exclusion_fraction / spectrum.pulse_duration;

  std::vector<std::size_t> maxima;
  double tallest = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (std::abs(pts[i].freq_offset_hz) < exclusion) continue;
    if (pts[i].p2 > pts[i - 1].p2 && pts[i].p2 >= pts[i + 1].p2) {
      maxima.push_back(i);
      tallest = std::max(tallest, pts[i].p2);
    }
  }
  // Noise can split one peak into several neighbouring maxima: keep the
  // tallest within each Fourier width.
  std::vector<std::size_t> candidates;
  for (auto i : maxima) {
    if (pts[i].p2 < search.candidate_threshold * tallest) continue;
    if (!candidates.empty() &&
        pts[i].freq_offset_hz - pts[candidates.back()].freq_offset_hz < 1.0 / spectrum.pulse_duration) {
      if (pts[i].p2 > pts[candidates.back()].p2) candidates.back() = i;
      continue;
    }
    candidates.push_back(i);
  }
  if (candidates.size() < 2) throw PeakNotFound("fewer than two side peaks");
  if (candidates.size() > 2) {
    throw AmbiguousPeaks(std::to_string(candidates.size()) + " candidate side peaks");
  }
  std::sort(candidates.begin(), candidates.end());
  if (!(pts[candidates[0]].freq_offset_hz < 0.0 && pts[candidates[1]].freq_offset_hz > 0.0)) {
    throw AmbiguousPeaks("both candidate peaks on the same side");
  }
  auto vertex = [&](std::size_t i) {
    return detail::parabolic_vertex(pts[i - 1].freq_offset_hz, pts[i].freq_offset_hz,
                                     pts[i + 1].freq_offset_hz, pts[i - 1].p2, pts[i].p2,
                                     pts[i + 1].p2);
  };
  const double minus0 = vertex(candidates[0]);
  const double plus0 = vertex(candidates[1]);

  // Refinement: parameters (c_plus, c_minus, c_co, A_plus, A_minus, A_co), Hz.
  std::size_t centre_idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(pts[i].freq_offset_hz) < std::abs(pts[centre_idx].freq_offset_hz)) centre_idx = i;
  }
  Eigen::VectorXd p0(6);
  p0 << plus0, minus0, 0.0, pts[candidates[1]].p2, pts[candidates[0]].p2,
      std::max(pts[centre_idx].p2, 1e-3);
  const double rabi = spectrum.rabi;
  const double tau = spectrum.pulse_duration;
  const double scale = 1.0 / tau;  // work in units of the Fourier width
  Eigen::VectorXd q0 = p0;
  q0.head(3) /= scale;
  auto residuals = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    const RamanLine lines[3] = {{q[0] * scale, 1.0, q[3], RamanBranch::counter_prop_plus},
                                {q[1] * scale, 1.0, q[4], RamanBranch::counter_prop_minus},
                                {q[2] * scale, 1.0, q[5], RamanBranch::co_prop}};
    for (std::size_t i = 0; i < n; ++i) {
      const double w = pts[i].p2_err > 0.0 ? 1.0 / pts[i].p2_err : 1.0;
      r[static_cast<Eigen::Index>(i)] =
          w * (spectrum_value(lines, pts[i].freq_offset_hz, rabi, tau) - pts[i].p2);
    }
  };
  const LeastSquaresResult ls =
      levenberg_marquardt(residuals, q0, static_cast<Eigen::Index>(n));

  VelocityFit fit;
  fit.center_plus = ls.params[0] * scale;
  fit.center_minus = ls.params[1] * scale;
  fit.splitting_raw = fit.center_plus - fit.center_minus;
  // With per-point weights the covariance is already absolute; rescale from
  // the reduced chi2 only when the caller gave no error bars.
  Eigen::Matrix2d cov = ls.covariance.topLeftCorner<2, 2>() * scale * scale;
  if (pts.front().p2_err > 0.0) {
    const double dof = static_cast<double>(n - 6);
    cov /= std::max(ls.chi2 / dof, 1e-300);
  }
  const double var = cov(0, 0) + cov(1, 1) - 2.0 * cov(0, 1);
  const double split_err = std::sqrt(std::max(var, 0.0));

  fit.splitting = fit.splitting_raw;
  if (correct_tpls) {
    // The shift depends on the Doppler frequency, itself set by the corrected
    // splitting: fixed-point iteration converges in a few steps.
    for (int it = 0; it < 50; ++it) {
      TplsParams p = tpls;
      p.rabi = tpls.rabi != 0.0 ? tpls.rabi : rabi;
      p.doppler = constants::pi * fit.splitting;
      const double corrected = fit.splitting_raw - 2.0 * tpls_shift(p) / (2.0 * constants::pi);
      const bool done = std::abs(corrected - fit.splitting) < 1e-12 * std::abs(corrected);
      fit.splitting = corrected;
      if (done) break;
    }
  }
  fit.v = velocity_from_splitting(fit.splitting, k_eff);
  fit.stat_err = velocity_from_splitting(split_err, k_eff);
  return fit;
}

// White plus first-order Gauss-Markov launch-velocity fluctuations.
struct VelocityDriftModel {
  double white_sigma = 0.0;  // m/s per sample
  double gm_sigma = 0.0;     // m/s, stationary rms
  double gm_tau = 86400.0;   // s, correlation time

  // Allan variance of the Gauss-Markov part at averaging time tau.
  double gm_avar(double tau) const {
    const double x = tau / gm_tau;
    return gm_sigma * gm_sigma / (x * x) *
           (2.0 * x - 3.0 + 4.0 * std::exp(-x) - std::exp(-2.0 * x));
  }
};

inline std::vector<double> velocity_series(double v0, const VelocityDriftModel& drift,
                                           std::size_t n, double dt, std::uint64_t seed) {
  const CounterRng white(seed, 0x7e1), walk(seed, 0x6a1);
  std::vector<double> out(n);
  const double phi = drift.gm_tau > 0.0 ? std::exp(-dt / drift.gm_tau) : 0.0;
  double gm = drift.gm_sigma * walk.normal(0);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v0 + gm + drift.white_sigma * white.normal(i);
    gm = phi * gm + drift.gm_sigma * std::sqrt(1.0 - phi * phi) * walk.normal(i + 1);
  }
  return out;
}

struct TplsComparisonRow {
  double pulse_duration = 0.0;
  double rabi = 0.0;
  double shift_hz = 0.0;
  double v_uncorrected = 0.0;
  double v_corrected = 0.0;
  double stat_err = 0.0;
};

/// Splitting measured at several pulse durations with rabi * tau = pi held.
inline std::vector<TplsComparisonRow> tpls_comparison(double v, std::span<const double> durations,
                                                      const SpectrumModel& model,
                                                      std::uint64_t seed,
                                                      std::size_t grid_points = 100) {
  std::vector<TplsComparisonRow> rows;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double tau = durations[i];
    const double rabi = constants::pi / tau;
    RngStream rng(seed, 0x7b15 + i);
    const auto grid = default_grid(v, tau, model.k_eff, grid_points);
    const Spectrum s = simulate_spectrum(v, tau, rabi, grid, model, rng);
    const TplsParams p{rabi, 0.0, model.recoil};
    const VelocityFit raw = fit_velocity(s, model.k_eff, false, p);
    const VelocityFit cor = fit_velocity(s, model.k_eff, true, p);
    rows.push_back({tau, rabi, tpls_shift({rabi, model.k_eff * v, model.recoil}) /
                                   (2.0 * constants::pi),
                    raw.v, cor.v, cor.stat_err});
  }
  return rows;
}

}  // namespace atomsense
