#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "atomsense/errors.hpp"
#include "atomsense/rng.hpp"

namespace atomsense {

// Uniformly sampled signal; sample i is taken at start_time + i / sample_rate.
struct SensorTrace {
  double sample_rate = 1.0;
  double start_time = 0.0;
  std::vector<double> samples;

  double dt() const { return 1.0 / sample_rate; }
  double time(std::size_t i) const { return start_time + static_cast<double>(i) / sample_rate; }
  double end_time() const {
    return samples.empty() ? start_time : time(samples.size() - 1);
  }
  std::size_t size() const { return samples.size(); }

  double mean() const {
    double s = 0.0;
    for (double x : samples) s += x;
    return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
  }
  double rms() const {
    double s = 0.0;
    for (double x : samples) s += x * x;
    return samples.empty() ? 0.0 : std::sqrt(s / static_cast<double>(samples.size()));
  }

  // Mean over [t0, t1), using the samples whose timestamps fall inside.
  double window_mean(double t0, double t1) const {
    const double eps = 1e-9 / sample_rate;
    auto lo = static_cast<std::ptrdiff_t>(std::ceil((t0 - start_time) * sample_rate - eps));
    auto hi = static_cast<std::ptrdiff_t>(std::ceil((t1 - start_time) * sample_rate - eps));
    lo = std::clamp<std::ptrdiff_t>(lo, 0, static_cast<std::ptrdiff_t>(samples.size()));
    hi = std::clamp<std::ptrdiff_t>(hi, 0, static_cast<std::ptrdiff_t>(samples.size()));
    if (hi <= lo) throw TraceTooShort("empty averaging window");
    double s = 0.0;
    for (auto i = lo; i < hi; ++i) s += samples[static_cast<std::size_t>(i)];
    return s / static_cast<double>(hi - lo);
  }

  void validate() const {
    if (!(sample_rate > 0.0)) throw std::invalid_argument("SensorTrace: sample_rate must be > 0");
  }
};

struct ClassicalSensorModel {
  double white_psd = 0.0;       // unit/sqrt(Hz)
  double bias_rw_coeff = 0.0;   // unit/sqrt(s)
  double initial_bias = 0.0;
  double scale_error = 0.0;

  void validate() const {
    if (white_psd < 0.0 || bias_rw_coeff < 0.0) {
      throw std::invalid_argument("ClassicalSensorModel: noise coefficients must be >= 0");
    }
  }

  // Averaging time where the white-noise and random-walk Allan deviations
  // N / sqrt(tau) and K sqrt(tau / 3) intersect.
  double crossover_time() const {
    return bias_rw_coeff > 0.0 ? std::sqrt(3.0) * white_psd / bias_rw_coeff : INFINITY;
  }

  static double rw_coeff_for_crossover(double white_psd, double crossover) {
    return std::sqrt(3.0) * white_psd / crossover;
  }
};

struct PsdPoint {
  double frequency = 0.0;  // Hz
  double level = 0.0;      // relative one-sided PSD
};

// Spectral shape given as breakpoints, interpolated log-log between
// points and zero outside the first/last frequency. Only the shape matters;
// the total variance is set by rms.
struct VibrationModel {
  std::vector<PsdPoint> psd_shape;
  double rms = 0.0;                // m/s^2
  double residual_fraction = 0.2;  // uncorrectable part seen by the classical sensor

  void validate() const {
    if (rms < 0.0) throw std::invalid_argument("VibrationModel: rms must be >= 0");
    if (residual_fraction < 0.0 || residual_fraction > 1.0) {
      throw std::invalid_argument("VibrationModel: residual_fraction must be in [0,1]");
    }
    for (std::size_t i = 0; i < psd_shape.size(); ++i) {
      if (!(psd_shape[i].frequency > 0.0) || psd_shape[i].level < 0.0) {
        throw std::invalid_argument("VibrationModel: PSD points need f > 0 and level >= 0");
      }
      if (i > 0 && !(psd_shape[i].frequency > psd_shape[i - 1].frequency)) {
        throw std::invalid_argument("VibrationModel: PSD frequencies must increase");
      }
    }
  }

  double max_frequency() const { return psd_shape.empty() ? 0.0 : psd_shape.back().frequency; }

  double shape(double f) const {
    if (psd_shape.empty() || f < psd_shape.front().frequency || f > psd_shape.back().frequency) {
      return 0.0;
    }
    if (psd_shape.size() == 1) return psd_shape.front().level;
    auto hi = std::lower_bound(psd_shape.begin(), psd_shape.end(), f,
                               [](const PsdPoint& p, double x) { return p.frequency < x; });
    if (hi == psd_shape.begin()) return hi->level;
    auto lo = hi - 1;
    if (lo->level <= 0.0 || hi->level <= 0.0) {
      const double w = (f - lo->frequency) / (hi->frequency - lo->frequency);
      return lo->level + w * (hi->level - lo->level);
    }
    const double w = std::log(f / lo->frequency) / std::log(hi->frequency / lo->frequency);
    return std::exp(std::log(lo->level) + w * std::log(hi->level / lo->level));
  }
};

namespace detail {

struct FftwPlanGuard {
  fftw_plan plan;
  ~FftwPlanGuard() { fftw_destroy_plan(plan); }
};

}  // namespace detail

/// Gaussian noise shaped to the model PSD by filtering white noise in the
/// frequency domain. The filter is normalized so the expected variance is
/// rms^2.
inline SensorTrace gen_vibration(const VibrationModel& model, double duration, double rate,
                                 std::uint64_t seed, double start_time = 0.0) {
  model.validate();
  if (!(rate > 0.0) || !(duration > 0.0)) {
    throw std::invalid_argument("gen_vibration: duration and rate must be > 0");
  }
  if (rate < 2.0 * model.max_frequency()) {
    throw RateTooLow("rate " + std::to_string(rate) + " Hz below twice the highest corner " +
                     std::to_string(model.max_frequency()) + " Hz");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  SensorTrace trace{rate, start_time, std::vector<double>(n, 0.0)};
  if (model.rms == 0.0 || model.psd_shape.empty()) return trace;

  const CounterRng rng(seed, 0x71b);
  std::vector<double> buffer(n);
  for (std::size_t i = 0; i < n; ++i) buffer[i] = rng.normal(i);

  const std::size_t nc = n / 2 + 1;
  std::vector<std::complex<double>> spectrum(nc);
  auto* spec_ptr = reinterpret_cast<fftw_complex*>(spectrum.data());
  {
    detail::FftwPlanGuard fwd{fftw_plan_dft_r2c_1d(static_cast<int>(n), buffer.data(), spec_ptr,
                                                   FFTW_ESTIMATE)};
    fftw_execute(fwd.plan);
  }
  double gain_sum = 0.0;
  for (std::size_t k = 0; k < nc; ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(n);
    const double h = std::sqrt(model.shape(f));
    spectrum[k] *= h;
    const bool unpaired = k == 0 || (n % 2 == 0 && k == nc - 1);
    gain_sum += (unpaired ? 1.0 : 2.0) * h * h;
  }
  if (gain_sum == 0.0) return trace;
  {
    detail::FftwPlanGuard inv{fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_ptr,
                                                   trace.samples.data(), FFTW_ESTIMATE)};
    fftw_execute(inv.plan);
  }
  // Unnormalized round trip: Var(x) = gain_sum / n per unit-variance input.
  const double scale = model.rms / std::sqrt(gain_sum / static_cast<double>(n)) /
                       static_cast<double>(n);
  for (double& x : trace.samples) x *= scale;
  return trace;
}

/// Acceleration sensitivity of the three-pulse interferometer, t relative to
/// the pi pulse.
inline double sensitivity_weight(double t, double T) {
  if (t < -T || t > T) return 0.0;
  return (T - std::abs(t)) / (T * T);
}

/// Integral of a(t_pi + t) h(t) over [-T, T], with a(t) the linear
/// interpolant of the trace. Each piece is a product of two linear
/// functions, so Simpson's rule on it is exact.
inline double convolve_sensitivity(const SensorTrace& trace, double t_pi, double T) {
  trace.validate();
  const double t_lo = t_pi - T;
  const double t_hi = t_pi + T;
  const double tol = 1e-9 / trace.sample_rate;
  if (trace.size() < 2 || trace.start_time > t_lo + tol || trace.end_time() < t_hi - tol) {
    throw TraceTooShort("trace does not cover [" + std::to_string(t_lo) + ", " +
                        std::to_string(t_hi) + "]");
  }
  const double fs = trace.sample_rate;
  auto value_at = [&](double t) {
    double u = (t - trace.start_time) * fs;
    auto j = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0,
                                                 static_cast<double>(trace.size() - 2)));
    const double w = u - static_cast<double>(j);
    return trace.samples[j] + w * (trace.samples[j + 1] - trace.samples[j]);
  };
  auto integrate_piece = [&](double a, double b) {
    if (b <= a) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = value_at(a) * sensitivity_weight(a - t_pi, T);
    const double fm = value_at(m) * sensitivity_weight(m - t_pi, T);
    const double fb = value_at(b) * sensitivity_weight(b - t_pi, T);
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  };

  // Breakpoints: window edges, the kernel apex and every sample inside.
  std::vector<double> knots{t_lo, t_pi, t_hi};
  const auto first = static_cast<std::ptrdiff_t>(std::ceil((t_lo - trace.start_time) * fs));
  const auto last = static_cast<std::ptrdiff_t>(std::floor((t_hi - trace.start_time) * fs));
  for (auto i = std::max<std::ptrdiff_t>(first, 0); i <= last; ++i) {
    knots.push_back(trace.time(static_cast<std::size_t>(i)));
  }
  std::sort(knots.begin(), knots.end());
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = std::clamp(knots[i], t_lo, t_hi);
    const double b = std::clamp(knots[i + 1], t_lo, t_hi);
    if (b - a > 1e-15) sum += integrate_piece(a, b);
  }
  return sum;
}

/// Classical sensor output: truth (1 + scale_error) + bias + white noise.
/// The bias follows a random walk K sqrt(dt) per sample starting at
/// initial_bias; white noise has rms white_psd sqrt(rate) per sample.
inline SensorTrace sample_classical(const ClassicalSensorModel& model, const SensorTrace& truth,
                                    std::uint64_t seed) {
  model.validate();
  truth.validate();
  const CounterRng white_rng(seed, 0xc1a5);
  const CounterRng walk_rng(seed, 0xb1a5);
  const double white_sigma = model.white_psd * std::sqrt(truth.sample_rate);
  const double walk_sigma = model.bias_rw_coeff * std::sqrt(truth.dt());
  SensorTrace out{truth.sample_rate, truth.start_time, std::vector<double>(truth.size())};
  double bias = model.initial_bias;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double y = truth.samples[i] * (1.0 + model.scale_error) + bias;
    if (white_sigma > 0.0) y += white_sigma * white_rng.normal(i);
    out.samples[i] = y;
    if (walk_sigma > 0.0) bias += walk_sigma * walk_rng.normal(i);
  }
  return out;
}

}  // namespace atomsense
