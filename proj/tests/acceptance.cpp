// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "atomsense/analysis.hpp"
#include "atomsense/fusion.hpp"
#include "atomsense/interferometer.hpp"
#include "atomsense/io.hpp"
#include "atomsense/raman_velocimetry.hpp"
#include "atomsense/sequencer.hpp"
#include "atomsense/sensors_noise.hpp"

#ifndef ATOMSENSE_CLI
#error "ATOMSENSE_CLI must name the command-line binary"
#endif
#ifndef ATOMSENSE_SOURCE_DIR
#error "ATOMSENSE_SOURCE_DIR must name the source tree"
#endif

using namespace atomsense;
namespace fs = std::filesystem;

namespace {

const double kK = Species{}.k_eff();
constexpr double kV = 0.082;
constexpr double kT = 0.040;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << (ok ? "" : "[x] ") << what;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "atomsense_acceptance";
  fs::create_directories(d);
  return d;
}

fs::path config(const std::string& name) { return fs::path(ATOMSENSE_SOURCE_DIR) / "configs" / name; }

void run_cli(const std::string& args) {
  const std::string cmd = std::string("ATOMSENSE_LOG=quiet \"") + ATOMSENSE_CLI + "\" " + args;
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw std::runtime_error("command failed (" + std::to_string(rc) + "): " + cmd);
}

std::map<std::string, double> read_summary(const fs::path& p) {
  const io::CsvTable t = io::read_csv(p);
  std::map<std::string, double> out;
  const auto m = t.column_index("metric");
  const auto v = t.column_index("value");
  for (const auto& row : t.rows) out[row[m]] = std::stod(row[v]);
  return out;
}

AdevCurve read_adev(const fs::path& p) {
  const io::CsvTable t = io::read_csv(p);
  AdevCurve c;
  c.taus = t.numeric("tau_s");
  c.sigmas = t.numeric("sigma");
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double sigma_at(const AdevCurve& c, double tau) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::abs(c.taus[i] - tau) < 1e-9 * tau) return c.sigmas[i];
  }
  throw std::runtime_error("tau " + num(tau) + " not in curve");
}

// ------------------------------------------------------------------ 1 ----

void demodulation_round_trip(Outcome& o) {
  // a uniform in [-20, 20] m/s^2, |Omega| log-uniform in [1e-5, 4e-3] rad/s.
  // The chirp rates carry k a ~ 3e8 rad/s^2, so one double ulp of alpha is
  // already ~1e-14 rad/s of Omega. The inversion is checked in extended
  // precision; the double path is checked against its rounding bound.
  using Ext = long double;
  const CounterRng r(2024, 1);
  const Ext k_ext = static_cast<Ext>(kK), v_ext = static_cast<Ext>(kV);
  Ext worst_a = 0, worst_w = 0;
  double worst_bound = 0.0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double a = -20.0 + 40.0 * r.uniform(3 * i);
    const double mag = std::exp(std::log(1e-5) + std::log(4e-3 / 1e-5) * r.uniform(3 * i + 1));
    const double w = r.uniform(3 * i + 2) < 0.5 ? -mag : mag;
    const auto e = demodulate_static<Ext>(ideal_alphas<Ext>(a, w, v_ext, k_ext), {}, v_ext, k_ext);
    worst_a = std::max(worst_a, std::abs(e.a - a) / std::abs(Ext(a)));
    worst_w = std::max(worst_w, std::abs(e.omega - w) / std::abs(Ext(w)));
    const StaticEstimate d = demodulate_static(ideal_alphas(a, w, kV, kK), {}, kV, kK);
    const double bound = std::numeric_limits<double>::epsilon() * (std::abs(a) + 2.0 * kV * mag) / kV;
    worst_bound = std::max(worst_bound, std::abs(d.omega - w) / bound);
  }
  o.require(worst_a <= 1e-10, "max rel err a " + num(static_cast<double>(worst_a)));
  o.require(worst_w <= 1e-10, "max rel err Omega " + num(static_cast<double>(worst_w)));
  o.require(worst_bound <= 4.0, "double Omega err / rounding bound " + num(worst_bound));
}

// ------------------------------------------------------------------ 2 ----

void oracle_equivalence(Outcome& o) {
  const double g = 9.80883;
  double worst = 0.0;
  for (int vs : {1, -1}) {
    for (int ks : {1, -1}) {
      for (int j = -40; j <= 40; ++j) {
        if (j == 0) continue;
        const double w = 4e-3 * j / 40.0;
        InterferometerConfig cfg;
        cfg.T = kT;
        cfg.k_sign = ks;
        cfg.v_sign = vs;
        cfg.t_pi = 0.14;
        cfg.alpha = ks * cfg.k_eff * g;
        const double vx = vs * kV;
        BallisticState s{Vec3(-vx * kT, 0.0, 0.0), Vec3(vx, 0.0, 0.0), cfg.first_pulse()};
        const TimeFunction tilt = [&](double t) { return w * (t - cfg.t_pi); };
        const double oracle = phase_oracle(cfg, s, Vec3(0.0, 0.0, g), tilt, nullptr);
        const double closed = phase_closed_form(cfg, Vec3(0.0, 0.0, g), w * sensitive_axis(),
                                                Vec3::Zero(), Vec3::Zero(), Vec3(kV, 0.0, 0.0));
        worst = std::max(worst, std::abs(oracle - closed) / std::abs(closed));
      }
    }
  }
  o.require(worst <= 1e-6, "max rel err " + num(worst));
  InterferometerConfig cfg;
  cfg.T = kT;
  const PhaseTerms terms = phase_terms(cfg, Vec3::Zero(), 4.82e-5 * sensitive_axis(), Vec3::Zero(),
                                       Vec3::Zero(), Vec3(kV, 0.0, 0.0));
  o.require(std::abs(std::abs(terms.coriolis) - 0.2037) < 5e-5,
            "Coriolis phase at Earth rate " + num(std::abs(terms.coriolis)) + " rad");
}

// ------------------------------------------------------------------ 3 ----

void contrast_law(Outcome& o) {
  const Species rb;
  const double temperature = 1e-6;
  const AtomEnsemble ens = AtomEnsemble::generate(
      {100000, temperature, 0.0, Vec3(-kV * kT, 0.0, 0.0), Vec3(kV, 0.0, 0.0), 31, true}, rb);
  const double sv = rb.velocity_dispersion(temperature);
  std::vector<double> omegas, contrasts;
  double worst = 0.0;
  double c0 = 0.0;
  for (int j = 0; j <= 8; ++j) {
    const double w = 0.5e-3 * j;
    InterferometerConfig cfg;
    cfg.T = kT;
    cfg.t_pi = 0.14;
    cfg.alpha = cfg.k_eff * 9.80883;
    const TimeFunction tilt = [&](double t) { return w * (t - cfg.t_pi); };
    const auto phases = ensemble_phases(cfg, ens, Vec3(0.0, 0.0, 9.80883), tilt, nullptr, 4);
    const double c = phasor_mean(phases).magnitude;
    if (j == 0) c0 = c;
    const double model = contrast_decay(kK, sv, kT, w);
    worst = std::max(worst, std::abs(c / c0 - model) / model);
    omegas.push_back(w);
    contrasts.push_back(c);
  }
  const ContrastDecayFit fit = fit_contrast_decay(omegas, contrasts, kK, kT, rb);
  o.require(worst <= 0.02, "max rel deviation from law " + num(worst));
  o.require(std::abs(fit.temperature / temperature - 1.0) <= 0.10,
            "fitted temperature " + num(fit.temperature * 1e6) + " uK");
}

// ------------------------------------------------------------------ 4 ----

void sensitivity_properties(Outcome& o) {
  const double rate = 20000.0, t_pi = 0.5;
  auto trace = [&](const std::function<double(double)>& f) {
    SensorTrace tr{rate, 0.0, std::vector<double>(static_cast<std::size_t>(rate) + 1)};
    for (std::size_t i = 0; i < tr.size(); ++i) tr.samples[i] = f(tr.time(i));
    return tr;
  };
  const double c = convolve_sensitivity(trace([](double) { return 1.7; }), t_pi, kT);
  o.require(std::abs(c - 1.7) <= 1e-12 * 1.7, "constant err " + num(std::abs(c - 1.7)));
  const double ramp = convolve_sensitivity(trace([&](double t) { return t - t_pi; }), t_pi, kT);
  o.require(std::abs(ramp) <= 1e-9, "ramp response " + num(ramp));
  double worst_db = -400.0;
  for (double phase : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    const double r = convolve_sensitivity(
        trace([&](double t) { return std::sin(2 * std::numbers::pi * (t - t_pi) / kT + phase); }),
        t_pi, kT);
    worst_db = std::max(worst_db, 20.0 * std::log10(std::abs(r) + 1e-300));
  }
  o.require(worst_db <= -60.0, "25 Hz response " + num(worst_db) + " dB");
}

// ---------------------------------------------------------------- 5, 6 ----

struct StaticRuns {
  std::map<std::string, double> summary;  // config seed
  fs::path dir;
  std::vector<fs::path> ensemble;  // config seed plus extra seeds
};

StaticRuns run_static() {
  StaticRuns r;
  for (int s : {7, 8, 9, 10}) {
    const fs::path d = work_dir() / ("static_seed" + std::to_string(s));
    run_cli("--config \"" + config("static.toml").string() + "\" --seed " + std::to_string(s) +
            " --no-plot --out-dir \"" + d.string() + "\" static-run");
    r.ensemble.push_back(d);
  }
  r.dir = r.ensemble.front();
  r.summary = read_summary(r.dir / "summary.csv");
  return r;
}

void vibration_correction(Outcome& o, const StaticRuns& r) {
  const double f = r.summary.at("vibration_correction_factor");
  o.require(std::abs(f / 5.0 - 1.0) <= 0.30, "improvement " + num(f) + "x");
}

// Allan deviation averaged over independent runs: sqrt(mean AVAR).
AdevCurve ensemble_adev(const std::vector<fs::path>& dirs, const std::string& name) {
  AdevCurve acc;
  for (const auto& d : dirs) {
    const AdevCurve c = read_adev(d / name);
    if (acc.size() == 0) {
      acc.taus = c.taus;
      acc.sigmas.assign(c.size(), 0.0);
    }
    for (std::size_t i = 0; i < c.size(); ++i) acc.sigmas[i] += c.sigmas[i] * c.sigmas[i];
  }
  for (double& s : acc.sigmas) s = std::sqrt(s / static_cast<double>(dirs.size()));
  return acc;
}

void noise_floors(Outcome& o, const StaticRuns& r) {
  const double fw = r.summary.at("white_floor_omega_rads_rtHz");
  const double fa = r.summary.at("white_floor_a_mps2_rtHz");
  o.require(std::abs(fw / 1.1e-5 - 1.0) <= 0.20, "Omega floor " + num(fw));
  o.require(std::abs(fa / 3e-6 - 1.0) <= 0.20, "a floor " + num(fa));

  // Slopes on the seed ensemble: white first, then flattening onto the
  // configured drift (bias random walk for a, flicker floor for Omega).
  const AdevCurve ea = ensemble_adev(r.ensemble, "adev_acceleration.csv");
  const AdevCurve ew = ensemble_adev(r.ensemble, "adev_rotation.csv");
  const double sa = adev_slope(ea, 32.0, 256.0);
  const double sw = adev_slope(ew, 4.0, 64.0);
  o.require(sa > -0.65 && sa < -0.35, "a slope 32-256 s " + num(sa));
  o.require(sw > -0.65 && sw < -0.35, "Omega slope 4-64 s " + num(sw));
  const double la = adev_slope(ea, 256.0, 2048.0);
  const double lw = adev_slope(ew, 256.0, 2048.0);
  o.require(la > sa + 0.15, "a slope 256-2048 s " + num(la));
  o.require(lw > sw + 0.15, "Omega slope 256-2048 s " + num(lw));
  const double tau = 2048.0;
  const double rw = 2.9e-9, floor_w = 4e-7;
  const double model_a = std::sqrt(fa * fa / tau + rw * rw * tau / 3.0);
  const double model_w = std::sqrt(fw * fw / tau + floor_w * floor_w);
  const double ra = sigma_at(ea, tau) / model_a;
  const double rw_ratio = sigma_at(ew, tau) / model_w;
  o.require(ra > 0.67 && ra < 1.5, "a at 2048 s / white+drift model " + num(ra));
  o.require(rw_ratio > 0.67 && rw_ratio < 1.5, "Omega at 2048 s / white+drift model " + num(rw_ratio));
}

// ------------------------------------------------------------------ 7 ----

struct FusionAxis {
  const char* name;
  double classical_white;
  double crossover;  // classical white / random-walk crossover
  double atomic_white;
  AtomicDrift atomic_drift;
};

void hybridization(Outcome& o) {
  // The rotation crossing between the atomic flicker floor and the gyroscope
  // random walk lies near 5e4 s, so the synthetic record spans 64 days to
  // resolve the Allan deviations well past it.
  const double duration = 64.0 * 86400.0;
  const double dt_c = 0.5, dt_a = 4.0;
  const auto n_c = static_cast<std::size_t>(duration / dt_c);
  const auto n_a = static_cast<std::size_t>(duration / dt_a);
  for (const FusionAxis& ax : {FusionAxis{"a", 1.2e-6, 50.0, 3e-6, AtomicDrift{2.9e-9, 0.0, 30.0, 6}},
                               FusionAxis{"Omega", 1.8e-6, 1000.0, 1.1e-5, AtomicDrift{0.0, 4e-7, 30.0, 9}}}) {
    const ClassicalSensorModel model{ax.classical_white,
                                     ClassicalSensorModel::rw_coeff_for_crossover(ax.classical_white, ax.crossover),
                                     0.0, 0.0};
    const SensorTrace truth{1.0 / dt_c, 0.0, std::vector<double>(n_c, 0.0)};
    const SensorTrace cl = sample_classical(model, truth, 77);
    const CounterRng white(78, 0);
    const auto drift = drift_series(ax.atomic_drift, n_a, dt_a, 79, 0);
    std::vector<double> atomic(n_a);
    for (std::size_t i = 0; i < n_a; ++i) {
      atomic[i] = ax.atomic_white / std::sqrt(dt_a) * white.normal(i) + drift[i];
    }
    // Classical samples averaged over each atomic window, for the gain choice.
    const std::size_t per = static_cast<std::size_t>(dt_a / dt_c);
    std::vector<double> cl_avg(n_a);
    for (std::size_t i = 0; i < n_a; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < per; ++j) s += cl.samples[i * per + j];
      cl_avg[i] = s / static_cast<double>(per);
    }
    const auto taus = octave_taus(n_a, dt_a);
    const AdevCurve ac = allan_deviation(atomic, dt_a, taus);
    const AdevCurve cc = allan_deviation(cl_avg, dt_a, taus);
    const GainChoice gc = pick_gain(ac, cc, dt_a, 0.1);
    Hybridizer h(gc.gain, dt_a);
    std::vector<double> hyb_avg(n_a, 0.0);
    for (std::size_t i = 0; i < n_a; ++i) {
      h.push_atomic(static_cast<double>(i) * dt_a, atomic[i]);
      double s = 0;
      for (std::size_t j = 0; j < per; ++j) {
        const std::size_t k = i * per + j;
        s += h.push_classical(static_cast<double>(k) * dt_c, cl.samples[k]).hybrid;
      }
      hyb_avg[i] = s / static_cast<double>(per);
    }
    const AdevCurve hc = allan_deviation(hyb_avg, dt_a, taus);
    bool below = true;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < hc.size(); ++i) {
      if (hc.taus[i] <= gc.tau_cross) continue;
      ++checked;
      if (hc.sigmas[i] > cc.sigmas[i]) below = false;
    }
    const double ratio = hc.sigmas.back() / ac.sigmas.back();
    o.require(!gc.fallback && checked > 0 && below,
              std::string(ax.name) + " hybrid <= classical beyond " + num(gc.tau_cross) + " s (G " +
                  num(gc.gain) + ")");
    o.require(std::abs(ratio - 1.0) <= 0.20,
              std::string(ax.name) + " hybrid/atomic at " + num(hc.taus.back()) + " s " + num(ratio));
  }
  // Noiseless bias convergence.
  const double b = 2.5e-4, G = 0.1;
  Hybridizer h(G, dt_a);
  double worst = 0.0;
  int updates = 0;
  for (int i = 0; i < 400; ++i) {
    const double t = i * dt_c;
    if (i % 8 == 0) h.push_atomic(t, 9.8);
    const HybridRow row = h.push_classical(t, 9.8 - b);
    if (row.atomic) {
      ++updates;
      worst = std::max(worst, std::abs(row.bias - b * (1.0 - std::pow(1.0 - G, updates))));
    }
  }
  o.require(updates > 10 && worst <= 1e-12, "closed-form bias err " + num(worst));
}

// ------------------------------------------------------------------ 8 ----

void tpls_correction(Outcome& o) {
  SpectrumModel m;
  m.noise_sigma = 0.01;
  const std::vector<double> durations{5e-6, 7.5e-6, 10e-6, 15e-6, 20e-6, 30e-6, 40e-6};
  const auto rows = tpls_comparison(kV, durations, m, 3);
  const double dev5 = std::abs(rows.front().v_uncorrected - kV) / kV;
  o.require(dev5 >= 0.02, "uncorrected at 5 us off by " + num(100 * dev5) + "%");
  bool converging = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::abs(rows[i].v_uncorrected - kV) > std::abs(rows[i - 1].v_uncorrected - kV)) converging = false;
  }
  o.require(converging, "uncorrected converges with duration");
  double chi2 = 0.0;
  for (const auto& r : rows) chi2 += std::pow((r.v_corrected - kV) / r.stat_err, 2);
  // 99 % point of chi-square with 7 degrees of freedom.
  o.require(chi2 <= 18.48, "corrected chi2/dof " + num(chi2 / rows.size()));
  const double shift = tpls_shift({std::numbers::pi / 20e-6, kK * kV, Species{}.recoil()}) /
                       (2 * std::numbers::pi);
  o.require(std::abs(shift + 1.50e3) <= 0.005e3, "shift at 20 us " + num(shift) + " Hz");
}

// ------------------------------------------------------------------ 9 ----

void systematics(Outcome& o) {
  double worst_even = 0.0;
  for (int order : {2, 4, 6, 8}) {
    WavefrontSpec s;
    s.order = order;
    s.amplitude = 3e6;
    worst_even = std::max(worst_even, std::abs(wavefront_rotation_bias(s, kV, 6e-4, kK, kT)));
    worst_even = std::max(worst_even, std::abs(wavefront_rotation_bias_polynomial(s, kV, 6e-4, kK, kT)));
  }
  o.require(worst_even == 0.0, "even-order bias " + num(worst_even));
  const WavefrontSpec cubic = WavefrontSpec::from_optical_quality(constants::rb87_d2_wavelength / 6.0, 10.1e-3);
  double worst = 0.0;
  for (double dx : {1e-4, 3e-4, 6e-4, 1.2e-3}) {
    const double a = wavefront_rotation_bias(cubic, kV, dx, kK, kT);
    const double b = wavefront_rotation_bias_polynomial(cubic, kV, dx, kK, kT);
    worst = std::max(worst, std::abs(a - b) / std::abs(a));
  }
  o.require(worst <= 1e-12, "cubic closed form vs polynomial " + num(worst));
  const double bias = wavefront_rotation_bias(cubic, kV, 6e-4, kK, kT);
  o.require(std::abs(bias / 1.9e-5 - 1.0) <= 0.05, "OQ lambda/6, dx 0.6 mm: " + num(bias) + " rad/s");
  o.require(bias / 1.5e-5 > 0.1 && bias / 1.5e-5 < 10.0, "same order as 1.5e-5 rad/s");
  const DriveWaveform drive{2e-3, 0.02, 0.5, kT};
  const double frac = euler_coriolis_phases(drive, kK, kV, 0.01).euler_fraction();
  o.require(std::abs(std::abs(frac) - 0.05) <= 0.01,
            "Euler/Coriolis at d0 1 cm, phi0 0.02 rad: " + num(100 * std::abs(frac)) + "% (target 5 +- 1%)");
}

// ----------------------------------------------------------------- 10 ----

void dynamic_linearity(Outcome& o) {
  const fs::path d = work_dir() / "dynamic";
  run_cli("--config \"" + config("dynamic.toml").string() + "\" --no-plot --out-dir \"" +
          d.string() + "\" dynamic-run");
  const io::CsvTable t = io::read_csv(d / "dynamic_summary.csv");
  const auto od = t.numeric("omega_d_rads");
  const auto rec = t.numeric("omega_recovered_rads");
  const auto ref = t.numeric("omega_reference_rads");
  const auto ok = t.numeric("fit_ok");
  for (int vs : {1, -1}) {
    const auto vsign = t.numeric("v_sign");
    double sxy = 0, sxx = 0, sdy = 0, sdd = 0;
    for (std::size_t i = 0; i < od.size(); ++i) {
      if (vsign[i] != vs || od[i] > 3e-3 + 1e-12 || ok[i] != 1.0) continue;
      sxy += ref[i] * rec[i];
      sxx += ref[i] * ref[i];
      sdy += od[i] * rec[i];
      sdd += od[i] * od[i];
    }
    const double slope_ref = sxy / sxx;
    const double slope_drive = sdy / sdd;
    const std::string tag = vs > 0 ? "+v" : "-v";
    o.require(std::abs(slope_ref - 1.0) <= 0.05, tag + " slope vs gyro reference " + num(slope_ref));
    o.require(std::abs(slope_drive - 1.0) <= 0.05, tag + " slope vs drive amplitude " + num(slope_drive));
  }
  DynamicDrive drive;
  drive.beta_plus = 5.0 * std::numbers::pi / 180.0;
  double worst = 0.0;
  for (double angle = 0.0; angle < 2 * std::numbers::pi; angle += 0.3) {
    drive.axis = Vec3(std::cos(angle), std::sin(angle), 0.0);
    const double expected = project_classical_rotation(std::cos(angle), std::sin(angle), drive.beta_plus);
    worst = std::max(worst, std::abs(drive.projection(1) - expected));
  }
  o.require(worst <= 1e-12, "beta 5 deg projection err " + num(worst));
}

// ----------------------------------------------------------------- 11 ----

void determinism(Outcome& o) {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"static.toml", "static-run"},
      {"dynamic.toml", "dynamic-run"},
      {"velocimetry.toml", "velocimetry"},
      {"budget.toml", "budget"}};
  std::size_t compared = 0;
  for (const auto& [cfg, cmd] : runs) {
    const fs::path a = work_dir() / ("det_" + cmd + "_t1");
    const fs::path b = work_dir() / ("det_" + cmd + "_t5");
    fs::remove_all(a);
    fs::remove_all(b);
    const std::string base = "--config \"" + config(cfg).string() + "\" --seed 123 --out-dir ";
    run_cli(base + "\"" + a.string() + "\" --threads 1 " + cmd);
    run_cli(base + "\"" + b.string() + "\" --threads 5 " + cmd);
    for (const auto& e : fs::directory_iterator(a)) {
      const fs::path other = b / e.path().filename();
      const bool same = fs::exists(other) && slurp(e.path()) == slurp(other);
      if (!same) o.require(false, cmd + "/" + e.path().filename().string() + " differs");
      ++compared;
    }
  }
  const fs::path static_dir = work_dir() / "det_static-run_t1";
  const fs::path adev_a = work_dir() / "det_allan_1.csv";
  const fs::path adev_b = work_dir() / "det_allan_2.csv";
  run_cli("--threads 1 allan --input \"" + (static_dir / "campaign.csv").string() +
          "\" --column omega_rads --out \"" + adev_a.string() + "\"");
  run_cli("--threads 4 allan --input \"" + (static_dir / "campaign.csv").string() +
          "\" --column omega_rads --out \"" + adev_b.string() + "\"");
  if (slurp(adev_a) != slurp(adev_b)) o.require(false, "allan output differs");
  const fs::path hy_a = work_dir() / "det_hy1", hy_b = work_dir() / "det_hy2";
  for (const auto& [dir, threads] : {std::pair{hy_a, 1}, std::pair{hy_b, 3}}) {
    run_cli("--threads " + std::to_string(threads) + " --out-dir \"" + dir.string() +
            "\" hybridize --classical \"" + (static_dir / "classical_rotation.csv").string() +
            "\" --atomic \"" + (static_dir / "campaign.csv").string() +
            "\" --atomic-column omega_rads --window 4");
  }
  if (slurp(hy_a / "hybrid.csv") != slurp(hy_b / "hybrid.csv")) o.require(false, "hybridize output differs");
  compared += 2;
  o.require(compared > 20, std::to_string(compared) + " files byte-identical across thread counts");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
  };
  StaticRuns statics;
  bool statics_ready = false;
  auto ensure_statics = [&]() {
    if (!statics_ready) {
      statics = run_static();
      statics_ready = true;
    }
  };
  const std::vector<Criterion> criteria{
      {1, "demodulation round trip", 1.0, demodulation_round_trip},
      {2, "oracle equivalence", 1.0, oracle_equivalence},
      {3, "contrast law", 30.0, contrast_law},
      {4, "sensitivity function", 1.0, sensitivity_properties},
      {5, "vibration correction factor", 120.0, [&](Outcome& o) { ensure_statics(); vibration_correction(o, statics); }},
      {6, "noise floors", 120.0, [&](Outcome& o) { ensure_statics(); noise_floors(o, statics); }},
      {7, "hybridization", 120.0, hybridization},
      {8, "light-shift correction", 10.0, tpls_correction},
      {9, "systematics", 1.0, systematics},
      {10, "dynamic linearity", 120.0, dynamic_linearity},
      {11, "determinism", 300.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= c.budget_s, "runtime " + num(secs) + " s (limit " + num(c.budget_s) + " s)");
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
