#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "atomsense/analysis.hpp"
#include "atomsense/errors.hpp"
#include "atomsense/io.hpp"
#include "atomsense/raman_velocimetry.hpp"
#include "atomsense/sequencer.hpp"

namespace atomsense {

struct FusionConfig {
  // Zero selects pick_gain from the Allan deviation crossing.
  double gain_acceleration = 0.0;
  double gain_rotation = 0.0;
  double fallback_gain = 0.1;
};

struct VelocimetryConfig {
  std::size_t n_spectra = 36;
  double spectrum_period = 100.0;  // s per spectrum
  double v_launch = 0.082;
  double pulse_duration = 20e-6;
  std::size_t grid_points = 100;
  SpectrumModel model;
  bool correct_tpls = true;
  VelocityDriftModel drift;
  std::vector<double> tpls_durations{5e-6, 10e-6, 15e-6, 20e-6, 30e-6, 40e-6};
};

struct Scenario {
  std::uint64_t seed = 1;
  std::string config_hash = "0000000000000000";
  double duration = 7200.0;
  StaticScene static_scene;
  FusionConfig fusion;
  DynamicScene dynamic_scene;
  std::vector<double> omega_d_list{0.0, 1e-3, 2e-3, 3e-3, 4e-3};
  VelocimetryConfig velocimetry;
  BudgetInputs budget;
  double budget_oq_waves = 1.0 / 6.0;
  bool plot = true;
};

namespace detail {

// Reads typed values by dotted path and remembers every path it was asked
// about, so keys nobody asked for can be reported as unknown.
class TomlReader {
 public:
  explicit TomlReader(toml::table t) : root_(std::move(t)) {}

  template <typename T>
  T get(const std::string& path, T fallback) {
    known_.insert(path);
    auto node = root_.at_path(path);
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node.value<bool>()) return *v;
      throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node.value<std::string>()) return *v;
      throw ConfigError(path + ": expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node.value<std::int64_t>()) {
        if (*v < 0) throw ConfigError(path + ": must be >= 0");
        return static_cast<T>(*v);
      }
      throw ConfigError(path + ": expected an integer");
    } else {
      if (node.is_integer() || node.is_floating_point()) return *node.value<double>();
      throw ConfigError(path + ": expected a number");
    }
  }

  std::vector<double> numbers(const std::string& path, std::vector<double> fallback) {
    known_.insert(path);
    auto node = root_.at_path(path);
    if (!node) return fallback;
    const toml::array* arr = node.as_array();
    if (!arr) throw ConfigError(path + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& el : *arr) {
      if (!(el.is_integer() || el.is_floating_point())) {
        throw ConfigError(path + ": expected an array of numbers");
      }
      out.push_back(*el.value<double>());
    }
    return out;
  }

  void reject_unknown() const { walk(root_, ""); }

 private:
  void walk(const toml::table& t, const std::string& prefix) const {
    for (const auto& [k, node] : t) {
      const std::string path = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (const toml::table* sub = node.as_table()) {
        walk(*sub, path);
      } else if (!known_.count(path)) {
        throw ConfigError("unknown key '" + path + "'");
      }
    }
  }

  toml::table root_;
  std::set<std::string> known_;
};

}  // namespace detail

/// Builds a Scenario from TOML text. Keys carry their unit as a suffix
/// (T_ms, rms_mps2, ...); unknown keys are errors.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "config") {
  toml::table table;
  try {
    table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  detail::TomlReader r(std::move(table));
  Scenario sc;
  sc.config_hash = io::hex64(io::fnv1a(text));
  sc.seed = r.get<std::uint64_t>("seed", 1);
  sc.duration = r.get("duration_s", 7200.0);
  sc.plot = r.get("plot", true);

  Species species;
  species.mass = r.get("species.mass_kg", species.mass);
  species.lambda_raman = r.get("species.raman_wavelength_nm", species.lambda_raman * 1e9) * 1e-9;

  CycleConfig cyc;
  cyc.T = r.get("interferometer.T_ms", cyc.T * 1e3) * 1e-3;
  cyc.cycle_period = r.get("sequencer.cycle_period_s", cyc.cycle_period);
  cyc.pi_delay = r.get("sequencer.pi_delay_ms", cyc.pi_delay * 1e3) * 1e-3;
  cyc.lock_gain = r.get("sequencer.lock_gain", cyc.lock_gain);
  cyc.lock_threshold = r.get("sequencer.lock_threshold", cyc.lock_threshold);
  cyc.v_launch = r.get("launch.velocity_mps", cyc.v_launch);

  const double waist = r.get("interferometer.beam_waist_mm", 10.1) * 1e-3;
  const bool rabi_weighting = r.get("interferometer.rabi_weighting", false);

  VibrationModel vib;
  vib.rms = r.get("vibration.rms_mps2", 0.0);
  vib.residual_fraction = r.get("vibration.residual_fraction", vib.residual_fraction);
  const auto f = r.numbers("vibration.psd_Hz", {0.002, 0.12, 0.125, 0.375});
  const auto lv = r.numbers("vibration.psd_level", {0.1, 0.1, 1.0, 1.0});
  if (f.size() != lv.size()) throw ConfigError("vibration.psd_Hz and psd_level lengths differ");
  for (std::size_t i = 0; i < f.size(); ++i) vib.psd_shape.push_back({f[i], lv[i]});
  const double vib_rate = r.get("vibration.rate_Hz", 250.0);
  const bool correction = r.get("vibration.correction", true);

  DetectionModel det;
  det.contrast = r.get("detection.contrast", 0.4);
  det.mean = r.get("detection.mean", 0.5);
  det.detection_noise = r.get("detection.noise_p2", 0.0);
  det.projection_noise = r.get("detection.projection_noise", true);

  auto classical = [&](const std::string& name, double white, double crossover) {
    ClassicalSensorModel m;
    m.white_psd = r.get(name + ".white_psd_rtHz", white);
    const double cross = r.get(name + ".crossover_s", crossover);
    m.bias_rw_coeff = r.get(name + ".bias_rw_rts",
                            cross > 0.0 ? ClassicalSensorModel::rw_coeff_for_crossover(m.white_psd, cross) : 0.0);
    m.initial_bias = r.get(name + ".initial_bias", 0.0);
    m.scale_error = r.get(name + ".scale_error", 0.0);
    return m;
  };

  StaticScene& st = sc.static_scene;
  st.species = species;
  st.cycle = cyc;
  st.gravity = r.get("truth.gravity_mps2", st.gravity);
  st.omega = r.get("truth.omega_rads", st.omega);
  st.vertical_tilt = r.get("truth.vertical_tilt_mrad", 0.0) * 1e-3;
  st.vibration = vib;
  st.vibration_rate = vib_rate;
  st.vibration_correction = correction;
  st.accelerometer = classical("accelerometer", 1.2e-6, 50.0);
  st.gyroscope = classical("gyroscope", 1.8e-6, 1000.0);
  st.detection = det;
  st.n_atoms = r.get("atoms.n_atoms", st.n_atoms);
  st.macro_atoms = r.get<std::size_t>("atoms.macro_atoms", st.macro_atoms);
  st.temperature = r.get("atoms.temperature_uK", st.temperature * 1e6) * 1e-6;
  st.launch_jitter = r.get("atoms.launch_jitter_mmps", 0.0) * 1e-3;
  st.accel_drift.rw_coeff = r.get("drift.acceleration.rw_mps2_rts", 0.0);
  st.accel_drift.flicker_floor = r.get("drift.acceleration.floor_mps2", 0.0);
  st.accel_drift.tau_min = r.get("drift.acceleration.tau_min_s", st.accel_drift.tau_min);
  st.rotation_drift.rw_coeff = r.get("drift.rotation.rw_rads_rts", 0.0);
  st.rotation_drift.flicker_floor = r.get("drift.rotation.floor_rads", 0.0);
  st.rotation_drift.tau_min = r.get("drift.rotation.tau_min_s", st.rotation_drift.tau_min);
  st.rabi_weighting = rabi_weighting;
  st.beam_waist = waist;

  const double oq_waves = r.get("budget.optical_quality_waves", 1.0 / 6.0);
  const int wf_order = r.get<int>("budget.wavefront_order", 3);
  const double dx = r.get("budget.asymmetry_dx_mm", 0.0) * 1e-3;
  WavefrontSpec wf = WavefrontSpec::from_optical_quality(oq_waves * species.lambda_raman, waist,
                                                         species.lambda_raman);
  wf.order = wf_order;
  const double amp = r.get("budget.wavefront_amplitude_rad_per_mk", 0.0);
  if (amp != 0.0) wf.amplitude = amp;
  if (r.get("truth.wavefront_bias", false)) {
    st.wavefront = wf;
    st.wavefront_dx = dx;
  }

  sc.fusion.gain_acceleration = r.get("fusion.gain_acceleration", 0.0);
  sc.fusion.gain_rotation = r.get("fusion.gain_rotation", 0.0);
  sc.fusion.fallback_gain = r.get("fusion.fallback_gain", 0.1);

  DynamicScene& dy = sc.dynamic_scene;
  dy.species = species;
  dy.cycle = cyc;
  dy.gravity = st.gravity;
  dy.omega_static = st.omega;
  dy.drive.phi0 = r.get("dynamic.phi0_rad", 0.0);
  const auto axis = r.numbers("dynamic.axis", {1.0, 0.0, 0.0});
  if (axis.size() != 3) throw ConfigError("dynamic.axis: expected three components");
  dy.drive.axis = Vec3(axis[0], axis[1], axis[2]);
  dy.drive.beta_plus = r.get("dynamic.beta_plus_deg", 0.0) * constants::pi / 180.0;
  dy.drive.beta_minus = r.get("dynamic.beta_minus_deg", 0.0) * constants::pi / 180.0;
  dy.d0 = r.get("dynamic.d0_mm", 0.0) * 1e-3;
  dy.vibration = vib;
  dy.vibration.rms = r.get("dynamic.vibration_rms_mps2", vib.rms);
  dy.vibration_rate = vib_rate;
  dy.vibration_correction = correction;
  dy.detection = det;
  dy.n_atoms = st.n_atoms;
  dy.macro_atoms = r.get<std::size_t>("dynamic.macro_atoms", dy.macro_atoms);
  dy.temperature = st.temperature;
  dy.shots_per_scan = r.get<std::size_t>("dynamic.shots_per_scan", dy.shots_per_scan);
  dy.span_fringes = r.get("dynamic.span_fringes", dy.span_fringes);
  sc.omega_d_list.clear();
  for (double w : r.numbers("dynamic.omega_d_mrads", {0.0, 1.0, 2.0, 3.0, 4.0})) {
    if (w < 0.0) throw ConfigError("dynamic.omega_d_mrads: values must be >= 0");
    sc.omega_d_list.push_back(w * 1e-3);
  }

  VelocimetryConfig& ve = sc.velocimetry;
  ve.n_spectra = r.get<std::size_t>("velocimetry.n_spectra", ve.n_spectra);
  ve.spectrum_period = r.get("velocimetry.spectrum_period_s", ve.spectrum_period);
  ve.v_launch = cyc.v_launch;
  ve.pulse_duration = r.get("velocimetry.pulse_duration_us", ve.pulse_duration * 1e6) * 1e-6;
  ve.grid_points = r.get<std::size_t>("velocimetry.grid_points", ve.grid_points);
  ve.model.side_amplitude = r.get("velocimetry.side_amplitude", ve.model.side_amplitude);
  ve.model.co_prop_amplitude = r.get("velocimetry.co_prop_amplitude", ve.model.co_prop_amplitude);
  ve.model.noise_sigma = r.get("velocimetry.noise_p2", 0.01);
  ve.model.include_tpls = r.get("velocimetry.include_tpls", true);
  ve.model.k_eff = species.k_eff();
  ve.model.recoil = species.recoil();
  ve.correct_tpls = r.get("velocimetry.correct_tpls", true);
  ve.drift.white_sigma = r.get("velocimetry.drift_white_umps", 0.0) * 1e-6;
  ve.drift.gm_sigma = r.get("velocimetry.drift_gm_umps", 0.0) * 1e-6;
  ve.drift.gm_tau = r.get("velocimetry.drift_gm_tau_s", ve.drift.gm_tau);
  ve.tpls_durations.clear();
  for (double us : r.numbers("velocimetry.tpls_durations_us", {5, 10, 15, 20, 30, 40})) {
    ve.tpls_durations.push_back(us * 1e-6);
  }

  BudgetInputs& b = sc.budget;
  b.wavefront = wf;
  b.asymmetry_dx = dx;
  b.v_launch = cyc.v_launch;
  b.k_eff = species.k_eff();
  b.T = cyc.T;
  b.d0 = r.get("budget.d0_mm", 0.0) * 1e-3;
  b.phi0 = r.get("budget.phi0_rad", 0.0);
  b.omega_d = r.get("budget.omega_d_mrads", 0.0) * 1e-3;
  b.cycle_period = cyc.cycle_period;
  b.omega_static = st.omega;
  const auto off = r.numbers("budget.atom_offset_mm", {0.0, 0.0, 0.0});
  if (off.size() != 3) throw ConfigError("budget.atom_offset_mm: expected three components");
  b.atom_offset = Vec3(off[0], off[1], off[2]) * 1e-3;
  b.tilt = r.get("budget.tilt_mrad", 0.0) * 1e-3;
  b.gravity = st.gravity;
  sc.budget_oq_waves = oq_waves;

  r.reject_unknown();
  try {
    species.validate();
    st.validate();
    dy.validate();
    if (!(sc.duration > 0.0)) throw std::invalid_argument("duration_s must be > 0");
    if (ve.n_spectra < 1) throw std::invalid_argument("velocimetry.n_spectra must be >= 1");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

}  // namespace atomsense
