// atomsense: scenario runner for the dual atom accelerometer-gyroscope
// simulator. Every subcommand writes CSV tables (and optionally SVG plots)
// into --out-dir; outputs depend only on the config text and the seed.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomsense/analysis.hpp"
#include "atomsense/config.hpp"
#include "atomsense/fusion.hpp"
#include "atomsense/io.hpp"
#include "atomsense/raman_velocimetry.hpp"
#include "atomsense/sequencer.hpp"
#include "atomsense/svg.hpp"

namespace fs = std::filesystem;
using namespace atomsense;

namespace {

enum class Verbosity { quiet, info, debug };

Verbosity verbosity() {
  const char* env = std::getenv("ATOMSENSE_LOG");
  if (!env) return Verbosity::info;
  const std::string v(env);
  if (v == "quiet" || v == "error" || v == "0") return Verbosity::quiet;
  if (v == "debug" || v == "2") return Verbosity::debug;
  return Verbosity::info;
}

void log(Verbosity level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(verbosity())) std::cerr << "atomsense: " << msg << '\n';
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  unsigned threads = default_threads();
  bool plot = true;
};

struct Context {
  Scenario sc;
  fs::path out;
  unsigned threads = 1;
  bool plot = true;
  std::string command;

  io::Metadata meta() const {
    io::Metadata m;
    m.add("atomsense", command);
    m.add("config_hash", sc.config_hash);
    m.add("seed", std::to_string(sc.seed));
    return m;
  }
};

Context make_context(const Globals& g, const std::string& command) {
  Context ctx;
  ctx.sc = g.config.empty() ? parse_scenario("", "defaults") : load_scenario(g.config);
  if (g.seed) ctx.sc.seed = *g.seed;
  ctx.out = g.out_dir;
  ctx.threads = std::max(1u, g.threads);
  ctx.plot = ctx.sc.plot && g.plot;
  ctx.command = command;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw Error("cannot create " + ctx.out.string() + ": " + ec.message());
  return ctx;
}

void write_trace(const Context& ctx, const std::string& name, const SensorTrace& trace) {
  io::CsvWriter w(ctx.out / name, ctx.meta(), {"t_s", "value"});
  for (std::size_t i = 0; i < trace.size(); ++i) w.row(std::vector<double>{trace.time(i), trace.samples[i]});
}

AdevCurve write_adev(const Context& ctx, const std::string& name, const std::vector<double>& series,
                     double dt) {
  const AdevCurve c = allan_deviation(series, dt, octave_taus(series.size(), dt));
  io::CsvWriter w(ctx.out / name, ctx.meta(), {"tau_s", "sigma", "ci_low", "ci_high"});
  for (std::size_t i = 0; i < c.size(); ++i) {
    w.row(std::vector<double>{c.taus[i], c.sigmas[i], c.ci_low[i], c.ci_high[i]});
  }
  return c;
}

svg::Series curve_series(const AdevCurve& c, const std::string& label, std::size_t color) {
  return {label, c.taus, c.sigmas, false, svg::palette(color)};
}

std::vector<TimedValue> timed(const SensorTrace& t) {
  std::vector<TimedValue> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = {t.time(i), t.samples[i]};
  return out;
}

std::vector<HybridRow> write_hybrid(const Context& ctx, const std::string& name,
                                    const SensorTrace& classical,
                                    const std::vector<TimedValue>& atomic, double gain,
                                    double window) {
  const auto c = timed(classical);
  const auto rows = hybridize(c, atomic, gain, window);
  io::Metadata m = ctx.meta();
  m.add("gain", gain);
  io::CsvWriter w(ctx.out / name, m,
                  {"t_s", "hybrid_value", "classical_value", "bias_estimate", "atomic_value_if_present"});
  for (const auto& r : rows) {
    w.row(std::vector<std::string>{io::fmt(r.t), io::fmt(r.hybrid), io::fmt(r.classical),
                                   io::fmt(r.bias), r.atomic ? io::fmt(*r.atomic) : ""});
  }
  return rows;
}

// ------------------------------------------------------------- static-run --

int cmd_static(const Globals& g, std::optional<double> duration_override) {
  Context ctx = make_context(g, "static-run");
  const Scenario& sc = ctx.sc;
  const double duration = duration_override.value_or(sc.duration);
  log(Verbosity::info, "static campaign, " + io::fmt(duration) + " s simulated");
  const StaticCampaign camp = run_static_campaign(sc.static_scene, duration, sc.seed, ctx.threads);
  const double dt = camp.record_period;

  {
    io::CsvWriter w(ctx.out / "campaign.csv", ctx.meta(),
                    {"t_s", "a_mps2", "omega_rads", "alpha_pk_pv", "alpha_pk_mv", "alpha_mk_pv",
                     "alpha_mk_mv", "a_conv_correction", "omega_uncorrected_rads"});
    for (const auto& r : camp.records) {
      w.row(std::vector<double>{r.t, r.a, r.omega, r.alpha[kPkPv], r.alpha[kPkMv], r.alpha[kMkPv],
                                r.alpha[kMkMv], r.correction, r.omega_raw});
    }
  }
  {
    io::CsvWriter w(ctx.out / "shots.csv", ctx.meta(),
                    {"t_pi_s", "k_sign", "v_sign", "side", "alpha_rads2", "p2", "a_conv_true_mps2",
                     "a_conv_classical_mps2"});
    for (const auto& s : camp.shots) {
      w.row(std::vector<double>{s.t_pi, double(s.k_sign), double(s.v_sign), double(s.side), s.alpha,
                                s.p2, s.a_conv_true, s.a_conv_classical});
    }
  }
  write_trace(ctx, "classical_acceleration.csv", camp.accelerometer);
  write_trace(ctx, "classical_rotation.csv", camp.gyroscope);

  std::vector<double> a, w, w_raw;
  std::vector<TimedValue> at_a, at_w;
  for (const auto& r : camp.records) {
    a.push_back(r.a);
    w.push_back(r.omega);
    w_raw.push_back(r.omega_raw);
    at_a.push_back({r.t, r.a});
    at_w.push_back({r.t, r.omega});
  }
  const AdevCurve ad_a = write_adev(ctx, "adev_acceleration.csv", a, dt);
  const AdevCurve ad_w = write_adev(ctx, "adev_rotation.csv", w, dt);
  const AdevCurve ad_w_raw = write_adev(ctx, "adev_rotation_uncorrected.csv", w_raw, dt);
  const double cdt = camp.accelerometer.dt();
  const AdevCurve ad_ca = write_adev(ctx, "adev_classical_acceleration.csv", camp.accelerometer.samples, cdt);
  const AdevCurve ad_cw = write_adev(ctx, "adev_classical_rotation.csv", camp.gyroscope.samples, cdt);

  auto gain_for = [&](double configured, const AdevCurve& atomic, const AdevCurve& classical,
                      const std::string& what) {
    if (configured > 0.0) return configured;
    const GainChoice gc = pick_gain(atomic, classical, dt, sc.fusion.fallback_gain);
    if (gc.fallback) {
      log(Verbosity::info, what + ": no Allan deviation crossing, fallback gain " + io::fmt(gc.gain));
    } else {
      log(Verbosity::debug, what + ": crossing at " + io::fmt(gc.tau_cross) + " s, gain " + io::fmt(gc.gain));
    }
    return gc.gain;
  };
  const double g_a = gain_for(sc.fusion.gain_acceleration, ad_a, ad_ca, "acceleration");
  const double g_w = gain_for(sc.fusion.gain_rotation, ad_w, ad_cw, "rotation");
  const auto hy_a = write_hybrid(ctx, "hybrid_acceleration.csv", camp.accelerometer, at_a, g_a, dt);
  const auto hy_w = write_hybrid(ctx, "hybrid_rotation.csv", camp.gyroscope, at_w, g_w, dt);
  std::vector<double> ha, hw;
  for (const auto& r : hy_a) ha.push_back(r.hybrid);
  for (const auto& r : hy_w) hw.push_back(r.hybrid);
  const AdevCurve ad_ha = write_adev(ctx, "adev_hybrid_acceleration.csv", ha, cdt);
  const AdevCurve ad_hw = write_adev(ctx, "adev_hybrid_rotation.csv", hw, cdt);

  const double floor_hi = std::min(64.0, ad_w.taus.back());
  {
    io::CsvWriter s(ctx.out / "summary.csv", ctx.meta(), {"metric", "value"});
    const double fa = white_floor(ad_a, 32.0, std::max(32.0, std::min(256.0, ad_a.taus.back())));
    const double fw = white_floor(ad_w, dt, floor_hi);
    const double fw_raw = white_floor(ad_w_raw, dt, floor_hi);
    double mean_a = 0.0, mean_w = 0.0;
    for (double x : a) mean_a += x;
    for (double x : w) mean_w += x;
    mean_a /= static_cast<double>(a.size());
    mean_w /= static_cast<double>(w.size());
    s.row(std::vector<std::string>{"records", std::to_string(camp.records.size())});
    s.row(std::vector<std::string>{"mean_a_mps2", io::fmt(mean_a)});
    s.row(std::vector<std::string>{"mean_omega_rads", io::fmt(mean_w)});
    s.row(std::vector<std::string>{"white_floor_a_mps2_rtHz", io::fmt(fa)});
    s.row(std::vector<std::string>{"white_floor_omega_rads_rtHz", io::fmt(fw)});
    s.row(std::vector<std::string>{"white_floor_omega_uncorrected_rads_rtHz", io::fmt(fw_raw)});
    s.row(std::vector<std::string>{"vibration_correction_factor", io::fmt(fw_raw / fw)});
    s.row(std::vector<std::string>{"gain_acceleration", io::fmt(g_a)});
    s.row(std::vector<std::string>{"gain_rotation", io::fmt(g_w)});
    log(Verbosity::info, "rotation white floor " + io::fmt(fw) + " rad/s/rtHz, acceleration " +
                             io::fmt(fa) + " m/s^2/rtHz");
  }

  if (ctx.plot) {
    svg::write({"Acceleration Allan deviation", "tau (s)", "sigma (m/s^2)", true, true,
                {curve_series(ad_ca, "classical", 0), curve_series(ad_a, "atomic", 1),
                 curve_series(ad_ha, "hybrid", 2)}},
               ctx.out / "adev_acceleration.svg");
    svg::write({"Rotation Allan deviation", "tau (s)", "sigma (rad/s)", true, true,
                {curve_series(ad_cw, "classical", 0), curve_series(ad_w, "atomic corrected", 1),
                 curve_series(ad_w_raw, "atomic uncorrected", 3), curve_series(ad_hw, "hybrid", 2)}},
               ctx.out / "adev_rotation.svg");
    // Per-shot atomic acceleration against the classical convolved reading.
    svg::Series corr{"+k +v shots", {}, {}, true, svg::palette(0)};
    for (const auto& s : camp.shots) {
      if (s.k_sign > 0 && s.v_sign > 0) {
        corr.x.push_back(s.a_conv_classical);
        corr.y.push_back(s.alpha / (sc.static_scene.species.k_eff()));
      }
    }
    svg::write({"Atomic vs classical acceleration", "classical a_conv (m/s^2)",
                "alpha / k (m/s^2)", false, false, {corr}},
               ctx.out / "correlation.svg");
  }
  return 0;
}

// ------------------------------------------------------------ dynamic-run --

int cmd_dynamic(const Globals& g, const std::vector<double>& omega_override_mrads) {
  Context ctx = make_context(g, "dynamic-run");
  const Scenario& sc = ctx.sc;
  const DynamicScene& dy = sc.dynamic_scene;
  std::vector<double> omegas = sc.omega_d_list;
  if (!omega_override_mrads.empty()) {
    omegas.clear();
    for (double w : omega_override_mrads) omegas.push_back(w * 1e-3);
  }
  const double k = dy.species.k_eff();
  const double v = dy.cycle.v_launch;

  struct ScanPair {
    std::optional<FringeScanResult> pk, mk;
  };
  std::uint64_t scan_id = 0;
  auto scan = [&](int ks, int vs, double wd, std::size_t index) -> std::optional<FringeScanResult> {
    const std::uint64_t s = CounterRng(sc.seed, 0xd9).bits(scan_id++);
    try {
      FringeScanResult r = run_fringe_scan(dy, ks, vs, wd, s, ctx.threads);
      const std::string name = "fringe_" + std::to_string(index) + (ks > 0 ? "_pk" : "_mk") +
                               (vs > 0 ? "_pv" : "_mv") + ".csv";
      io::Metadata m = ctx.meta();
      m.add("omega_d_rads", wd).add("alpha_star_rads2", r.alpha_star).add("contrast", r.contrast);
      io::CsvWriter w(ctx.out / name, m, {"alpha_rads2", "alpha_corrected_rads2", "p2"});
      for (std::size_t i = 0; i < r.p2.size(); ++i) {
        w.row(std::vector<double>{r.alphas[i], r.alphas_corrected[i], r.p2[i]});
      }
      return r;
    } catch (const FitFailed& e) {
      log(Verbosity::info, "scan omega_d=" + io::fmt(wd) + " failed: " + e.what());
      return std::nullopt;
    }
  };

  std::array<ScanPair, 2> ref;  // Omega_d = 0 reference, per v sign
  for (int vi = 0; vi < 2; ++vi) {
    const int vs = vi == 0 ? 1 : -1;
    ref[vi].pk = scan(1, vs, 0.0, 0);
    ref[vi].mk = scan(-1, vs, 0.0, 0);
  }

  io::CsvWriter table(ctx.out / "dynamic_summary.csv", ctx.meta(),
                      {"omega_d_rads", "v_sign", "alpha_star_pk", "alpha_star_mk", "contrast_pk",
                       "contrast_mk", "contrast_model", "omega_recovered_rads",
                       "omega_recovered_err_rads", "omega_reference_rads", "omega_classical_rads",
                       "fit_ok"});
  std::vector<double> contrast_w, contrast_c;
  std::array<svg::Series, 2> rec_series{svg::Series{"+v", {}, {}, true, svg::palette(0)},
                                        svg::Series{"-v", {}, {}, true, svg::palette(1)}};
  svg::Series ref_series{"drive", {}, {}, false, svg::palette(2)};
  const double sigma_v = dy.species.velocity_dispersion(dy.temperature);
  double c0 = 0.0;
  for (int vi = 0; vi < 2; ++vi) {
    if (ref[vi].pk && ref[vi].mk) c0 += 0.25 * (ref[vi].pk->contrast + ref[vi].mk->contrast);
  }

  for (std::size_t wi = 0; wi < omegas.size(); ++wi) {
    const double wd = omegas[wi];
    const DriveWaveform wave = dy.waveform(wd);
    for (int vi = 0; vi < 2; ++vi) {
      const int vs = vi == 0 ? 1 : -1;
      ScanPair cur;
      if (wd == 0.0) {
        cur = ref[vi];
      } else {
        cur.pk = scan(1, vs, wd, wi + 1);
        cur.mk = scan(-1, vs, wd, wi + 1);
      }
      const double reference = dy.drive.projection(vs) * coriolis_weighted_rate(wave);
      // Classical gyro pair: X along the sensitive axis, Y along the launch axis.
      const Vec3 axis = dy.drive.axis.normalized();
      const double w_eff = coriolis_weighted_rate(wave);
      const double classical = project_classical_rotation(axis.x() * w_eff, axis.y() * w_eff, dy.drive.beta(vs));
      const double model = c0 * contrast_decay(k, sigma_v, dy.cycle.T, std::abs(w_eff));
      const bool ok = cur.pk && cur.mk && ref[vi].pk && ref[vi].mk;
      double rec = std::nan(""), err = std::nan("");
      double cpk = cur.pk ? cur.pk->contrast : std::nan("");
      double cmk = cur.mk ? cur.mk->contrast : std::nan("");
      if (ok) {
        rec = demodulate_dynamic({cur.pk->alpha_star, cur.mk->alpha_star, ref[vi].pk->alpha_star,
                                  ref[vi].mk->alpha_star},
                                 vs * v, k);
        err = std::sqrt(std::pow(cur.pk->alpha_star_err, 2) + std::pow(cur.mk->alpha_star_err, 2) +
                        std::pow(ref[vi].pk->alpha_star_err, 2) + std::pow(ref[vi].mk->alpha_star_err, 2)) /
              (4.0 * v * k);
        rec_series[vi].x.push_back(wd);
        rec_series[vi].y.push_back(rec);
        contrast_w.push_back(w_eff);
        contrast_c.push_back(0.5 * (cpk + cmk));
      }
      if (vi == 0) {
        ref_series.x.push_back(wd);
        ref_series.y.push_back(reference);
      }
      table.row(std::vector<double>{wd, double(vs), cur.pk ? cur.pk->alpha_star : std::nan(""),
                                    cur.mk ? cur.mk->alpha_star : std::nan(""), cpk, cmk, model, rec,
                                    err, reference, classical, ok ? 1.0 : 0.0});
    }
  }

  if (contrast_w.size() >= 2) {
    try {
      const ContrastDecayFit f = fit_contrast_decay(contrast_w, contrast_c, k, dy.cycle.T, dy.species);
      io::CsvWriter w(ctx.out / "contrast_fit.csv", ctx.meta(), {"contrast0", "sigma_v_mps", "temperature_K"});
      w.row(std::vector<double>{f.contrast0, f.sigma_v, f.temperature});
      log(Verbosity::info, "contrast decay: equivalent temperature " + io::fmt(f.temperature * 1e6) + " uK");
    } catch (const FitFailed& e) {
      log(Verbosity::info, std::string("contrast decay fit failed: ") + e.what());
    }
  }
  if (ctx.plot) {
    svg::write({"Recovered rotation vs drive", "Omega_d (rad/s)", "Omega (rad/s)", false, false,
                {ref_series, rec_series[0], rec_series[1]}},
               ctx.out / "dynamic_linearity.svg");
  }
  return 0;
}

// ------------------------------------------------------------ velocimetry --

int cmd_velocimetry(const Globals& g, std::optional<std::size_t> n_override) {
  Context ctx = make_context(g, "velocimetry");
  const VelocimetryConfig& ve = ctx.sc.velocimetry;
  const std::size_t n = n_override.value_or(ve.n_spectra);
  const double k = ve.model.k_eff;
  const double tau = ve.pulse_duration;
  const double rabi = constants::pi / tau;
  const auto truth = velocity_series(ve.v_launch, ve.drift, n, ve.spectrum_period, ctx.sc.seed);
  const auto grid = default_grid(ve.v_launch, tau, k, ve.grid_points);
  const TplsParams tp{rabi, 0.0, ve.model.recoil};

  std::vector<double> vs(n), errs(n);
  std::optional<Spectrum> first;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(CounterRng(ctx.sc.seed, 0x5bec).substream(i));
    const Spectrum s = simulate_spectrum(truth[i], tau, rabi, grid, ve.model, rng);
    const VelocityFit f = fit_velocity(s, k, ve.correct_tpls, tp);
    vs[i] = f.v;
    errs[i] = f.stat_err;
    if (i == 0) first = s;
  }
  {
    io::CsvWriter w(ctx.out / "velocity.csv", ctx.meta(), {"t_s", "v_m_per_s", "stat_err"});
    for (std::size_t i = 0; i < n; ++i) {
      w.row(std::vector<double>{static_cast<double>(i) * ve.spectrum_period, vs[i], errs[i]});
    }
  }
  {
    io::CsvWriter w(ctx.out / "spectrum.csv", ctx.meta(), {"freq_offset_hz", "p2", "p2_err"});
    for (const auto& p : first->points) w.row(std::vector<double>{p.freq_offset_hz, p.p2, p.p2_err});
  }
  std::optional<AdevCurve> ad;
  if (n >= 3) ad = write_adev(ctx, "adev_velocity.csv", vs, ve.spectrum_period);

  const auto rows = tpls_comparison(ve.v_launch, ve.tpls_durations, ve.model, ctx.sc.seed, ve.grid_points);
  {
    io::CsvWriter w(ctx.out / "tpls_comparison.csv", ctx.meta(),
                    {"pulse_duration_us", "tpls_shift_hz", "v_uncorrected_mps", "v_corrected_mps", "stat_err_mps"});
    for (const auto& r : rows) {
      w.row(std::vector<double>{r.pulse_duration * 1e6, r.shift_hz, r.v_uncorrected, r.v_corrected, r.stat_err});
    }
  }
  if (ctx.plot) {
    svg::Series spec{"P2", {}, {}, false, svg::palette(0)};
    for (const auto& p : first->points) {
      spec.x.push_back(p.freq_offset_hz);
      spec.y.push_back(p.p2);
    }
    svg::write({"Raman spectrum", "detuning (Hz)", "P2", false, false, {spec}}, ctx.out / "spectrum.svg");
    svg::Series raw{"uncorrected", {}, {}, true, svg::palette(1)};
    svg::Series cor{"corrected", {}, {}, true, svg::palette(0)};
    for (const auto& r : rows) {
      raw.x.push_back(r.pulse_duration * 1e6);
      raw.y.push_back(r.v_uncorrected);
      cor.x.push_back(r.pulse_duration * 1e6);
      cor.y.push_back(r.v_corrected);
    }
    svg::write({"Launch velocity vs pulse duration", "pulse duration (us)", "v (m/s)", false, false,
                {raw, cor}},
               ctx.out / "tpls_comparison.svg");
    if (ad) {
      svg::write({"Velocity Allan deviation", "tau (s)", "sigma (m/s)", true, true, {curve_series(*ad, "velocity", 0)}},
                 ctx.out / "adev_velocity.svg");
    }
  }
  return 0;
}

// ------------------------------------------------------------------ allan --

int cmd_allan(const Globals& g, const std::string& input, const std::string& column,
              std::optional<double> dt_opt, const std::string& output) {
  const io::CsvTable t = io::read_csv(input);
  const std::vector<double> y = t.numeric(column);
  double dt = dt_opt.value_or(0.0);
  if (!dt_opt) {
    const auto ts = t.numeric("t_s");
    if (ts.size() < 2) throw ConfigError(input + ": need two rows to infer dt");
    dt = ts[1] - ts[0];
  }
  if (!(dt > 0.0)) throw ConfigError("sample interval must be > 0");
  const AdevCurve c = allan_deviation(y, dt, octave_taus(y.size(), dt));
  io::Metadata m;
  m.add("atomsense", "allan");
  auto carry = [&](const std::string& key) {
    auto it = t.metadata.find(key);
    m.add(key, it != t.metadata.end() ? it->second : "none");
  };
  carry("config_hash");
  carry("seed");
  m.add("source_column", column);
  fs::path out = output.empty() ? fs::path(g.out_dir) / ("adev_" + column + ".csv") : fs::path(output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::CsvWriter w(out, m, {"tau_s", "sigma", "ci_low", "ci_high"});
  for (std::size_t i = 0; i < c.size(); ++i) {
    w.row(std::vector<double>{c.taus[i], c.sigmas[i], c.ci_low[i], c.ci_high[i]});
  }
  return 0;
}

// -------------------------------------------------------------- hybridize --

int cmd_hybridize(const Globals& g, const std::string& classical_path, const std::string& classical_col,
                  const std::string& atomic_path, const std::string& atomic_col,
                  std::optional<double> gain_opt, std::optional<double> window_opt) {
  Context ctx = make_context(g, "hybridize");
  const io::CsvTable ct = io::read_csv(classical_path);
  const io::CsvTable at = io::read_csv(atomic_path);
  const auto ctime = ct.numeric("t_s");
  const auto cval = ct.numeric(classical_col);
  const auto atime = at.numeric("t_s");
  const auto aval = at.numeric(atomic_col);
  if (ctime.size() < 3 || atime.size() < 3) throw ConfigError("hybridize: inputs too short");
  const double cdt = ctime[1] - ctime[0];
  const double adt = atime[1] - atime[0];
  const double window = window_opt.value_or(adt);
  double gain = gain_opt.value_or(0.0);
  if (gain <= 0.0) {
    const AdevCurve a = allan_deviation(aval, adt, octave_taus(aval.size(), adt));
    const AdevCurve c = allan_deviation(cval, cdt, octave_taus(cval.size(), cdt));
    const GainChoice gc = pick_gain(a, c, adt, ctx.sc.fusion.fallback_gain);
    gain = gc.gain;
    if (gc.fallback) log(Verbosity::info, "no Allan deviation crossing; fallback gain used");
  }
  std::vector<TimedValue> cl(ctime.size()), atv(atime.size());
  for (std::size_t i = 0; i < ctime.size(); ++i) cl[i] = {ctime[i], cval[i]};
  for (std::size_t i = 0; i < atime.size(); ++i) atv[i] = {atime[i], aval[i]};
  const auto rows = hybridize(cl, atv, gain, window);
  // Without a config, tag the output with the provenance of the atomic input.
  io::Metadata m;
  if (g.config.empty()) {
    m.add("atomsense", "hybridize");
    for (const char* key : {"config_hash", "seed"}) {
      auto it = at.metadata.find(key);
      m.add(key, it != at.metadata.end() ? it->second : "none");
    }
  } else {
    m = ctx.meta();
  }
  m.add("gain", gain).add("window_s", window);
  io::CsvWriter w(ctx.out / "hybrid.csv", m,
                  {"t_s", "hybrid_value", "classical_value", "bias_estimate", "atomic_value_if_present"});
  for (const auto& r : rows) {
    w.row(std::vector<std::string>{io::fmt(r.t), io::fmt(r.hybrid), io::fmt(r.classical),
                                   io::fmt(r.bias), r.atomic ? io::fmt(*r.atomic) : ""});
  }
  return 0;
}

// ----------------------------------------------------------------- budget --

int cmd_budget(const Globals& g) {
  Context ctx = make_context(g, "budget");
  const Scenario& sc = ctx.sc;
  io::CsvWriter w(ctx.out / "budget.csv", ctx.meta(), {"term", "axis", "value", "units", "inputs_hash"});
  for (const auto& r : systematic_budget(sc.budget)) {
    w.row(std::vector<std::string>{r.term, r.axis, io::fmt(r.value), r.units, sc.config_hash});
  }
  // The aberration is quoted two ways; report the alternative alongside:
  // 1.9 rad peak to valley over the waist with a 1.2 mm trajectory offset.
  WavefrontSpec alt = sc.budget.wavefront;
  alt.amplitude = 1.9 / std::pow(alt.waist, 3);
  const double alt_bias = wavefront_rotation_bias(alt, sc.budget.v_launch, 1.2e-3, sc.budget.k_eff, sc.budget.T);
  w.row(std::vector<std::string>{"wavefront_order" + std::to_string(alt.order) + "_pv1.9rad_dx1.2mm",
                                 "rotation", io::fmt(alt_bias), "rad/s", sc.config_hash});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for a dual atom-interferometer accelerometer and gyroscope"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "scenario TOML file");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--plot,!--no-plot", g.plot, "write SVG plots");

  std::optional<double> duration;
  auto* st = app.add_subcommand("static-run", "closed-loop static campaign");
  st->add_option("--duration", duration, "simulated seconds");

  std::vector<double> omega_list;
  auto* dy = app.add_subcommand("dynamic-run", "fringe scans under a sinusoidal rotation drive");
  dy->add_option("--omega-d", omega_list, "drive amplitudes in mrad/s");

  std::optional<std::size_t> n_spectra;
  auto* ve = app.add_subcommand("velocimetry", "launch velocity from Raman spectra");
  ve->add_option("--n-spectra", n_spectra, "number of spectra");

  std::string input, column = "value", output;
  std::optional<double> dt;
  auto* al = app.add_subcommand("allan", "Allan deviation of a CSV column");
  al->add_option("--input", input, "input CSV")->required();
  al->add_option("--column", column, "column name");
  al->add_option("--dt", dt, "sample interval in s (default: from t_s)");
  al->add_option("--out", output, "output CSV");

  std::string cl_path, cl_col = "value", at_path, at_col = "value";
  std::optional<double> gain, window;
  auto* hy = app.add_subcommand("hybridize", "bias-tracking fusion of classical and atomic series");
  hy->add_option("--classical", cl_path, "classical CSV")->required();
  hy->add_option("--classical-column", cl_col, "classical column");
  hy->add_option("--atomic", at_path, "atomic CSV")->required();
  hy->add_option("--atomic-column", at_col, "atomic column");
  hy->add_option("--gain", gain, "loop gain (default: from the Allan crossing)");
  hy->add_option("--window", window, "atomic averaging window in s");

  auto* bu = app.add_subcommand("budget", "systematic error budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*st) return cmd_static(g, duration);
    if (*dy) return cmd_dynamic(g, omega_list);
    if (*ve) return cmd_velocimetry(g, n_spectra);
    if (*al) return cmd_allan(g, input, column, dt, output);
    if (*hy) return cmd_hybridize(g, cl_path, cl_col, at_path, at_col, gain, window);
    if (*bu) return cmd_budget(g);
  } catch (const ConfigError& e) {
    std::cerr << "atomsense: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "atomsense: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
