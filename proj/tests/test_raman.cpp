#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "atomsense/analysis.hpp"
#include "atomsense/raman_velocimetry.hpp"

using namespace atomsense;

namespace {

constexpr double kV = 0.082;

TplsParams params_for(double v, double tau) {
  const Species rb;
  return {std::numbers::pi / tau, rb.k_eff() * v, rb.recoil()};
}

}  // namespace

TEST(Tpls, SpotValueAtTwentyMicroseconds) {
  const double shift_hz = tpls_shift(params_for(kV, 20e-6)) / (2 * std::numbers::pi);
  EXPECT_NEAR(shift_hz, -1.50e3, 0.01e3);
}

TEST(Tpls, ScalesAsRabiSquared) {
  const double a = tpls_shift(params_for(kV, 20e-6));
  const double b = tpls_shift(params_for(kV, 10e-6));
  EXPECT_NEAR(b / a, 4.0, 1e-12);
}

TEST(Tpls, DegenerateDopplerRejected) {
  const Species rb;
  EXPECT_THROW(tpls_shift({1e5, 0.0, rb.recoil()}), DegenerateDoppler);
  EXPECT_THROW(tpls_shift({1e5, 2.0 * rb.recoil(), rb.recoil()}), DegenerateDoppler);
}

TEST(Splitting, VelocityRoundTrip) {
  const double k = Species{}.k_eff();
  for (double v : {0.01, 0.082, 0.3}) {
    EXPECT_NEAR(velocity_from_splitting(splitting_from_velocity(v, k), k), v, 1e-15);
  }
  EXPECT_NEAR(splitting_from_velocity(kV, k), 420.3e3, 0.1e3);
}

TEST(Rabi, PiPulseOnResonance) {
  const double tau = 20e-6, rabi = std::numbers::pi / tau;
  EXPECT_NEAR(rabi_probability(0.0, rabi, tau), 1.0, 1e-15);
  // First zero of the sinc-like lineshape at sqrt(3) Omega detuning.
  EXPECT_NEAR(rabi_probability(std::sqrt(3.0) * rabi, rabi, tau), 0.0, 1e-15);
}

TEST(Spectrum, NoiselessFitRecoversVelocity) {
  SpectrumModel m;
  m.include_tpls = false;
  const double tau = 20e-6;
  RngStream rng(1, 1);
  const auto grid = default_grid(kV, tau, m.k_eff, 400);
  const Spectrum s = simulate_spectrum(kV, tau, std::numbers::pi / tau, grid, m, rng);
  ASSERT_EQ(s.lines.size(), 3u);
  const VelocityFit f = fit_velocity(s, m.k_eff, false, params_for(kV, tau));
  EXPECT_NEAR(f.v, kV, 1e-6);
}

TEST(Spectrum, LightShiftCorrectionRestoresVelocity) {
  SpectrumModel m;
  const double tau = 10e-6;
  RngStream rng(1, 1);
  const auto grid = default_grid(kV, tau, m.k_eff, 400);
  const Spectrum s = simulate_spectrum(kV, tau, std::numbers::pi / tau, grid, m, rng);
  const TplsParams p{std::numbers::pi / tau, 0.0, m.recoil};
  const VelocityFit raw = fit_velocity(s, m.k_eff, false, p);
  const VelocityFit cor = fit_velocity(s, m.k_eff, true, p);
  EXPECT_GT(std::abs(raw.v - kV) / kV, 0.01);
  EXPECT_NEAR(cor.v, kV, 2e-5);
}

TEST(Spectrum, NarrowGridRejected) {
  SpectrumModel m;
  RngStream rng(1, 1);
  std::vector<double> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(-1e5 + 4e3 * i);
  EXPECT_THROW(simulate_spectrum(kV, 20e-6, std::numbers::pi / 20e-6, grid, m, rng), GridTooNarrow);
}

TEST(Spectrum, FlatSpectrumHasNoPeaks) {
  Spectrum s;
  for (int i = 0; i < 50; ++i) s.points.push_back({-3e5 + 12e3 * i, 0.0, 0.0});
  EXPECT_THROW(fit_velocity(s, Species{}.k_eff(), false, params_for(kV, 20e-6)), PeakNotFound);
}

TEST(TplsComparison, UncorrectedConvergesCorrectedFlat) {
  SpectrumModel m;
  m.noise_sigma = 0.01;
  const std::vector<double> durations{5e-6, 10e-6, 20e-6, 40e-6};
  const auto rows = tpls_comparison(kV, durations, m, 3);
  ASSERT_EQ(rows.size(), durations.size());
  EXPECT_GT(std::abs(rows.front().v_uncorrected - kV) / kV, 0.03);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(std::abs(rows[i].v_uncorrected - kV), std::abs(rows[i - 1].v_uncorrected - kV));
  }
  for (const auto& r : rows) EXPECT_LE(std::abs(r.v_corrected - kV), 3.0 * r.stat_err + 1e-6);
}

TEST(VelocityDrift, GaussMarkovAllanVarianceLimits) {
  const VelocityDriftModel d{0.0, 1e-4, 86400.0};
  // Short tau: rising like a random walk; tau >> tau_c: falling as 1/tau.
  EXPECT_NEAR(d.gm_avar(86.4) / (1e-8 * 86.4 / (3 * 86400.0) * 2), 1.0, 0.01);
  EXPECT_NEAR(d.gm_avar(86400.0 * 1000) * (1000.0) / (2e-8), 1.0, 0.01);
}

TEST(VelocityDrift, SeriesIsDeterministicWithStationaryRms) {
  const VelocityDriftModel d{0.0, 1e-4, 100.0};
  const auto a = velocity_series(kV, d, 100000, 10.0, 5);
  const auto b = velocity_series(kV, d, 100000, 10.0, 5);
  EXPECT_EQ(a, b);
  double s2 = 0;
  for (double x : a) s2 += (x - kV) * (x - kV);
  EXPECT_NEAR(std::sqrt(s2 / a.size()), 1e-4, 0.1e-4);
}
