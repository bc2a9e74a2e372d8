#pragma once

#include <numbers>

// CODATA 2018 values. Every module takes its physical constants from here.
namespace atomsense::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double bohr_magneton = 9.2740100783e-24;   // J/T
inline constexpr double hbar = 1.054571817e-34;             // J s
inline constexpr double boltzmann = 1.380649e-23;           // J/K
inline constexpr double rb87_mass = 1.443160648e-25;        // kg
inline constexpr double rb87_d2_wavelength = 780.241209686e-9;  // m
inline constexpr double rb87_hyperfine = 6.834682610904e9;  // Hz
inline constexpr double rb87_gf_f2 = 0.5;

inline constexpr double gauss = 1e-4;  // T
inline constexpr double mgal = 1e-5;   // m/s^2

}  // namespace atomsense::constants
