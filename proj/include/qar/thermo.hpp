// thermo.hpp: Bose-Einstein thermometry and the refrigerator Carnot bound.
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "qar/errors.hpp"

namespace qar {

namespace constants {
inline constexpr double planck = 6.62607015e-34;       // J s
inline constexpr double boltzmann = 1.380649e-23;      // J / K
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

/// Converts a frequency in Hz to an angular frequency in rad/s.
constexpr double angular(double hz) noexcept { return constants::two_pi * hz; }
constexpr double to_hz(double rad_per_s) noexcept { return rad_per_s / constants::two_pi; }

namespace detail {
inline double quantum_temperature(double f_hz) { return constants::planck * f_hz / constants::boltzmann; }
}  // namespace detail

/// Mean Bose-Einstein occupation n = 1/(exp(hf/kT) - 1).
inline double occupation_from_temperature(double f_hz, double kelvin) {
    if (!(f_hz > 0.0)) throw ValidationError("occupation_from_temperature: frequency must be positive");
    if (!(kelvin > 0.0)) throw ValidationError("occupation_from_temperature: temperature must be positive");
    return 1.0 / std::expm1(detail::quantum_temperature(f_hz) / kelvin);
}

/// Inverse of occupation_from_temperature.
inline double temperature_from_occupation(double f_hz, double n) {
    if (!(f_hz > 0.0)) throw ValidationError("temperature_from_occupation: frequency must be positive");
    if (!(n > 0.0)) throw ValidationError("temperature_from_occupation: occupation must be positive");
    return detail::quantum_temperature(f_hz) / std::log1p(1.0 / n);
}

/// Temperature of a two-level system whose excited population is p.
inline double effective_temperature(double f_hz, double p) {
    if (!(f_hz > 0.0)) throw ValidationError("effective_temperature: frequency must be positive");
    if (!(p > 0.0) || !(p < 0.5)) {
        throw ValidationError("effective_temperature: population must lie in (0, 0.5), got " +
                              std::to_string(p));
    }
    return detail::quantum_temperature(f_hz) / std::log((1.0 - p) / p);
}

/// Carnot bound T_T (T_H - T_C) / (T_H (T_C - T_T)) for a refrigerator cooling a target
/// at T_T by consuming heat from T_H and dumping into T_C.
inline double carnot_cop(double t_target, double t_cold, double t_hot) {
    if (!(t_target > 0.0 && t_cold > t_target && t_hot > t_cold)) {
        throw ValidationError("carnot_cop: requires T_hot > T_cold > T_target > 0");
    }
    return t_target * (t_hot - t_cold) / (t_hot * (t_cold - t_target));
}

}  // namespace qar
