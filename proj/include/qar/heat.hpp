// heat.hpp: steady-state heat currents and the coefficient of performance.
//
// Currents are in hbar = 1 units (rad/s per s); multiply by hbar for watts. A positive
// current flows from the bath into the machine.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "qar/lindblad.hpp"
#include "qar/rate_model.hpp"
#include "qar/thermo.hpp"

namespace qar {

struct CopResult {
    std::array<double, 3> q_dot{};  // Q1 (hot), Q2 (cold), Q3 (target)
    double cop = std::numeric_limits<double>::quiet_NaN();
    double carnot = std::numeric_limits<double>::quiet_NaN();

    std::array<double, 3> q_dot_watts() const {
        return {q_dot[0] * constants::hbar, q_dot[1] * constants::hbar, q_dot[2] * constants::hbar};
    }
    /// Currents expressed as quanta-weighted frequencies (Hz per second).
    std::array<double, 3> q_dot_hz() const {
        return {to_hz(q_dot[0]), to_hz(q_dot[1]), to_hz(q_dot[2])};
    }
    double first_law_residual() const { return q_dot[0] + q_dot[1] + q_dot[2]; }
};

/// Q_i = Tr(H L_i rho_ss) for each channel; channels must address qudits 1, 2, 3.
/// Throws StaleState when rho_ss is not annihilated by the full generator to 1e-8 (relative).
inline CopResult heat_currents(const Operator& h, std::span<const DissipationChannel> channels,
                               const DensityMatrix& rho_ss, double stale_tolerance = 1e-8) {
    require_same_space(h.space(), rho_ss.space(), "heat_currents");
    const auto full = build_liouvillian(h, channels);
    const double residual = steady_state_residual(full, rho_ss);
    if (residual > stale_tolerance) {
        throw StaleState("heat_currents: state is not stationary (relative residual " +
                         std::to_string(residual) + ")");
    }
    CopResult out;
    for (const auto& ch : channels) {
        if (ch.qudit < 1 || ch.qudit > 3) throw IndexOutOfRange("heat_currents: channel qudit outside 1..3");
        const Matrix lr = channel_liouvillian(h.space(), ch).apply(rho_ss.matrix());
        out.q_dot[static_cast<std::size_t>(ch.qudit - 1)] += (h.matrix() * lr).trace().real();
    }
    return out;
}

/// COP = Q3 / Q1.
inline double cop(const CopResult& currents) {
    if (currents.q_dot[0] == 0.0) throw ValidationError("cop: hot-bath current is zero");
    return currents.q_dot[2] / currents.q_dot[0];
}

/// Heat currents of the reduced rate model from its transition fluxes and the bare
/// transition energies of H_eff.
inline CopResult rate_heat_currents(const DeviceParams& p, const RateSet& r, const RateState& s) {
    using namespace rate_index;
    const auto& x = s.x;
    CopResult out;
    const double flux1 = r.up[0] * (x(p000) + x(p001)) - r.down[0] * (x(p100) + x(p101));
    const double flux2_01 = r.up[1] * x(p000) - r.down[1] * x(p010);
    const double flux2_12 = 2.0 * r.up[1] * x(p010) - 2.0 * r.down[1] * x(p020);
    const double flux3 = r.up[2] * (x(p000) + x(p100)) - r.down[2] * (x(p001) + x(p101));
    out.q_dot[0] = p.omega1 * flux1;
    out.q_dot[1] = p.omega2 * flux2_01 + (p.omega2 + p.kerr[1][1]) * flux2_12;
    out.q_dot[2] = p.omega3 * flux3;
    return out;
}

}  // namespace qar
