// model.hpp: device parameters and the bare, effective and driven Hamiltonians.
//
// Units: angular frequencies and rates in rad/s, times in s, hbar = 1.
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "qar/hilbert.hpp"
#include "qar/thermo.hpp"

namespace qar {

/// How the measured relaxation time of Q3 maps onto the channel rate Gamma_3.
enum class RelaxationConvention {
    /// T_relax is the observed 1/e time: Gamma_3 (2 n3 + 1) = 1 / T_relax.
    total,
    /// Gamma_3 = 1 / T_relax regardless of the channel occupation.
    bare,
};

/// Sign of the rotating-frame detunings delta_i in the driven Hamiltonian.
enum class DetuningSign {
    /// delta_i = omega_i - omega_d, i.e. H_D1 = H_eff - omega_d * N (frame-consistent).
    frame,
    /// delta_i = omega_d - omega_i exactly as the model is usually written down.
    as_printed,
};

using KerrMatrix = std::array<std::array<double, 3>, 3>;

struct DeviceParams {
    double omega1 = 0.0, omega2 = 0.0, omega3 = 0.0;
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    double gamma1 = 0.0, gamma2 = 0.0;
    double t_relax = 0.0;
    double A = 0.0;
    std::optional<double> g12, g23;
    /// alpha_ij; the diagonal is the self-Kerr (normal-ordered), off-diagonal cross-Kerr.
    KerrMatrix kerr{};
    double n_res_1 = 0.0, n_res_2 = 0.0, n_res_3 = 0.0;
    RelaxationConvention relaxation = RelaxationConvention::total;

    /// Decay rate Gamma_3 of the target for a channel at occupation n3.
    double gamma3(double n3) const {
        if (relaxation == RelaxationConvention::bare) return 1.0 / t_relax;
        return 1.0 / (t_relax * (1.0 + 2.0 * n3));
    }

    /// Diagonal Kerr entries follow the anharmonicities; cross-Kerr terms are zero.
    void reset_kerr_to_anharmonicities() {
        kerr = {};
        kerr[0][0] = alpha1;
        kerr[1][1] = alpha2;
        kerr[2][2] = alpha3;
    }

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        auto require = [](bool ok, const std::string& what) {
            if (!ok) throw ValidationError("DeviceParams: " + what);
        };
        require(finite(omega1) && omega1 > 0 && finite(omega2) && omega2 > 0 && finite(omega3) &&
                    omega3 > 0,
                "mode frequencies must be positive");
        require(finite(alpha1) && finite(alpha2) && finite(alpha3), "anharmonicities must be finite");
        require(finite(gamma1) && gamma1 >= 0, "gamma1 must be >= 0");
        require(finite(gamma2) && gamma2 >= 0, "gamma2 must be >= 0");
        require(finite(t_relax) && t_relax > 0, "t_relax must be > 0");
        require(finite(A) && A >= 0, "A must be >= 0");
        require(!g12 || (finite(*g12) && *g12 >= 0), "g12 must be >= 0");
        require(!g23 || (finite(*g23) && *g23 >= 0), "g23 must be >= 0");
        for (const auto& row : kerr)
            for (double v : row) require(finite(v), "kerr entries must be finite");
        require(n_res_1 >= 0 && n_res_2 >= 0 && n_res_3 >= 0, "residual occupations must be >= 0");
    }
};

/// omega_2^res = (omega_1 + omega_3 - alpha_2) / 2, the Q2 frequency that makes |101> and
/// |020> degenerate.
inline double resonance_frequency(const DeviceParams& p) { return 0.5 * (p.omega1 + p.omega3 - p.alpha2); }

/// Measured device values. Q2 sits at its resonant frequency; n_res_1 and n_res_2 are the
/// 45 mK Bose-Einstein occupations at the Q1 and Q2 frequencies; n_res_3 reproduces the
/// residual target population P0 = 0.028 through P0 = n / (2n + 1).
inline DeviceParams measured_device() {
    DeviceParams p;
    p.omega1 = angular(5.327e9);
    p.omega3 = angular(3.725e9);
    p.alpha1 = angular(-213.4e6);
    p.alpha2 = angular(-205.1e6);
    p.alpha3 = angular(-237.8e6);
    p.omega2 = resonance_frequency(p);
    p.gamma1 = angular(70e3);
    p.gamma2 = angular(7.2e6);
    p.t_relax = 16.8e-6;
    p.A = angular(3.2e6);
    p.reset_kerr_to_anharmonicities();
    constexpr double base_temperature = 0.045;
    p.n_res_1 = occupation_from_temperature(to_hz(p.omega1), base_temperature);
    p.n_res_2 = occupation_from_temperature(to_hz(p.omega2), base_temperature);
    constexpr double residual_population = 0.028;
    p.n_res_3 = residual_population / (1.0 - 2.0 * residual_population);
    return p;
}

struct DriveSpec {
    double omega_d = 0.0;   // rad/s
    double Omega = 0.0;     // rad/s
    double duration = 0.0;  // s
    DetuningSign sign = DetuningSign::frame;

    void validate() const {
        if (!(Omega >= 0.0)) throw ValidationError("DriveSpec: Omega must be >= 0");
        if (!(duration >= 0.0)) throw ValidationError("DriveSpec: duration must be >= 0");
        if (!std::isfinite(omega_d)) throw ValidationError("DriveSpec: omega_d must be finite");
    }
};

namespace detail {

inline void require_device_space(const QuditSpace& space) {
    if (space.num_qudits() != 3) {
        throw DimensionMismatch("device Hamiltonians need a three-qudit space");
    }
}

inline const BasisLabel& label_101() {
    static const BasisLabel l{1, 0, 1};
    return l;
}
inline const BasisLabel& label_020() {
    static const BasisLabel l{0, 2, 0};
    return l;
}

/// sum_ij (alpha_ij / 2) :n_i n_j:, normal-ordered on the diagonal.
inline Operator kerr_terms(const QuditSpace& space, const KerrMatrix& kerr) {
    Operator h(space);
    std::array<Operator, 3> n{number(space, 1), number(space, 2), number(space, 3)};
    for (int i = 1; i <= 3; ++i) {
        const auto a = annihilation(space, i);
        const auto ad = a.adjoint();
        h += (0.5 * kerr[i - 1][i - 1]) * (ad * ad * a * a);
        for (int j = 1; j <= 3; ++j) {
            if (j == i) continue;
            h += (0.5 * kerr[i - 1][j - 1]) * (n[i - 1] * n[j - 1]);
        }
    }
    return h;
}

inline Operator three_body_term(const QuditSpace& space, double A) {
    if (space.dim(2) < 3) throw DimensionMismatch("three-body term needs Q2 truncated at d >= 3");
    return A * (transition(space, label_101(), label_020()) + transition(space, label_020(), label_101()));
}

}  // namespace detail

/// H = sum_i (w_i n_i + (alpha_i/2) a+a+aa) + g12 (a1+ a2 + h.c.) + g23 (a2+ a3 + h.c.).
inline Operator build_bare_hamiltonian(const QuditSpace& space, const DeviceParams& p) {
    detail::require_device_space(space);
    if (!p.g12 || !p.g23) {
        throw ConfigError("bare Hamiltonian needs g12 and g23; no default values exist");
    }
    const std::array<double, 3> w{p.omega1, p.omega2, p.omega3};
    const std::array<double, 3> alpha{p.alpha1, p.alpha2, p.alpha3};
    Operator h(space);
    for (int i = 1; i <= 3; ++i) {
        const auto a = annihilation(space, i);
        const auto ad = a.adjoint();
        h += w[i - 1] * (ad * a);
        h += (0.5 * alpha[i - 1]) * (ad * ad * a * a);
    }
    const auto a1 = annihilation(space, 1), a2 = annihilation(space, 2), a3 = annihilation(space, 3);
    h += *p.g12 * (a1.adjoint() * a2 + a1 * a2.adjoint());
    h += *p.g23 * (a2.adjoint() * a3 + a2 * a3.adjoint());
    return h;
}

inline Operator build_effective_hamiltonian(const QuditSpace& space, const DeviceParams& p) {
    detail::require_device_space(space);
    Operator h = p.omega1 * number(space, 1) + p.omega2 * number(space, 2) + p.omega3 * number(space, 3);
    h += detail::kerr_terms(space, p.kerr);
    h += detail::three_body_term(space, p.A);
    return h;
}

/// Rotating-wave Hamiltonian with a coherent drive (Omega/2)(a1 + a1+) on Q1.
inline Operator build_driven_hamiltonian(const QuditSpace& space, const DeviceParams& p,
                                         const DriveSpec& drive) {
    detail::require_device_space(space);
    drive.validate();
    const std::array<double, 3> w{p.omega1, p.omega2, p.omega3};
    Operator h(space);
    for (int i = 1; i <= 3; ++i) {
        const double delta =
            drive.sign == DetuningSign::frame ? w[i - 1] - drive.omega_d : drive.omega_d - w[i - 1];
        h += delta * number(space, i);
    }
    h += detail::kerr_terms(space, p.kerr);
    h += detail::three_body_term(space, p.A);
    const auto a1 = annihilation(space, 1);
    h += (0.5 * drive.Omega) * (a1 + a1.adjoint());
    return h;
}

}  // namespace qar
