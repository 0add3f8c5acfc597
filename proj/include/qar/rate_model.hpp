// rate_model.hpp: the reduced seven-component population/coherence model.
//
// State ordering: p000, p100, p010, p001, p020, p101, rho_coh, where rho_coh is
// Im<101|rho|020>. Rates in 1/s.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qar/errors.hpp"
#include "qar/model.hpp"

namespace qar {

struct RateSet {
    std::array<double, 3> up{};    // Gamma_{i, up}
    std::array<double, 3> down{};  // Gamma_{i, down}

    double up_of(int qudit) const { return up.at(static_cast<std::size_t>(qudit - 1)); }
    double down_of(int qudit) const { return down.at(static_cast<std::size_t>(qudit - 1)); }
};

/// Lowering/raising rates for synthesized occupations n1 (hot, Q1) and n2 (cold, Q2).
/// Residual occupations come from the device parameters; Q3 only sees its residual.
inline RateSet thermal_rates(const DeviceParams& p, double n1, double n2) {
    if (!(n1 >= 0.0) || !(n2 >= 0.0)) throw ValidationError("thermal_rates: occupations must be >= 0");
    const double t1 = n1 + p.n_res_1;
    const double t2 = n2 + p.n_res_2;
    const double g3 = p.gamma3(p.n_res_3);
    RateSet r;
    r.up = {p.gamma1 * t1, p.gamma2 * t2, g3 * p.n_res_3};
    r.down = {p.gamma1 * (t1 + 1.0), p.gamma2 * (t2 + 1.0), g3 * (p.n_res_3 + 1.0)};
    return r;
}

enum class CoherenceVariant {
    /// Coherence entry Gamma_C = (-2G2d + 2G2u + G1d + G1u + G3d + G3u) / 4.
    as_printed,
    /// Coherence decays at half the summed out-rates of |101> and |020>.
    derived_decoherence,
};

using RateMatrix = Eigen::Matrix<double, 7, 7>;
using RateVector = Eigen::Matrix<double, 7, 1>;

namespace rate_index {
inline constexpr int p000 = 0, p100 = 1, p010 = 2, p001 = 3, p020 = 4, p101 = 5, coh = 6;
}

struct RateState {
    RateVector x = RateVector::Zero();

    RateState() = default;
    explicit RateState(const RateVector& v) : x(v) {}

    double p000() const { return x(rate_index::p000); }
    double p100() const { return x(rate_index::p100); }
    double p010() const { return x(rate_index::p010); }
    double p001() const { return x(rate_index::p001); }
    double p020() const { return x(rate_index::p020); }
    double p101() const { return x(rate_index::p101); }
    double rho_coh() const { return x(rate_index::coh); }

    double population_sum() const { return x.head<6>().sum(); }
    /// Excited population of the target, p001 + p101.
    double target_population() const { return p001() + p101(); }

    void validate() const {
        for (int k = 0; k < 6; ++k) {
            if (!(x(k) >= -1e-12 && x(k) <= 1.0 + 1e-12)) {
                throw ValidationError("RateState: population outside [0, 1]");
            }
        }
        if (std::abs(population_sum() - 1.0) > 1e-9) throw ValidationError("RateState: populations do not sum to 1");
        if (std::abs(rho_coh()) > 0.5 + 1e-12) throw ValidationError("RateState: |rho_coh| > 1/2");
    }

    /// Pure |001>.
    static RateState excited_target() {
        RateState s;
        s.x(rate_index::p001) = 1.0;
        return s;
    }

    /// Target excited with probability p1; Q1 excited with probability q1 independently.
    static RateState with_target_population(double p1, double q1 = 0.0) {
        if (!(p1 >= 0.0 && p1 <= 1.0) || !(q1 >= 0.0 && q1 <= 1.0)) {
            throw ValidationError("RateState: initial probabilities must lie in [0, 1]");
        }
        RateState s;
        s.x(rate_index::p000) = (1.0 - p1) * (1.0 - q1);
        s.x(rate_index::p100) = (1.0 - p1) * q1;
        s.x(rate_index::p001) = p1 * (1.0 - q1);
        s.x(rate_index::p101) = p1 * q1;
        return s;
    }
};

inline RateMatrix build_rate_matrix(const RateSet& r, double A, CoherenceVariant variant) {
    const double u1 = r.up[0], u2 = r.up[1], u3 = r.up[2];
    const double d1 = r.down[0], d2 = r.down[1], d3 = r.down[2];
    const double gamma_c = variant == CoherenceVariant::as_printed
                               ? (-2.0 * d2 + 2.0 * u2 + d1 + u1 + d3 + u3) / 4.0
                               : -(d1 + u1 + d3 + u3 + 2.0 * d2 + 2.0 * u2) / 2.0;
    RateMatrix m;
    // clang-format off
    m << -(u1 + u2 + u3), d1,          d2,                d3,          0,        0,          0,
          u1,            -(d1 + u3),   0,                 0,           0,        d3,         0,
          u2,             0,          -(d2 + 2.0 * u2),   0,           2.0 * d2, 0,          0,
          u3,             0,           0,                -(d3 + u1),   0,        d1,         0,
          0,              0,           2.0 * u2,          0,          -2.0 * d2, 0,          2.0 * A,
          0,              u3,          0,                 u1,          0,       -(d1 + d3), -2.0 * A,
          0,              0,           0,                 0,          -A,        A,          gamma_c;
    // clang-format on
    return m;
}

/// x(t) = exp(R t) x0 at each requested time.
inline std::vector<RateState> propagate(const RateMatrix& r, const RateState& x0, std::span<const double> times) {
    std::vector<RateState> out;
    out.reserve(times.size());
    std::map<double, RateMatrix> cache;
    RateVector x = x0.x;
    double t = 0.0;
    for (double target : times) {
        if (target < t) throw ValidationError("propagate: times must be ascending and >= 0");
        const double dt = target - t;
        if (dt > 0.0) {
            auto it = cache.lower_bound(dt * (1.0 - 1e-12));
            if (it == cache.end() || it->first > dt * (1.0 + 1e-12)) {
                const RateMatrix scaled = r * dt;
                it = cache.emplace(dt, scaled.exp()).first;
            }
            x = it->second * x;
        }
        t = target;
        out.emplace_back(x);
    }
    return out;
}

/// Normalized kernel vector of R.
inline RateState rate_steady_state(const RateMatrix& r, double null_tolerance = 1e-12) {
    Eigen::JacobiSVD<RateMatrix> svd(r, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int null_dim = 0;
    for (int k = 0; k < 7; ++k) {
        if (sv(k) <= null_tolerance * sv(0)) ++null_dim;
    }
    if (sv(0) == 0.0 || null_dim > 1) {
        throw NonUniqueSteadyState("rate matrix kernel has dimension " + std::to_string(sv(0) == 0.0 ? 7 : null_dim));
    }
    RateVector v = svd.matrixV().col(6);
    const double s = v.head<6>().sum();
    if (std::abs(s) < 1e-300) throw NonUniqueSteadyState("rate kernel has zero population weight");
    return RateState(v / s);
}

/// The operational steady state: the propagated state after a finite time (100 us by default).
inline RateState finite_time_steady_state(const RateMatrix& r, const RateState& x0, double t = 100e-6) {
    const double times[] = {t};
    return propagate(r, x0, times).front();
}

}  // namespace qar
