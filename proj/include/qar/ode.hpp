// ode.hpp: adaptive Dormand-Prince 5(4) integrator for linear and nonlinear systems.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qar/errors.hpp"

namespace qar::ode {

struct Options {
    double rtol = 1e-8;
    double atol = 1e-12;
    double initial_step = 0.0;  // 0 selects a step from the derivative scale
    double min_step = 1e-20;
    std::size_t max_steps = 50'000'000;
};

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

namespace detail {

// Dormand & Prince (1980) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// b - b*, the embedded 4th-order error weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

template <class Vec>
double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = std::abs(err[i]) / scale;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 and returns y at each requested output time.
/// Steps are shortened to land exactly on output times. Throws IntegrationError on step
/// underflow or when the step budget is exhausted.
template <class Vec, class Rhs>
std::vector<Vec> integrate(Rhs&& rhs, double t0, Vec y, std::span<const double> times,
                           const Options& opt = {}, Stats* stats = nullptr) {
    using namespace detail;
    std::vector<Vec> out;
    out.reserve(times.size());

    double t = t0;
    Vec k1 = rhs(t, y);
    double h = opt.initial_step;
    if (h <= 0.0) {
        const double ny = std::max(y.norm(), 1e-300);
        const double nf = std::max(k1.norm(), 1e-300);
        h = 0.01 * ny / nf;
    }
    std::size_t steps = 0;
    Stats local;

    for (double target : times) {
        if (target < t) throw IntegrationError("output times must be ascending", t);
        while (t < target) {
            if (++steps > opt.max_steps) throw IntegrationError("step budget exhausted", t);
            const bool last = t + h >= target;
            const double step = last ? target - t : h;
            if (step < opt.min_step && !last) throw IntegrationError("step size underflow", t);

            const Vec k2 = rhs(t + c2 * step, Vec(y + step * (a21 * k1)));
            const Vec k3 = rhs(t + c3 * step, Vec(y + step * (a31 * k1 + a32 * k2)));
            const Vec k4 = rhs(t + c4 * step, Vec(y + step * (a41 * k1 + a42 * k2 + a43 * k3)));
            const Vec k5 =
                rhs(t + c5 * step, Vec(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
            const Vec k6 = rhs(t + step,
                               Vec(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
            Vec y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            Vec k7 = rhs(t + step, y_new);
            const Vec err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double en = error_norm(err, y, y_new, opt.atol, opt.rtol);

            if (!std::isfinite(en)) throw IntegrationError("non-finite state", t);
            const double factor =
                en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            if (en <= 1.0) {
                t = last ? target : t + step;
                y = std::move(y_new);
                k1 = std::move(k7);
                ++local.accepted;
                // A step clipped to an output time says little about the natural step.
                if (!last || step >= h) h = step * factor;
            } else {
                ++local.rejected;
                h = step * std::max(factor, 0.2);
                if (h < opt.min_step) throw IntegrationError("step size underflow", t);
            }
        }
        out.push_back(y);
    }
    if (stats) *stats = local;
    return out;
}

}  // namespace qar::ode
