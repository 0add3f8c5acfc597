// experiments.hpp: the measurement protocols of the refrigerator, as simulations.
//
// Bath occupations n_h, n_c in an ExperimentSpec are the synthesized parts; the device's
// residual occupations are always added on top.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qar/heat.hpp"
#include "qar/lindblad.hpp"
#include "qar/model.hpp"
#include "qar/parallel.hpp"
#include "qar/rate_model.hpp"
#include "qar/thermo.hpp"

namespace qar {

enum class ExperimentKind {
    avoided_crossing_scan,
    drive_rate_sweep,
    reset_trace,
    reset_time_sweep,
    steady_state_sweep,
    cold_bath_sweep,
    residual_init_trace,
    cop_table,
};

enum class ModelKind { lindblad, rate };

/// Measurement uncertainty of the population readout; informational only.
inline constexpr double population_noise_floor = 5e-4;

inline std::vector<double> linspace(double start, double stop, std::size_t count) {
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = start;
        return v;
    }
    for (std::size_t k = 0; k < count; ++k) {
        v[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    return v;
}

inline std::vector<double> logspace(double start, double stop, std::size_t count) {
    auto v = linspace(std::log10(start), std::log10(stop), count);
    for (auto& x : v) x = std::pow(10.0, x);
    return v;
}

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::reset_trace;
    DeviceParams params = measured_device();
    std::vector<double> n_h{0.0};
    std::vector<double> n_c{0.0};
    /// Drive template for the driven protocols; omega_d is offset by drive_detunings.
    DriveSpec drive{};
    std::vector<double> drive_rates;       // Omega grid, rad/s
    std::vector<double> drive_detunings;   // omega_d - omega_1, rad/s
    std::vector<double> omega2_detunings;  // omega_2 - omega_2^res, rad/s
    double initial_p1 = 0.95;
    std::vector<double> times;
    ModelKind model = ModelKind::rate;
    CoherenceVariant variant = CoherenceVariant::derived_decoherence;
    std::vector<int> truncation{2, 3, 2};
    /// All baths at zero occupation (the driven-protocol model).
    bool zero_temperature = false;
    double threshold = 0.01;
    double steady_state_time = 100e-6;
    std::size_t max_grid_points = 20000;
    EvolveOptions evolve{};
    unsigned jobs = 1;

    void validate() const {
        params.validate();
        auto fail = [](const std::string& what) { throw ValidationError("experiment: " + what); };
        auto check_grid = [&](const std::vector<double>& g, const char* name, bool allow_negative) {
            if (g.empty()) fail(std::string(name) + " grid is empty");
            for (double v : g) {
                if (!std::isfinite(v) || (!allow_negative && v < 0.0)) fail(std::string(name) + " has an invalid entry");
            }
        };
        check_grid(n_h, "n_h", false);
        check_grid(n_c, "n_c", false);
        if (!(initial_p1 >= 0.0 && initial_p1 <= 1.0)) fail("initial_p1 must lie in [0, 1]");
        if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
        if (!(steady_state_time > 0.0)) fail("steady_state_time must be positive");
        drive.validate();
        const bool needs_times = kind != ExperimentKind::avoided_crossing_scan &&
                                 kind != ExperimentKind::steady_state_sweep && kind != ExperimentKind::cop_table;
        if (needs_times) {
            if (times.empty()) fail("times grid is empty");
            for (std::size_t k = 0; k < times.size(); ++k) {
                if (!(times[k] >= 0.0) || (k > 0 && times[k] < times[k - 1])) fail("times must be ascending and >= 0");
            }
        }
        if (kind == ExperimentKind::avoided_crossing_scan) {
            check_grid(drive_detunings, "drive_detunings", true);
            check_grid(omega2_detunings, "omega2_detunings", true);
        }
        if (kind == ExperimentKind::drive_rate_sweep) check_grid(drive_rates, "drive_rates", false);
        const bool driven = kind == ExperimentKind::avoided_crossing_scan || kind == ExperimentKind::drive_rate_sweep;
        if (driven && model != ModelKind::lindblad) fail("driven protocols need the lindblad model");
        if (kind == ExperimentKind::cop_table && model != ModelKind::lindblad) {
            fail("cop_table computes currents from the lindblad model");
        }
        QuditSpace space(truncation);
        if (space.num_qudits() != 3 || space.dim(2) < 3) fail("truncation must be three qudits with Q2 d >= 3");
        if (model == ModelKind::rate && truncation != std::vector<int>{2, 3, 2}) {
            fail("the rate model is defined on the (2,3,2) reduced basis only");
        }
    }
};

struct TraceMetadata {
    std::string label;
    double n_h = 0.0, n_c = 0.0;              // synthesized
    double n_h_total = 0.0, n_c_total = 0.0;  // including residuals
    double t_hot = std::numeric_limits<double>::quiet_NaN();
    double t_cold = std::numeric_limits<double>::quiet_NaN();
    double drive_rate = 0.0;
    double initial_p1 = 0.0;
    ModelKind model = ModelKind::rate;
    double noise_floor = population_noise_floor;
};

struct TraceResult {
    std::vector<double> times;
    std::vector<double> p1;
    TraceMetadata meta;
};

struct CrossingMap {
    std::vector<double> drive_detunings;
    std::vector<double> omega2_detunings;
    /// rows: drive detuning, cols: omega2 detuning
    Eigen::MatrixXd p1;
};

struct ResetTimePoint {
    double n_h = 0.0, n_c = 0.0;
    double reset_time = std::numeric_limits<double>::quiet_NaN();  // NaN: never reset
    double final_p1 = 0.0;
};

struct SteadyStatePoint {
    double n_h = 0.0, n_c = 0.0;
    double p_ss = 0.0;         // p1 after steady_state_time
    double p_ss_kernel = 0.0;  // stationary state of the generator
};

struct CopPoint {
    double n_h = 0.0, n_c = 0.0;
    CopResult lindblad;
    double cop_rate = std::numeric_limits<double>::quiet_NaN();
    double p_ss = 0.0;
    double t_target = std::numeric_limits<double>::quiet_NaN();
    double t_cold = std::numeric_limits<double>::quiet_NaN();
    double t_hot = std::numeric_limits<double>::quiet_NaN();
};

struct RabiEstimate {
    double r = 0.0;  // 1-2 Rabi amplitude after a 0-1 pi pulse
    double s = 0.0;  // 1-2 Rabi amplitude without it
    double p1_hat = 0.0;

    double bias(double true_p1) const { return std::abs(p1_hat - true_p1); }
};

// ---------------------------------------------------------------------------------------
// Building blocks

inline std::vector<DissipationChannel> device_channels(const DeviceParams& p, double n_h, double n_c,
                                                       bool zero_temperature) {
    if (zero_temperature) {
        return {{1, p.gamma1, 0.0}, {2, p.gamma2, 0.0}, {3, p.gamma3(0.0), 0.0}};
    }
    return {{1, p.gamma1, n_h + p.n_res_1}, {2, p.gamma2, n_c + p.n_res_2}, {3, p.gamma3(p.n_res_3), p.n_res_3}};
}

namespace detail {

/// Truncated Gibbs populations with ratio n/(n+1) per rung.
inline Eigen::VectorXd thermal_populations(int d, double n) {
    Eigen::VectorXd p(d);
    const double ratio = n / (n + 1.0);
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
        p(k) = w;
        w *= ratio;
    }
    return p / p.sum();
}

inline double hz(double rad) { return to_hz(rad); }

inline double temperature_or_nan(double f_hz, double n) {
    return n > 0.0 ? temperature_from_occupation(f_hz, n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Target excited with probability p1, machine qudits at their residual thermal states
/// (ground state when zero_temperature).
inline DensityMatrix initial_state(const QuditSpace& space, const DeviceParams& p, double p1, bool zero_temperature) {
    const int d1 = space.dim(1), d2 = space.dim(2), d3 = space.dim(3);
    const Eigen::VectorXd q1 = detail::thermal_populations(d1, zero_temperature ? 0.0 : p.n_res_1);
    const Eigen::VectorXd q2 = detail::thermal_populations(d2, zero_temperature ? 0.0 : p.n_res_2);
    Eigen::VectorXd q3 = Eigen::VectorXd::Zero(d3);
    q3(0) = 1.0 - p1;
    q3(1) = p1;
    Eigen::VectorXd pops(space.total_dim());
    for (int a = 0; a < d1; ++a)
        for (int b = 0; b < d2; ++b)
            for (int c = 0; c < d3; ++c) pops((a * d2 + b) * d3 + c) = q1(a) * q2(b) * q3(c);
    return DensityMatrix::diagonal(space, pops);
}

inline RateState initial_rate_state(const DeviceParams& p, double p1, bool zero_temperature) {
    const double q1 = zero_temperature ? 0.0 : p.n_res_1 / (2.0 * p.n_res_1 + 1.0);
    return RateState::with_target_population(p1, q1);
}

inline TraceMetadata make_metadata(const ExperimentSpec& spec, double n_h, double n_c, double drive_rate = 0.0) {
    TraceMetadata m;
    m.n_h = n_h;
    m.n_c = n_c;
    m.n_h_total = spec.zero_temperature ? 0.0 : n_h + spec.params.n_res_1;
    m.n_c_total = spec.zero_temperature ? 0.0 : n_c + spec.params.n_res_2;
    m.t_hot = detail::temperature_or_nan(detail::hz(spec.params.omega1), m.n_h_total);
    m.t_cold = detail::temperature_or_nan(detail::hz(spec.params.omega2), m.n_c_total);
    m.drive_rate = drive_rate;
    m.initial_p1 = spec.initial_p1;
    m.model = spec.model;
    return m;
}

/// Q3 excited population along an undriven trajectory at one bath setting.
inline TraceResult simulate_trace(const ExperimentSpec& spec, double n_h, double n_c) {
    TraceResult out;
    out.times = spec.times;
    out.meta = make_metadata(spec, n_h, n_c);
    const auto& p = spec.params;
    if (spec.model == ModelKind::rate) {
        RateSet rates = spec.zero_temperature ? RateSet{{0, 0, 0}, {p.gamma1, p.gamma2, p.gamma3(0.0)}}
                                              : thermal_rates(p, n_h, n_c);
        const auto r = build_rate_matrix(rates, p.A, spec.variant);
        const auto states = propagate(r, initial_rate_state(p, spec.initial_p1, spec.zero_temperature), spec.times);
        out.p1.reserve(states.size());
        for (const auto& s : states) out.p1.push_back(s.target_population());
        return out;
    }
    const QuditSpace space(spec.truncation);
    const auto h = build_effective_hamiltonian(space, p);
    const auto channels = device_channels(p, n_h, n_c, spec.zero_temperature);
    const auto l = build_liouvillian(h, channels);
    const auto n3 = number(space, 3);
    const auto states = evolve(initial_state(space, p, spec.initial_p1, spec.zero_temperature), l, spec.times, spec.evolve);
    out.p1.reserve(states.size());
    for (const auto& s : states) out.p1.push_back(s.expectation(n3));
    return out;
}

/// Driven (Omega > 0) trajectory in the drive frame; sampled Q3 population.
inline std::vector<double> simulate_driven(const ExperimentSpec& spec, double drive_detuning, double omega2_detuning,
                                           double drive_rate, std::span<const double> times) {
    const QuditSpace space(spec.truncation);
    DeviceParams p = spec.params;
    p.omega2 += omega2_detuning;
    DriveSpec drive = spec.drive;
    drive.omega_d = p.omega1 + drive_detuning;
    drive.Omega = drive_rate;
    const auto h = build_driven_hamiltonian(space, p, drive);
    const auto channels = device_channels(p, spec.n_h.front(), spec.n_c.front(), spec.zero_temperature);
    const auto l = build_liouvillian(h, channels);
    const auto n3 = number(space, 3);
    const auto states = evolve(initial_state(space, p, spec.initial_p1, spec.zero_temperature), l, times, spec.evolve);
    std::vector<double> p1;
    p1.reserve(states.size());
    for (const auto& s : states) p1.push_back(s.expectation(n3));
    return p1;
}

// ---------------------------------------------------------------------------------------
// Protocols

inline TraceResult run_reset_trace(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::reset_trace && spec.kind != ExperimentKind::residual_init_trace &&
        spec.kind != ExperimentKind::cold_bath_sweep) {
        throw ValidationError("run_reset_trace: spec kind is not a trace protocol");
    }
    spec.validate();
    return simulate_trace(spec, spec.n_h.front(), spec.n_c.front());
}

/// One trace per (n_h, n_c) grid point, n_h-major.
inline std::vector<TraceResult> run_reset_traces(const ExperimentSpec& spec) {
    spec.validate();
    const std::size_t nc = spec.n_c.size();
    const std::size_t total = spec.n_h.size() * nc;
    if (total > spec.max_grid_points) throw BudgetExceeded("trace grid exceeds max_grid_points");
    return parallel_map(total, spec.jobs, [&](std::size_t k) {
        return simulate_trace(spec, spec.n_h[k / nc], spec.n_c[k % nc]);
    });
}

inline TraceResult run_residual_init_trace(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::residual_init_trace) {
        throw ValidationError("run_residual_init_trace: spec kind must be residual_init_trace");
    }
    return run_reset_trace(spec);
}

/// Q3 population after the pulse sequence |000> -> pi on Q3 -> drive Q1 for drive.duration.
inline CrossingMap run_avoided_crossing_scan(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::avoided_crossing_scan) {
        throw ValidationError("run_avoided_crossing_scan: wrong spec kind");
    }
    spec.validate();
    const std::size_t rows = spec.drive_detunings.size();
    const std::size_t cols = spec.omega2_detunings.size();
    if (rows * cols > spec.max_grid_points) {
        throw BudgetExceeded("avoided-crossing grid of " + std::to_string(rows * cols) +
                             " points exceeds max_grid_points = " + std::to_string(spec.max_grid_points));
    }
    const double t[] = {spec.drive.duration};
    const auto values = parallel_map(rows * cols, spec.jobs, [&](std::size_t k) {
        return simulate_driven(spec, spec.drive_detunings[k / cols], spec.omega2_detunings[k % cols], spec.drive.Omega, t)
            .front();
    });
    CrossingMap map{spec.drive_detunings, spec.omega2_detunings, Eigen::MatrixXd(rows, cols)};
    for (std::size_t k = 0; k < values.size(); ++k) {
        map.p1(static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols)) = values[k];
    }
    return map;
}

/// One resonant trace per drive rate.
inline std::vector<TraceResult> run_drive_rate_sweep(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::drive_rate_sweep) throw ValidationError("run_drive_rate_sweep: wrong spec kind");
    spec.validate();
    return parallel_map(spec.drive_rates.size(), spec.jobs, [&](std::size_t k) {
        TraceResult tr;
        tr.times = spec.times;
        tr.meta = make_metadata(spec, spec.n_h.front(), spec.n_c.front(), spec.drive_rates[k]);
        tr.p1 = simulate_driven(spec, 0.0, 0.0, spec.drive_rates[k], spec.times);
        return tr;
    });
}

/// First downward crossing of `threshold`, linearly interpolated between samples.
inline double reset_time(const TraceResult& trace, double threshold = 0.01) {
    const auto& p = trace.p1;
    const auto& t = trace.times;
    if (p.empty() || p.size() != t.size()) throw ValidationError("reset_time: malformed trace");
    if (p.front() > threshold) {
        for (std::size_t k = 1; k < p.size(); ++k) {
            if (p[k] <= threshold) {
                const double f = (p[k - 1] - threshold) / (p[k - 1] - p[k]);
                return t[k - 1] + f * (t[k] - t[k - 1]);
            }
        }
    }
    throw NoReset("population never fell through " + std::to_string(threshold), p.back());
}

inline std::vector<ResetTimePoint> reset_time_sweep(const ExperimentSpec& spec) {
    const auto traces = run_reset_traces(spec);
    std::vector<ResetTimePoint> out;
    out.reserve(traces.size());
    for (const auto& tr : traces) {
        ResetTimePoint pt{tr.meta.n_h, tr.meta.n_c};
        pt.final_p1 = tr.p1.back();
        try {
            pt.reset_time = reset_time(tr, spec.threshold);
        } catch (const NoReset&) {
        }
        out.push_back(pt);
    }
    return out;
}

/// Stationary Q3 population of the generator (kernel), without time stepping.
inline double kernel_steady_population(const ExperimentSpec& spec, double n_h, double n_c) {
    const auto& p = spec.params;
    if (spec.model == ModelKind::rate) {
        const auto r = build_rate_matrix(thermal_rates(p, n_h, n_c), p.A, spec.variant);
        return rate_steady_state(r).target_population();
    }
    const QuditSpace space(spec.truncation);
    const auto h = build_effective_hamiltonian(space, p);
    const auto channels = device_channels(p, n_h, n_c, spec.zero_temperature);
    return steady_state(build_liouvillian(h, channels)).expectation(number(space, 3));
}

inline SteadyStatePoint steady_state_point(const ExperimentSpec& spec, double n_h, double n_c) {
    ExperimentSpec s = spec;
    s.times = {spec.steady_state_time};
    SteadyStatePoint pt{n_h, n_c};
    pt.p_ss = simulate_trace(s, n_h, n_c).p1.front();
    pt.p_ss_kernel = kernel_steady_population(spec, n_h, n_c);
    return pt;
}

/// P_SS over the (n_h, n_c) grid, n_h-major.
inline std::vector<SteadyStatePoint> steady_state_population_sweep(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::steady_state_sweep && spec.kind != ExperimentKind::cold_bath_sweep) {
        throw ValidationError("steady_state_population_sweep: wrong spec kind");
    }
    spec.validate();
    const std::size_t nc = spec.n_c.size();
    const std::size_t total = spec.n_h.size() * nc;
    if (total > spec.max_grid_points) throw BudgetExceeded("steady-state grid exceeds max_grid_points");
    return parallel_map(total, spec.jobs,
                        [&](std::size_t k) { return steady_state_point(spec, spec.n_h[k / nc], spec.n_c[k % nc]); });
}

/// Population estimate s/(r+s) from the two 1-2 Rabi amplitudes: s = p1 without a prior
/// 0-1 pi pulse, r = p0 with it. Exact when p2 = 0.
inline RabiEstimate rabi_population_estimate(double p0, double p1, double p2) {
    if (p0 < 0.0 || p1 < 0.0 || p2 < 0.0) throw ValidationError("rabi_population_estimate: negative population");
    if (std::abs(p0 + p1 + p2 - 1.0) > 1e-9) throw ValidationError("rabi_population_estimate: populations must sum to 1");
    RabiEstimate e;
    e.s = p1;
    e.r = p0;
    if (e.r + e.s == 0.0) throw ValidationError("rabi_population_estimate: r + s = 0");
    e.p1_hat = e.s / (e.r + e.s);
    return e;
}

/// Steady-state heat currents, COP (full and reduced model) and the Carnot bound.
inline CopPoint compute_cop(const ExperimentSpec& spec, double n_h, double n_c) {
    const auto& p = spec.params;
    const QuditSpace space(spec.truncation);
    const auto h = build_effective_hamiltonian(space, p);
    const auto channels = device_channels(p, n_h, n_c, false);
    const auto rho = steady_state(build_liouvillian(h, channels));

    CopPoint pt{n_h, n_c};
    pt.lindblad = heat_currents(h, channels, rho);
    pt.lindblad.cop = cop(pt.lindblad);
    pt.p_ss = rho.expectation(number(space, 3));

    const auto rates = thermal_rates(p, n_h, n_c);
    const auto rss = rate_steady_state(build_rate_matrix(rates, p.A, spec.variant));
    pt.cop_rate = cop(rate_heat_currents(p, rates, rss));

    pt.t_hot = temperature_from_occupation(detail::hz(p.omega1), n_h + p.n_res_1);
    pt.t_cold = temperature_from_occupation(detail::hz(p.omega2), n_c + p.n_res_2);
    if (pt.p_ss > 0.0 && pt.p_ss < 0.5) {
        pt.t_target = effective_temperature(detail::hz(p.omega3), pt.p_ss);
        if (pt.t_hot > pt.t_cold && pt.t_cold > pt.t_target) {
            pt.lindblad.carnot = carnot_cop(pt.t_target, pt.t_cold, pt.t_hot);
        }
    }
    return pt;
}

inline std::vector<CopPoint> cop_table(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::cop_table) throw ValidationError("cop_table: wrong spec kind");
    spec.validate();
    const std::size_t nc = spec.n_c.size();
    return parallel_map(spec.n_h.size() * nc, spec.jobs,
                        [&](std::size_t k) { return compute_cop(spec, spec.n_h[k / nc], spec.n_c[k % nc]); });
}

}  // namespace qar
