// One PASS/FAIL line per acceptance criterion. Criteria listed in `known_red` are expected
// to fail for physical reasons documented in the README; they are still evaluated and
// printed as FAIL, but only unexpected failures make the process exit non-zero.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qar/config.hpp"
#include "qar/experiments.hpp"
#include "qar/fit.hpp"

namespace fs = std::filesystem;
using namespace qar;

namespace {

const std::set<std::string> known_red{"7a"};

int unexpected = 0;
int red = 0;

void criterion(const std::string& id, const std::string& title, bool ok, const std::string& detail) {
    std::printf("%-4s %-3s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str());
    if (!ok) {
        if (known_red.count(id)) {
            ++red;
        } else {
            ++unexpected;
        }
    }
    std::fflush(stdout);
}

void info(const std::string& id, const std::string& text) {
    std::printf("INFO %-3s %s\n", id.c_str(), text.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class... T>
std::string fmtn(const char* f, T... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

constexpr double hot_nh = 21.424;
const double mhz = angular(1e6);

// Fits y = a exp(-t / tau) + c and returns tau.
double fit_time_constant(const std::vector<double>& t, const std::vector<double>& y, double tau0) {
    FitProblem p;
    for (std::size_t k = 0; k < t.size(); ++k) p.observed.push_back({t[k], y[k], 0.0});
    p.free = {{"a", y.front(), 1e-6, 2.0, true}, {"tau", tau0, tau0 / 100, tau0 * 100, true}, {"c", 0.0, -0.5, 0.5, false}};
    p.model = [](std::span<const double> q, std::span<const double> xs) {
        std::vector<double> v;
        for (double x : xs) v.push_back(q[0] * std::exp(-x / q[1]) + q[2]);
        return v;
    };
    return fit_trace(p).values[1];
}

ExperimentSpec reset_spec(double n_h, std::vector<double> times, ModelKind model = ModelKind::rate) {
    ExperimentSpec s;
    s.kind = ExperimentKind::reset_trace;
    s.n_h = {n_h};
    s.n_c = {0.0};
    s.times = std::move(times);
    s.model = model;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------------------

void c1() {
    const double n_hot = occupation_from_temperature(5.327e9, 5.6);
    const double n_cold = occupation_from_temperature(4.629e9, 0.045);
    const double t1 = effective_temperature(3.725e9, 5e-4);
    const double t2 = effective_temperature(3.725e9, 0.01);
    const bool ok = std::abs(n_hot / 21.424 - 1) <= 0.005 && std::abs(n_cold / 0.007 - 1) <= 0.05 &&
                    std::abs(t1 - 0.0235) <= 0.0002 && std::abs(t2 - 0.0385) <= 0.001;
    criterion("1", "thermometry anchors", ok,
              fmtn("n_H(5.6 K) = %.4f, n(45 mK) = %.5f, T(5e-4) = %.2f mK, T(0.01) = %.2f mK", n_hot, n_cold, t1 * 1e3,
                   t2 * 1e3));
}

void c2() {
    const double f = to_hz(resonance_frequency(measured_device()));
    criterion("2", "resonance condition", std::abs(f - 4.629e9) <= 1e6, fmt("omega2_res / 2pi = %.6f GHz", f / 1e9));
}

void c3() {
    const double c = carnot_cop(0.0235, 0.045, 5.6);
    ExperimentSpec s;
    s.kind = ExperimentKind::cop_table;
    s.model = ModelKind::lindblad;
    const auto pt = compute_cop(s, hot_nh, 0.0);
    const bool ok = std::abs(c - 1.1) <= 0.05 && std::abs(pt.lindblad.cop - 0.7) <= 0.15 &&
                    std::isfinite(pt.lindblad.carnot) && pt.lindblad.cop < pt.lindblad.carnot;
    criterion("3", "Carnot bound and COP", ok,
              fmtn("carnot(23.5 mK, 45 mK, 5.6 K) = %.4f; hot preset COP = %.4f (rate model %.4f) < carnot %.4f at "
                   "T_T = %.2f mK",
                   c, pt.lindblad.cop, pt.cop_rate, pt.lindblad.carnot, pt.t_target * 1e3));
}

void c4() {
    const auto tr = run_reset_trace(reset_spec(hot_nh, linspace(0.0, 1.6e-6, 161)));
    const double tau = fit_time_constant(tr.times, tr.p1, 250e-9);
    criterion("4a", "initial decay time constant", tau >= 125e-9 && tau <= 500e-9,
              fmt("tau = %.1f ns (band 125-500 ns)", tau * 1e9));
    criterion("4b", "p1 after 1.6 us", tr.p1.back() <= 5e-3, fmt("p1(1.6 us) = %.3e (<= 5e-3)", tr.p1.back()));

    const auto pts = reset_time_sweep(make_preset("fig4a").experiment);
    double best = INFINITY, at = NAN;
    for (const auto& p : pts) {
        if (p.reset_time < best) {
            best = p.reset_time;
            at = p.n_h;
        }
    }
    criterion("4c", "minimum reset time", best >= 0.5e-6 && best <= 2e-6,
              fmtn("min reset time = %.1f ns at n_H = %.2f over %zu grid points", best * 1e9, at, pts.size()));

    ExperimentSpec ss;
    ss.kind = ExperimentKind::steady_state_sweep;
    ss.n_h = {hot_nh};
    const auto p = steady_state_population_sweep(ss).front();
    criterion("4d", "steady-state population", p.p_ss <= 2e-3,
              fmtn("P_SS(100 us) = %.3e, kernel %.3e (<= 2e-3)", p.p_ss, p.p_ss_kernel));
}

void c5() {
    std::vector<double> taus;
    std::string detail;
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        auto s = reset_spec(0.0, linspace(0.0, 40e-6, 201), model);
        s.params.A = 0.0;
        const auto tr = run_reset_trace(s);
        const double tau = fit_time_constant(tr.times, tr.p1, 16.8e-6);
        taus.push_back(tau);
        detail += fmtn("%s tau = %.3f us; ", model == ModelKind::rate ? "rate" : "lindblad", tau * 1e6);
    }
    bool ok = true;
    for (double t : taus) ok = ok && std::abs(t / 16.8e-6 - 1) <= 0.02;
    criterion("5", "natural-decay limit", ok, detail + "target 16.8 us +- 2%");
}

void c6() {
    double sup = 0.0, sup_basis = 0.0, sup_printed = 0.0;
    const auto times = linspace(0.0, 5e-6, 251);
    const QuditSpace space({2, 3, 2});
    const BasisLabel labels[] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 2, 0}, {1, 0, 1}};
    for (double nh : make_preset("fig3b").experiment.n_h) {
        const auto rate = run_reset_trace(reset_spec(nh, times));
        const auto full = run_reset_trace(reset_spec(nh, times, ModelKind::lindblad));
        auto ps = reset_spec(nh, times);
        ps.variant = CoherenceVariant::as_printed;
        const auto printed = run_reset_trace(ps);
        for (std::size_t k = 0; k < times.size(); ++k) {
            sup = std::max(sup, std::abs(rate.p1[k] - full.p1[k]));
            sup_printed = std::max(sup_printed, std::abs(printed.p1[k] - full.p1[k]));
        }
        // per-basis-state comparison from a common pure |001> start
        const auto& p = ps.params;
        const auto rates = thermal_rates(p, nh, 0.0);
        const auto rm = propagate(build_rate_matrix(rates, p.A, CoherenceVariant::derived_decoherence),
                                  RateState::excited_target(), times);
        const auto lb = evolve(DensityMatrix::pure(space, {0, 0, 1}),
                               build_liouvillian(build_effective_hamiltonian(space, p), device_channels(p, nh, 0.0, false)),
                               times);
        for (std::size_t k = 0; k < times.size(); ++k)
            for (int j = 0; j < 6; ++j) sup_basis = std::max(sup_basis, std::abs(rm[k].x(j) - lb[k].population(labels[j])));
    }
    criterion("6", "cross-model oracle", sup <= 5e-3,
              fmt("sup |P_rate - P_lindblad| over t in [0, 5 us], n_H in {0.16, 3, 21.424} = %.2e (<= 5e-3)", sup));
    info("6", fmt("as_printed variant deviation (reported, not asserted): %.2e", sup_printed));
    info("6", fmt("per-basis-state sup deviation (reported; the reduced basis omits |110>, |011>, |111>): %.2e", sup_basis));
}

void c7() {
    const auto s = make_preset("fig2b").experiment;
    const std::vector<double> at{s.drive.duration};
    const double undriven = s.initial_p1 * std::exp(-s.drive.duration / s.params.t_relax);
    const double p00 = simulate_driven(s, 0.0, 0.0, s.drive.Omega, at).front();
    const double p10 = simulate_driven(s, 0.0, 10 * mhz, s.drive.Omega, at).front();
    const double d00 = undriven - p00, d10 = undriven - p10;
    criterion("7a", "avoided-crossing depletion ratio", d00 >= 3.0 * d10,
              fmtn("depletion below undriven %.4f: %.4f at (0, 0) vs %.4f at (0, +10 MHz); ratio %.2f (>= 3)", undriven,
                   d00, d10, d00 / d10));

    double best = 1.0, bd = 0.0, bw = 0.0;
    for (double dd = -2.0; dd <= 2.0001; dd += 0.5)
        for (double dw = -16.0; dw <= 16.0001; dw += 1.0) {
            const double v = simulate_driven(s, dd * mhz, dw * mhz, s.drive.Omega, at).front();
            if (v < best) {
                best = v;
                bd = dd;
                bw = dw;
            }
        }
    info("7a", fmtn("deepest depletion on a 9x33 grid: p1 = %.4f at drive %+.1f MHz, omega2 %+.0f MHz", best, bd, bw));

    const auto traces = run_drive_rate_sweep(make_preset("fig2c").experiment);
    std::string detail;
    bool ok = true;
    double prev = INFINITY;
    for (const auto& tr : traces) {
        const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), 1e-6 - 1e-15);
        const double v = tr.p1[static_cast<std::size_t>(it - tr.times.begin())];
        ok = ok && v < prev;
        prev = v;
        detail += fmtn("%.1f MHz: %.4f; ", to_hz(tr.meta.drive_rate) / 1e6, v);
    }
    criterion("7b", "p1(1 us) decreasing in drive rate", ok, detail);
}

void c8() {
    std::string detail;
    bool ok = true;

    // Lindblad trajectory from a random state at the hot preset
    {
        const QuditSpace space({2, 3, 2});
        const auto p = measured_device();
        const auto l = build_liouvillian(build_effective_hamiltonian(space, p), device_channels(p, hot_nh, 0.0, false));
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g;
        Matrix x(12, 12);
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j) x(i, j) = cplx(g(rng), g(rng));
        Matrix rho = x * x.adjoint();
        rho /= rho.trace();
        double tr_err = 0, herm = 0, min_eig = 1;
        for (const auto& r : evolve(DensityMatrix(space, rho), l, linspace(0.0, 5e-6, 101))) {
            tr_err = std::max(tr_err, std::abs(r.matrix().trace() - cplx(1.0)));
            herm = std::max(herm, (r.matrix() - r.matrix().adjoint()).norm());
            min_eig = std::min(min_eig, r.min_eigenvalue());
        }
        const bool part = tr_err <= 1e-9 && herm <= 1e-10 && min_eig >= -1e-8;
        ok = ok && part;
        detail += fmtn("trace err %.1e, hermiticity %.1e, min eig %.1e; ", tr_err, herm, min_eig);
    }
    // rate-matrix column sums
    {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1e7);
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            RateSet r;
            for (std::size_t i = 0; i < 3; ++i) {
                r.up[i] = u(rng);
                r.down[i] = u(rng);
            }
            for (auto v : {CoherenceVariant::as_printed, CoherenceVariant::derived_decoherence}) {
                const RateMatrix m = build_rate_matrix(r, u(rng), v);
                worst = std::max(worst, m.topRows<6>().colwise().sum().cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff());
            }
        }
        ok = ok && worst <= 1e-12;
        detail += fmt("column sums %.1e; ", worst);
    }
    // Gibbs ladder for single-qudit thermal channels
    {
        double worst = 0.0;
        for (int d : {2, 3, 4}) {
            const QuditSpace s1({d});
            const double n = 0.7;
            const auto rho = steady_state(build_liouvillian(angular(5e9) * number(s1, 1), {{1, 1e6, n}}));
            for (int k = 0; k + 1 < d; ++k) {
                worst = std::max(worst, std::abs(rho.population({k + 1}) / rho.population({k}) - n / (n + 1)));
            }
        }
        ok = ok && worst <= 1e-9;
        detail += fmt("Gibbs ratio err %.1e; ", worst);
    }
    // first law at the cop_table presets
    {
        double worst = 0.0;
        auto s = make_preset("cop_table").experiment;
        for (const auto& pt : cop_table(s)) {
            const auto& q = pt.lindblad.q_dot;
            const double scale = std::max({std::abs(q[0]), std::abs(q[1]), std::abs(q[2])});
            worst = std::max(worst, std::abs(pt.lindblad.first_law_residual()) / scale);
        }
        ok = ok && worst <= 1e-8;
        detail += fmt("first law %.1e; ", worst);
    }
    // initial-condition independence of P_SS(100 us) at every bath setting of the presets
    {
        double worst = 0.0;
        std::size_t points = 0;
        for (const char* name : {"fig3b", "fig4a", "fig4b_hot", "fig4b_cold", "figS3", "figS4", "cop_table"}) {
            const auto base = make_preset(name).experiment;
            for (double nh : base.n_h)
                for (double nc : base.n_c) {
                    auto s = base;
                    s.kind = ExperimentKind::reset_trace;
                    s.model = ModelKind::rate;
                    s.times = {s.steady_state_time};
                    s.initial_p1 = 1.0;
                    const double a = simulate_trace(s, nh, nc).p1.back();
                    s.initial_p1 = 0.0;
                    const double b = simulate_trace(s, nh, nc).p1.back();
                    worst = std::max(worst, std::abs(a - b));
                    ++points;
                }
        }
        for (double nh : make_preset("fig3b").experiment.n_h) {
            auto s = reset_spec(nh, {100e-6}, ModelKind::lindblad);
            s.initial_p1 = 1.0;
            const double a = run_reset_trace(s).p1.back();
            s.initial_p1 = 0.0;
            worst = std::max(worst, std::abs(a - run_reset_trace(s).p1.back()));
            ++points;
        }
        ok = ok && worst <= 1e-4;
        detail += fmtn("P_SS initial-condition spread %.1e over %zu settings", worst, points);
    }
    criterion("8", "invariant suites", ok, detail);
}

void c9() {
    double worst = 0.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double p1 = u(rng);
        worst = std::max(worst, std::abs(rabi_population_estimate(1.0 - p1, p1, 0.0).p1_hat - p1));
    }

    const auto s2 = make_preset("fig2c").experiment;
    FitProblem pa;
    {
        const auto model = trace_forward_model(s2, {"A_hz"});
        const std::vector<double> truth{3.2e6};
        const auto y = model(truth, s2.times);
        for (std::size_t k = 0; k < y.size(); ++k) pa.observed.push_back({s2.times[k], y[k], 0.0});
        pa.free = {{"A_hz", 2e6, 0.5e6, 10e6, true}};
        pa.model = model;
    }
    const double a_fit = fit_trace(pa).values[0];

    auto s3 = make_preset("fig3b").experiment;
    s3.times = linspace(0.0, 5e-6, 101);
    FitProblem pn;
    {
        const auto model = trace_forward_model(s3, {"n_h"});
        const std::vector<double> truth{5.0};
        const auto y = model(truth, s3.times);
        std::mt19937_64 noise_rng(5);
        std::normal_distribution<double> g(0.0, 0.01);
        for (std::size_t k = 0; k < y.size(); ++k) pn.observed.push_back({s3.times[k], y[k] + g(noise_rng), 0.01});
        pn.free = {{"n_h", 10.0, 0.01, 100.0, true}};
        pn.model = model;
    }
    const double n_fit = fit_trace(pn).values[0];
    const bool ok = worst <= 1e-12 && std::abs(a_fit / 3.2e6 - 1) <= 0.01 && std::abs(n_fit / 5.0 - 1) <= 0.05;
    criterion("9", "estimator and fit", ok,
              fmtn("Rabi estimator err %.1e; A/2pi recovered %.5f MHz (truth 3.2); n_H recovered %.4f at 1%% noise "
                   "(truth 5)",
                   worst, a_fit / 1e6, n_fit));
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + std::string(QARSIM_EXE) + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void c10() {
    const auto root = fs::temp_directory_path() / ("qarsim_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::size_t compared = 0;
    std::vector<std::string> problems;
    for (const auto& p : preset_list()) {
        for (const char* run : {"a", "b"}) {
            const auto dir = root / run / p.name;
            const int code = run_cli("run " + p.name + " --seed 11 --format csv --out \"" + dir.string() + "\"");
            if (code != 0) problems.push_back(p.name + " exit " + std::to_string(code));
        }
        for (const auto& e : fs::directory_iterator(root / "a" / p.name)) {
            const auto other = root / "b" / p.name / e.path().filename();
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) problems.push_back(e.path().filename().string());
            ++compared;
        }
    }
    fs::remove_all(root);
    std::string detail = fmtn("%zu CSV files from %zu presets compared across two runs", compared, preset_list().size());
    for (const auto& s : problems) detail += "; differs: " + s;
    criterion("10", "determinism", problems.empty() && compared > 0, detail);
}

}  // namespace

int main() {
    c1();
    c2();
    c3();
    c4();
    c5();
    c6();
    c7();
    c8();
    c9();
    c10();
    std::printf("summary: %d unexpected failure(s), %d known-red criterion line(s)\n", unexpected, red);
    return unexpected == 0 ? 0 : 1;
}
