#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qar/config.hpp"
#include "qar/experiments.hpp"

using namespace qar;

namespace {

constexpr double hot_nh = 21.424;
const double mhz = angular(1e6);

ExperimentSpec reset_spec(double n_h, double t_end, std::size_t n, ModelKind model = ModelKind::rate) {
    ExperimentSpec s;
    s.kind = ExperimentKind::reset_trace;
    s.n_h = {n_h};
    s.n_c = {0.0};
    s.times = linspace(0.0, t_end, n);
    s.model = model;
    return s;
}

TraceResult constant_trace(double v) {
    TraceResult t;
    t.times = linspace(0.0, 1e-6, 11);
    t.p1.assign(11, v);
    return t;
}

double value_at(const TraceResult& tr, double t) {
    const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t - 1e-15);
    return tr.p1[static_cast<std::size_t>(it - tr.times.begin())];
}

}  // namespace

// ---- spec validation ----------------------------------------------------------------

TEST(Spec, RejectsEmptyGridsAndBadValues) {
    auto s = reset_spec(1.0, 1e-6, 11);
    s.n_h.clear();
    EXPECT_THROW(s.validate(), ValidationError);
    s = reset_spec(1.0, 1e-6, 11);
    s.initial_p1 = 1.2;
    EXPECT_THROW(s.validate(), ValidationError);
    s = reset_spec(1.0, 1e-6, 11);
    s.times = {0.0, 2e-6, 1e-6};
    EXPECT_THROW(s.validate(), ValidationError);
    s = reset_spec(1.0, 1e-6, 11);
    s.truncation = {3, 4, 3};
    EXPECT_THROW(s.validate(), ValidationError);  // rate model is (2,3,2) only
    s.model = ModelKind::lindblad;
    EXPECT_NO_THROW(s.validate());
}

// ---- reset traces -------------------------------------------------------------------

TEST(ResetTrace, NaturalDecayAtResidualFloor) {
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        auto s = reset_spec(0.0, 4e-6, 41, model);
        const auto kernel = kernel_steady_population(s, 0.0, 0.0);
        const auto tr = run_reset_trace(s);
        // effective rate from the excess population over the first 4 us
        const double rate = -std::log((tr.p1.back() - kernel) / (tr.p1.front() - kernel)) / tr.times.back();
        EXPECT_NEAR(rate * s.params.t_relax, 1.0, 0.05);
    }
}

TEST(ResetTrace, HotBathResetsWithinOnePointSixMicroseconds) {
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        const auto tr = run_reset_trace(reset_spec(hot_nh, 1.6e-6, 17, model));
        EXPECT_LE(tr.p1.back(), 5e-3);
        EXPECT_NEAR(tr.p1.front(), 0.95, 1e-12);
    }
}

TEST(ResetTrace, StartingEmptyStaysBelowSteadyState) {
    auto s = reset_spec(hot_nh, 5e-6, 101);
    s.initial_p1 = 0.0;
    const auto tr = run_reset_trace(s);
    const double pss = kernel_steady_population(s, hot_nh, 0.0);
    EXPECT_EQ(tr.p1.front(), 0.0);
    for (double v : tr.p1) EXPECT_LE(v, pss + 1e-3);
}

TEST(ResetTrace, PopulationStaysInUnitInterval) {
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        for (double nh : {0.16, 3.0, hot_nh, 80.0}) {
            for (const double v : run_reset_trace(reset_spec(nh, 10e-6, 101, model)).p1) {
                EXPECT_GE(v, -1e-12);
                EXPECT_LE(v, 1.0 + 1e-12);
            }
        }
    }
}

TEST(ResetTrace, GridIsHotMajor) {
    auto s = reset_spec(0.0, 1e-6, 5);
    s.n_h = {1.0, 2.0};
    s.n_c = {0.0, 0.1, 0.2};
    const auto all = run_reset_traces(s);
    ASSERT_EQ(all.size(), 6u);
    EXPECT_EQ(all[1].meta.n_h, 1.0);
    EXPECT_EQ(all[1].meta.n_c, 0.1);
    EXPECT_EQ(all[3].meta.n_h, 2.0);
    EXPECT_EQ(all[3].meta.n_c, 0.0);
    s.max_grid_points = 5;
    EXPECT_THROW(run_reset_traces(s), BudgetExceeded);
}

TEST(ResetTrace, ParallelMatchesSerial) {
    auto s = reset_spec(0.0, 2e-6, 21);
    s.n_h = logspace(0.5, 50, 7);
    const auto serial = run_reset_traces(s);
    s.jobs = 4;
    const auto par = run_reset_traces(s);
    for (std::size_t k = 0; k < serial.size(); ++k) EXPECT_EQ(serial[k].p1, par[k].p1);
}

TEST(ResetTrace, MetadataCarriesTemperatures) {
    const auto tr = run_reset_trace(reset_spec(hot_nh, 1e-6, 3));
    EXPECT_NEAR(tr.meta.t_hot, 5.6, 0.06);
    EXPECT_NEAR(tr.meta.t_cold, 0.045, 1e-3);
    EXPECT_EQ(tr.meta.noise_floor, 5e-4);
}

// ---- avoided-crossing scan ----------------------------------------------------------

class Scan : public ::testing::Test {
protected:
    static ExperimentSpec spec() {
        auto s = make_preset("fig2b").experiment;
        s.drive_detunings = {-2 * mhz, 0.0, 2 * mhz};
        s.omega2_detunings = {-10 * mhz, 0.0, 10 * mhz};
        return s;
    }
};

TEST_F(Scan, OrderingAndShape) {
    const auto s = spec();
    const auto map = run_avoided_crossing_scan(s);
    ASSERT_EQ(map.p1.rows(), 3);
    ASSERT_EQ(map.p1.cols(), 3);
    const double single = simulate_driven(s, s.drive_detunings[0], s.omega2_detunings[2], s.drive.Omega,
                                          std::vector<double>{s.drive.duration})
                              .front();
    EXPECT_DOUBLE_EQ(map.p1(0, 2), single);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            EXPECT_GE(map.p1(i, j), 0.0);
            EXPECT_LE(map.p1(i, j), 1.0);
        }
}

TEST_F(Scan, UndrivenMapIsFlatNaturalDecay) {
    auto s = spec();
    s.drive.Omega = 0.0;
    const auto map = run_avoided_crossing_scan(s);
    const double expect = std::exp(-s.drive.duration / s.params.t_relax);
    EXPECT_LT((map.p1.array() - expect).abs().maxCoeff(), 1e-3);
}

TEST_F(Scan, ApproximatelySymmetricUnderJointSignFlip) {
    const auto map = run_avoided_crossing_scan(spec());
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            const double a = 1.0 - map.p1(i, j), b = 1.0 - map.p1(2 - i, 2 - j);
            EXPECT_NEAR(a / b, 1.0, 0.1) << i << "," << j;
        }
}

TEST_F(Scan, DriveDepletesTargetAlongTheCrossing) {
    const auto map = run_avoided_crossing_scan(spec());
    const double undriven = std::exp(-2e-6 / measured_device().t_relax);
    EXPECT_LT(map.p1.minCoeff(), undriven - 0.05);
}

TEST_F(Scan, GridBudget) {
    auto s = spec();
    s.max_grid_points = 8;
    EXPECT_THROW(run_avoided_crossing_scan(s), BudgetExceeded);
}

// ---- drive-rate sweep ---------------------------------------------------------------

TEST(DriveRateSweep, UndrivenTraceIsNaturalDecay) {
    auto s = make_preset("fig2c").experiment;
    s.drive_rates = {0.0};
    const auto tr = run_drive_rate_sweep(s).front();
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double expect = std::exp(-tr.times[k] / s.params.t_relax) * s.initial_p1;
        EXPECT_NEAR(tr.p1[k] / expect, 1.0, 0.02);
    }
}

TEST(DriveRateSweep, FasterDriveResetsFaster) {
    const auto s = make_preset("fig2c").experiment;
    const auto traces = run_drive_rate_sweep(s);
    ASSERT_EQ(traces.size(), 4u);
    for (std::size_t k = 1; k < traces.size(); ++k) {
        EXPECT_GT(traces[k].meta.drive_rate, traces[k - 1].meta.drive_rate);
        EXPECT_LT(value_at(traces[k], 1e-6), value_at(traces[k - 1], 1e-6));
    }
}

TEST(DriveRateSweep, ClosedChannelCollapsesTraces) {
    auto s = make_preset("fig2c").experiment;
    s.params.A = 0.0;
    const auto traces = run_drive_rate_sweep(s);
    for (const auto& tr : traces)
        for (std::size_t k = 0; k < tr.times.size(); ++k) EXPECT_NEAR(tr.p1[k] / traces[0].p1[k], 1.0, 0.01);
}

// ---- reset time ---------------------------------------------------------------------

TEST(ResetTime, LinearInterpolation) {
    TraceResult t;
    t.times = {0.0, 1.0, 2.0};
    t.p1 = {0.5, 0.02, 0.0};
    EXPECT_NEAR(reset_time(t, 0.01), 1.5, 1e-12);
    EXPECT_NEAR(reset_time(t, 0.26), 0.5, 1e-12);
}

TEST(ResetTime, NoResetCases) {
    EXPECT_THROW(reset_time(constant_trace(0.5)), NoReset);
    auto tr = constant_trace(0.95);
    tr.p1.back() = 0.2;
    EXPECT_THROW(reset_time(tr, 1.0), NoReset);
    try {
        reset_time(constant_trace(0.5));
    } catch (const NoReset& e) {
        EXPECT_EQ(e.final_p1(), 0.5);
    }
}

TEST(ResetTime, MinimumOverSweepNearOneMicrosecond) {
    const auto pts = reset_time_sweep(make_preset("fig4a").experiment);
    double best = 1e300;
    for (const auto& p : pts)
        if (std::isfinite(p.reset_time)) best = std::min(best, p.reset_time);
    EXPECT_GE(best, 0.5e-6);
    EXPECT_LE(best, 2.0e-6);
}

TEST(ResetTime, RaisingThresholdNeverDelays) {
    auto s = reset_spec(0.0, 20e-6, 2001);
    for (double nh : {1.0, 3.0, hot_nh, 60.0}) {
        s.n_h = {nh};
        const auto tr = run_reset_trace(s);
        EXPECT_LE(reset_time(tr, 0.02), reset_time(tr, 0.01));
    }
}

// ---- steady state -------------------------------------------------------------------

TEST(SteadyState, DecreasesWithHotOccupation) {
    auto s = make_preset("fig4b_hot").experiment;
    s.n_c = {0.0};
    const auto pts = steady_state_population_sweep(s);
    for (std::size_t k = 1; k < pts.size(); ++k) EXPECT_LT(pts[k].p_ss, pts[k - 1].p_ss) << pts[k].n_h;
}

TEST(SteadyState, ColdBathHeatingHurts) {
    const auto pts = steady_state_population_sweep(make_preset("fig4b_cold").experiment);
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].n_h != pts[k - 1].n_h) continue;
        EXPECT_GE(pts[k].p_ss, pts[k - 1].p_ss - 1e-12) << pts[k].n_h << " " << pts[k].n_c;
    }
}

TEST(SteadyState, SaturatesAtLargeColdOccupation) {
    ExperimentSpec s;
    s.kind = ExperimentKind::steady_state_sweep;
    s.n_h = {35.0};
    s.n_c = {10.0};
    const auto pts = steady_state_population_sweep(s);
    EXPECT_NEAR(pts.front().p_ss, 0.36, 0.1);
}

TEST(SteadyState, ZeroOccupationsLeaveOnlyNaturalDecay) {
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        ExperimentSpec s;
        s.kind = ExperimentKind::steady_state_sweep;
        s.model = model;
        s.params.n_res_1 = s.params.n_res_2 = s.params.n_res_3 = 0.0;
        s.n_h = {0.0};
        s.n_c = {0.0};
        const auto pt = steady_state_population_sweep(s).front();
        // only natural decay acts, which 100 us does not finish
        EXPECT_NEAR(pt.p_ss, s.initial_p1 * std::exp(-s.steady_state_time / s.params.t_relax), 1e-6);
        EXPECT_LT(pt.p_ss_kernel, 1e-10);
    }
}

TEST(SteadyState, IndependentOfInitialPopulationAtHotPreset) {
    for (auto model : {ModelKind::rate, ModelKind::lindblad}) {
        auto s = reset_spec(hot_nh, 100e-6, 2, model);
        s.initial_p1 = 1.0;
        const double a = run_reset_trace(s).p1.back();
        s.initial_p1 = 0.0;
        const double b = run_reset_trace(s).p1.back();
        EXPECT_LE(std::abs(a - b), 1e-4);
        EXPECT_NEAR(a, kernel_steady_population(s, hot_nh, 0.0), 1e-4);
    }
}

// ---- Rabi estimator -----------------------------------------------------------------

TEST(Rabi, ExactWithoutSecondLevel) {
    EXPECT_NEAR(rabi_population_estimate(0.7, 0.3, 0.0).p1_hat, 0.3, 1e-15);
    EXPECT_NEAR(rabi_population_estimate(0.95, 0.05, 0.0).p1_hat, 0.05, 1e-15);
}

TEST(Rabi, BiasedBySecondLevel) {
    const auto e = rabi_population_estimate(0.6, 0.3, 0.1);
    EXPECT_NEAR(e.p1_hat, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(e.bias(0.3), 0.0333, 1e-4);
    EXPECT_GE(e.r, 0.0);
    EXPECT_GE(e.s, 0.0);
}

TEST(Rabi, InvalidInputs) {
    EXPECT_THROW(rabi_population_estimate(0.0, 0.0, 1.0), ValidationError);
    EXPECT_THROW(rabi_population_estimate(0.5, 0.6, 0.0), ValidationError);
    EXPECT_THROW(rabi_population_estimate(-0.1, 1.1, 0.0), ValidationError);
}

// ---- residual-population initialization ---------------------------------------------

TEST(ResidualInit, ConvergesEarlyToSteadyState) {
    auto s = make_preset("figS4").experiment;
    s.n_h = {hot_nh};
    s.initial_p1 = 0.028;
    const auto tr = run_residual_init_trace(s);
    const double pss = kernel_steady_population(s, hot_nh, 0.0);
    // settled once within the 5e-4 population readout floor for good
    double settle = -1.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        bool inside = true;
        for (std::size_t j = k; j < tr.times.size(); ++j) inside = inside && std::abs(tr.p1[j] - pss) <= 5e-4;
        if (inside) {
            settle = tr.times[k];
            break;
        }
    }
    ASSERT_GE(settle, 0.0);
    EXPECT_GE(settle, 250e-9);
    EXPECT_LE(settle, 1000e-9);
}

TEST(ResidualInit, TwoResidualValuesDifferOnlyTransiently) {
    auto s = make_preset("figS4").experiment;
    s.n_h = {hot_nh};
    s.times = linspace(0.0, 5e-6, 51);
    s.initial_p1 = 0.028;
    const auto a = run_residual_init_trace(s);
    s.initial_p1 = 0.020;
    const auto b = run_residual_init_trace(s);
    EXPECT_NEAR(a.p1.front() - b.p1.front(), 0.008, 1e-12);
    EXPECT_LT(std::abs(a.p1.back() - b.p1.back()), 1e-5);
}

TEST(ResidualInit, LongTimeMatchesResetPreset) {
    auto s = make_preset("figS4").experiment;
    s.times = {0.0, 10e-6};
    auto r = make_preset("fig3b").experiment;
    r.times = {0.0, 10e-6};
    for (double nh : {3.0, hot_nh}) {
        s.n_h = r.n_h = {nh};
        EXPECT_NEAR(run_residual_init_trace(s).p1.back(), run_reset_trace(r).p1.back(), 1e-3);
    }
}

TEST(ResidualInit, WrongKindRejected) {
    EXPECT_THROW(run_residual_init_trace(reset_spec(1.0, 1e-6, 3)), ValidationError);
}

// ---- COP ----------------------------------------------------------------------------

TEST(Cop, HotPresetBothModels) {
    auto s = make_preset("cop_table").experiment;
    const auto pt = compute_cop(s, hot_nh, 0.0);
    EXPECT_NEAR(pt.lindblad.cop, 0.7, 0.15);
    EXPECT_NEAR(pt.cop_rate / pt.lindblad.cop, 1.0, 0.01);
    ASSERT_TRUE(std::isfinite(pt.lindblad.carnot));
    EXPECT_LT(pt.lindblad.cop, pt.lindblad.carnot);
    EXPECT_NEAR(pt.t_target, 0.0235, 0.003);
}

// ---- parallel map -------------------------------------------------------------------

TEST(ParallelMap, KeepsOrderAndRethrowsLowestFailure) {
    const auto v = parallel_map(100, 4, [](std::size_t k) { return static_cast<int>(k * k); });
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_EQ(v[k], static_cast<int>(k * k));
    try {
        parallel_map(50, 3, [](std::size_t k) -> int {
            if (k == 7 || k == 30) throw std::runtime_error(std::to_string(k));
            return 0;
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "7");
    }
}
