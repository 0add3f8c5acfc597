// runner.hpp: executes a RunConfig and writes its CSV, JSON and SVG outputs.
#pragma once

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "qar/config.hpp"
#include "qar/experiments.hpp"
#include "qar/fit.hpp"
#include "qar/output.hpp"

namespace qar {

inline constexpr const char* qarsim_version = "1.0.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int config = 2;
inline constexpr int validation = 3;
inline constexpr int simulation = 4;
inline constexpr int fit_not_converged = 5;
}  // namespace exit_code

/// A library error annotated with the operation that raised it.
class OperationFailed : public Error {
public:
    OperationFailed(const std::string& op, const std::string& what) : Error(op + ": " + what), op_(op) {}
    const std::string& operation() const noexcept { return op_; }

private:
    std::string op_;
};

struct RunOutcome {
    int exit_code = exit_code::ok;
    std::string message;
    std::vector<std::string> files;
    nlohmann::ordered_json metadata;
};

namespace detail {

template <class F>
auto stage(const char* op, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ValidationError&) {
        throw;
    } catch (const ConfigParseError&) {
        throw;
    } catch (const IllPosed&) {
        throw;
    } catch (const Error& e) {
        throw OperationFailed(op, e.what());
    } catch (const std::exception& e) {
        throw OperationFailed(op, e.what());
    }
}

inline nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline std::vector<double> to_hz_list(const std::vector<double>& rad) {
    std::vector<double> out;
    for (double v : rad) out.push_back(to_hz(v));
    return out;
}

class Writer {
public:
    Writer(const RunConfig& rc, RunOutcome& out) : rc_(rc), out_(out), dir_(rc.output.directory.empty() ? std::string(".") : rc.output.directory) {}

    void csv(const std::string& stem, const CsvTable& t) {
        if (rc_.output.csv) put(stem + ".csv", t.str());
    }
    void svg(const std::string& stem, const std::string& content) {
        if (rc_.output.svg) put(stem + ".svg", content);
    }
    void json(const std::string& file, const nlohmann::ordered_json& j) { put(file, j.dump(2) + "\n"); }

    const std::string& name() const { return rc_.name; }

private:
    void put(const std::string& file, const std::string& content) {
        write_file_atomic(dir_ / file, content);
        out_.files.push_back(file);
    }

    const RunConfig& rc_;
    RunOutcome& out_;
    std::filesystem::path dir_;
};

inline nlohmann::ordered_json experiment_to_json(const RunConfig& rc) {
    const auto& s = rc.experiment;
    nlohmann::ordered_json j;
    j["kind"] = to_string(s.kind);
    j["model"] = to_string(s.model);
    j["variant"] = to_string(s.variant);
    j["n_h"] = s.n_h;
    j["n_c"] = s.n_c;
    j["initial_p1"] = rc.initial_p1_values;
    j["truncation"] = s.truncation;
    j["zero_temperature"] = s.zero_temperature;
    j["threshold"] = s.threshold;
    j["steady_state_time_s"] = s.steady_state_time;
    if (!s.times.empty()) {
        j["times_s"] = {{"start", s.times.front()}, {"stop", s.times.back()}, {"count", s.times.size()}};
    }
    j["drive"] = {{"rate_hz", to_hz(s.drive.Omega)},
                  {"duration_s", s.drive.duration},
                  {"detuning_sign", s.drive.sign == DetuningSign::frame ? "frame" : "as_printed"}};
    if (!s.drive_rates.empty()) j["drive_rates_hz"] = to_hz_list(s.drive_rates);
    if (!s.drive_detunings.empty()) j["drive_detunings_hz"] = to_hz_list(s.drive_detunings);
    if (!s.omega2_detunings.empty()) j["omega2_detunings_hz"] = to_hz_list(s.omega2_detunings);
    j["integrator"] = s.evolve.backend == Integrator::matrix_exponential ? "expm" : "rk45";
    j["population_noise_floor"] = population_noise_floor;
    return j;
}

inline std::string trace_stem(const std::string& name, const TraceMetadata& m, bool with_p0) {
    std::string s = name + "_nh" + format_label(m.n_h) + "_nc" + format_label(m.n_c);
    if (with_p0) s += "_p0" + format_label(m.initial_p1);
    return s;
}

inline nlohmann::ordered_json trace_summary(const TraceResult& tr, const std::string& file, double threshold) {
    nlohmann::ordered_json j;
    j["file"] = file;
    j["n_h"] = tr.meta.n_h;
    j["n_c"] = tr.meta.n_c;
    j["n_h_total"] = tr.meta.n_h_total;
    j["n_c_total"] = tr.meta.n_c_total;
    j["t_hot_k"] = number_or_null(tr.meta.t_hot);
    j["t_cold_k"] = number_or_null(tr.meta.t_cold);
    j["drive_rate_hz"] = to_hz(tr.meta.drive_rate);
    j["initial_p1"] = tr.meta.initial_p1;
    j["final_p1"] = tr.p1.back();
    double rt = std::numeric_limits<double>::quiet_NaN();
    try {
        rt = reset_time(tr, threshold);
    } catch (const NoReset&) {
    }
    j["reset_time_s"] = number_or_null(rt);
    return j;
}

inline CsvTable trace_table(const TraceResult& tr) {
    CsvTable t({"time_s", "p1"});
    for (std::size_t k = 0; k < tr.times.size(); ++k) t.add_row({tr.times[k], tr.p1[k]});
    return t;
}

inline void write_traces(Writer& w, const std::vector<TraceResult>& traces, bool with_p0, double threshold,
                         nlohmann::ordered_json& results, const std::string& title, bool log_y) {
    std::vector<Series> series;
    auto& list = results["traces"] = nlohmann::ordered_json::array();
    for (const auto& tr : traces) {
        const auto stem = trace_stem(w.name(), tr.meta, with_p0);
        w.csv(stem, trace_table(tr));
        list.push_back(trace_summary(tr, stem + ".csv", threshold));
        Series s{"n_H=" + format_label(tr.meta.n_h) + " n_C=" + format_label(tr.meta.n_c), {}, tr.p1};
        if (with_p0) s.label += " P0=" + format_label(tr.meta.initial_p1);
        for (double t : tr.times) s.x.push_back(t * 1e6);
        series.push_back(std::move(s));
    }
    w.svg(w.name(), svg_line_plot(series, title, "time (us)", "Q3 excited population", false, log_y));
}

// --- fit -----------------------------------------------------------------------------

inline bool run_fit(const RunConfig& rc, Writer& w, nlohmann::ordered_json& meta) {
    const auto& fc = *rc.fit;
    const auto& spec = rc.experiment;
    const bool driven = spec.kind == ExperimentKind::drive_rate_sweep || spec.kind == ExperimentKind::avoided_crossing_scan;
    const bool trace_kind = driven || spec.kind == ExperimentKind::reset_trace ||
                            spec.kind == ExperimentKind::residual_init_trace || spec.kind == ExperimentKind::cold_bath_sweep;
    if (!trace_kind) throw ValidationError("fit: experiment kind '" + to_string(spec.kind) + "' has no trace to fit");
    if (fc.free.empty() && !fc.synthetic && !fc.data_path) return true;

    std::vector<double> times = spec.times;
    if (times.empty()) times = linspace(0.0, spec.drive.duration, 101);

    std::vector<Observation> obs;
    nlohmann::ordered_json truth_json;
    if (fc.data_path) {
        const auto rows = read_numeric_csv(*fc.data_path);
        for (const auto& r : rows) {
            if (r.size() < 2 || r.size() > 3) throw ValidationError("fit.data: rows must be time_s,value[,sigma]");
            obs.push_back({r[0], r[1], r.size() == 3 ? r[2] : 0.0});
        }
    } else if (fc.synthetic) {
        std::vector<std::string> names;
        std::vector<double> values;
        for (const auto& [k, v] : fc.synthetic->truth) {
            names.push_back(k);
            values.push_back(v);
            truth_json[k] = v;
        }
        const auto y = stage("fit_trace (synthetic data)", [&] { return trace_forward_model(spec, names)(values, times); });
        std::mt19937_64 rng(fc.synthetic->seed.value_or(rc.output.seed));
        std::normal_distribution<double> noise(0.0, 1.0);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double n = fc.synthetic->noise > 0.0 ? fc.synthetic->noise * noise(rng) : 0.0;
            obs.push_back({times[k], y[k] + n, fc.synthetic->noise});
        }
    } else {
        throw ValidationError("fit: provide either data or synthetic");
    }

    FitProblem problem;
    problem.observed = obs;
    problem.free = fc.free;
    std::vector<std::string> names;
    for (const auto& f : fc.free) names.push_back(f.name);
    problem.model = trace_forward_model(spec, names);
    FitOptions opt = fc.options;
    opt.seed = rc.output.seed;

    const auto res = stage("fit_trace", [&] { return fit_trace(problem, opt); });

    nlohmann::ordered_json fj;
    fj["names"] = res.names;
    fj["values"] = res.values;
    fj["uncertainties"] = nlohmann::ordered_json::array();
    for (double u : res.uncertainties) fj["uncertainties"].push_back(number_or_null(u));
    fj["loss"] = res.loss;
    fj["initial_loss"] = res.initial_loss;
    fj["converged"] = res.converged;
    fj["iterations"] = res.iterations;
    fj["evaluations"] = res.evaluations;
    if (!truth_json.is_null()) fj["truth"] = truth_json;

    CsvTable t({"time_s", "observed", "model"});
    std::vector<Observation> sorted = obs;
    std::sort(sorted.begin(), sorted.end(), [](const Observation& a, const Observation& b) { return a.x < b.x; });
    std::vector<double> xs;
    for (const auto& o : sorted) xs.push_back(o.x);
    const auto model_at_obs = problem.model(res.values, xs);
    for (std::size_t k = 0; k < sorted.size(); ++k) t.add_row({sorted[k].x, sorted[k].value, model_at_obs[k]});
    w.csv(w.name() + "_fit", t);

    if (fc.profile_parameter) {
        const auto prof = stage("profile_loss", [&] { return profile_loss(problem, *fc.profile_parameter, fc.profile_grid, opt); });
        CsvTable pt({"value", "loss"});
        for (const auto& p : prof.points) pt.add_row({p.value, p.loss});
        w.csv(w.name() + "_profile", pt);
        fj["profile"] = {{"parameter", prof.parameter}, {"identifiable", prof.identifiable}};
    }
    meta["fit"] = fj;
    return res.converged;
}

// --- experiment dispatch ---------------------------------------------------------------

inline void run_experiment(const RunConfig& rc, Writer& w, nlohmann::ordered_json& results) {
    const auto& spec = rc.experiment;
    const std::string& name = rc.name;
    switch (spec.kind) {
        case ExperimentKind::reset_trace:
        case ExperimentKind::residual_init_trace:
        case ExperimentKind::cold_bath_sweep: {
            std::vector<TraceResult> all;
            for (double p0 : rc.initial_p1_values) {
                ExperimentSpec s = spec;
                s.initial_p1 = p0;
                auto traces = stage("run_reset_trace", [&] { return run_reset_traces(s); });
                all.insert(all.end(), traces.begin(), traces.end());
            }
            write_traces(w, all, rc.initial_p1_values.size() > 1, spec.threshold, results, name + ": Q3 population",
                         true);
            if (spec.kind == ExperimentKind::cold_bath_sweep) {
                const auto pts = stage("steady_state_population_sweep", [&] { return steady_state_population_sweep(spec); });
                CsvTable t({"n_h", "n_c", "p_ss", "p_ss_kernel"});
                auto& list = results["steady_state"] = nlohmann::ordered_json::array();
                for (const auto& p : pts) {
                    t.add_row({p.n_h, p.n_c, p.p_ss, p.p_ss_kernel});
                    list.push_back({{"n_h", p.n_h}, {"n_c", p.n_c}, {"p_ss", p.p_ss}, {"p_ss_kernel", p.p_ss_kernel}});
                }
                w.csv(name + "_pss", t);
            }
            break;
        }
        case ExperimentKind::drive_rate_sweep: {
            const auto traces = stage("run_drive_rate_sweep", [&] { return run_drive_rate_sweep(spec); });
            std::vector<Series> series;
            auto& list = results["traces"] = nlohmann::ordered_json::array();
            for (const auto& tr : traces) {
                const auto stem = name + "_omega" + format_label(to_hz(tr.meta.drive_rate) / 1e6) + "mhz";
                w.csv(stem, trace_table(tr));
                list.push_back(trace_summary(tr, stem + ".csv", spec.threshold));
                Series s{"Omega/2pi=" + format_label(to_hz(tr.meta.drive_rate) / 1e6) + " MHz", {}, tr.p1};
                for (double t : tr.times) s.x.push_back(t * 1e6);
                series.push_back(std::move(s));
            }
            w.svg(name, svg_line_plot(series, name + ": driven reset", "drive duration (us)", "Q3 excited population"));
            break;
        }
        case ExperimentKind::avoided_crossing_scan: {
            const auto map = stage("run_avoided_crossing_scan", [&] { return run_avoided_crossing_scan(spec); });
            CsvTable t({"drive_detuning_hz", "omega2_detuning_hz", "p1"});
            std::vector<std::vector<double>> z(map.omega2_detunings.size(), std::vector<double>(map.drive_detunings.size()));
            Eigen::Index imin = 0, jmin = 0;
            const double pmin = map.p1.minCoeff(&imin, &jmin);
            for (Eigen::Index i = 0; i < map.p1.rows(); ++i) {
                for (Eigen::Index j = 0; j < map.p1.cols(); ++j) {
                    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
                    t.add_row({to_hz(map.drive_detunings[ui]), to_hz(map.omega2_detunings[uj]), map.p1(i, j)});
                    z[uj][ui] = map.p1(i, j);
                }
            }
            w.csv(name, t);
            results["minimum"] = {{"p1", pmin},
                                  {"drive_detuning_hz", to_hz(map.drive_detunings[static_cast<std::size_t>(imin)])},
                                  {"omega2_detuning_hz", to_hz(map.omega2_detunings[static_cast<std::size_t>(jmin)])}};
            std::vector<double> xs, ys;
            for (double v : map.drive_detunings) xs.push_back(to_hz(v) / 1e6);
            for (double v : map.omega2_detunings) ys.push_back(to_hz(v) / 1e6);
            w.svg(name, svg_heatmap(xs, ys, z, name + ": Q3 population after drive", "drive detuning (MHz)",
                                    "Q2 detuning (MHz)"));
            break;
        }
        case ExperimentKind::reset_time_sweep: {
            const auto pts = stage("reset_time_sweep", [&] { return reset_time_sweep(spec); });
            CsvTable t({"n_h", "n_c", "t_hot_k", "reset_time_s", "final_p1"});
            auto& list = results["points"] = nlohmann::ordered_json::array();
            double best = std::numeric_limits<double>::infinity(), best_nh = 0.0;
            std::vector<Series> series;
            for (const auto& p : pts) {
                const double th = temperature_from_occupation(to_hz(spec.params.omega1), p.n_h + spec.params.n_res_1);
                t.add_row({p.n_h, p.n_c, th, p.reset_time, p.final_p1});
                list.push_back({{"n_h", p.n_h}, {"n_c", p.n_c}, {"reset_time_s", number_or_null(p.reset_time)}});
                if (std::isfinite(p.reset_time) && p.reset_time < best) {
                    best = p.reset_time;
                    best_nh = p.n_h;
                }
                if (series.empty() || series.back().label != "n_C=" + format_label(p.n_c)) {
                    series.push_back({"n_C=" + format_label(p.n_c), {}, {}});
                }
                series.back().x.push_back(p.n_h);
                series.back().y.push_back(p.reset_time * 1e6);
            }
            w.csv(name, t);
            results["min_reset_time_s"] = number_or_null(best);
            results["n_h_at_min"] = std::isfinite(best) ? nlohmann::ordered_json(best_nh) : nlohmann::ordered_json(nullptr);
            w.svg(name, svg_line_plot(series, name + ": reset time", "n_H", "reset time (us)", true, false));
            break;
        }
        case ExperimentKind::steady_state_sweep: {
            const auto pts = stage("steady_state_population_sweep", [&] { return steady_state_population_sweep(spec); });
            CsvTable t({"n_h", "n_c", "t_hot_k", "t_cold_k", "p_ss", "p_ss_kernel"});
            auto& list = results["points"] = nlohmann::ordered_json::array();
            const bool by_nh = spec.n_h.size() >= spec.n_c.size();
            std::vector<Series> series;
            for (const auto& p : pts) {
                const double th = temperature_from_occupation(to_hz(spec.params.omega1), p.n_h + spec.params.n_res_1);
                const double tc = temperature_from_occupation(to_hz(spec.params.omega2), p.n_c + spec.params.n_res_2);
                t.add_row({p.n_h, p.n_c, th, tc, p.p_ss, p.p_ss_kernel});
                list.push_back({{"n_h", p.n_h}, {"n_c", p.n_c}, {"p_ss", p.p_ss}, {"p_ss_kernel", p.p_ss_kernel}});
                const std::string label = by_nh ? "n_C=" + format_label(p.n_c) : "n_H=" + format_label(p.n_h);
                auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.label == label; });
                if (it == series.end()) {
                    series.push_back({label, {}, {}});
                    it = series.end() - 1;
                }
                it->x.push_back(by_nh ? p.n_h : p.n_c);
                it->y.push_back(p.p_ss);
            }
            w.csv(name, t);
            w.svg(name, svg_line_plot(series, name + ": P_SS after " + format_label(spec.steady_state_time * 1e6) + " us",
                                      by_nh ? "n_H" : "n_C", "P_SS", true, true));
            break;
        }
        case ExperimentKind::cop_table: {
            const auto pts = stage("compute_cop", [&] { return cop_table(spec); });
            CsvTable t({"n_h", "n_c", "t_hot_k", "t_cold_k", "t_target_k", "p_ss", "q_dot_hot_w", "q_dot_cold_w",
                        "q_dot_target_w", "cop", "cop_rate_model", "carnot"});
            auto& list = results["points"] = nlohmann::ordered_json::array();
            for (const auto& p : pts) {
                const auto q = p.lindblad.q_dot_watts();
                t.add_row({p.n_h, p.n_c, p.t_hot, p.t_cold, p.t_target, p.p_ss, q[0], q[1], q[2], p.lindblad.cop, p.cop_rate,
                           p.lindblad.carnot});
                nlohmann::ordered_json e;
                e["n_h"] = p.n_h;
                e["n_c"] = p.n_c;
                e["t_hot_k"] = number_or_null(p.t_hot);
                e["t_cold_k"] = number_or_null(p.t_cold);
                e["t_target_k"] = number_or_null(p.t_target);
                e["p_ss"] = p.p_ss;
                e["q_dot_w"] = {q[0], q[1], q[2]};
                e["first_law_residual_w"] = p.lindblad.first_law_residual() * constants::hbar;
                e["cop"] = number_or_null(p.lindblad.cop);
                e["cop_rate_model"] = number_or_null(p.cop_rate);
                e["carnot"] = number_or_null(p.lindblad.carnot);
                list.push_back(e);
            }
            w.csv(name, t);
            break;
        }
    }
}

}  // namespace detail

/// Runs one configuration; errors are mapped onto exit codes.
inline RunOutcome execute(const RunConfig& rc, std::ostream& err = std::cerr) {
    RunOutcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        rc.experiment.validate();
        for (double p0 : rc.initial_p1_values) {
            if (!(p0 >= 0.0 && p0 <= 1.0)) throw ValidationError("experiment: initial_p1 must lie in [0, 1]");
        }
        if (rc.fit) {
            for (const auto& f : rc.fit->free) {
                if (!(f.lower <= f.initial && f.initial <= f.upper)) {
                    throw ValidationError("fit: bounds of '" + f.name + "' exclude the initial guess");
                }
            }
        }
        detail::Writer w(rc, out);
        nlohmann::ordered_json meta;
        meta["schema"] = "qarsim-output/1";
        meta["name"] = rc.name;
        meta["description"] = rc.description;
        meta["version"] = qarsim_version;
        meta["device"] = rc.device_echo;
        meta["experiment"] = detail::experiment_to_json(rc);
        meta["seed"] = rc.output.seed;
        nlohmann::ordered_json results = nlohmann::ordered_json::object();
        detail::run_experiment(rc, w, results);
        meta["results"] = results;

        bool converged = true;
        if (rc.fit) converged = detail::run_fit(rc, w, meta);
        if (rc.output.json) {
            meta["files"] = out.files;
            w.json(rc.name + ".json", meta);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            w.json(rc.name + ".timing.json", nlohmann::ordered_json{{"wall_time_s", wall}});
        }
        out.metadata = meta;
        if (!converged) {
            out.exit_code = exit_code::fit_not_converged;
            out.message = "fit did not converge within its evaluation budget";
            err << "qarsim: " << out.message << "\n";
        }
    } catch (const ConfigParseError& e) {
        out.exit_code = exit_code::config;
        out.message = e.what();
    } catch (const ValidationError& e) {
        out.exit_code = exit_code::validation;
        out.message = e.what();
    } catch (const InvalidDimension& e) {
        out.exit_code = exit_code::validation;
        out.message = e.what();
    } catch (const IllPosed& e) {
        out.exit_code = exit_code::validation;
        out.message = std::string("fit: ") + e.what();
    } catch (const OperationFailed& e) {
        out.exit_code = exit_code::simulation;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.exit_code = exit_code::simulation;
        out.message = e.what();
    }
    if (out.exit_code != exit_code::ok && out.exit_code != exit_code::fit_not_converged) {
        err << "qarsim: " << out.message << "\n";
    }
    return out;
}

}  // namespace qar
