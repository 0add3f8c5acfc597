// config.hpp: the qarsim JSON run configuration and the named presets.
//
// Frequencies are given in Hz and converted to rad/s on load; times in seconds.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qar/experiments.hpp"
#include "qar/fit.hpp"

namespace qar {

inline constexpr const char* config_schema = "qarsim-config/1";

/// Malformed JSON, unknown keys or wrong value types.
class ConfigParseError : public Error {
public:
    using Error::Error;
};

struct SyntheticData {
    std::map<std::string, double> truth;
    double noise = 0.0;  // absolute Gaussian sigma
    std::optional<std::uint64_t> seed;
};

struct FitConfig {
    std::vector<FreeParameter> free;
    std::optional<std::string> data_path;
    std::optional<SyntheticData> synthetic;
    FitOptions options;
    std::optional<std::string> profile_parameter;
    std::vector<double> profile_grid;
};

struct OutputConfig {
    /// Empty: the caller decides (QARSIM_OUT or the working directory).
    std::string directory;
    bool csv = true, json = true, svg = false;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::string name = "run";
    std::string description;
    ExperimentSpec experiment;
    /// Every value is run in turn; figS4 exposes both residual populations.
    std::vector<double> initial_p1_values{0.95};
    std::optional<FitConfig> fit;
    OutputConfig output;
    /// Device values in Hz, for echoing into metadata.
    nlohmann::ordered_json device_echo;
};

// ---------------------------------------------------------------------------------------
// Enum names

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::avoided_crossing_scan: return "avoided_crossing_scan";
        case ExperimentKind::drive_rate_sweep: return "drive_rate_sweep";
        case ExperimentKind::reset_trace: return "reset_trace";
        case ExperimentKind::reset_time_sweep: return "reset_time_sweep";
        case ExperimentKind::steady_state_sweep: return "steady_state_sweep";
        case ExperimentKind::cold_bath_sweep: return "cold_bath_sweep";
        case ExperimentKind::residual_init_trace: return "residual_init_trace";
        case ExperimentKind::cop_table: return "cop_table";
    }
    return "?";
}
inline std::string to_string(ModelKind m) { return m == ModelKind::lindblad ? "lindblad" : "rate"; }
inline std::string to_string(CoherenceVariant v) {
    return v == CoherenceVariant::as_printed ? "as_printed" : "derived_decoherence";
}

inline ExperimentKind parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::avoided_crossing_scan, ExperimentKind::drive_rate_sweep, ExperimentKind::reset_trace,
                   ExperimentKind::reset_time_sweep, ExperimentKind::steady_state_sweep, ExperimentKind::cold_bath_sweep,
                   ExperimentKind::residual_init_trace, ExperimentKind::cop_table}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigParseError("unknown experiment kind '" + s + "'");
}
inline ModelKind parse_model(const std::string& s) {
    if (s == "lindblad") return ModelKind::lindblad;
    if (s == "rate") return ModelKind::rate;
    throw ConfigParseError("model must be 'lindblad' or 'rate', got '" + s + "'");
}
inline CoherenceVariant parse_variant(const std::string& s) {
    if (s == "as_printed") return CoherenceVariant::as_printed;
    if (s == "derived_decoherence") return CoherenceVariant::derived_decoherence;
    throw ConfigParseError("variant must be 'as_printed' or 'derived_decoherence', got '" + s + "'");
}

// ---------------------------------------------------------------------------------------
// Strict JSON reading

namespace detail {

using json = nlohmann::json;

/// Fails on any key that is not in `allowed`.
inline void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigParseError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) throw ConfigParseError(where + ": unknown key '" + key + "'");
    }
}

inline double get_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigParseError(where + ": expected a number");
    return v.get<double>();
}

inline std::string get_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigParseError(where + ": expected a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigParseError(where + ": expected true or false");
    return v.get<bool>();
}

inline std::uint64_t get_uint(const json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigParseError(where + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

/// A number, an array of numbers, or {"start", "stop", "count", "scale": "linear"|"log"}.
inline std::vector<double> get_grid(const json& v, const std::string& where, double scale = 1.0) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (std::size_t k = 0; k < v.size(); ++k) out.push_back(get_number(v[k], where + "[" + std::to_string(k) + "]"));
    } else if (v.is_object()) {
        require_keys(v, where, {"start", "stop", "count", "scale"});
        if (!v.contains("start") || !v.contains("stop") || !v.contains("count")) {
            throw ConfigParseError(where + ": grid objects need start, stop and count");
        }
        const double a = get_number(v["start"], where + ".start");
        const double b = get_number(v["stop"], where + ".stop");
        const auto n = static_cast<std::size_t>(get_uint(v["count"], where + ".count"));
        const std::string s = v.contains("scale") ? get_string(v["scale"], where + ".scale") : "linear";
        if (s == "linear") {
            out = linspace(a, b, n);
        } else if (s == "log") {
            if (!(a > 0.0 && b > 0.0)) throw ValidationError(where + ": log grids need positive endpoints");
            out = logspace(a, b, n);
        } else {
            throw ConfigParseError(where + ".scale: expected 'linear' or 'log'");
        }
    } else {
        throw ConfigParseError(where + ": expected a number, an array or a grid object");
    }
    for (auto& x : out) x *= scale;
    return out;
}

}  // namespace detail

/// Device values in Hz (angular frequencies divided by 2 pi).
inline nlohmann::ordered_json device_to_json(const DeviceParams& p) {
    nlohmann::ordered_json j;
    j["omega1_hz"] = to_hz(p.omega1);
    j["omega2_hz"] = to_hz(p.omega2);
    j["omega3_hz"] = to_hz(p.omega3);
    j["alpha1_hz"] = to_hz(p.alpha1);
    j["alpha2_hz"] = to_hz(p.alpha2);
    j["alpha3_hz"] = to_hz(p.alpha3);
    j["gamma1_hz"] = to_hz(p.gamma1);
    j["gamma2_hz"] = to_hz(p.gamma2);
    j["t_relax_s"] = p.t_relax;
    j["A_hz"] = to_hz(p.A);
    if (p.g12) j["g12_hz"] = to_hz(*p.g12);
    if (p.g23) j["g23_hz"] = to_hz(*p.g23);
    nlohmann::ordered_json kerr = nlohmann::ordered_json::array();
    for (const auto& row : p.kerr) kerr.push_back({to_hz(row[0]), to_hz(row[1]), to_hz(row[2])});
    j["kerr_hz"] = kerr;
    j["n_res_1"] = p.n_res_1;
    j["n_res_2"] = p.n_res_2;
    j["n_res_3"] = p.n_res_3;
    j["relaxation"] = p.relaxation == RelaxationConvention::total ? "total" : "bare";
    return j;
}

/// Applies Hz-valued overrides to `p`. Q2 follows the resonance condition unless omega2_hz
/// is given; Kerr follows the anharmonicities unless kerr_hz is given.
inline void apply_device(DeviceParams& p, const nlohmann::json& d) {
    using namespace detail;
    require_keys(d, "device",
                 {"omega1_hz", "omega2_hz", "omega3_hz", "alpha1_hz", "alpha2_hz", "alpha3_hz", "gamma1_hz", "gamma2_hz",
                  "t_relax_s", "A_hz", "g12_hz", "g23_hz", "kerr_hz", "n_res_1", "n_res_2", "n_res_3", "relaxation",
                  "omega2_detuning_hz"});
    auto hz = [&](const char* key, double& field) {
        if (d.contains(key)) field = angular(get_number(d[key], std::string("device.") + key));
    };
    hz("omega1_hz", p.omega1);
    hz("omega3_hz", p.omega3);
    hz("alpha1_hz", p.alpha1);
    hz("alpha2_hz", p.alpha2);
    hz("alpha3_hz", p.alpha3);
    hz("gamma1_hz", p.gamma1);
    hz("gamma2_hz", p.gamma2);
    hz("A_hz", p.A);
    if (d.contains("omega2_hz")) {
        p.omega2 = angular(get_number(d["omega2_hz"], "device.omega2_hz"));
    } else {
        p.omega2 = resonance_frequency(p);
    }
    if (d.contains("omega2_detuning_hz")) p.omega2 += angular(get_number(d["omega2_detuning_hz"], "device.omega2_detuning_hz"));
    if (d.contains("t_relax_s")) p.t_relax = get_number(d["t_relax_s"], "device.t_relax_s");
    if (d.contains("g12_hz")) p.g12 = angular(get_number(d["g12_hz"], "device.g12_hz"));
    if (d.contains("g23_hz")) p.g23 = angular(get_number(d["g23_hz"], "device.g23_hz"));
    if (d.contains("kerr_hz")) {
        const auto& k = d["kerr_hz"];
        if (!k.is_array() || k.size() != 3) throw ConfigParseError("device.kerr_hz: expected a 3x3 array");
        for (std::size_t i = 0; i < 3; ++i) {
            if (!k[i].is_array() || k[i].size() != 3) throw ConfigParseError("device.kerr_hz: expected a 3x3 array");
            for (std::size_t j = 0; j < 3; ++j) p.kerr[i][j] = angular(get_number(k[i][j], "device.kerr_hz"));
        }
    } else {
        p.reset_kerr_to_anharmonicities();
    }
    if (d.contains("n_res_1")) p.n_res_1 = get_number(d["n_res_1"], "device.n_res_1");
    if (d.contains("n_res_2")) p.n_res_2 = get_number(d["n_res_2"], "device.n_res_2");
    if (d.contains("n_res_3")) p.n_res_3 = get_number(d["n_res_3"], "device.n_res_3");
    if (d.contains("relaxation")) {
        const auto s = get_string(d["relaxation"], "device.relaxation");
        if (s == "total") {
            p.relaxation = RelaxationConvention::total;
        } else if (s == "bare") {
            p.relaxation = RelaxationConvention::bare;
        } else {
            throw ConfigParseError("device.relaxation: expected 'total' or 'bare'");
        }
    }
}

inline void apply_experiment(RunConfig& rc, const nlohmann::json& e) {
    using namespace detail;
    require_keys(e, "experiment",
                 {"kind", "model", "variant", "n_h", "n_c", "initial_p1", "times_s", "drive", "drive_rates_hz",
                  "drive_detunings_hz", "omega2_detunings_hz", "truncation", "zero_temperature", "threshold",
                  "steady_state_time_s", "max_grid_points", "integrator", "jobs"});
    auto& s = rc.experiment;
    if (e.contains("kind")) s.kind = parse_kind(get_string(e["kind"], "experiment.kind"));
    if (e.contains("model")) s.model = parse_model(get_string(e["model"], "experiment.model"));
    if (e.contains("variant")) s.variant = parse_variant(get_string(e["variant"], "experiment.variant"));
    if (e.contains("n_h")) s.n_h = get_grid(e["n_h"], "experiment.n_h");
    if (e.contains("n_c")) s.n_c = get_grid(e["n_c"], "experiment.n_c");
    if (e.contains("initial_p1")) rc.initial_p1_values = get_grid(e["initial_p1"], "experiment.initial_p1");
    if (e.contains("times_s")) s.times = get_grid(e["times_s"], "experiment.times_s");
    if (e.contains("drive")) {
        const auto& d = e["drive"];
        require_keys(d, "experiment.drive", {"rate_hz", "duration_s", "detuning_sign"});
        if (d.contains("rate_hz")) s.drive.Omega = angular(get_number(d["rate_hz"], "experiment.drive.rate_hz"));
        if (d.contains("duration_s")) s.drive.duration = get_number(d["duration_s"], "experiment.drive.duration_s");
        if (d.contains("detuning_sign")) {
            const auto v = get_string(d["detuning_sign"], "experiment.drive.detuning_sign");
            if (v == "frame") {
                s.drive.sign = DetuningSign::frame;
            } else if (v == "as_printed") {
                s.drive.sign = DetuningSign::as_printed;
            } else {
                throw ConfigParseError("experiment.drive.detuning_sign: expected 'frame' or 'as_printed'");
            }
        }
    }
    const double two_pi = constants::two_pi;
    if (e.contains("drive_rates_hz")) s.drive_rates = get_grid(e["drive_rates_hz"], "experiment.drive_rates_hz", two_pi);
    if (e.contains("drive_detunings_hz")) {
        s.drive_detunings = get_grid(e["drive_detunings_hz"], "experiment.drive_detunings_hz", two_pi);
    }
    if (e.contains("omega2_detunings_hz")) {
        s.omega2_detunings = get_grid(e["omega2_detunings_hz"], "experiment.omega2_detunings_hz", two_pi);
    }
    if (e.contains("truncation")) {
        const auto& t = e["truncation"];
        if (!t.is_array()) throw ConfigParseError("experiment.truncation: expected an array of integers");
        s.truncation.clear();
        for (const auto& v : t) {
            if (!v.is_number_integer()) throw ConfigParseError("experiment.truncation: expected integers");
            s.truncation.push_back(v.get<int>());
        }
    }
    if (e.contains("zero_temperature")) s.zero_temperature = get_bool(e["zero_temperature"], "experiment.zero_temperature");
    if (e.contains("threshold")) s.threshold = get_number(e["threshold"], "experiment.threshold");
    if (e.contains("steady_state_time_s")) {
        s.steady_state_time = get_number(e["steady_state_time_s"], "experiment.steady_state_time_s");
    }
    if (e.contains("max_grid_points")) {
        s.max_grid_points = static_cast<std::size_t>(get_uint(e["max_grid_points"], "experiment.max_grid_points"));
    }
    if (e.contains("jobs")) s.jobs = static_cast<unsigned>(get_uint(e["jobs"], "experiment.jobs"));
    if (e.contains("integrator")) {
        const auto& i = e["integrator"];
        require_keys(i, "experiment.integrator", {"backend", "rtol", "atol", "check_positivity"});
        if (i.contains("backend")) {
            const auto b = get_string(i["backend"], "experiment.integrator.backend");
            if (b == "expm") {
                s.evolve.backend = Integrator::matrix_exponential;
            } else if (b == "rk45") {
                s.evolve.backend = Integrator::runge_kutta;
            } else {
                throw ConfigParseError("experiment.integrator.backend: expected 'expm' or 'rk45'");
            }
        }
        if (i.contains("rtol")) s.evolve.rtol = get_number(i["rtol"], "experiment.integrator.rtol");
        if (i.contains("atol")) s.evolve.atol = get_number(i["atol"], "experiment.integrator.atol");
        if (i.contains("check_positivity")) {
            s.evolve.check_positivity = get_bool(i["check_positivity"], "experiment.integrator.check_positivity");
        }
    }
}

inline void apply_fit(RunConfig& rc, const nlohmann::json& f) {
    using namespace detail;
    require_keys(f, "fit", {"free", "data", "synthetic", "max_evaluations", "restarts", "polish", "profile"});
    FitConfig fc = rc.fit.value_or(FitConfig{});
    if (f.contains("free")) {
        if (!f["free"].is_array()) throw ConfigParseError("fit.free: expected an array");
        fc.free.clear();
        for (const auto& p : f["free"]) {
            require_keys(p, "fit.free[]", {"name", "initial", "lower", "upper", "log_scale"});
            FreeParameter fp;
            if (!p.contains("name") || !p.contains("initial")) throw ConfigParseError("fit.free[]: name and initial are required");
            fp.name = get_string(p["name"], "fit.free[].name");
            const auto& names = fit_parameter_names();
            if (std::find(names.begin(), names.end(), fp.name) == names.end()) {
                throw ConfigParseError("fit.free[]: unknown parameter '" + fp.name + "'");
            }
            fp.initial = get_number(p["initial"], "fit.free[].initial");
            if (p.contains("lower")) fp.lower = get_number(p["lower"], "fit.free[].lower");
            if (p.contains("upper")) fp.upper = get_number(p["upper"], "fit.free[].upper");
            fp.log_scale = p.contains("log_scale") ? get_bool(p["log_scale"], "fit.free[].log_scale") : fp.lower > 0.0;
            fc.free.push_back(fp);
        }
    }
    if (f.contains("data")) {
        fc.data_path = get_string(f["data"], "fit.data");
        fc.synthetic.reset();
    }
    if (f.contains("synthetic")) {
        const auto& s = f["synthetic"];
        require_keys(s, "fit.synthetic", {"truth", "noise", "seed"});
        SyntheticData sd;
        if (s.contains("truth")) {
            require_keys(s["truth"], "fit.synthetic.truth",
                         {"A_hz", "n_h", "n_c", "amplitude", "gamma1_hz", "gamma2_hz", "t_relax_s", "initial_p1"});
            for (const auto& [k, v] : s["truth"].items()) sd.truth[k] = get_number(v, "fit.synthetic.truth." + k);
        }
        if (s.contains("noise")) sd.noise = get_number(s["noise"], "fit.synthetic.noise");
        if (s.contains("seed")) sd.seed = get_uint(s["seed"], "fit.synthetic.seed");
        fc.synthetic = sd;
        fc.data_path.reset();
    }
    if (f.contains("max_evaluations")) {
        fc.options.max_evaluations = static_cast<std::size_t>(get_uint(f["max_evaluations"], "fit.max_evaluations"));
    }
    if (f.contains("restarts")) fc.options.restarts = static_cast<unsigned>(get_uint(f["restarts"], "fit.restarts"));
    if (f.contains("polish")) fc.options.polish = get_bool(f["polish"], "fit.polish");
    if (f.contains("profile")) {
        const auto& p = f["profile"];
        require_keys(p, "fit.profile", {"parameter", "grid"});
        if (!p.contains("parameter") || !p.contains("grid")) throw ConfigParseError("fit.profile: parameter and grid are required");
        fc.profile_parameter = get_string(p["parameter"], "fit.profile.parameter");
        fc.profile_grid = get_grid(p["grid"], "fit.profile.grid");
    }
    rc.fit = fc;
}

inline void apply_output(RunConfig& rc, const nlohmann::json& o) {
    using namespace detail;
    require_keys(o, "output", {"directory", "formats", "seed", "name"});
    if (o.contains("directory")) rc.output.directory = get_string(o["directory"], "output.directory");
    if (o.contains("name")) rc.name = get_string(o["name"], "output.name");
    if (o.contains("seed")) rc.output.seed = get_uint(o["seed"], "output.seed");
    if (o.contains("formats")) {
        if (!o["formats"].is_array()) throw ConfigParseError("output.formats: expected an array");
        rc.output.csv = rc.output.json = rc.output.svg = false;
        for (const auto& v : o["formats"]) {
            const auto s = get_string(v, "output.formats[]");
            if (s == "csv") {
                rc.output.csv = true;
            } else if (s == "json") {
                rc.output.json = true;
            } else if (s == "svg") {
                rc.output.svg = true;
            } else {
                throw ConfigParseError("output.formats: unknown format '" + s + "'");
            }
        }
    }
}

/// Comma-separated format list, as given on the command line.
inline void apply_format_list(OutputConfig& out, const std::string& list) {
    out.csv = out.json = out.svg = false;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "csv") {
            out.csv = true;
        } else if (item == "json") {
            out.json = true;
        } else if (item == "svg") {
            out.svg = true;
        } else {
            throw ConfigParseError("--format: unknown format '" + item + "'");
        }
    }
}

// ---------------------------------------------------------------------------------------
// Presets

struct PresetInfo {
    std::string name;
    std::string description;
    std::string reproduces;
};

inline const std::vector<PresetInfo>& preset_list() {
    static const std::vector<PresetInfo> list{
        {"fig2b", "Q3 population after a 2 us Q1 drive vs drive and Q2 detuning", "Fig. 2b"},
        {"fig2c", "Q3 population vs drive duration at drive rates 0, 0.2, 0.5, 1 MHz", "Fig. 2c"},
        {"fig3b", "reset traces at n_H = 0.16, 3, 21.424 with the cold bath at its floor", "Fig. 3b"},
        {"fig4a", "reset time (P = 0.01) vs n_H", "Fig. 4a"},
        {"fig4b_hot", "P_SS after 100 us vs n_H at two cold-bath occupations", "Fig. 4b (left)"},
        {"fig4b_cold", "P_SS after 100 us vs n_C at two hot-bath occupations", "Fig. 4b (right)"},
        {"figS3", "reset traces at n_H = 35 for several cold-bath occupations", "Fig. S3"},
        {"figS4", "reset traces starting from the residual population (0.028 and 0.020)", "Fig. S4"},
        {"cop_table", "steady-state heat currents, COP and Carnot bound vs n_H", "main-text COP"},
    };
    return list;
}

inline RunConfig make_preset(const std::string& name) {
    RunConfig rc;
    rc.name = name;
    auto& s = rc.experiment;
    const double mhz = angular(1e6);
    bool found = false;
    for (const auto& p : preset_list()) {
        if (p.name == name) {
            rc.description = p.description;
            found = true;
        }
    }
    if (!found) throw ConfigParseError("unknown preset '" + name + "' (see list-presets)");

    if (name == "fig2b") {
        s.kind = ExperimentKind::avoided_crossing_scan;
        s.model = ModelKind::lindblad;
        s.zero_temperature = true;
        rc.initial_p1_values = {1.0};
        s.drive.Omega = angular(200e3);
        s.drive.duration = 2e-6;
        s.drive_detunings = linspace(-4.0 * mhz, 4.0 * mhz, 33);
        s.omega2_detunings = linspace(-20.0 * mhz, 20.0 * mhz, 41);
    } else if (name == "fig2c") {
        s.kind = ExperimentKind::drive_rate_sweep;
        s.model = ModelKind::lindblad;
        s.zero_temperature = true;
        rc.initial_p1_values = {1.0};
        s.drive.Omega = 1.0 * mhz;  // fitted trace
        s.drive.duration = 2e-6;
        s.drive_rates = {0.0, 0.2 * mhz, 0.5 * mhz, 1.0 * mhz};
        s.times = linspace(0.0, 2e-6, 101);
        FitConfig fc;
        fc.free = {{"A_hz", 2e6, 0.5e6, 10e6, true}};
        fc.synthetic = SyntheticData{{{"A_hz", 3.2e6}}, 0.0, std::nullopt};
        rc.fit = fc;
    } else if (name == "fig3b") {
        s.kind = ExperimentKind::reset_trace;
        s.n_h = {0.16, 3.0, 21.424};
        s.times = linspace(0.0, 5e-6, 251);
        FitConfig fc;
        fc.free = {{"n_h", 10.0, 0.01, 100.0, true}, {"amplitude", 0.9, 0.5, 1.5, true}};
        fc.synthetic = SyntheticData{{{"n_h", 21.424}, {"amplitude", 1.0}}, 0.0, std::nullopt};
        rc.fit = fc;
    } else if (name == "fig4a") {
        s.kind = ExperimentKind::reset_time_sweep;
        s.n_h = logspace(0.5, 100.0, 31);
        s.times = linspace(0.0, 40e-6, 4001);
    } else if (name == "fig4b_hot") {
        s.kind = ExperimentKind::steady_state_sweep;
        s.n_h = logspace(0.1, 30.0, 25);
        s.n_c = {0.0, 0.063};
    } else if (name == "fig4b_cold") {
        s.kind = ExperimentKind::steady_state_sweep;
        s.n_h = {10.0, 35.0};
        s.n_c = logspace(0.001, 10.0, 25);
    } else if (name == "figS3") {
        s.kind = ExperimentKind::cold_bath_sweep;
        s.n_h = {35.0};
        s.n_c = {0.0, 0.063, 0.3, 1.0, 3.0};
        s.times = linspace(0.0, 5e-6, 251);
    } else if (name == "figS4") {
        s.kind = ExperimentKind::residual_init_trace;
        s.n_h = {0.16, 3.0, 21.424};
        rc.initial_p1_values = {0.028, 0.020};
        s.times = linspace(0.0, 2e-6, 201);
    } else if (name == "cop_table") {
        s.kind = ExperimentKind::cop_table;
        s.model = ModelKind::lindblad;
        s.n_h = {0.16, 3.0, 21.424, 35.0};
    }
    s.initial_p1 = rc.initial_p1_values.front();
    rc.device_echo = device_to_json(s.params);
    return rc;
}

/// Parses a config document. A "preset" key selects the starting point; other sections
/// override it.
inline RunConfig parse_config(const std::string& text, const std::string& fallback_name = "run") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigParseError(std::string("invalid JSON: ") + e.what());
    }
    detail::require_keys(j, "config", {"schema", "preset", "description", "device", "experiment", "fit", "output"});
    if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != config_schema) {
        throw ConfigParseError(std::string("config: schema must be \"") + config_schema + "\"");
    }
    RunConfig rc;
    if (j.contains("preset")) {
        rc = make_preset(detail::get_string(j["preset"], "preset"));
    } else {
        rc.name = fallback_name;
        rc.experiment.n_c = {0.0};
    }
    if (j.contains("description")) rc.description = detail::get_string(j["description"], "description");
    if (j.contains("device")) apply_device(rc.experiment.params, j["device"]);
    if (j.contains("experiment")) apply_experiment(rc, j["experiment"]);
    if (j.contains("fit")) apply_fit(rc, j["fit"]);
    if (j.contains("output")) apply_output(rc, j["output"]);
    if (rc.initial_p1_values.empty()) throw ValidationError("experiment: initial_p1 grid is empty");
    rc.experiment.initial_p1 = rc.initial_p1_values.front();
    rc.device_echo = device_to_json(rc.experiment.params);
    return rc;
}

/// `target` is a preset name or a path to a config file.
inline RunConfig load_config(const std::string& target) {
    for (const auto& p : preset_list()) {
        if (p.name == target) return make_preset(target);
    }
    std::ifstream in(target);
    if (!in) throw ConfigParseError("cannot read config '" + target + "' (not a preset name or readable file)");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::path(target).stem().string());
}

}  // namespace qar
