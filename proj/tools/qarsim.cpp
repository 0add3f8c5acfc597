// qarsim: run refrigerator presets or JSON configs and write CSV/JSON/SVG results.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "qar/config.hpp"
#include "qar/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qarsim: quantum absorption refrigerator simulations"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a preset name or a JSON config file");
    std::string target;
    std::optional<std::string> out_dir, formats, model, variant;
    std::optional<unsigned> jobs;
    std::optional<std::uint64_t> seed;
    run->add_option("config", target, "preset name or path to a qarsim-config/1 JSON file")->required();
    run->add_option("--out", out_dir, "output directory (default: the config's output.directory, else $QARSIM_OUT, else .)");
    run->add_option("--jobs", jobs, "parallel grid points (default: available processors)")->check(CLI::PositiveNumber);
    run->add_option("--format", formats, "comma-separated subset of csv,json,svg");
    run->add_option("--model", model, "lindblad or rate")->check(CLI::IsMember({"lindblad", "rate"}));
    run->add_option("--variant", variant, "as_printed or derived_decoherence")
        ->check(CLI::IsMember({"as_printed", "derived_decoherence"}));
    run->add_option("--seed", seed, "seed for fit restarts and synthetic noise");

    auto* list = app.add_subcommand("list-presets", "list the built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qar::exit_code::config;
    }

    if (list->parsed()) {
        for (const auto& p : qar::preset_list()) {
            std::cout << p.name << std::string(p.name.size() < 12 ? 12 - p.name.size() : 1, ' ') << p.description
                      << " [" << p.reproduces << "]\n";
        }
        return 0;
    }

    qar::RunConfig rc;
    try {
        rc = qar::load_config(target);
        if (model) rc.experiment.model = qar::parse_model(*model);
        if (variant) rc.experiment.variant = qar::parse_variant(*variant);
        if (formats) qar::apply_format_list(rc.output, *formats);
    } catch (const qar::ConfigParseError& e) {
        std::cerr << "qarsim: " << e.what() << "\n";
        return qar::exit_code::config;
    } catch (const qar::ValidationError& e) {
        std::cerr << "qarsim: " << e.what() << "\n";
        return qar::exit_code::validation;
    }
    if (out_dir) {
        rc.output.directory = *out_dir;
    } else if (rc.output.directory.empty()) {
        if (const char* env = std::getenv("QARSIM_OUT"); env && *env) rc.output.directory = env;
    }
    if (seed) rc.output.seed = *seed;
    rc.experiment.jobs = jobs.value_or(qar::default_jobs());

    const auto outcome = qar::execute(rc);
    if (outcome.exit_code == qar::exit_code::ok) {
        std::cout << "qarsim: wrote " << outcome.files.size() << " file(s) to "
                  << (rc.output.directory.empty() ? "." : rc.output.directory) << "\n";
    }
    return outcome.exit_code;
}
