#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "skir/config.hpp"
#include "skir/error.hpp"
#include "skir/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Graphon SKIR incentive-design solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    bool validate_mc = false;

    CLI::App* run_cmd = app.add_subcommand("run", "Solve the experiment described by a config file");
    run_cmd->add_option("config", config_path, "Experiment config file")->required();
    run_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
    run_cmd->add_option("--seed", seed, "Random seed (overrides the config)");
    run_cmd->add_option("--mode", mode, "Run mode")->check(CLI::IsMember({"ggne", "sgge", "dsge"}));
    run_cmd->add_flag("--validate-mc", validate_mc, "Cross-check against a finite-player Monte Carlo run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : skir::exit_config_error;
    }

    try {
        skir::ExperimentConfig cfg = skir::load_config(config_path);
        if (out_dir) cfg.output_dir = *out_dir;
        if (seed) cfg.seed = *seed;
        if (mode) cfg.mode = *skir::parse_run_mode(*mode);
        if (validate_mc) cfg.simulation.enabled = true;

        const skir::RunReport report = skir::run(cfg);
        for (const auto& f : report.manifest) std::cout << f.string() << '\n';
        if (report.mc_ran) std::cout << fmt::format("monte carlo sup gap: {:.4g}\n", report.mc_sup_gap);
        if (report.exit_code != skir::exit_success)
            std::cerr << "run finished with errors, see report.json\n";
        return report.exit_code;
    } catch (const skir::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return skir::exit_config_error;
    } catch (const skir::NotConvergedError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return skir::exit_not_converged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return skir::exit_failure;
    }
}
