#include "fracpeak/config.hpp"
#include "fracpeak/errors.hpp"
#include "fracpeak/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

using namespace fracpeak;

int main(int argc, char** argv) {
    CLI::App app{"Boundary-concentrating peaks of a fractional Schrodinger-Poisson system"};
    app.require_subcommand(1, 1);
    std::string config_path, out;
    std::vector<std::string> sets;
    int workers = 0;
    bool verbose = false, print_config = false;
    app.add_option("--config", config_path, "config file (flat key = value with sections)")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override, section.key=value (repeatable)");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory (FRACPEAK_OUT wins)");
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("--print-config", print_config, "print the effective config and exit");
    app.fallthrough();

    std::string stage;
    for (auto s : kStages) app.add_subcommand(std::string(s), "run the " + std::string(s) + " stage")->fallthrough();
    app.add_subcommand("all", "run every stage in order")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }
    stage = app.get_subcommands().front()->get_name();
    spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& s : sets) apply_override(cfg, s);
        if (workers > 0) cfg.workers = workers;
        if (!out.empty()) cfg.out = out;
        if (const char* env = std::getenv("FRACPEAK_OUT"); env && *env) cfg.out = env;
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (print_config) {
        std::cout << cfg.echo();
        return kExitOk;
    }

    const auto r = stage == "all" ? run_all(cfg) : run_stage(stage, cfg);
    if (r.exit_code != kExitOk) std::cerr << stage << ": " << r.message << "\n";
    return r.exit_code;
}
