#include "fracpeak/claims.hpp"
#include "fracpeak/config.hpp"
#include "fracpeak/errors.hpp"
#include "fracpeak/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace fracpeak;
using json = nlohmann::json;

// Runs every stage with the acceptance schedule (the config defaults) and
// prints one verdict line per criterion. Tolerances live in the claim table.
int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::string out = "acceptance_run";
    int workers = 1;
    bool reuse = false;
    app.add_option("--out", out, "run directory");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--reuse", reuse, "evaluate an existing run directory without recomputing");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

    RunConfig cfg;
    cfg.out = out;
    cfg.workers = workers;
    if (!reuse) {
        const auto r = run_all(cfg);
        if (r.exit_code != kExitOk) spdlog::warn("pipeline: {}", r.message);
    }

    json stages;
    try {
        stages = load_stage_summaries(cfg.out);
        std::ifstream in(cfg.out / "exponents.json");
        if (!in) throw DependencyError("exponents.json missing (report stage did not run)");
        in >> stages["exponents"];
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitDependency;
    }
    const auto claims = evaluate_claims(stages);
    const auto verdicts = group_by_criterion(claims);

    int passed = 0, total = 0;
    for (const auto& v : verdicts) {
        if (v.criterion == 0) continue;
        ++total;
        passed += v.pass ? 1 : 0;
        std::printf("criterion %2d  %-4s  %s\n", v.criterion, v.pass ? "PASS" : "FAIL", v.title.c_str());
    }
    std::printf("%d of %d criteria pass\n\n", passed, total);
    for (const auto& v : verdicts) {
        std::printf("[%d] %s\n", v.criterion, v.title.c_str());
        for (const auto* c : v.rows)
            std::printf("  %s  %s\n        tolerance: %s\n        measured: %s\n", c->pass ? "ok  " : "MISS",
                        c->claim.c_str(), c->tolerance.c_str(), c->measured.dump().c_str());
    }
    return passed == total ? 0 : 1;
}
