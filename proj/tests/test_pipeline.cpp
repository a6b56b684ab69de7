#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fracpeak/claims.hpp"
#include "fracpeak/config.hpp"
#include "fracpeak/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace fracpeak;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// desk-sized schedule; the numbers are not meant to satisfy the claims
const char* kSmall = R"([ground]
L = 500
n = 32768
modes = 2

[green]
m = 400
m_fine = 800
d = 0.05, 0.08, 0.12, 0.2, 0.3, 0.5

[projection]
m = 800
eps = 0.03
d = 0.3, 0.5, 0.9
prefactor_eps = 0.04, 0.08

[poisson]
m = 400
envelope_eps = 0.2, 0.1
expansion_eps = 0.1, 0.05

[reduce]
eps = 0.05
schedule_eps = 0.05, 0.025
energy_eps = 0.2, 0.1
energy_m = 400

[mesh]
min_nodes = 400

[scan]
eps = 0.2, 0.1, 0.05
full_eps = 0.2
free_points = 12
)";

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("fracpeak_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n - 1;
}

int cli(const std::string& args) {
    const int st = std::system((std::string(FRACPEAK_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

} // namespace

TEST_CASE("stage dependencies and config errors map to exit codes") {
    RunConfig c = parse_config(kSmall);
    c.out = scratch("deps");
    CHECK(run_stage("reduce", c).exit_code == kExitDependency);
    CHECK(run_stage("report", c).exit_code == kExitDependency);
    CHECK(run_stage("bogus", c).exit_code == kExitConfig);
    RunConfig bad = c;
    bad.reduction.varpi = 0.2;
    CHECK(run_stage("ground", bad).exit_code == kExitConfig);
    fs::remove_all(c.out);

    const auto out = scratch("cli");
    CHECK(cli("reduce --out " + out.string()) == kExitDependency);
    CHECK(cli("ground --out " + out.string() + " --set reduction.varpi=0.2") == kExitConfig);
    CHECK(cli("ground --out " + out.string() + " --set model.q=1") == kExitConfig);
    CHECK(cli("ground --config /nonexistent.ini --out " + out.string()) == kExitConfig);
    CHECK(cli("ground --print-config --set scan.d_points=14") == kExitOk);
    fs::remove_all(out);
}

struct SmallRun {
    RunConfig c;
    StageOutcome r;
};

// subcases re-enter the test case, so the run itself happens once
const SmallRun& small_run() {
    static const SmallRun run = [] {
        SmallRun s{parse_config(kSmall), {}};
        s.c.out = scratch("all");
        s.r = run_all(s.c);
        return s;
    }();
    return run;
}

TEST_CASE("full pipeline on a small schedule") {
    const auto& [c, r] = small_run();
    // the scan may legitimately report numerical trouble at this size
    CHECK((r.exit_code == kExitOk || r.exit_code == kExitNumerical));
    const auto& d = c.out;

    for (const char* f : {"U.csv", "constants.json", "operators.json", "green.csv", "green.json", "projection.csv",
                          "projection.json", "poisson.csv", "poisson.json", "breakdown.json", "reduce.json",
                          "reduce.csv", "scan.csv", "scan_free.csv", "fit.json", "exponents.json", "report.csv",
                          "report.json", "manifest.json", "config.ini"})
        CHECK_MESSAGE(fs::exists(d / f), f);

    SUBCASE("ground constants") {
        const auto k = read_json(d / "constants.json");
        CHECK(k.at("residual_norm").get<double>() < 1e-9);
        CHECK(k.at("constants").at("A1").get<double>() > 0.0);
        CHECK(k.at("constants").at("B").get<double>() > 0.0);
    }

    SUBCASE("scan rows and fit fields") {
        CHECK(data_rows(d / "scan.csv") == c.scan.eps.size() * c.scan.d_points);
        CHECK(data_rows(d / "scan_free.csv") == c.scan.eps.size() * c.scan.free_points);
        const auto fit = read_json(d / "fit.json");
        CHECK(fit.contains("slope"));
        CHECK(fit.contains("intercept"));
        CHECK(fit.contains("residuals"));
        CHECK(fit.at("per_eps").size() == c.scan.eps.size());
    }

    SUBCASE("report carries at least ten claim rows and every criterion") {
        const auto rep = read_json(d / "report.json");
        CHECK(rep.at("claims").size() >= 10u);
        std::set<int> crit;
        for (const auto& row : rep.at("claims")) {
            CHECK(row.contains("claim"));
            CHECK(row.contains("measured"));
            CHECK(row.contains("tolerance"));
            CHECK(row.contains("pass"));
            crit.insert(row.at("criterion").get<int>());
        }
        for (int i = 1; i <= 10; ++i) CHECK(crit.count(i) == 1u);
        CHECK(data_rows(d / "report.csv") == rep.at("claims").size());
    }

    SUBCASE("manifest lists each file once with a matching checksum") {
        const auto m = read_json(d / "manifest.json");
        CHECK(m.at("version").get<std::string>() == code_version());
        CHECK(parse_config(m.at("config").get<std::string>()).echo() == c.echo());
        std::set<std::string> seen;
        for (const auto& f : m.at("files")) {
            const auto path = f.at("path").get<std::string>();
            CHECK(seen.insert(path).second);
            REQUIRE(fs::exists(d / path));
            CHECK(f.at("bytes").get<std::uintmax_t>() == fs::file_size(d / path));
            char hex[9];
            std::snprintf(hex, sizeof hex, "%08x", file_crc32(d / path));
            CHECK(f.at("crc32").get<std::string>() == hex);
        }
        CHECK(seen.count("scan.csv") == 1u);
        CHECK(seen.count("U.csv") == 1u);
        for (auto s : kStages) CHECK(m.at("stages").contains(std::string(s)));
    }

    SUBCASE("scan output does not depend on the worker count") {
        RunConfig w = c;
        w.out = scratch("workers");
        w.workers = 3;
        fs::create_directories(w.out);
        fs::copy(d / "ground", w.out / "ground", fs::copy_options::recursive);
        const auto rs = run_stage("scan", w);
        CHECK(rs.exit_code == r.exit_code);
        CHECK(slurp(w.out / "scan.csv") == slurp(d / "scan.csv"));
        CHECK(slurp(w.out / "scan_free.csv") == slurp(d / "scan_free.csv"));
        CHECK(read_json(w.out / "fit.json") == read_json(d / "fit.json"));
        fs::remove_all(w.out);
    }
}
