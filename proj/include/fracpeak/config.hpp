#pragma once

#include "fracpeak/exponents.hpp"
#include "fracpeak/groundstate.hpp"
#include "fracpeak/gridcore.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fracpeak {

// Flat sectioned key = value text. Defaults are the acceptance schedule.
struct RunConfig {
    ModelParams model;
    GroundStateOptions ground;
    std::size_t spectrum_modes = 3;

    struct Operators {
        double fourier_L = 20.0;
        std::size_t fourier_n = 1024;
        int fourier_mode = 13;
        std::size_t green_m = 160;
        double green_exterior = 0.6;
        std::size_t green_pairs = 20;
        double riesz_L = 200.0;
        std::size_t riesz_n = 8192;
        double riesz_support = 2.0;
    } operators;

    struct Green {
        std::size_t m = 1000;
        std::size_t m_fine = 2000;
        double exterior_width = 1.0;
        std::vector<double> d{0.02, 0.03, 0.05, 0.08, 0.12, 0.2, 0.3};
    } green;

    struct Projection {
        double eps = 0.005;
        std::size_t m = 4000;
        double exterior_width = 0.5;
        std::vector<double> d{0.05, 0.1, 0.2, 0.5};
        double tau_tol = 0.02;
        std::vector<double> prefactor_eps{0.01, 0.02, 0.04};
        double prefactor_d_over_eps = 10.0;
        double nodes_per_eps = 20.0;
    } projection;

    struct Poisson {
        std::size_t m = 1600;
        double exterior_width = 0.5;
        std::vector<double> envelope_eps{0.2, 0.1, 0.05};
        std::vector<double> expansion_eps{0.1, 0.05, 0.025, 0.0125};
        double d_exp = 0.8;
    } poisson;

    struct Reduce {
        double eps = 0.01;
        std::optional<double> xi;       // default: d = eps^d_exp from the left end
        double d_exp = 0.75;
        std::vector<double> energy_eps{0.2, 0.1, 0.05};
        double energy_d_exp = 0.8;
        std::size_t energy_m = 1000;
        std::vector<double> schedule_eps{0.02, 0.01, 0.005};
    } reduce;

    // shared by reduce and scan: m = max(min_nodes, nodes_per_eps / eps)
    struct Mesh {
        double nodes_per_eps = 20.0;
        std::size_t min_nodes = 1000;
        double exterior_width = 0.5;
    } mesh;

    struct Scan {
        std::vector<double> eps{0.2, 0.1, 0.05, 0.02, 0.01};
        std::vector<double> full_eps{0.2, 0.1414213562373095, 0.1, 0.07071067811865475, 0.05};
        std::size_t d_points = 12;
        std::size_t free_points = 25;
        double free_lo = 0.5;
    } scan;

    ReductionParams reduction;
    double step_tol = 1e-10;
    int max_iterations = 50;
    double fd_tol = 0.01;
    double coercivity_floor = 0.02;

    std::filesystem::path out = "out";
    int workers = 1;
    std::uint64_t seed = 5;

    // throws ConfigError naming the violated inequality
    void validate() const;
    // every key, one per line, round-trippable through parse
    std::string echo() const;
};

std::vector<std::string> config_keys();
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& c, const std::string& key);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// "section.key=value"
void apply_override(RunConfig& c, const std::string& assignment);

} // namespace fracpeak
