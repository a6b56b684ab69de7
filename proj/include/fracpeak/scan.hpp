#pragma once

#include "fracpeak/exponents.hpp"
#include "fracpeak/fit.hpp"
#include "fracpeak/groundstate.hpp"
#include "fracpeak/reduction.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fracpeak {

enum ScanFlag : std::uint32_t {
    kProjectionFailed = 1u << 0,
    kTauMismatch = 1u << 1,
    kTangentMismatch = 1u << 2,
    kNotConverged = 1u << 3,
    kNotContracting = 1u << 4,
    kConstraint = 1u << 5,
    kWeakCoercivity = 1u << 6,
    kNumerical = 1u << 7,
};

// flags that make M unusable for an argmin; the two cross-checks are advisory
constexpr std::uint32_t kExcluding =
    kProjectionFailed | kNotConverged | kNotContracting | kConstraint | kWeakCoercivity | kNumerical;
// the surrogate only needs the projection
constexpr std::uint32_t kSurrogateExcluding = kProjectionFailed | kNumerical;

std::string describe_flags(std::uint32_t flags);

struct ScanOptions {
    std::size_t d_points = 12;
    bool full = true;                  // M through the corrector; surrogate only otherwise
    double nodes_per_eps = 20.0;       // grid: m = max(min_nodes, nodes_per_eps / eps)
    std::size_t min_nodes = 1000;
    double exterior_width = 0.5;
    double coercivity_floor = 0.02;
    // free surrogate, below and across the window: d in [free_lo * eps, d_max]
    double free_lo = 0.5;
    std::size_t free_points = 25;
    ReductionParams params;
    ReductionOptions reduction;
    int workers = 1;
};

struct ScanPoint {
    double d = 0.0, xi = 0.0;
    double J_PU = 0.0;
    double M = 0.0;            // NaN when not evaluated
    double surrogate = 0.0;    // tau/2 + green term + d-independent terms
    double tau = 0.0;
    double green_term = 0.0;   // -eps^{2N} B^2 H(xi, xi) / 4
    double coercivity = 0.0;
    double contraction = 0.0;
    double omega_norm = 0.0;
    int iterations = 0;
    std::uint32_t flags = 0;
    bool usable() const { return flags == 0; }
};

struct Argmin {
    std::size_t index = 0;
    double d = 0.0;        // grid argmin
    double refined = 0.0;  // parabolic vertex in log d when interior, else d
    bool interior = false;
    bool tie = false;      // resolved to the smallest d
    bool found = false;
};

struct ScanResult {
    double eps = 0.0;
    double d_min = 0.0, d_max = 0.0;
    std::size_t m = 0;
    std::vector<ScanPoint> points;
    Argmin full, surrogate;
    Argmin free_surrogate;               // unconstrained by the window
    std::vector<double> free_d, free_values, free_tau, free_green;
    std::size_t flagged = 0;
    bool failed(bool full_mode) const { return !(full_mode ? full.found : surrogate.found); }
    double d_star() const { return full.refined; }
    double surrogate_d_star() const { return surrogate.refined; }
};

// minimizer in d of c1 eps (eps/d)^{N+4s} - c2 eps^{2N} d^{-(N-2s)}: a multiple of eps^{2/3}
double balance_minimizer(int N, double s, double c1, double c2, double eps);
// tau-like over green-like term at that minimizer, (N-2s)/(N+4s)
double balance_ratio(int N, double s);

// log-spaced, >= 2 points, inclusive
std::vector<double> log_grid(double lo, double hi, std::size_t n);
// smallest value with ties to the smallest index; skips NaN and masked entries
Argmin argmin_of(const std::vector<double>& d, const std::vector<double>& v, const std::vector<bool>& usable = {});

GridPtr scan_grid(const ModelParams& P, double eps, const ScanOptions& opt);

ScanResult scan(const ModelParams& P, const GroundState& G, const LimitConstants& K, double eps,
                const ScanOptions& opt = {});
ScanResult scan(const ReductionWorkspace& W, const GroundState& G, const LimitConstants& K,
                const ScanOptions& opt = {});
std::vector<ScanResult> scan_schedule(const ModelParams& P, const GroundState& G, const LimitConstants& K,
                                      const std::vector<double>& eps_list, const ScanOptions& opt = {});

struct FitOptions {
    bool surrogate = false;
    bool require_interior = true;
    std::size_t min_points = 4;
    double min_span = 8.0;  // largest over smallest eps
    bool free = false;      // use the unconstrained surrogate minimum
};

struct ConcentrationFit {
    LineFit line;
    std::vector<double> eps, d_star;
    std::vector<double> excluded;  // eps values dropped (flagged or at a window edge)
    double slope() const { return line.slope; }
};

// slope of log d* against log eps; throws NumericalError when too few points remain
ConcentrationFit concentration_fit(const std::vector<ScanResult>& results, const FitOptions& opt = {});

} // namespace fracpeak
