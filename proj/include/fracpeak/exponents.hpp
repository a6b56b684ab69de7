#pragma once

#include "fracpeak/gridcore.hpp"

#include <array>
#include <string>
#include <vector>

namespace fracpeak {

// the four lower bounds on varpi for the peak window, in order:
// (N+4s)/(6(N+2s)), (N+4s)/(3((1+p)(N+2s)-N)), (N-2s)/(3(N+2-2s)), (6-2N-14s)/(3(N+2-2s))
std::array<double, 4> varpi_bounds(int N, double s, double p);
double varpi_lower_bound(int N, double s, double p);

// the two energy exponents N + w(N+4s) (boundary term) and N + 2s + w(N-2s)
// (Green term); they cross where w solves the linear equation
double boundary_exponent(int N, double s, double w);
double green_exponent(int N, double s, double w);
double crossing_exponent(int N, double s);

// (2s + zeta0(N-2s))/2
double corrector_exponent(int N, double s, double zeta0);
// (N + 2s + zeta0(N-2s))/2, exponent of the l bound
double residual_exponent(int N, double s, double zeta0);
// upper end of zeta0 for the l bound
double zeta0_ceiling(int N, double s);

struct ReductionParams {
    double varpi = 0.25;   // window D_eps = {eps^{1-varpi} <= d <= eps^{1-mu}}
    double mu_exp = 0.6;
    double zeta0 = 0.34;
    double zeta = 0.335;

    double kappa(const ModelParams& P) const { return corrector_exponent(P.N, P.s, zeta0); }
    double d_min(double eps) const;
    double d_max(double eps) const;
    // throws ConfigError naming the first violated inequality
    void validate(const ModelParams& P) const;
};

// hypothesis sets for (N, s) with s in (0, 1): the one used by the estimates
// (2s < N <= 6s, N < 8s) and the one printed in the concluding remark (2s < N <= 6)
bool estimates_admissible(int N, double s);
bool remark_admissible(int N, double s);
// closed description: N = 1 with 1/6 <= s < 1/2, or 2 <= N <= 5 with N/6 <= s < 1
bool described_admissible(int N, double s);

struct BookkeepingReport {
    std::size_t points = 0;           // (N, s) lattice points
    std::size_t triples = 0;          // (N, s, p) checked for the window
    double crossing_error = 0.0;      // max |crossing - 1/3|
    bool ordering_ok = true;          // boundary > green above 1/3, < below
    std::size_t empty_windows = 0;    // admissible triples with empty varpi range
    std::size_t set_mismatches = 0;   // validator vs closed description
    // admissible when printed as N <= 6 but not as N <= 6s
    std::size_t discrepancy_points = 0;
    std::size_t discrepancy_empty_windows = 0;  // of those, how many have no varpi
    std::vector<std::string> discrepancy_examples;
    bool passed() const {
        return crossing_error < 1e-12 && ordering_ok && empty_windows == 0 && set_mismatches == 0;
    }
};

// exhaustive over N = 1..8 and s = k/denominator, k = 1..denominator-1
BookkeepingReport exponent_bookkeeping(int denominator = 120);

} // namespace fracpeak
