#include "fracpeak/exponents.hpp"

#include "fracpeak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fracpeak {

namespace {
constexpr double kTol = 1e-12;
}

std::array<double, 4> varpi_bounds(int N, double s, double p) {
    const double n = N;
    return {(n + 4 * s) / (6 * (n + 2 * s)), (n + 4 * s) / (3 * ((1 + p) * (n + 2 * s) - n)),
            (n - 2 * s) / (3 * (n + 2 - 2 * s)), (6 - 2 * n - 14 * s) / (3 * (n + 2 - 2 * s))};
}

double varpi_lower_bound(int N, double s, double p) {
    const auto b = varpi_bounds(N, s, p);
    return *std::max_element(b.begin(), b.end());
}

double boundary_exponent(int N, double s, double w) { return N + w * (N + 4 * s); }
double green_exponent(int N, double s, double w) { return N + 2 * s + w * (N - 2 * s); }

double crossing_exponent(int N, double s) {
    // N + w(N+4s) = N + 2s + w(N-2s)  =>  6sw = 2s
    const double slope = (N + 4 * s) - (N - 2 * s);
    return 2 * s / slope;
}

double corrector_exponent(int N, double s, double zeta0) { return (2 * s + zeta0 * (N - 2 * s)) / 2; }
double residual_exponent(int N, double s, double zeta0) { return (N + 2 * s + zeta0 * (N - 2 * s)) / 2; }
double zeta0_ceiling(int N, double s) { return 2 * s / (N - 2 * s); }

double ReductionParams::d_min(double eps) const { return std::pow(eps, 1.0 - varpi); }
double ReductionParams::d_max(double eps) const { return std::pow(eps, 1.0 - mu_exp); }

void ReductionParams::validate(const ModelParams& P) const {
    auto fail = [](const std::string& what) { throw ConfigError("reduction: violated " + what); };
    char buf[160];
    const auto b = varpi_bounds(P.N, P.s, P.p);
    const char* names[4] = {"(N+4s)/(6(N+2s))", "(N+4s)/(3((1+p)(N+2s)-N))", "(N-2s)/(3(N+2-2s))",
                            "(6-2N-14s)/(3(N+2-2s))"};
    for (int i = 0; i < 4; ++i) {
        if (!(varpi > b[i])) {
            std::snprintf(buf, sizeof buf, "varpi > %s = %.6f (varpi = %.6f)", names[i], b[i], varpi);
            fail(buf);
        }
    }
    if (!(varpi < 1.0 / 3.0)) fail("varpi < 1/3");
    if (!(mu_exp > 1.0 / 3.0)) fail("mu > 1/3");
    if (!(mu_exp < 1.0)) fail("mu < 1");
    if (!(zeta0 > 1.0 / 3.0 && zeta0 < 1.0)) fail("1/3 < zeta0 < 1");
    if (!(zeta0 < zeta0_ceiling(P.N, P.s))) {
        std::snprintf(buf, sizeof buf, "zeta0 < 2s/(N-2s) = %.6f", zeta0_ceiling(P.N, P.s));
        fail(buf);
    }
    if (!(zeta > 1.0 / 3.0 && zeta < std::min(zeta0, mu_exp))) fail("1/3 < zeta < min(zeta0, mu)");
}

bool estimates_admissible(int N, double s) {
    return s > 0 && s < 1 && 2 * s < N && N <= 6 * s + kTol && N < 8 * s;
}

bool remark_admissible(int N, double s) { return s > 0 && s < 1 && 2 * s < N && N <= 6; }

bool described_admissible(int N, double s) {
    if (N == 1) return s >= 1.0 / 6.0 - kTol && s < 0.5;
    return N >= 2 && N <= 5 && s >= N / 6.0 - kTol && s < 1.0;
}

BookkeepingReport exponent_bookkeeping(int denominator) {
    BookkeepingReport r;
    const double third = 1.0 / 3.0;
    for (int N = 1; N <= 8; ++N) {
        for (int k = 1; k < denominator; ++k) {
            const double s = static_cast<double>(k) / denominator;
            ++r.points;
            if (2 * s < N) {
                r.crossing_error = std::max(r.crossing_error, std::abs(crossing_exponent(N, s) - third));
                for (double w : {0.05, 0.2, 0.3, 0.34, 0.5, 0.9}) {
                    const double gap = boundary_exponent(N, s, w) - green_exponent(N, s, w);
                    if ((w > third && !(gap > 0)) || (w < third && !(gap < 0))) r.ordering_ok = false;
                }
            }
            const bool est = estimates_admissible(N, s);
            if (est != described_admissible(N, s)) ++r.set_mismatches;
            auto window_empty = [&](double p) { return !(varpi_lower_bound(N, s, p) < third); };
            auto p_samples = [&] {
                const double pc = (N + 2 * s) / (N - 2 * s);
                std::vector<double> ps;
                for (double f : {0.01, 0.25, 0.5, 0.75, 0.99}) ps.push_back(1 + f * (pc - 1));
                return ps;
            };
            if (est) {
                for (double p : p_samples()) {
                    ++r.triples;
                    if (window_empty(p)) ++r.empty_windows;
                }
            }
            if (remark_admissible(N, s) && !est) {
                ++r.discrepancy_points;
                bool empty = false;
                for (double p : p_samples()) empty = empty || window_empty(p);
                if (empty) ++r.discrepancy_empty_windows;
                if (r.discrepancy_examples.size() < 6) {
                    char buf[96];
                    std::snprintf(buf, sizeof buf, "N=%d s=%.4f%s", N, s, empty ? " (empty window)" : "");
                    r.discrepancy_examples.emplace_back(buf);
                }
            }
        }
    }
    return r;
}

} // namespace fracpeak
