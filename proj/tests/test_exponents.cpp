#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fracpeak/errors.hpp"
#include "fracpeak/exponents.hpp"

#include <cmath>
#include <string>

using namespace fracpeak;

TEST_CASE("window lower bounds at the default point") {
    const auto b = varpi_bounds(1, 1.0 / 3.0, 2.0);
    CHECK(b[0] == doctest::Approx(7.0 / 30.0).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(7.0 / 36.0).epsilon(1e-14));
    CHECK(b[2] == doctest::Approx(1.0 / 21.0).epsilon(1e-14));
    CHECK(b[3] < 0.0);
    CHECK(varpi_lower_bound(1, 1.0 / 3.0, 2.0) == doctest::Approx(7.0 / 30.0));
}

TEST_CASE("boundary and green exponents cross at one third") {
    for (int N = 1; N <= 6; ++N) {
        for (double s : {0.1, 0.25, 1.0 / 3.0, 0.45}) {
            if (!(2 * s < N)) continue;
            const double w = crossing_exponent(N, s);
            CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
            CHECK(boundary_exponent(N, s, w) == doctest::Approx(green_exponent(N, s, w)));
            CHECK(boundary_exponent(N, s, 0.5) > green_exponent(N, s, 0.5));
            CHECK(boundary_exponent(N, s, 0.2) < green_exponent(N, s, 0.2));
        }
    }
}

TEST_CASE("corrector exponent at the default point") {
    CHECK(corrector_exponent(1, 1.0 / 3.0, 0.34) == doctest::Approx(0.39).epsilon(1e-12));
    CHECK(residual_exponent(1, 1.0 / 3.0, 0.34) == doctest::Approx(0.89).epsilon(1e-12));
    CHECK(zeta0_ceiling(1, 1.0 / 3.0) == doctest::Approx(2.0));
    ReductionParams rp;
    CHECK(rp.kappa(ModelParams{}) > 0.0);
}

TEST_CASE("default reduction parameters validate") {
    ReductionParams rp;
    CHECK_NOTHROW(rp.validate(ModelParams{}));
    CHECK(rp.d_min(0.01) < rp.d_max(0.01));
    CHECK(rp.d_min(0.01) == doctest::Approx(std::pow(0.01, 0.75)));
}

TEST_CASE("validator names the violated inequality") {
    ModelParams P;
    auto message = [&](ReductionParams rp) {
        try {
            rp.validate(P);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    ReductionParams rp;
    rp.varpi = 0.2;
    CHECK(message(rp).find("(N+4s)/(6(N+2s))") != std::string::npos);
    rp = {};
    rp.varpi = 0.34;
    CHECK(message(rp).find("varpi < 1/3") != std::string::npos);
    rp = {};
    rp.mu_exp = 0.3;
    CHECK(message(rp).find("mu > 1/3") != std::string::npos);
    rp = {};
    rp.zeta0 = 0.3;
    CHECK(message(rp).find("zeta0") != std::string::npos);
    rp = {};
    rp.zeta = 0.35;
    CHECK(message(rp).find("zeta < min") != std::string::npos);
}

TEST_CASE("zeta0 ceiling binds close to N = 8s") {
    ModelParams P;
    P.N = 5;
    P.s = 0.9;
    P.p = 1.5;
    ReductionParams rp;
    rp.varpi = 0.3;
    rp.zeta0 = 0.95;
    rp.zeta = 0.34;
    // 2s/(N-2s) = 1.8/3.2
    CHECK_THROWS_AS(rp.validate(P), ConfigError);
}

TEST_CASE("admissible sets") {
    CHECK(estimates_admissible(1, 1.0 / 3.0));
    CHECK(estimates_admissible(1, 1.0 / 6.0));
    CHECK_FALSE(estimates_admissible(1, 0.15));
    CHECK_FALSE(estimates_admissible(1, 0.5));
    CHECK(estimates_admissible(5, 5.0 / 6.0));
    CHECK_FALSE(estimates_admissible(6, 0.99));
    CHECK(remark_admissible(1, 0.1));
    CHECK(remark_admissible(6, 0.5));
    CHECK(described_admissible(3, 0.5));
    CHECK_FALSE(described_admissible(3, 0.49));
}

TEST_CASE("exhaustive bookkeeping") {
    const auto r = exponent_bookkeeping();
    CHECK(r.points == 8u * 119u);
    CHECK(r.triples > 0u);
    CHECK(r.crossing_error < 1e-12);
    CHECK(r.ordering_ok);
    CHECK(r.empty_windows == 0u);
    CHECK(r.set_mismatches == 0u);
    CHECK(r.passed());
    // the looser printed condition admits points the estimates do not cover
    CHECK(r.discrepancy_points > 0u);
    CHECK(r.discrepancy_empty_windows > 0u);
    CHECK_FALSE(r.discrepancy_examples.empty());
}

TEST_CASE("bookkeeping is stable under lattice refinement") {
    const auto r = exponent_bookkeeping(360);
    CHECK(r.passed());
}
