#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "common.hpp"
#include "fracpeak/errors.hpp"
#include "fracpeak/fit.hpp"
#include "fracpeak/projection.hpp"

#include <algorithm>
#include <cmath>

using namespace fracpeak;
using fracpeak::testing::shared_ground_state;

namespace {

struct Ctx {
    ModelParams P;
    GridPtr grid;
    std::unique_ptr<ScreenedSolver> S;
    Ctx(double eps, std::size_t m, double ew = 0.5, Interval dom = {-1.0, 1.0}) {
        P.eps = eps;
        P.domain = dom;
        grid = Grid::aligned(dom, m, ew);
        S = std::make_unique<ScreenedSolver>(std::make_shared<const NonlocalMatrix>(grid, P), eps);
    }
};

} // namespace

TEST_CASE("projection invariants") {
    const auto& G = shared_ground_state();
    Ctx c(0.02, 1000);
    for (double xi : {-0.8, -0.5, 0.0, 0.9}) {
        const auto R = project(*c.S, G, xi);
        const double scale = R.U.max_abs();
        CHECK(R.min_eta >= -1e-12 * scale);
        for (auto j : c.grid->interior()) REQUIRE(R.PU[j] <= R.U[j]);
        for (auto k : c.grid->exterior()) {
            REQUIRE(R.PU[k] == 0.0);
            REQUIRE(R.eta[k] == R.U[k]);
        }
        CHECK(R.PU.rule() == ExteriorRule::ZeroOutside);
        CHECK(R.tau_direct > 0.0);
        CHECK(R.tau_boundary > 0.0);
        CHECK(R.tau_mismatch() < 0.02);
        CHECK(!R.flagged);
        CHECK(std::abs(R.tau_green - R.tau_boundary) < 0.02 * R.tau_direct);
        CHECK(std::abs(R.tau_green - R.tau_direct) < 0.02 * R.tau_direct);
        CHECK(R.eta_norm_sq > 0.0);
        CHECK(R.consistency < 1e-2);
        CHECK(R.d == doctest::Approx(c.P.domain.distance_to_boundary(R.xi)));
        CHECK(std::abs(R.xi - xi) <= 0.5 * c.grid->h() + 1e-14);
        CHECK(tau_direct(R, G) == R.tau_direct);
        // maximum principle: eta below the largest exterior value
        CHECK(R.max_eta <= G.beta_hat * std::pow(c.P.eps / R.d, 1.0 + 2.0 / 3.0));
    }
}

TEST_CASE("tau is independent of how much exterior sits on the lattice") {
    const auto& G = shared_ground_state();
    Ctx a(0.02, 1000, 0.25), b(0.02, 1000, 1.0);
    const auto Ra = project(*a.S, G, -0.8493), Rb = project(*b.S, G, -0.8493);
    REQUIRE(Ra.xi == doctest::Approx(Rb.xi));
    CHECK(Ra.tau_direct == doctest::Approx(Rb.tau_direct).epsilon(1e-8));
    CHECK(Ra.tau_boundary == doctest::Approx(Rb.tau_boundary).epsilon(1e-8));
    CHECK(Ra.max_eta == doctest::Approx(Rb.max_eta).epsilon(1e-8));
}

TEST_CASE("trivial tau forms") {
    const auto& G = shared_ground_state();
    Ctx c(0.02, 1000);
    auto R = project(*c.S, G, -0.7);
    R.eta = Field::zeros(c.grid, ExteriorRule::Free);
    CHECK(tau_direct(R, G) == 0.0);
    R.PU = Field::zeros(c.grid, ExteriorRule::ZeroOutside);
    CHECK(tau_boundary(R, *c.S, G) == 0.0);
}

TEST_CASE("growing the domain sends eta to zero") {
    const auto& G = shared_ground_state();
    std::vector<double> D{1.0, 2.0, 4.0, 8.0}, m;
    for (double half : D) {
        Ctx c(0.1, static_cast<std::size_t>(200 * half), 0.5, {-half, half});
        m.push_back(project(*c.S, G, 0.0).max_eta);
    }
    for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] < m[i - 1]);
    CHECK(m.back() < 0.05 * m.front());
}

TEST_CASE("deficiency and boundary-energy slopes at fixed eps") {
    const auto& G = shared_ground_state();
    Ctx c(0.005, 4000);
    std::vector<double> d, me, r, tau;
    for (double dd : {0.05, 0.1, 0.2, 0.5}) {
        const auto R = project(*c.S, G, -1.0 + dd);
        d.push_back(R.d);
        me.push_back(R.max_eta);
        r.push_back(c.P.eps / R.d);
        tau.push_back(R.tau_direct);
        CHECK(R.tau_mismatch() < 0.02);
    }
    const double q = 1.0 + 2.0 / 3.0;
    CHECK(std::abs(fit_loglog(d, me).slope + q) < 0.1 * q);
    CHECK(std::abs(fit_loglog(r, tau).slope - 7.0 / 3.0) < 0.1 * 7.0 / 3.0);
}

TEST_CASE("tau scaling fit at s = 0.45") {
    ModelParams P;
    P.s = 0.45;
    P.eps = 0.01;
    const auto G = solve_ground_state(P, fracpeak::testing::small_options());
    const auto g = Grid::aligned(P.domain, 2000, 0.5);
    const auto f = tau_scaling_fit(P, g, G, {-0.97, -0.95, -0.92, -0.88, -0.8, -0.69});
    CHECK(std::abs(f.slope - 2.8) < 0.28);
    CHECK(f.c_hi / f.c_lo < 1.5);
    CHECK(f.flagged.front());  // d = 3 eps is inside the relaxed band
    CHECK(!f.flagged.back());
    CHECK_THROWS_AS(tau_scaling_fit(P, g, G, {-0.8, -0.7}), ConfigError);
    CHECK_THROWS_AS(tau_scaling_fit(P, g, G, {-0.99, -0.7}), ConfigError);
}

TEST_CASE("eps prefactor at fixed d/eps") {
    const auto& G = shared_ground_state();
    std::vector<double> c;
    for (double eps : {0.01, 0.02, 0.04}) {
        Ctx x(eps, static_cast<std::size_t>(std::lround(20.0 / eps)));
        const auto R = project(*x.S, G, -1.0 + 10.0 * eps);
        c.push_back(R.tau_direct / eps);
    }
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    CHECK(*hi / *lo < 1.15);
}

TEST_CASE("Remark cross term vanishes relative to (eps/d)^{N+4s}") {
    ModelParams P;
    double prev = INFINITY;
    for (double R : {5.0, 10.0, 20.0, 40.0, 80.0}) {
        const double r = cross_term_ratio(P, R);
        CHECK(r > 0.0);
        CHECK(r < prev);
        prev = r;
    }
    CHECK(cross_term_ratio(P, 640.0) < 0.2 * cross_term_ratio(P, 10.0));
}

TEST_CASE("derivative of the projection in xi") {
    const auto& G = shared_ground_state();
    Ctx c(0.05, 1000);
    const double h = c.grid->h();
    const auto R = project(*c.S, G, -0.7);
    const auto Rp = project(*c.S, G, R.xi + h), Rm = project(*c.S, G, R.xi - h);
    const auto Rp2 = project(*c.S, G, R.xi + 2 * h), Rm2 = project(*c.S, G, R.xi - 2 * h);
    const auto Z = project_derivative(*c.S, G, R);
    double num = 0.0, den = 0.0;
    for (auto j : c.grid->interior()) {
        const double f1 = (Rp.PU[j] - Rm.PU[j]) / (2.0 * h);
        const double f2 = (Rp2.PU[j] - Rm2.PU[j]) / (4.0 * h);
        const double fd = f1 + (f1 - f2) / 3.0;
        num = std::max(num, std::abs(fd - Z[j]));
        den = std::max(den, std::abs(fd));
    }
    CHECK(num < 1e-2 * den);
}

TEST_CASE("projection error paths") {
    const auto& G = shared_ground_state();
    Ctx c(0.02, 1000);
    CHECK_THROWS_AS(project(*c.S, G, 1.5), ConfigError);
    Ctx coarse(0.02, 50);
    CHECK_THROWS_WITH_AS(project(*coarse.S, G, 0.0), doctest::Contains("eps >="), ConfigError);
    Ctx tiny(0.002, 1000, 1.0);
    ProjectionOptions loose;
    loose.min_eps_over_h = 1.0;
    CHECK_THROWS_WITH_AS(project(*tiny.S, G, 0.0, loose), doctest::Contains("profile window exhausted"), NumericalError);
}
