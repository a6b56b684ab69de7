#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "common.hpp"
#include "fracpeak/errors.hpp"

#include <cmath>
#include <filesystem>
#include <string>

using namespace fracpeak;
using fracpeak::testing::shared_ground_state;
using fracpeak::testing::shared_riesz_profile;
using fracpeak::testing::small_options;

TEST_CASE("ground state converges and is a positive even peak") {
    const auto& G = shared_ground_state();
    CHECK(G.residual_norm < 1e-9);
    CHECK(G.peak_value > 0.0);
    const auto& U = G.U;
    const std::size_t n = U.size(), c = n / 2;
    CHECK(U.grid().x(c) == doctest::Approx(0.0).scale(1.0));
    double mx = 0.0, mn = INFINITY, asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx = std::max(mx, U[i]);
        mn = std::min(mn, U[i]);
        if (i > 0) asym = std::max(asym, std::abs(U[i] - U[n - i]));
    }
    CHECK(mn > 0.0);
    CHECK(mx == U[c]);
    CHECK(asym == 0.0);
    CHECK(G.monotone);
}

TEST_CASE("peak value agrees with an independent coarse run to 3 digits") {
    auto o = small_options();
    o.n /= 2;
    const auto coarse = solve_ground_state(ModelParams{}, o);
    const double fine = shared_ground_state().peak_value;
    CHECK(std::abs(coarse.peak_value - fine) < 5e-4 * fine);
}

TEST_CASE("zero initial guess is the trivial attractor") {
    auto o = small_options();
    o.n = 4096;
    o.L = 60.0;
    const auto g = Grid::make(o.L, o.n, {-1.0, 1.0});
    try {
        solve_ground_state(ModelParams{}, o, Field::zeros(g, ExteriorRule::Free));
        FAIL("expected trivial attractor");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("trivial attractor") != std::string::npos);
        CHECK(std::string(e.what()).find("amplitude") != std::string::npos);
    }
}

TEST_CASE("non-convergence reports the last residual") {
    auto o = small_options();
    o.n = 4096;
    o.L = 60.0;
    o.max_warm = 2;
    o.max_newton = 0;
    try {
        solve_ground_state(ModelParams{}, o);
        FAIL("expected non-convergence");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("last residual") != std::string::npos);
    }
}

TEST_CASE("tail decays like |x|^{-(N+2s)}") {
    const auto& G = shared_ground_state();
    const double q = 1.0 + 2.0 / 3.0;
    CHECK(G.decay_slope == doctest::Approx(-q).epsilon(0.10));
}

TEST_CASE("envelope holds samplewise") {
    const auto& G = shared_ground_state();
    CHECK(G.alpha_hat > 0.0);
    CHECK(G.alpha_hat <= G.beta_hat);
    const double q = 1.0 + 2.0 / 3.0;
    for (std::size_t i = 0; i < G.U.size(); ++i) {
        const double e = 1.0 + std::pow(std::abs(G.U.grid().x(i)), q);
        REQUIRE(G.U[i] >= G.alpha_hat / e * (1 - 1e-14));
        REQUIRE(G.U[i] <= G.beta_hat / e * (1 + 1e-14));
    }
}

TEST_CASE("solver is idempotent from a converged profile") {
    const auto& G = shared_ground_state();
    const auto again = solve_ground_state(G.P, G.opt, G.U_solve);
    double d = 0.0;
    for (std::size_t j = 0; j < G.U_solve.size(); ++j) d = std::max(d, std::abs(again.U_solve[j] - G.U_solve[j]));
    CHECK(d < 1e-10);
}

TEST_CASE("option and model validation") {
    auto o = small_options();
    o.pad = 0;
    CHECK_THROWS_AS(solve_ground_state(ModelParams{}, o), ConfigError);
    ModelParams P;
    P.p = 0.5;
    CHECK_THROWS_AS(solve_ground_state(P, small_options()), ConfigError);
}

TEST_CASE("linearization: single kernel mode along the derivative") {
    const auto& G = shared_ground_state();
    const auto S = nondegeneracy_spectrum(G, 3);
    REQUIRE(S.eigenvalues.size() == 3);
    CHECK(S.count_within(1e-4) == 1);
    CHECK(std::abs(S.near_zero) < 1e-4);
    CHECK(S.overlap_derivative >= 0.999);
    CHECK(S.derivative_mode_residual < 1e-3);
    CHECK(S.LU_residual < 1e-9);
    CHECK(S.rayleigh_U < 0.0);
    CHECK(S.morse_identity < 1e-9);
    CHECK(S.lowest < 0.0);
    for (std::size_t i = 1; i < S.eigenvalues.size(); ++i)
        CHECK(std::abs(S.eigenvalues[i]) >= std::abs(S.eigenvalues[i - 1]));
}

TEST_CASE("Riesz profile is positive with tail -(N-2s)") {
    const auto& W = shared_riesz_profile();
    for (double w : W.W.values()) REQUIRE(w > 0.0);
    CHECK(W.tail_slope == doctest::Approx(-1.0 / 3.0).epsilon(0.05));
    CHECK(W.value(0.0) == doctest::Approx(W.W[W.W.size() / 2]));
}

TEST_CASE("limit constants") {
    const auto& G = shared_ground_state();
    const auto K = limit_constants(G, shared_riesz_profile());
    CHECK(K.A1 > 0.0);
    CHECK(K.A2 > 0.0);
    CHECK(K.B > 0.0);
    CHECK(std::abs(K.A2 - K.A2_double) < 0.01 * K.A2);
    double u2 = 0.0;
    for (double u : G.U.values()) u2 += u * u;
    CHECK(K.B == doctest::Approx(u2 * G.U.grid().h()).epsilon(1e-12));
    // (D + 1)U = U^2 paired with U: int U^3 = <(D+1)U, U> > int U^2
    CHECK(6.0 * K.A1 > K.B);
}

TEST_CASE("halving h moves the constants by less than 0.5%") {
    auto o = small_options();
    o.L = 250.0;
    o.n = 8192;
    const auto c = solve_ground_state(ModelParams{}, o);
    o.n = 16384;
    const auto f = solve_ground_state(ModelParams{}, o);
    const auto Kc = limit_constants(c, riesz_profile(c));
    const auto Kf = limit_constants(f, riesz_profile(f));
    CHECK(std::abs(Kc.A1 - Kf.A1) < 0.005 * Kf.A1);
    CHECK(std::abs(Kc.A2 - Kf.A2) < 0.005 * Kf.A2);
    CHECK(std::abs(Kc.B - Kf.B) < 0.005 * Kf.B);
}

TEST_CASE("rescale: identity, exterior bound, mass scaling, window") {
    const auto& G = shared_ground_state();
    ModelParams P;
    P.eps = 1.0;
    const auto id = rescale_to(G, P, 0.0, G.U.grid_ptr());
    double d = 0.0;
    for (std::size_t i = 1; i < G.U.size(); ++i) d = std::max(d, std::abs(id[i] - G.U[i]));
    CHECK(d < 1e-12);

    P.eps = 0.05;
    const double xi = 0.6;
    const auto g = Grid::aligned(P.domain, 800, 1.0);
    const auto u = rescale_to(G, P, xi, g);
    const double dist = P.domain.distance_to_boundary(xi);
    double ext = 0.0;
    for (auto k : g->exterior()) ext = std::max(ext, u[k]);
    CHECK(ext > 0.0);
    CHECK(ext <= G.beta_hat * std::pow(P.eps / dist, 1.0 + 2.0 / 3.0));

    const auto w = Grid::make(10.0, 8192, P.domain);
    const auto v = rescale_to(G, P, 0.0, w);
    Field v2 = Field::sample(w, ExteriorRule::Free, [&](double x) { return std::pow(G.profile(x / P.eps), 2); });
    const double B = limit_constants(G, shared_riesz_profile()).B;
    CHECK(integrate(v2) == doctest::Approx(P.eps * B).epsilon(1e-3));
    CHECK(v[w->nearest_node(0.0)] == doctest::Approx(G.peak_value));

    P.eps = 0.001;
    try {
        rescale_to(G, P, xi, g);
        FAIL("expected window exhaustion");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("profile window exhausted") != std::string::npos);
        CHECK(std::string(e.what()).find("need L >=") != std::string::npos);
    }
}

TEST_CASE("profile interpolant: derivative and far tail") {
    const auto& G = shared_ground_state();
    for (double z : {0.3, 1.7, 12.0, 140.0}) {
        const double fd = (G.profile(z + 1e-4) - G.profile(z - 1e-4)) / 2e-4;
        CHECK(G.profile_derivative(z) == doctest::Approx(fd).epsilon(1e-3));
        CHECK(G.profile_derivative(-z) == doctest::Approx(-fd).epsilon(1e-3));
        CHECK(G.profile(-z) == G.profile(z));
    }
    const double z = 2.0 * G.window();
    CHECK(G.profile(z) > 0.0);
    CHECK(G.profile(z) < G.profile(G.window()));
}

TEST_CASE("save and load round trip") {
    const auto& G = shared_ground_state();
    const auto dir = std::filesystem::temp_directory_path() / "fracpeak_gs_test";
    std::filesystem::remove_all(dir);
    save_ground_state(G, dir);
    const auto H = load_ground_state(dir);
    CHECK(H.peak_value == G.peak_value);
    CHECK(H.residual_norm == doctest::Approx(G.residual_norm));
    CHECK(H.decay_slope == G.decay_slope);
    CHECK(H.profile(3.3) == G.profile(3.3));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_ground_state(dir), DependencyError);
}
