#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fracpeak/errors.hpp"
#include "fracpeak/fit.hpp"
#include "fracpeak/fracops.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

using namespace fracpeak;

namespace {

// exact (-D)^s of exp(-x^2/sigma^2)
double frac_gauss(double x, double s, double sigma) {
    const double z = x / sigma;
    return std::pow(sigma, -2.0 * s) * std::pow(4.0, s) * std::tgamma(0.5 + s) / std::sqrt(std::numbers::pi) *
           boost::math::hypergeometric_1F1(0.5 + s, 0.5, -z * z);
}

double bump(double x, double r) {
    const double t = x / r;
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
}

ModelParams canonical() { return ModelParams{}; }

} // namespace

TEST_CASE("constants") {
    CHECK(fractional_laplacian_constant(1, 0.5) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
    CHECK(fractional_laplacian_constant(1, 1.0 / 3.0) > 0.0);
    CHECK(riesz_constant(1, 1.0 / 3.0) == doctest::Approx(0.73849).epsilon(1e-4));
}

TEST_CASE("apply_line eigenfunction and constants") {
    auto g = Grid::make(20.0, 1024, {-1.0, 1.0});
    const double s = 1.0 / 3.0;
    LineMultiplierPlan plan(g, s, 1.0);
    CHECK(plan.symbol()[0] == 0.0);
    for (double v : plan.symbol()) CHECK(v >= 0.0);
    const double k = 2.0 * std::numbers::pi * 13.0 / 40.0;
    auto u = Field::sample(g, ExteriorRule::Free, [k](double x) { return std::cos(k * x); });
    auto r = apply_line(plan, u);
    const double lam = std::pow(k, 2.0 * s);
    for (std::size_t j = 0; j < g->size(); ++j) CHECK(std::abs(r[j] - lam * u[j]) < 1e-12);
    auto c = Field::sample(g, ExteriorRule::Free, [](double) { return 3.0; });
    CHECK(apply_line(plan, c).max_abs() < 1e-12);
}

TEST_CASE("apply_line against exact gaussian and the local limit") {
    auto g = Grid::make(30.0, 4096, {-1.0, 1.0});
    auto u = Field::sample(g, ExteriorRule::Free, [](double x) { return std::exp(-x * x); });
    {
        LineMultiplierPlan plan(g, 0.499);
        auto r = apply_line(plan, u);
        double err = 0.0, mx = 0.0;
        for (std::size_t j = 0; j < g->size(); ++j) {
            const double e = frac_gauss(g->x(j), 0.499, 1.0);
            err = std::max(err, std::abs(r[j] - e));
            mx = std::max(mx, std::abs(e));
        }
        CHECK(err / mx < 0.02);
    }
    {
        // s -> 1 recovers -u''
        LineMultiplierPlan plan(g, 0.999);
        auto r = apply_line(plan, u);
        const double h = g->h();
        double err = 0.0, mx = 0.0;
        for (std::size_t j = 1; j + 1 < g->size(); ++j) {
            const double lap = -(u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h);
            err = std::max(err, std::abs(r[j] - lap));
            mx = std::max(mx, std::abs(lap));
        }
        CHECK(err / mx < 0.02);
    }
}

TEST_CASE("apply_line linear and translation-commuting") {
    auto g = Grid::make(20.0, 512, {-1.0, 1.0});
    LineMultiplierPlan plan(g, 0.3);
    std::vector<double> a(512), b(512);
    for (std::size_t j = 0; j < 512; ++j) {
        a[j] = std::exp(-std::pow(g->x(j) - 1.0, 2));
        b[j] = std::exp(-2.0 * std::pow(g->x(j) + 2.0, 2));
    }
    auto ra = plan.apply(a), rb = plan.apply(b);
    std::vector<double> c(512);
    for (std::size_t j = 0; j < 512; ++j) c[j] = 2.0 * a[j] - b[j];
    auto rc = plan.apply(c);
    for (std::size_t j = 0; j < 512; ++j) CHECK(std::abs(rc[j] - (2.0 * ra[j] - rb[j])) < 1e-12);
    // shift by 5 steps (periodic)
    std::vector<double> sh(512);
    for (std::size_t j = 0; j < 512; ++j) sh[(j + 5) % 512] = a[j];
    auto rs = plan.apply(sh);
    for (std::size_t j = 0; j < 512; ++j) CHECK(std::abs(rs[(j + 5) % 512] - ra[j]) < 1e-12);
}

TEST_CASE("hypersingular weights telescope to closed-form tails") {
    for (double s : {0.2, 1.0 / 3.0, 0.45, 0.5}) {
        HypersingularWeights w(0.01, s, 5000);
        double acc = 0.0;
        for (std::size_t k = 1; k <= 5000; ++k) {
            CHECK(w[k] > 0.0);
            if (k > 1) CHECK(w[k] < w[k - 1]);
            acc += w[k];
            if (k == 7 || k == 40 || k == 5000) CHECK(acc + w.tail_closed(k) == doctest::Approx(w.total()).epsilon(1e-13));
        }
    }
}

TEST_CASE("domain operator structure") {
    auto P = canonical();
    auto g = Grid::aligned({-1.0, 1.0}, 512, 0.5);
    NonlocalMatrix A(g, P);
    const auto& M = A.matrix();
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) > 0.0);
    // nonlocal boundary repulsion
    Eigen::VectorXd one = Eigen::VectorXd::Ones(512);
    CHECK((M * one).minCoeff() > 0.0);
    CHECK((M * Eigen::VectorXd::Zero(512)).cwiseAbs().maxCoeff() == 0.0);
    // quadratic form agrees with the pair form
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Eigen::VectorXd u(512);
    for (auto& x : u) x = ud(rng);
    auto uf = Field::from_interior(g, std::span<const double>(u.data(), 512));
    const double q = g->h() * u.dot(M * u);
    CHECK(A.bilinear(uf, uf) == doctest::Approx(q).epsilon(1e-10));
}

TEST_CASE("domain operator consistency with the line operator") {
    // narrow gaussian, negligible at the domain edge
    const double sigma = 0.3;
    const double s = 1.0 / 3.0;
    auto P = canonical();
    std::vector<double> hs, errs, errs_exact;
    for (std::size_t m : {800u, 1600u, 3200u}) {
        auto g = Grid::aligned({-1.0, 1.0}, m, 0.25);
        NonlocalMatrix A(g, P);
        auto u = Field::sample(g, ExteriorRule::ZeroOutside, [&](double x) { return std::exp(-x * x / (sigma * sigma)); });
        const Eigen::VectorXd Au = A.apply(A.to_interior(u));
        // line lattice through the same nodes; window about +-1024 keeps the
        // periodic-image bias (~ (2L)^{-1-2s}) below the discretization error
        const double h = g->h();
        const std::size_t nl = static_cast<std::size_t>(std::llround(2048.0 / h));
        const std::size_t pad = (nl - g->size()) / 2;
        auto gl = Grid::restore(g->x0() - static_cast<double>(pad) * h, h, nl, 0.5 * nl * h, {-1.0, 1.0}, false);
        LineMultiplierPlan plan(gl, s);
        auto ul = Field::sample(gl, ExteriorRule::Free, [&](double x) { return std::exp(-x * x / (sigma * sigma)); });
        auto rl = apply_line(plan, ul);
        double e = 0.0, ex = 0.0;
        const auto idx = g->interior();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double x = g->x(idx[i]);
            if (std::abs(x) > 0.5) continue;
            e = std::max(e, std::abs(Au(static_cast<Eigen::Index>(i)) - rl[idx[i] + pad]));
            ex = std::max(ex, std::abs(Au(static_cast<Eigen::Index>(i)) - frac_gauss(x, s, sigma)));
        }
        hs.push_back(h);
        errs.push_back(e);
        errs_exact.push_back(ex);
    }
    const auto f = fit_loglog(hs, errs);
    MESSAGE("consistency slope vs line operator: " << f.slope << " errors " << errs[0] << " " << errs[2]);
    CHECK(f.slope >= 2.0 - 2.0 * s - 0.1);
    CHECK(fit_loglog(hs, errs_exact).slope >= 2.0 - 2.0 * s - 0.1);
}

TEST_CASE("screened solve contract and maximum principle") {
    auto P = canonical();
    P.eps = 0.05;
    auto g = Grid::aligned({-1.0, 1.0}, 300, 0.3);
    auto A = std::make_shared<const NonlocalMatrix>(g, P);
    ScreenedSolver S(A, P.eps);
    auto z = S.solve_field(Field::zeros(g, ExteriorRule::ZeroOutside));
    CHECK(z.max_abs() == 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd r(300), r2(300);
        for (Eigen::Index i = 0; i < 300; ++i) {
            // sparse spikes stress positivity harder than smooth data
            r(i) = ud(rng) < 0.1 ? ud(rng) : 0.0;
            r2(i) = r(i) + (ud(rng) < 0.2 ? ud(rng) : 0.0);
        }
        const Eigen::VectorXd u = S.solve(r);
        const Eigen::VectorXd u2 = S.solve(r2);
        const double scale = std::max(1e-300, u.cwiseAbs().maxCoeff());
        worst = std::min(worst, u.minCoeff() / scale);
        CHECK(u.minCoeff() >= -1e-12 * scale);
        CHECK((u - u2).maxCoeff() <= 1e-12 * std::max(1.0, u2.cwiseAbs().maxCoeff()));
        const double res = (S.apply(u) - r).cwiseAbs().maxCoeff();
        CHECK(res < 1e-10 * std::max(r.cwiseAbs().maxCoeff(), 1e-300));
    }
    MESSAGE("most negative normalized screened output: " << worst);
    auto f = solve_screened(g, P, Field::sample(g, ExteriorRule::ZeroOutside, [](double x) { return 1.0 - x * x; }));
    for (double v : f.values()) CHECK(v >= 0.0);
}

TEST_CASE("riesz kernel and potential") {
    const double s = 1.0 / 3.0;
    auto g = Grid::make(200.0, 8192, {-1.0, 1.0});
    RieszKernel K(1, s, g->h(), g->size());
    CHECK(K[0] > 0.0);
    for (std::size_t k = 1; k < g->size(); ++k) {
        CHECK(K[k] > 0.0);
        CHECK(K[k] < K[k - 1]);
    }
    CHECK(riesz_apply(K, Field::zeros(g, ExteriorRule::Free)).max_abs() == 0.0);

    auto f = Field::sample(g, ExteriorRule::Free, [](double x) { return bump(x, 2.0); });
    auto W = riesz_apply(K, f);
    LineMultiplierPlan plan(g, s, 1.0);
    auto back = apply_line(plan, W);
    double err = 0.0, mx = 0.0;
    for (std::size_t j = 0; j < g->size(); ++j) {
        if (std::abs(g->x(j)) > 2.0) continue;
        err = std::max(err, std::abs(back[j] - f[j]));
        mx = std::max(mx, std::abs(f[j]));
    }
    MESSAGE("riesz inverse relative error " << err / mx);
    CHECK(err / mx < 0.01);
    // linearity
    std::vector<double> two(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) two[j] = 2.0 * f[j];
    auto W2 = riesz_apply(K, Field(g, two, ExteriorRule::Free));
    for (std::size_t j = 0; j < f.size(); j += 97) CHECK(W2[j] == doctest::Approx(2.0 * W[j]).epsilon(1e-12));
    CHECK_THROWS_AS(riesz_apply(RieszKernel(1, s, 2.0 * g->h(), g->size()), f), ConfigError);
}

TEST_CASE("nonlocal normal derivative signs") {
    auto P = canonical();
    auto g = Grid::aligned({-1.0, 1.0}, 100, 0.5);
    NonlocalMatrix A(g, P);
    auto z = A.normal_derivative(Field::zeros(g, ExteriorRule::ZeroOutside));
    CHECK(z.max_abs() == 0.0);
    auto one = Field::sample(g, ExteriorRule::ZeroOutside, [](double) { return 1.0; });
    auto n1 = nonlocal_normal_derivative(one, A);
    for (auto k : g->exterior()) CHECK(n1[k] < 0.0);
}

TEST_CASE("discrete green identity holds to round-off") {
    auto P = canonical();
    auto g = Grid::aligned({-1.0, 1.0}, 160, 0.6);
    NonlocalMatrix A(g, P);
    CHECK(green_identity_residual(Field::zeros(g, ExteriorRule::ZeroOutside), Field::zeros(g, ExteriorRule::Free), A) == 0.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double a1 = ud(rng), a2 = ud(rng), a3 = ud(rng), b1 = ud(rng), b2 = ud(rng), c = ud(rng);
        auto u = Field::sample(g, ExteriorRule::ZeroOutside, [&](double x) {
            return (1.0 - x * x) * (a1 + a2 * std::sin(3.0 * x) + a3 * x * x);
        });
        auto v = Field::sample(g, ExteriorRule::Free, [&](double x) { return b1 * std::cos(2.0 * x) + b2 * x + c * std::exp(-x * x); });
        const auto terms = green_identity(A, u, v);
        CHECK(terms.residual < 1e-10 * terms.scale());
        const double buv = A.bilinear(u, v);
        const double bvu = A.bilinear(v, u);
        CHECK(std::abs(buv - bvu) < 1e-12 * terms.scale());

        auto vin = Field::sample(g, ExteriorRule::ZeroOutside, [&](double x) { return b1 * std::cos(2.0 * x) + b2 * x; });
        const auto t2 = green_identity(A, u, vin);
        CHECK(t2.exterior == 0.0);
        CHECK(t2.residual < 1e-10 * t2.scale());
    }
}

TEST_CASE("far coupling against adaptive quadrature") {
    ModelParams P;
    const auto g = Grid::aligned(P.domain, 200, 0.5);
    NonlocalMatrix A(g, P);
    const double h = g->h();
    const double left = g->x(0) - 0.5 * h, right = g->x(g->size() - 1) + 0.5 * h;
    const auto f = [](double y) { return std::pow(1.0 + y * y, -5.0 / 6.0) * (2.0 + std::tanh(y)); };
    const auto r = A.far_coupling(f);
    boost::math::quadrature::exp_sinh<double> es;
    const double q = -1.0 - 2.0 / 3.0;
    for (std::size_t i : {std::size_t{0}, std::size_t{57}, std::size_t{199}}) {
        const double x = g->x(g->interior()[i]);
        const double ref = A.C() * (es.integrate([&](double t) { return f(right + t) * std::pow(right + t - x, q); }, 1e-12) +
                                    es.integrate([&](double t) { return f(left - t) * std::pow(x - left + t, q); }, 1e-12));
        CHECK(r(static_cast<Eigen::Index>(i)) == doctest::Approx(ref).epsilon(1e-9));
    }
}
