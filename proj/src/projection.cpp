#include "fracpeak/projection.hpp"

#include "fracpeak/errors.hpp"
#include "fracpeak/fit.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>

namespace fracpeak {

double ProjectionResult::tau_mismatch() const {
    return std::abs(tau_direct - tau_boundary) / std::abs(tau_direct);
}

namespace {

std::size_t snap(const Grid& g, double xi) {
    const auto idx = g.interior();
    std::size_t best = idx.front();
    for (auto j : idx)
        if (std::abs(g.x(j) - xi) < std::abs(g.x(best) - xi)) best = j;
    return best;
}

// eps^{2s} times the coupling of exterior data g (window part and beyond) into the interior
Eigen::VectorXd exterior_data_rhs(const ScreenedSolver& S, const Field& g, const std::function<double(double)>& far) {
    const auto& A = S.op();
    return S.e2s() * (A.exterior_coupling(g) + A.far_coupling(far));
}

} // namespace

ProjectionResult project(const ScreenedSolver& solver, const GroundState& G, double xi, const ProjectionOptions& opt) {
    const auto& A = solver.op();
    const auto& g = A.grid();
    const GridPtr& gp = A.grid_ptr();
    const double eps = solver.eps(), h = g.h(), p = G.P.p;
    if (!g.domain().contains(xi)) throw ConfigError("project: xi outside the domain");
    if (eps < opt.min_eps_over_h * h)
        throw ConfigError("project: resolution margin violated, eps must satisfy eps >= " +
                          std::to_string(opt.min_eps_over_h) + "h");

    ProjectionResult R;
    R.eps = eps;
    R.node = snap(g, xi);
    R.xi = g.x(R.node);
    R.d = g.domain().distance_to_boundary(R.xi);
    if (R.d < opt.min_d_over_h * h) throw ConfigError("project: xi too close to the boundary for this grid");

    ModelParams P = G.P;
    P.eps = eps;
    P.domain = g.domain();
    R.U = rescale_to(G, P, R.xi, gp);
    const auto far = [&](double y) { return G.profile((y - R.xi) / eps); };

    // eta: eps^{2s}A eta + eta = 0 inside, eta = U outside
    std::vector<double> ext(g.size(), 0.0);
    for (auto k : g.exterior()) ext[k] = R.U[k];
    const Eigen::VectorXd eta_in = solver.solve(exterior_data_rhs(solver, Field(gp, ext, ExteriorRule::Free), far));

    const auto idx = g.interior();
    std::vector<double> pu(g.size(), 0.0), eta(R.U.vec());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double e = eta_in(static_cast<Eigen::Index>(i));
        eta[idx[i]] = e;
        pu[idx[i]] = R.U[idx[i]] - e;
    }
    R.PU = Field(gp, std::move(pu), ExteriorRule::ZeroOutside);
    R.eta = Field(gp, std::move(eta), ExteriorRule::Free);

    R.max_eta = 0.0;
    for (auto j : idx) R.max_eta = std::max(R.max_eta, R.eta[j]);
    R.min_eta = *std::min_element(R.eta.vec().begin(), R.eta.vec().end());

    // direct solve with U^p, kept as a discretization diagnostic
    Eigen::VectorXd up(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) up(static_cast<Eigen::Index>(i)) = std::pow(R.U[idx[i]], p);
    const Eigen::VectorXd pu_direct = solver.solve(up);
    double diff = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i)
        diff = std::max(diff, std::abs(pu_direct(static_cast<Eigen::Index>(i)) - R.PU[idx[i]]));
    R.consistency = diff / R.U.max_abs();

    R.tau_direct = tau_direct(R, G);
    R.tau_boundary = tau_boundary(R, solver, G);

    // Green-identity form: eps^{2s} int_ext U (N eta - N U), plus the beyond-window part
    const Field Ne = A.normal_derivative(R.eta);
    const Field Nu = A.normal_derivative(R.U);
    double tg = 0.0;
    for (auto k : g.exterior()) tg += h * R.U[k] * (Ne[k] - Nu[k]);
    const Eigen::VectorXd fu = A.far_coupling(far);
    double tfar = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) tfar += h * R.PU[idx[i]] * fu(static_cast<Eigen::Index>(i));
    R.tau_green = solver.e2s() * (tg + tfar);

    // |eta|_eps^2 = eps^{2s} int_ext eta N eta
    double en = 0.0;
    for (auto k : g.exterior()) en += h * R.eta[k] * Ne[k];
    const Eigen::VectorXd fu2 = A.far_coupling([&](double y) {
        const double u = far(y);
        return u * u;
    });
    double enfar = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        enfar += h * (fu2(ii) - eta_in(ii) * fu(ii));
    }
    R.eta_norm_sq = solver.e2s() * (en + enfar);

    R.flagged = R.tau_mismatch() > opt.tau_tol;
    return R;
}

ProjectionResult project(const ModelParams& P, const GridPtr& grid, const GroundState& G, double xi,
                         const ProjectionOptions& opt) {
    auto A = std::make_shared<const NonlocalMatrix>(grid, P);
    ScreenedSolver S(A, P.eps);
    return project(S, G, xi, opt);
}

double tau_direct(const ProjectionResult& R, const GroundState& G) {
    const auto& g = R.U.grid();
    const auto w = quadrature_weights(g, ExteriorRule::ZeroOutside);
    double t = 0.0;
    for (auto j : g.interior()) t += w[j] * std::pow(R.U[j], G.P.p) * R.eta[j];
    return t;
}

double tau_boundary(const ProjectionResult& R, const ScreenedSolver& solver, const GroundState& G) {
    const auto& A = solver.op();
    const auto& g = A.grid();
    const double h = g.h();
    // window exterior: U_k C sum_i w PU_i
    const auto Kpu = A.exterior_transpose(A.to_interior(R.PU));
    double t = 0.0;
    for (auto k : g.exterior()) t += h * R.U[k] * Kpu[k];
    const Eigen::VectorXd fu = A.far_coupling([&](double y) { return G.profile((y - R.xi) / R.eps); });
    const auto idx = g.interior();
    for (std::size_t i = 0; i < idx.size(); ++i) t += h * R.PU[idx[i]] * fu(static_cast<Eigen::Index>(i));
    return solver.e2s() * t;
}

Field project_derivative(const ScreenedSolver& solver, const GroundState& G, const ProjectionResult& R) {
    const auto& A = solver.op();
    const auto& g = A.grid();
    ModelParams P = G.P;
    P.eps = R.eps;
    P.domain = g.domain();
    const Field dU = rescale_derivative(G, P, R.xi, A.grid_ptr());
    std::vector<double> ext(g.size(), 0.0);
    for (auto k : g.exterior()) ext[k] = dU[k];
    const auto far = [&](double y) { return -G.profile_derivative((y - R.xi) / R.eps) / R.eps; };
    const Eigen::VectorXd de = solver.solve(exterior_data_rhs(solver, Field(A.grid_ptr(), ext, ExteriorRule::Free), far));
    std::vector<double> z(g.size(), 0.0);
    const auto idx = g.interior();
    for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = dU[idx[i]] - de(static_cast<Eigen::Index>(i));
    return Field(A.grid_ptr(), std::move(z), ExteriorRule::ZeroOutside);
}

TauFit tau_scaling_fit(const ModelParams& P, const GridPtr& grid, const GroundState& G,
                       const std::vector<double>& xi_list, const ProjectionOptions& opt) {
    if (xi_list.size() < 2) throw ConfigError("tau fit: need at least two locations");
    auto A = std::make_shared<const NonlocalMatrix>(grid, P);
    ScreenedSolver S(A, P.eps);
    TauFit f;
    const double q = P.N + 4.0 * P.s;
    std::vector<double> fx, fy;
    for (double xi : xi_list) {
        const auto R = project(S, G, xi, opt);
        if (R.d < 3.0 * P.eps) throw ConfigError("tau fit: d below 3 eps");
        const double r = P.eps / R.d;
        f.d.push_back(R.d);
        f.tau.push_back(R.tau_direct);
        f.ratio.push_back(r);
        f.flagged.push_back(R.d < 10.0 * P.eps || R.flagged);
        const double c = R.tau_direct / (std::pow(P.eps, P.N) * std::pow(r, q));
        f.c_lo = f.c.empty() ? c : std::min(f.c_lo, c);
        f.c_hi = f.c.empty() ? c : std::max(f.c_hi, c);
        f.c.push_back(c);
    }
    const auto [lo, hi] = std::minmax_element(f.d.begin(), f.d.end());
    if (*hi < 10.0 * *lo * (1 - 1e-9)) throw ConfigError("tau fit: insufficient span, d must cover a decade");
    f.slope = fit_loglog(f.ratio, f.tau).slope;
    return f;
}

double cross_term_ratio(const ModelParams& P, double R) {
    if (P.N != 1) throw ConfigError("cross term: only N = 1");
    const double s = P.s;
    // both half-lines of x, inner integral over the ball in closed form
    const auto f = [&](double t) {
        return 2.0 * std::pow(t, -2.0 * s) * 2.0 * std::log(t / (t - R)) / std::pow(1.0 + std::pow(t, 1.0 + 2.0 * s), 2);
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double near = ts.integrate(f, R, 2.0 * R);
    const double tail = es.integrate([&](double u) { return f(2.0 * R + u); }, 1e-12);
    return (near + tail) * std::pow(R, P.N + 4.0 * s);
}

} // namespace fracpeak
