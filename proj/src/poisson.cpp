#include "fracpeak/poisson.hpp"

#include "fracpeak/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fracpeak {

PoissonField solve_phi(const PoissonSolver& solver, const Field& f, const Field& g, std::string source) {
    require_same_grid(f, g);
    const auto& A = solver.op();
    if (!f.grid().same_as(A.grid())) throw ConfigError("solve_phi: grid mismatch");
    const auto idx = A.grid().interior();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = f[idx[i]] * g[idx[i]];
    const Eigen::VectorXd phi = solver.solve(rhs);
    PoissonField out;
    out.phi = Field::from_interior(A.grid_ptr(), std::span<const double>(phi.data(), idx.size()));
    out.source = std::move(source);
    return out;
}

PoissonField solve_phi(const ModelParams& P, const GridPtr& grid, const Field& f, const Field& g) {
    PoissonSolver solver(std::make_shared<const NonlocalMatrix>(grid, P));
    return solve_phi(solver, f, g);
}

bool expansion_log_case(const ModelParams& P) { return P.N + 4.0 * P.s - 2.0 >= 0.0; }

double expansion_order(const ModelParams& P, double eps, double d) {
    const double den = std::pow(d, P.N - 2.0 * P.s + 2.0);
    if (expansion_log_case(P)) return std::pow(eps, P.N + 2.0) * std::abs(std::log(eps)) / den;
    return std::pow(eps, 2.0 * P.N + 4.0 * P.s) / den;
}

namespace {

ModelParams rescaled_params(const GroundState& G, const Grid& g, double eps) {
    ModelParams P = G.P;
    P.eps = eps;
    P.domain = g.domain();
    return P;
}

} // namespace

DecayCheck phi_decay_check(const PoissonSolver& solver, const GroundState& G, const RieszProfile& Wp, double xi,
                           double eps) {
    const auto& A = solver.op();
    const auto& g = A.grid();
    if (!g.domain().contains(xi)) throw ConfigError("phi decay: xi outside the domain");
    if (eps < 10.0 * g.h()) throw ConfigError("phi decay: under-resolved, eps must satisfy eps >= 10h");
    const ModelParams P = rescaled_params(G, g, eps);
    DecayCheck c;
    c.xi = xi;
    c.eps = eps;
    c.d = g.domain().distance_to_boundary(xi);
    const Field U = rescale_to(G, P, xi, A.grid_ptr());
    const Field one = Field::sample(A.grid_ptr(), ExteriorRule::Free, [](double) { return 1.0; });
    const auto phi2 = solve_phi(solver, U, U, "U^2").phi;
    const auto phi1 = solve_phi(solver, U, one, "U").phi;
    const double e2s = std::pow(eps, 2.0 * P.s);
    const double q = P.N - 2.0 * P.s;

    // W[|fg|] over the window for the comparison bound
    std::vector<double> u2(g.size(), 0.0);
    for (auto j : g.interior()) u2[j] = U[j] * U[j];
    RieszKernel K(P.N, P.s, g.h(), g.size());
    const Field Wu2 = riesz_apply(K, Field(A.grid_ptr(), std::move(u2), ExteriorRule::Free));

    c.comparison_excess = -INFINITY;
    double best = INFINITY;
    for (auto j : g.interior()) {
        const double z = (g.x(j) - xi) / eps;
        const double env = e2s / (1.0 + std::pow(std::abs(z), q));
        c.C_u2 = std::max(c.C_u2, phi2[j] / env);
        c.C_u = std::max(c.C_u, phi1[j] / env);
        c.comparison_excess = std::max(c.comparison_excess, phi2[j] - Wu2[j]);
        if (std::abs(g.x(j) - xi) < best) {
            best = std::abs(g.x(j) - xi);
            c.phi_at_xi = phi2[j];
        }
    }
    c.leading = e2s * Wp.value(0.0);
    return c;
}

ExpansionError phi_expansion_residual(const PoissonSolver& solver, const GroundState& G, const RieszProfile& Wp,
                                      const LimitConstants& K, const GreenTable& H, double eps) {
    const auto& A = solver.op();
    const auto& g = A.grid();
    if (!H.H.grid().same_as(g)) throw ConfigError("expansion: Green table on a different grid");
    const ModelParams P = rescaled_params(G, g, eps);
    ExpansionError e;
    e.xi = H.xi;
    e.eps = eps;
    e.d = H.d;
    e.log_case = expansion_log_case(P);
    e.mu = expansion_order(P, eps, H.d);
    const Field U = rescale_to(G, P, H.xi, A.grid_ptr());
    const auto phi = solve_phi(solver, U, U, "U^2").phi;
    const double e2s = std::pow(eps, 2.0 * P.s), eN = std::pow(eps, P.N);
    for (auto j : g.interior()) {
        if (std::abs(g.x(j) - H.xi) > 0.5 * H.d) continue;
        const double lead = e2s * Wp.value((g.x(j) - H.xi) / eps);
        const double two = lead - eN * K.B * H.H[j];
        e.residual_max = std::max(e.residual_max, std::abs(phi[j] - two));
        e.leading_only = std::max(e.leading_only, std::abs(phi[j] - lead));
        ++e.probes;
    }
    e.ratio = e.residual_max / e.mu;
    return e;
}

DecayCheck phi_decay_check(const ModelParams& P, const GridPtr& grid, const GroundState& G, double xi, double eps) {
    PoissonSolver solver(std::make_shared<const NonlocalMatrix>(grid, P));
    return phi_decay_check(solver, G, riesz_profile(G), xi, eps);
}

ExpansionError phi_expansion_residual(const ModelParams& P, const GridPtr& grid, const GroundState& G,
                                      const RieszProfile& Wp, const GreenTable& H, double xi, double eps) {
    if (std::abs(H.xi - xi) > grid->h()) throw ConfigError("expansion: Green table built for a different xi");
    PoissonSolver solver(std::make_shared<const NonlocalMatrix>(grid, P));
    return phi_expansion_residual(solver, G, Wp, limit_constants(G, Wp), H, eps);
}

} // namespace fracpeak
