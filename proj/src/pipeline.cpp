#include "fracpeak/pipeline.hpp"

#include "fracpeak/claims.hpp"
#include "fracpeak/errors.hpp"
#include "fracpeak/exponents.hpp"
#include "fracpeak/fit.hpp"
#include "fracpeak/fracops.hpp"
#include "fracpeak/greenfn.hpp"
#include "fracpeak/groundstate.hpp"
#include "fracpeak/poisson.hpp"
#include "fracpeak/pool.hpp"
#include "fracpeak/projection.hpp"
#include "fracpeak/reduction.hpp"
#include "fracpeak/scan.hpp"

#include <boost/crc.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <variant>

#ifndef FRACPEAK_VERSION
#define FRACPEAK_VERSION "unknown"
#endif

namespace fracpeak {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string now_utc() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

// numeric cells in %.12e, integers plain, text as given (no commas)
using Cell = std::variant<double, long long, std::string>;

class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : fp_(std::fopen(path.c_str(), "w")) {
        if (!fp_) throw Error("cannot open " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) std::fprintf(fp_, "%s%s", i ? "," : "", header[i].c_str());
        std::fputc('\n', fp_);
    }
    ~Csv() { std::fclose(fp_); }
    Csv(const Csv&) = delete;
    Csv& operator=(const Csv&) = delete;
    void row(const std::vector<Cell>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) std::fputc(',', fp_);
            std::visit(
                [this](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>)
                        std::fprintf(fp_, "%.12e", v);
                    else if constexpr (std::is_same_v<T, long long>)
                        std::fprintf(fp_, "%lld", v);
                    else
                        std::fputs(v.c_str(), fp_);
                },
                cells[i]);
        }
        std::fputc('\n', fp_);
    }

private:
    std::FILE* fp_;
};

long long as_int(std::size_t v) { return static_cast<long long>(v); }
long long as_int(bool v) { return v ? 1 : 0; }

struct Ctx {
    const RunConfig& cfg;
    Manifest& man;
    fs::path dir;
    ModelParams model(double eps) const {
        ModelParams P = cfg.model;
        P.eps = eps;
        return P;
    }
    void emit_json(const std::string& name, const json& j) const {
        std::ofstream(dir / name) << j.dump(2) << "\n";
        man.record(name);
    }
};

ReductionOptions reduction_options(const RunConfig& c) {
    ReductionOptions o;
    o.projection.tau_tol = c.projection.tau_tol;
    o.fd_tol = c.fd_tol;
    o.step_tol = c.step_tol;
    o.max_iterations = c.max_iterations;
    return o;
}

ScanOptions scan_options(const RunConfig& c) {
    ScanOptions o;
    o.d_points = c.scan.d_points;
    o.nodes_per_eps = c.mesh.nodes_per_eps;
    o.min_nodes = c.mesh.min_nodes;
    o.exterior_width = c.mesh.exterior_width;
    o.coercivity_floor = c.coercivity_floor;
    o.free_lo = c.scan.free_lo;
    o.free_points = c.scan.free_points;
    o.params = c.reduction;
    o.reduction = reduction_options(c);
    o.workers = c.workers;
    return o;
}

struct Ground {
    GroundState G;
    RieszProfile Wp;
    LimitConstants K;
};

Ground load_ground(const Ctx& c) {
    Ground g{load_ground_state(c.dir / "ground"), {}, {}};
    const auto& P = c.cfg.model;
    const auto& o = c.cfg.ground;
    if (g.G.P.N != P.N || g.G.P.s != P.s || g.G.P.p != P.p || g.G.opt.L != o.L || g.G.opt.n != o.n)
        throw DependencyError(fmt::format("ground state in {} was computed for N={} s={} p={} L={} n={}; rerun `ground`",
                                          (c.dir / "ground").string(), g.G.P.N, g.G.P.s, g.G.P.p, g.G.opt.L, g.G.opt.n));
    g.Wp = riesz_profile(g.G);
    g.K = limit_constants(g.G, g.Wp);
    return g;
}

json constants_json(const LimitConstants& K) {
    return {{"A1", K.A1}, {"A2", K.A2}, {"A2_double", K.A2_double}, {"B", K.B}};
}

StageOutcome stage_ground(const Ctx& c) {
    const auto P = c.model(0.1);
    const auto G = solve_ground_state(P, c.cfg.ground);
    spdlog::info("ground: U(0)={:.6f} residual={:.2e} slope={:.4f}", G.peak_value, G.residual_norm, G.decay_slope);
    const auto S = nondegeneracy_spectrum(G, c.cfg.spectrum_modes);
    const auto Wp = riesz_profile(G);
    const auto K = limit_constants(G, Wp);

    write_csv(G.U, c.dir / "U.csv");
    c.man.record("U.csv");
    save_ground_state(G, c.dir / "ground");
    std::vector<fs::path> saved;
    for (const auto& e : fs::directory_iterator(c.dir / "ground"))
        if (e.is_regular_file()) saved.push_back(fs::relative(e.path(), c.dir));
    std::sort(saved.begin(), saved.end());
    for (const auto& f : saved) c.man.record(f);

    json j;
    j["N"] = P.N;
    j["s"] = P.s;
    j["p"] = P.p;
    j["L"] = G.opt.L;
    j["n"] = G.opt.n;
    j["h"] = G.U.grid().h();
    j["peak_value"] = G.peak_value;
    j["residual_norm"] = G.residual_norm;
    j["decay_slope"] = G.decay_slope;
    j["decay_target"] = -(P.N + 2.0 * P.s);
    j["alpha_hat"] = G.alpha_hat;
    j["beta_hat"] = G.beta_hat;
    j["tail_ratio"] = G.tail_ratio;
    j["monotone"] = G.monotone;
    j["newton_iterations"] = G.newton_iterations;
    j["warm_iterations"] = G.warm_iterations;
    j["constants"] = constants_json(K);
    j["riesz_tail_slope"] = Wp.tail_slope;
    j["spectrum"] = {{"eigenvalues", S.eigenvalues},
                     {"residual_norms", S.residual_norms},
                     {"near_zero", S.near_zero},
                     {"lowest", S.lowest},
                     {"count_within_1e-4", S.count_within(1e-4)},
                     {"overlap_derivative", S.overlap_derivative},
                     {"derivative_mode_residual", S.derivative_mode_residual},
                     {"rayleigh_U", S.rayleigh_U},
                     {"morse_identity", S.morse_identity},
                     {"LU_residual", S.LU_residual}};
    c.emit_json("constants.json", j);
    return {};
}

double bump(double x, double r) {
    const double t = x / r;
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
}

StageOutcome stage_operators(const Ctx& c) {
    const auto& o = c.cfg.operators;
    const auto P = c.model(0.1);
    json j;

    {
        // a lattice mode of the periodic window is an exact eigenfunction
        const auto g = Grid::make(o.fourier_L, o.fourier_n, P.domain);
        LineMultiplierPlan plan(g, P.s, 1.0);
        const double k = 2.0 * std::numbers::pi * o.fourier_mode / (2.0 * o.fourier_L);
        const auto u = Field::sample(g, ExteriorRule::Free, [k](double x) { return std::cos(k * x); });
        const auto r = apply_line(plan, u);
        const double lam = std::pow(k, 2.0 * P.s);
        double err = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) err = std::max(err, std::abs(r[i] - lam * u[i]));
        j["fourier"] = {{"k", k}, {"eigenvalue", lam}, {"max_error", err}};
    }
    {
        const auto g = Grid::aligned(P.domain, o.green_m, o.green_exterior);
        NonlocalMatrix A(g, P);
        std::mt19937_64 rng(c.cfg.seed);
        std::uniform_real_distribution<double> ud(-1.0, 1.0);
        const double mid = 0.5 * (P.domain.a + P.domain.b), half = 0.5 * P.domain.length();
        double worst = 0.0;
        std::vector<double> rel;
        for (std::size_t t = 0; t < o.green_pairs; ++t) {
            const double a1 = ud(rng), a2 = ud(rng), a3 = ud(rng), b1 = ud(rng), b2 = ud(rng), cc = ud(rng);
            const auto u = Field::sample(g, ExteriorRule::ZeroOutside, [&](double x) {
                const double y = (x - mid) / half;
                return (1.0 - y * y) * (a1 + a2 * std::sin(3.0 * y) + a3 * y * y);
            });
            const auto v = Field::sample(g, ExteriorRule::Free, [&](double x) {
                const double y = (x - mid) / half;
                return b1 * std::cos(2.0 * y) + b2 * y + cc * std::exp(-y * y);
            });
            const auto terms = green_identity(A, u, v);
            rel.push_back(terms.residual / terms.scale());
            worst = std::max(worst, rel.back());
        }
        j["green_identity"] = {{"pairs", o.green_pairs}, {"max_relative_residual", worst}, {"relative_residuals", rel}};
    }
    {
        const auto g = Grid::make(o.riesz_L, o.riesz_n, P.domain);
        RieszKernel K(P.N, P.s, g->h(), g->size());
        const auto f = Field::sample(g, ExteriorRule::Free, [&](double x) { return bump(x, o.riesz_support); });
        const auto back = apply_line(LineMultiplierPlan(g, P.s, 1.0), riesz_apply(K, f));
        double err = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) {
            if (std::abs(g->x(i)) > o.riesz_support) continue;
            err = std::max(err, std::abs(back[i] - f[i]));
            mx = std::max(mx, std::abs(f[i]));
        }
        j["riesz_inverse"] = {{"relative_error", err / mx}, {"support", o.riesz_support}};
    }
    c.emit_json("operators.json", j);
    return {};
}

StageOutcome stage_green(const Ctx& c) {
    const auto& o = c.cfg.green;
    const auto P = c.model(0.1);
    const auto coarse = robin_scaling_fit(P, Grid::aligned(P.domain, o.m, o.exterior_width), o.d);
    const auto fine = robin_scaling_fit(P, Grid::aligned(P.domain, o.m_fine, o.exterior_width), o.d);
    {
        Csv csv(c.dir / "green.csv", {"d", "robin", "d_fine", "robin_fine"});
        for (std::size_t i = 0; i < coarse.d.size(); ++i)
            csv.row({coarse.d[i], coarse.robin[i], fine.d[i], fine.robin[i]});
    }
    c.man.record("green.csv");
    json j;
    j["m"] = o.m;
    j["m_fine"] = o.m_fine;
    j["target_slope"] = -(P.N - 2.0 * P.s);
    j["slope"] = coarse.slope;
    j["intercept"] = coarse.intercept;
    j["slope_fine"] = fine.slope;
    j["intercept_fine"] = fine.intercept;
    j["d"] = coarse.d;
    j["robin"] = coarse.robin;
    j["robin_fine"] = fine.robin;
    c.emit_json("green.json", j);
    return {};
}

struct ProjectionRow {
    double eps = 0, d = 0, xi = 0, max_eta = 0, tau = 0, tau_boundary = 0, mismatch = 0, consistency = 0, c = 0;
    bool flagged = false;
    std::size_t m = 0;
};

ProjectionRow projection_row(const ProjectionResult& R, const ModelParams& P, std::size_t m) {
    ProjectionRow r;
    r.eps = R.eps;
    r.d = R.d;
    r.xi = R.xi;
    r.max_eta = R.max_eta;
    r.tau = R.tau_direct;
    r.tau_boundary = R.tau_boundary;
    r.mismatch = R.tau_mismatch();
    r.consistency = R.consistency;
    r.flagged = R.flagged;
    r.c = R.tau_direct / (std::pow(R.eps, P.N) * std::pow(R.eps / R.d, P.N + 4.0 * P.s));
    r.m = m;
    return r;
}

StageOutcome stage_project(const Ctx& c) {
    const auto& o = c.cfg.projection;
    const auto g = load_ground(c);
    const auto P = c.model(o.eps);
    ProjectionOptions po;
    po.tau_tol = o.tau_tol;

    const auto grid = Grid::aligned(P.domain, o.m, o.exterior_width);
    const ScreenedSolver S(std::make_shared<const NonlocalMatrix>(grid, P), o.eps);
    std::vector<ProjectionRow> rows(o.d.size());
    parallel_for(o.d.size(), c.cfg.workers,
                 [&](std::size_t i) { rows[i] = projection_row(project(S, g.G, P.domain.a + o.d[i], po), P, o.m); });

    std::vector<ProjectionRow> pref(o.prefactor_eps.size());
    parallel_for(o.prefactor_eps.size(), c.cfg.workers, [&](std::size_t i) {
        const double eps = o.prefactor_eps[i];
        const auto Pe = c.model(eps);
        const auto m = static_cast<std::size_t>(std::lround(o.nodes_per_eps / eps));
        const ScreenedSolver Se(std::make_shared<const NonlocalMatrix>(Grid::aligned(Pe.domain, m, o.exterior_width), Pe), eps);
        const auto R = project(Se, g.G, Pe.domain.a + o.prefactor_d_over_eps * eps, po);
        pref[i] = projection_row(R, Pe, m);
    });

    {
        Csv csv(c.dir / "projection.csv", {"kind", "eps", "m", "d", "xi", "eps_over_d", "max_eta", "tau_direct",
                                           "tau_boundary", "tau_mismatch", "tau_prefactor", "consistency", "flagged"});
        auto put = [&](const char* kind, const ProjectionRow& r) {
            csv.row({std::string(kind), r.eps, as_int(r.m), r.d, r.xi, r.eps / r.d, r.max_eta, r.tau, r.tau_boundary,
                     r.mismatch, r.c, r.consistency, as_int(r.flagged)});
        };
        for (const auto& r : rows) put("slope", r);
        for (const auto& r : pref) put("prefactor", r);
    }
    c.man.record("projection.csv");

    std::vector<double> d, eta, ratio, tau, mism, cpref;
    for (const auto& r : rows) {
        d.push_back(r.d);
        eta.push_back(r.max_eta);
        ratio.push_back(r.eps / r.d);
        tau.push_back(r.tau);
        mism.push_back(r.mismatch);
    }
    for (const auto& r : pref) cpref.push_back(r.tau / std::pow(r.eps, P.N));
    json j;
    j["eps"] = o.eps;
    j["m"] = o.m;
    j["d"] = d;
    j["max_eta"] = eta;
    j["tau"] = tau;
    j["tau_mismatch"] = mism;
    j["eta_slope"] = fit_loglog(d, eta).slope;
    j["eta_target"] = -(P.N + 2.0 * P.s);
    j["tau_slope"] = fit_loglog(ratio, tau).slope;
    j["tau_target"] = P.N + 4.0 * P.s;
    j["tau_mismatch_max"] = *std::max_element(mism.begin(), mism.end());
    if (!cpref.empty()) {
        const auto [lo, hi] = std::minmax_element(cpref.begin(), cpref.end());
        j["prefactor"] = {{"eps", o.prefactor_eps}, {"d_over_eps", o.prefactor_d_over_eps}, {"tau_over_eps_N", cpref},
                          {"spread", *hi / *lo}};
    }
    c.emit_json("projection.json", j);
    return {};
}

StageOutcome stage_poisson(const Ctx& c) {
    const auto& o = c.cfg.poisson;
    const auto g = load_ground(c);
    const auto P = c.model(0.1);
    const auto grid = Grid::aligned(P.domain, o.m, o.exterior_width);
    const PoissonSolver solver(std::make_shared<const NonlocalMatrix>(grid, P));
    const SingularSolution Sg(P, riesz_constant(P.N, P.s));
    const double centre = 0.5 * (P.domain.a + P.domain.b);

    std::vector<DecayCheck> env(o.envelope_eps.size());
    parallel_for(env.size(), c.cfg.workers,
                 [&](std::size_t i) { env[i] = phi_decay_check(solver, g.G, g.Wp, centre, o.envelope_eps[i]); });
    std::vector<ExpansionError> exp(o.expansion_eps.size());
    parallel_for(exp.size(), c.cfg.workers, [&](std::size_t i) {
        const double eps = o.expansion_eps[i];
        const auto T = regular_part(solver, Sg, P.domain.a + std::pow(eps, o.d_exp));
        exp[i] = phi_expansion_residual(solver, g.G, g.Wp, g.K, T, eps);
    });

    json j, je = json::array(), jx = json::array();
    {
        Csv csv(c.dir / "poisson.csv", {"kind", "eps", "xi", "d", "C_u2", "C_u", "comparison_excess", "phi_at_xi",
                                        "leading", "mu", "residual_max", "leading_only", "ratio"});
        for (const auto& e : env) {
            csv.row({std::string("envelope"), e.eps, e.xi, e.d, e.C_u2, e.C_u, e.comparison_excess, e.phi_at_xi, e.leading,
                     kNaN, kNaN, kNaN, kNaN});
            je.push_back({{"eps", e.eps}, {"C_u2", e.C_u2}, {"C_u", e.C_u}, {"comparison_excess", e.comparison_excess},
                          {"phi_at_xi", e.phi_at_xi}, {"leading", e.leading}});
        }
        for (const auto& e : exp) {
            csv.row({std::string("expansion"), e.eps, e.xi, e.d, kNaN, kNaN, kNaN, kNaN, kNaN, e.mu, e.residual_max,
                     e.leading_only, e.ratio});
            jx.push_back({{"eps", e.eps}, {"xi", e.xi}, {"d", e.d}, {"mu", e.mu}, {"log_case", e.log_case},
                          {"residual_max", e.residual_max}, {"leading_only", e.leading_only}, {"ratio", e.ratio},
                          {"probes", e.probes}});
        }
    }
    c.man.record("poisson.csv");
    j["m"] = o.m;
    j["envelope"] = je;
    j["expansion"] = jx;
    c.emit_json("poisson.json", j);
    return {};
}

json breakdown_json(const EnergyBreakdown& E) {
    return {{"eps", E.eps},         {"xi", E.xi},           {"d", E.d},
            {"J_PU", E.J_PU},       {"term_A1", E.term_A1}, {"term_A2", E.term_A2},
            {"term_green", E.term_green}, {"term_tau", E.term_tau}, {"residual", E.residual},
            {"budget", E.budget},   {"ratio", E.ratio}};
}

json corrector_json(const Corrector& C) {
    return {{"norm_eps", C.norm_eps},
            {"iterations", C.iterations},
            {"contraction_factor", std::isfinite(C.contraction_factor) ? json(C.contraction_factor) : json("inf")},
            {"converged", C.converged},
            {"constraint_ok", C.constraint_ok},
            {"constraint_excess", C.constraint_excess},
            {"z_overlap", C.z_overlap},
            {"steps", C.steps}};
}

// four Gaussians of width eps near xi, projected onto E
Eigen::VectorXd random_start(const ReducedProblem& RP, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const auto& g = *RP.workspace().grid();
    const auto in = g.interior();
    const double eps = RP.eps();
    double a[4], x0[4];
    for (int k = 0; k < 4; ++k) {
        a[k] = U(rng);
        x0[k] = RP.xi() + 2.0 * eps * U(rng);
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(in.size()));
    for (std::size_t i = 0; i < in.size(); ++i)
        for (int k = 0; k < 4; ++k) w(static_cast<Eigen::Index>(i)) += a[k] * std::exp(-std::pow((g.x(in[i]) - x0[k]) / eps, 2));
    return RP.project_E(w);
}

GridPtr mesh_grid(const RunConfig& cfg, const ModelParams& P, double eps) {
    return scan_grid(P, eps, scan_options(cfg));
}

struct ScheduleRow {
    double eps = 0, d = 0, xi = 0, coercivity = 0, l_norm = 0, M = kNaN, J = 0, uniqueness = kNaN;
    std::size_t m = 0;
    Corrector C;
    bool solved = false, tangent_flagged = false;
};

StageOutcome stage_reduce(const Ctx& c) {
    const auto& o = c.cfg.reduce;
    const auto g = load_ground(c);
    const auto ropt = reduction_options(c.cfg);
    const auto& rp = c.cfg.reduction;
    json j;

    // one point, in full
    {
        const auto P = c.model(o.eps);
        const ReductionWorkspace W(P, mesh_grid(c.cfg, P, o.eps), o.eps);
        const double xi = o.xi.value_or(P.domain.a + std::pow(o.eps, o.d_exp));
        const ReducedProblem RP(W, g.G, xi, ropt);
        const SingularSolution Sg(P, riesz_constant(P.N, P.s));
        const auto E = energy_expansion_check(RP, g.K, regular_part(W.poisson(), Sg, RP.xi()), rp);
        const auto lf = l_functional(RP);
        const double tau_min = RP.coercivity();
        json b = breakdown_json(E);
        b["m"] = W.m();
        b["coercivity"] = tau_min;
        b["coercivity_unprojected"] = RP.coercivity_unprojected();
        b["tangent"] = {{"gram", RP.tangent().gram},
                        {"fd_mismatch", RP.tangent().fd_mismatch},
                        {"flagged", RP.tangent().flagged}};
        b["l_norm"] = lf.norm;
        b["l_z_overlap"] = lf.z_overlap;
        b["kappa"] = rp.kappa(P);
        std::uint32_t flags = RP.tangent().flagged ? kTangentMismatch : 0u;
        Eigen::VectorXd omega = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(W.m()));
        if (tau_min >= c.cfg.coercivity_floor) {
            const auto C = solve_corrector(RP);
            omega = C.omega;
            b["corrector"] = corrector_json(C);
            b["M"] = reduced_energy(RP, C);
            b["M_minus_J"] = reduced_energy(RP, C) - E.J_PU;
            b["M_minus_J_bound"] = lf.norm * C.norm_eps + C.norm_eps * C.norm_eps;
            if (!C.converged) flags |= kNotConverged;
            if (C.contraction_factor >= 1.0) flags |= kNotContracting;
            if (!C.constraint_ok) flags |= kConstraint;
        } else {
            flags |= kWeakCoercivity;
        }
        b["flags"] = flags;
        b["flag_names"] = describe_flags(flags);
        c.emit_json("breakdown.json", b);
        j["point"] = b;

        Csv csv(c.dir / "reduce_fields.csv", {"x", "PU", "omega"});
        const auto in = W.grid()->interior();
        for (std::size_t i = 0; i < in.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            csv.row({W.grid()->x(in[i]), RP.PU()(k), omega(k)});
        }
    }
    c.man.record("reduce_fields.csv");

    // expansion against its budget
    std::vector<EnergyBreakdown> expansion(o.energy_eps.size());
    parallel_for(expansion.size(), c.cfg.workers, [&](std::size_t i) {
        const double eps = o.energy_eps[i];
        const auto P = c.model(eps);
        const ReductionWorkspace W(P, Grid::aligned(P.domain, o.energy_m, c.cfg.mesh.exterior_width), eps);
        const auto R = project(W.screened(), g.G, P.domain.a + std::pow(eps, o.energy_d_exp), ropt.projection);
        const SingularSolution Sg(P, riesz_constant(P.N, P.s));
        expansion[i] = energy_expansion_check(W, g.K, regular_part(W.poisson(), Sg, R.xi), R, rp);
    });
    j["energy_expansion"] = json::array();
    for (const auto& E : expansion) j["energy_expansion"].push_back(breakdown_json(E));

    // corrector schedule
    std::vector<ScheduleRow> sched(o.schedule_eps.size());
    parallel_for(sched.size(), c.cfg.workers, [&](std::size_t i) {
        const double eps = o.schedule_eps[i];
        const auto P = c.model(eps);
        const ReductionWorkspace W(P, mesh_grid(c.cfg, P, eps), eps);
        const ReducedProblem RP(W, g.G, P.domain.a + std::pow(eps, o.d_exp), ropt);
        ScheduleRow& r = sched[i];
        r.eps = eps;
        r.d = RP.d();
        r.xi = RP.xi();
        r.m = W.m();
        r.tangent_flagged = RP.tangent().flagged;
        r.coercivity = RP.coercivity();
        r.l_norm = l_functional(RP).norm;
        r.J = energy(W, RP.PU());
        if (r.coercivity < c.cfg.coercivity_floor) return;
        r.C = solve_corrector(RP);
        r.M = reduced_energy(RP, r.C);
        r.solved = true;
        if (r.C.norm_eps > 0.0 && std::isfinite(r.C.norm_eps)) {
            Eigen::VectorXd start = random_start(RP, c.cfg.seed + 1000 + i);
            start *= 0.5 * r.C.norm_eps / W.norm(start);
            CorrectorOptions co;
            co.start = start;
            const auto C2 = solve_corrector(RP, co);
            r.uniqueness = W.norm(C2.omega - r.C.omega);
        }
    });

    {
        Csv csv(c.dir / "reduce.csv", {"eps", "m", "d", "xi", "coercivity", "l_norm", "omega_norm", "omega_scaled",
                                       "contraction", "iterations", "converged", "constraint_ok", "uniqueness",
                                       "uniqueness_tol", "J_PU", "M"});
        for (const auto& r : sched) {
            const double half = std::pow(r.eps, c.cfg.model.N / 2.0);
            csv.row({r.eps, as_int(r.m), r.d, r.xi, r.coercivity, r.l_norm, r.solved ? r.C.norm_eps : kNaN,
                     r.solved ? r.C.norm_eps / half : kNaN, r.solved ? r.C.contraction_factor : kNaN,
                     static_cast<long long>(r.C.iterations), as_int(r.solved && r.C.converged),
                     as_int(r.solved && r.C.constraint_ok), r.uniqueness, 1e-8 * half, r.J, r.M});
        }
    }
    c.man.record("reduce.csv");

    json js = json::array();
    std::vector<double> eps_ok, scaled;
    for (const auto& r : sched) {
        const double half = std::pow(r.eps, c.cfg.model.N / 2.0);
        json row = {{"eps", r.eps}, {"m", r.m}, {"d", r.d}, {"xi", r.xi}, {"coercivity", r.coercivity},
                    {"l_norm", r.l_norm}, {"J_PU", r.J}, {"solved", r.solved}, {"tangent_flagged", r.tangent_flagged},
                    {"uniqueness", r.uniqueness}, {"uniqueness_tol", 1e-8 * half}};
        if (r.solved) {
            row["corrector"] = corrector_json(r.C);
            row["M"] = r.M;
            row["omega_scaled"] = r.C.norm_eps / half;
            if (r.C.norm_eps > 0.0 && std::isfinite(r.C.norm_eps)) {
                eps_ok.push_back(r.eps);
                scaled.push_back(r.C.norm_eps / half);
            }
        }
        js.push_back(row);
    }
    j["schedule"] = js;
    j["kappa"] = rp.kappa(c.cfg.model);
    if (eps_ok.size() >= 2) {
        const auto f = fit_loglog(eps_ok, scaled);
        j["norm_slope"] = f.slope;
        j["norm_intercept"] = f.intercept;
    } else {
        j["norm_slope"] = nullptr;
    }
    c.emit_json("reduce.json", j);
    return {};
}

json argmin_json(const Argmin& a) {
    return {{"found", a.found}, {"index", a.index}, {"d", a.d}, {"refined", a.refined}, {"interior", a.interior},
            {"tie", a.tie}};
}

json fit_json(const std::vector<ScanResult>& rs, const FitOptions& fo, std::string& error) {
    json j;
    try {
        const auto f = concentration_fit(rs, fo);
        j = {{"slope", f.slope()},         {"intercept", f.line.intercept}, {"residuals", f.line.residuals},
             {"eps", f.eps},               {"d_star", f.d_star},            {"excluded", f.excluded},
             {"min_span", fo.min_span},    {"min_points", fo.min_points}};
    } catch (const NumericalError& e) {
        error = e.what();
        j = {{"slope", nullptr}, {"error", error}, {"min_span", fo.min_span}, {"min_points", fo.min_points}};
    }
    return j;
}

bool in_list(double e, const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [e](double x) { return std::abs(x - e) <= 1e-12 * e; });
}

StageOutcome stage_scan(const Ctx& c) {
    const auto& o = c.cfg.scan;
    const auto g = load_ground(c);
    auto opt = scan_options(c.cfg);

    std::vector<double> eps = o.eps;
    for (double e : o.full_eps)
        if (!in_list(e, eps)) eps.push_back(e);
    std::sort(eps.begin(), eps.end(), std::greater<>());

    std::vector<ScanResult> all;
    std::size_t failed = 0, total = 0;
    for (double e : eps) {
        opt.full = in_list(e, o.full_eps);
        all.push_back(scan(c.model(e), g.G, g.K, e, opt));
        const auto& r = all.back();
        for (const auto& p : r.points) {
            ++total;
            if (p.flags & (opt.full ? kExcluding : kSurrogateExcluding)) ++failed;
        }
        spdlog::info("scan eps={:.4g} ({}): m={} surrogate d*={:.4g} interior={} full d*={:.4g} interior={} flagged={}", e,
                     opt.full ? "full" : "surrogate", r.m, r.surrogate_d_star(), r.surrogate.interior, r.d_star(),
                     r.full.interior, r.flagged);
    }

    {
        Csv csv(c.dir / "scan.csv", {"eps", "d", "M", "surrogate_M", "tau", "green_term", "flags", "xi", "J_PU",
                                     "coercivity", "contraction", "omega_norm", "iterations", "full", "flag_names"});
        for (const auto& r : all) {
            const bool full = in_list(r.eps, o.full_eps);
            for (const auto& p : r.points)
                csv.row({r.eps, p.d, p.M, p.surrogate, p.tau, p.green_term, static_cast<long long>(p.flags), p.xi, p.J_PU,
                         full ? p.coercivity : kNaN, full ? p.contraction : kNaN, full ? p.omega_norm : kNaN,
                         static_cast<long long>(p.iterations), as_int(full), describe_flags(p.flags)});
        }
    }
    c.man.record("scan.csv");

    std::vector<ScanResult> sur, full;
    for (const auto& r : all) {
        if (in_list(r.eps, o.eps)) sur.push_back(r);
        if (in_list(r.eps, o.full_eps)) full.push_back(r);
    }
    FitOptions fs_opt;
    fs_opt.surrogate = true;
    FitOptions ff_opt;
    // the full range is a factor 4 in eps, so a factor-8 span cannot be asked of it
    ff_opt.min_span = 4.0;
    FitOptions fr_opt;
    fr_opt.free = true;
    std::string err_s, err_f, err_r;
    json j;
    j["target_slope"] = 2.0 / 3.0;
    j["surrogate"] = fit_json(sur, fs_opt, err_s);
    j["full"] = fit_json(full, ff_opt, err_f);
    j["free_surrogate"] = fit_json(sur, fr_opt, err_r);
    j["slope"] = j["surrogate"]["slope"];
    j["intercept"] = j["surrogate"].value("intercept", json(nullptr));
    j["residuals"] = j["surrogate"].value("residuals", json::array());
    const auto& P = c.cfg.model;
    j["balance_target"] = balance_ratio(P.N, P.s);

    json per = json::array();
    for (const auto& r : all) {
        const bool isfull = in_list(r.eps, o.full_eps);
        json e = {{"eps", r.eps},
                  {"m", r.m},
                  {"d_min", r.d_min},
                  {"d_max", r.d_max},
                  {"full", isfull},
                  {"surrogate_argmin", argmin_json(r.surrogate)},
                  {"full_argmin", argmin_json(r.full)},
                  {"free_argmin", argmin_json(r.free_surrogate)},
                  {"flagged", r.flagged},
                  {"balance_at_surrogate", nullptr},
                  {"balance_at_free", nullptr},
                  {"argmin_gap_steps", nullptr}};
        if (r.surrogate.found) {
            const auto& p = r.points[r.surrogate.index];
            e["balance_at_surrogate"] = 0.5 * p.tau / std::abs(p.green_term);
        }
        if (r.free_surrogate.found) {
            const auto i = r.free_surrogate.index;
            e["balance_at_free"] = 0.5 * r.free_tau[i] / std::abs(r.free_green[i]);
        }
        if (isfull && r.full.found && r.surrogate.found) {
            const double step = std::log(r.d_max / r.d_min) / static_cast<double>(r.points.size() - 1);
            e["argmin_gap_steps"] = std::abs(std::log(r.full.d / r.surrogate.d)) / step;
        }
        per.push_back(e);
    }
    j["per_eps"] = per;
    j["points"] = total;
    j["failed_points"] = failed;
    {
        Csv csv(c.dir / "scan_free.csv", {"eps", "d", "surrogate_M", "tau", "green_term"});
        for (const auto& r : all)
            for (std::size_t i = 0; i < r.free_d.size(); ++i)
                csv.row({r.eps, r.free_d[i], r.free_values[i], r.free_tau[i], r.free_green[i]});
    }
    c.man.record("scan_free.csv");
    c.emit_json("fit.json", j);

    StageOutcome out;
    std::vector<std::string> why;
    if (failed) why.push_back(fmt::format("{} of {} scan points flagged", failed, total));
    if (!err_s.empty()) why.push_back("surrogate fit: " + err_s);
    if (!err_f.empty() && !full.empty()) why.push_back("full fit: " + err_f);
    if (!why.empty()) {
        out.exit_code = kExitNumerical;
        for (std::size_t i = 0; i < why.size(); ++i) out.message += (i ? "; " : "") + why[i];
    }
    return out;
}

StageOutcome stage_report(const Ctx& c) {
    auto stages = load_stage_summaries(c.dir);
    const auto bk = exponent_bookkeeping();
    json x = {{"points", bk.points},
              {"triples", bk.triples},
              {"crossing_error", bk.crossing_error},
              {"ordering_ok", bk.ordering_ok},
              {"empty_windows", bk.empty_windows},
              {"set_mismatches", bk.set_mismatches},
              {"discrepancy_points", bk.discrepancy_points},
              {"discrepancy_empty_windows", bk.discrepancy_empty_windows},
              {"discrepancy_examples", bk.discrepancy_examples}};
    c.emit_json("exponents.json", x);
    stages["exponents"] = x;

    const auto claims = evaluate_claims(stages);
    json rows = json::array();
    std::size_t passed = 0;
    for (const auto& cl : claims) {
        rows.push_back(to_json(cl));
        passed += cl.pass ? 1 : 0;
    }
    json crit = json::array();
    for (const auto& v : group_by_criterion(claims))
        crit.push_back({{"criterion", v.criterion}, {"title", v.title}, {"pass", v.pass}});
    {
        Csv csv(c.dir / "report.csv", {"criterion", "claim", "citation", "measured", "tolerance", "pass"});
        auto clean = [](std::string s) {
            std::replace(s.begin(), s.end(), ',', ';');
            return s;
        };
        for (const auto& cl : claims)
            csv.row({static_cast<long long>(cl.criterion), clean(cl.claim), clean(cl.citation), clean(cl.measured.dump()),
                     clean(cl.tolerance), std::string(cl.pass ? "pass" : "fail")});
    }
    c.man.record("report.csv");
    c.emit_json("report.json", {{"claims", rows}, {"criteria", crit}, {"passed", passed}, {"total", claims.size()}});
    spdlog::info("report: {} of {} claims pass", passed, claims.size());
    return {};
}

} // namespace

bool is_stage(std::string_view name) { return std::find(kStages.begin(), kStages.end(), name) != kStages.end(); }

std::string code_version() { return FRACPEAK_VERSION; }

std::uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    boost::crc_32_type crc;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        crc.process_bytes(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return crc.checksum();
}

Manifest::Manifest(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    std::ifstream in(dir_ / "manifest.json");
    if (in) {
        try {
            in >> j_;
            for (const auto& f : j_.at("files")) files_[f.at("path").get<std::string>()] = f;
        } catch (const std::exception& e) {
            spdlog::warn("manifest unreadable, starting a new one: {}", e.what());
            j_ = json::object();
            files_.clear();
        }
    }
    if (!j_.contains("stages")) j_["stages"] = json::object();
}

void Manifest::begin(const std::string& stage, const RunConfig& cfg) {
    stage_ = stage;
    j_["version"] = code_version();
    j_["config"] = cfg.echo();
    j_["stages"][stage] = {{"status", "running"}, {"started", now_utc()}, {"config", cfg.echo()}};
    std::ofstream(dir_ / "config.ini") << cfg.echo();
    record("config.ini");
}

void Manifest::record(const fs::path& file) {
    const auto rel = file.is_absolute() ? fs::relative(file, dir_) : file;
    const auto full = dir_ / rel;
    char hex[9];
    std::snprintf(hex, sizeof hex, "%08x", file_crc32(full));
    files_[rel.generic_string()] = {{"path", rel.generic_string()},
                                    {"bytes", fs::file_size(full)},
                                    {"crc32", hex},
                                    {"stage", stage_}};
}

void Manifest::finish(const std::string& stage, const std::string& status, int exit_code, const std::string& message) {
    auto& s = j_["stages"][stage];
    s["status"] = status;
    s["finished"] = now_utc();
    s["exit_code"] = exit_code;
    s["message"] = message;
}

void Manifest::save() const {
    json j = j_;
    j["updated"] = now_utc();
    j["files"] = json::array();
    for (const auto& [path, f] : files_) j["files"].push_back(f);
    std::ofstream(dir_ / "manifest.json") << j.dump(2) << "\n";
}

StageOutcome run_stage(const std::string& stage, const RunConfig& cfg) {
    StageOutcome out;
    try {
        if (!is_stage(stage)) throw ConfigError("unknown stage '" + stage + "'");
        cfg.validate();
    } catch (const ConfigError& e) {
        return {kExitConfig, e.what()};
    }
    Manifest man(cfg.out);
    man.begin(stage, cfg);
    const Ctx c{cfg, man, cfg.out};
    const auto t0 = std::chrono::steady_clock::now();
    spdlog::info("stage {} -> {}", stage, cfg.out.string());
    try {
        if (stage == "ground") out = stage_ground(c);
        else if (stage == "operators") out = stage_operators(c);
        else if (stage == "green") out = stage_green(c);
        else if (stage == "project") out = stage_project(c);
        else if (stage == "poisson") out = stage_poisson(c);
        else if (stage == "reduce") out = stage_reduce(c);
        else if (stage == "scan") out = stage_scan(c);
        else out = stage_report(c);
    } catch (const ConfigError& e) {
        out = {kExitConfig, e.what()};
    } catch (const DependencyError& e) {
        out = {kExitDependency, e.what()};
    } catch (const NumericalError& e) {
        out = {kExitNumerical, e.what()};
    } catch (const std::exception& e) {
        out = {kExitFailure, e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* status =
        out.exit_code == kExitOk ? "ok" : (out.exit_code == kExitNumerical && stage == "scan" ? "partial" : "failed");
    man.finish(stage, status, out.exit_code, out.message);
    man.save();
    spdlog::info("stage {} {} in {:.1f} s{}", stage, status, secs, out.message.empty() ? "" : ": " + out.message);
    return out;
}

StageOutcome run_all(const RunConfig& cfg) {
    StageOutcome worst;
    for (auto s : kStages) {
        const auto r = run_stage(std::string(s), cfg);
        if (r.exit_code == kExitOk) continue;
        if (worst.exit_code == kExitOk) worst = r;
        if (r.exit_code != kExitNumerical) return r;
    }
    return worst;
}

} // namespace fracpeak
