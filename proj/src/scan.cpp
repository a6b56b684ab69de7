#include "fracpeak/scan.hpp"

#include "fracpeak/errors.hpp"
#include "fracpeak/greenfn.hpp"
#include "fracpeak/pool.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fracpeak {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
double d_independent(const ModelParams& P, const LimitConstants& K, double eps) {
    return std::pow(eps, P.N) * K.A1 + 0.25 * std::pow(eps, P.N + 2 * P.s) * K.A2;
}

double green_term(const ModelParams& P, const LimitConstants& K, double eps, double robin) {
    return -0.25 * std::pow(eps, 2 * P.N) * K.B * K.B * robin;
}

Argmin refine(Argmin a, const std::vector<double>& d, const std::vector<double>& v) {
    a.refined = a.d;
    if (!a.interior) return a;
    const std::size_t i = a.index;
    if (std::isnan(v[i - 1]) || std::isnan(v[i + 1])) return a;
    a.refined = std::exp(parabola_vertex(std::log(d[i - 1]), v[i - 1], std::log(d[i]), v[i], std::log(d[i + 1]), v[i + 1]));
    return a;
}

} // namespace

std::string describe_flags(std::uint32_t f) {
    static const std::pair<std::uint32_t, const char*> names[] = {
        {kProjectionFailed, "projection"}, {kTauMismatch, "tau"},        {kTangentMismatch, "tangent"},
        {kNotConverged, "unconverged"},    {kNotContracting, "expanding"}, {kConstraint, "constraint"},
        {kWeakCoercivity, "coercivity"},   {kNumerical, "numerical"}};
    std::string out;
    for (const auto& [bit, name] : names) {
        if (!(f & bit)) continue;
        if (!out.empty()) out += '|';
        out += name;
    }
    return out;
}

double balance_minimizer(int N, double s, double c1, double c2, double eps) {
    // (N+4s) c1 eps^{N+4s+1} d^{-(N+4s)-1} = (N-2s) c2 eps^{2N} d^{-(N-2s)-1}
    const double k = (N + 4 * s) * c1 / ((N - 2 * s) * c2);
    return std::pow(k * std::pow(eps, 4 * s + 1 - N), 1.0 / (6 * s));
}

double balance_ratio(int N, double s) { return (N - 2 * s) / (N + 4 * s); }

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw ConfigError("log grid: need 0 < lo < hi and at least two points");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    g.back() = hi;
    return g;
}

Argmin argmin_of(const std::vector<double>& d, const std::vector<double>& v, const std::vector<bool>& usable) {
    Argmin a;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::isnan(v[i]) || (!usable.empty() && !usable[i])) continue;
        if (v[i] < best) {
            best = v[i];
            a.index = i;
            a.found = true;
        }
    }
    if (!a.found) return a;
    // equal values (to round-off) resolve to the smallest d, which is the first index
    for (std::size_t i = a.index + 1; i < v.size(); ++i)
        if (!std::isnan(v[i]) && (usable.empty() || usable[i]) && std::abs(v[i] - best) <= 1e-14 * std::abs(best))
            a.tie = true;
    a.d = d[a.index];
    a.interior = a.index > 0 && a.index + 1 < v.size();
    return refine(a, d, v);
}

GridPtr scan_grid(const ModelParams& P, double eps, const ScanOptions& opt) {
    const auto m = std::max(opt.min_nodes, static_cast<std::size_t>(std::ceil(opt.nodes_per_eps / eps)));
    return Grid::aligned(P.domain, m, opt.exterior_width);
}

ScanResult scan(const ReductionWorkspace& W, const GroundState& G, const LimitConstants& K, const ScanOptions& opt) {
    if (opt.d_points < 12) throw ConfigError("scan: the d-grid needs at least 12 points");
    const auto& P = W.params();
    opt.params.validate(P);
    const double eps = W.eps();
    const Interval dom = P.domain;
    const double half = 0.5 * (dom.b - dom.a);

    ScanResult out;
    out.eps = eps;
    out.m = W.m();
    out.d_min = opt.params.d_min(eps);
    out.d_max = std::min(opt.params.d_max(eps), half);
    if (!(out.d_max > out.d_min)) throw ConfigError("scan: empty window at this eps");
    const auto ds = log_grid(out.d_min, out.d_max, opt.d_points);
    const SingularSolution S(P, riesz_constant(P.N, P.s));
    const double base = d_independent(P, K, eps);

    out.points.resize(ds.size());
    parallel_for(ds.size(), opt.workers, [&](std::size_t i) {
        ScanPoint& pt = out.points[i];
        pt.M = kNaN;
        // snapping to a node must not leave the window
        const double xi = dom.a + std::clamp(ds[i], out.d_min + 0.5 * W.h(), out.d_max - 0.5 * W.h());
        try {
            std::optional<ReducedProblem> RP;
            ProjectionResult R;
            if (opt.full) {
                RP.emplace(W, G, xi, opt.reduction);
                R = RP->projection();
            } else {
                R = project(W.screened(), G, xi, opt.reduction.projection);
            }
            pt.xi = R.xi;
            pt.d = R.d;
            pt.tau = R.tau_direct;
            if (R.flagged) pt.flags |= kTauMismatch;
            const auto H = regular_part(W.poisson(), S, R.xi);
            pt.green_term = green_term(P, K, eps, H.robin);
            pt.surrogate = base + 0.5 * pt.tau + pt.green_term;
            pt.J_PU = energy(W, W.op()->to_interior(R.PU));
            if (!opt.full) return;
            if (RP->tangent().flagged) pt.flags |= kTangentMismatch;
            pt.coercivity = RP->coercivity();
            if (pt.coercivity < opt.coercivity_floor) {
                pt.flags |= kWeakCoercivity;
                return;
            }
            const auto C = solve_corrector(*RP);
            pt.contraction = C.contraction_factor;
            pt.omega_norm = C.norm_eps;
            pt.iterations = C.iterations;
            if (!C.converged) pt.flags |= kNotConverged;
            if (C.contraction_factor >= 1.0) pt.flags |= kNotContracting;
            if (!C.constraint_ok) pt.flags |= kConstraint;
            pt.M = reduced_energy(*RP, C);
            if (!std::isfinite(pt.M)) pt.flags |= kNumerical;
        } catch (const ConfigError& e) {
            spdlog::debug("scan eps={} d={}: {}", eps, ds[i], e.what());
            pt.d = ds[i];
            pt.xi = xi;
            pt.flags |= kProjectionFailed;
        } catch (const NumericalError& e) {
            spdlog::debug("scan eps={} d={}: {}", eps, ds[i], e.what());
            pt.d = ds[i];
            pt.xi = xi;
            pt.flags |= kNumerical;
        }
    });

    std::vector<double> d, M, sur;
    std::vector<bool> ok_full, ok_sur;
    for (const auto& pt : out.points) {
        d.push_back(pt.d);
        M.push_back(pt.M);
        sur.push_back(pt.surrogate);
        ok_full.push_back(!(pt.flags & kExcluding) && opt.full);
        ok_sur.push_back(!(pt.flags & kSurrogateExcluding));
        if (pt.flags) ++out.flagged;
    }
    out.full = argmin_of(d, M, ok_full);
    out.surrogate = argmin_of(d, sur, ok_sur);

    if (opt.free_points >= 3) {
        const double lo = std::max(opt.free_lo * eps, opt.reduction.projection.min_d_over_h * W.h());
        if (lo < out.d_max) {
            const auto fd = log_grid(lo, out.d_max, opt.free_points);
            out.free_d.assign(fd.size(), 0.0);
            out.free_values.assign(fd.size(), kNaN);
            out.free_tau.assign(fd.size(), kNaN);
            out.free_green.assign(fd.size(), kNaN);
            parallel_for(fd.size(), opt.workers, [&](std::size_t i) {
                try {
                    const auto R = project(W.screened(), G, dom.a + fd[i], opt.reduction.projection);
                    const auto H = regular_part(W.poisson(), S, R.xi);
                    out.free_d[i] = R.d;
                    out.free_tau[i] = R.tau_direct;
                    out.free_green[i] = green_term(P, K, eps, H.robin);
                    out.free_values[i] = base + 0.5 * R.tau_direct + out.free_green[i];
                } catch (const Error&) {
                    out.free_d[i] = fd[i];
                }
            });
            out.free_surrogate = argmin_of(out.free_d, out.free_values);
        }
    }
    return out;
}

ScanResult scan(const ModelParams& P, const GroundState& G, const LimitConstants& K, double eps,
                const ScanOptions& opt) {
    ReductionWorkspace W(P, scan_grid(P, eps, opt), eps);
    return scan(W, G, K, opt);
}

std::vector<ScanResult> scan_schedule(const ModelParams& P, const GroundState& G, const LimitConstants& K,
                                      const std::vector<double>& eps_list, const ScanOptions& opt) {
    std::vector<ScanResult> out;
    for (double eps : eps_list) {
        out.push_back(scan(P, G, K, eps, opt));
        const auto& r = out.back();
        spdlog::info("scan eps={:.4g}: m={} d*={:.4g} (interior {}), surrogate d*={:.4g} (interior {}), {} flagged", eps,
                     r.m, r.d_star(), r.full.interior, r.surrogate_d_star(), r.surrogate.interior, r.flagged);
    }
    return out;
}

ConcentrationFit concentration_fit(const std::vector<ScanResult>& results, const FitOptions& opt) {
    ConcentrationFit f;
    for (const auto& r : results) {
        const Argmin& a = opt.free ? r.free_surrogate : (opt.surrogate ? r.surrogate : r.full);
        if (!a.found || (opt.require_interior && !a.interior)) {
            f.excluded.push_back(r.eps);
            continue;
        }
        f.eps.push_back(r.eps);
        f.d_star.push_back(a.refined);
    }
    if (f.eps.size() < opt.min_points)
        throw NumericalError("concentration fit: " + std::to_string(f.eps.size()) + " usable eps values, need " +
                             std::to_string(opt.min_points));
    const auto [lo, hi] = std::minmax_element(f.eps.begin(), f.eps.end());
    if (*hi / *lo < opt.min_span * (1.0 - 1e-9))
        throw NumericalError("concentration fit: usable eps values span a factor " + std::to_string(*hi / *lo) +
                             ", need " + std::to_string(opt.min_span));
    f.line = fit_loglog(f.eps, f.d_star);
    return f;
}

} // namespace fracpeak
