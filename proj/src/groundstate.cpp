#include "fracpeak/groundstate.hpp"

#include "fracpeak/errors.hpp"
#include "fracpeak/fit.hpp"

#include <Eigen/Dense>
#include <math.h>  // pchip.hpp calls unqualified isnan
#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace fracpeak {

using pchip_t = boost::math::interpolators::pchip<std::vector<double>>;
using hermite_t = boost::math::interpolators::cubic_hermite<std::vector<double>>;

// even profile known on [0, xmax] with a power tail beyond
class ProfileInterpolant {
public:
    // with derivative samples: cubic Hermite, so that derivative() is the exact
    // derivative of value(); without: monotone pchip
    ProfileInterpolant(std::vector<double> x, std::vector<double> y, std::vector<double> dy, double q)
        : xmax_(x.back()), ylast_(y.back()), q_(q) {
        if (!dy.empty()) h_ = std::make_unique<hermite_t>(std::move(x), std::move(y), std::move(dy));
        else f_ = std::make_unique<pchip_t>(std::move(x), std::move(y), 0.0);
    }
    double xmax() const { return xmax_; }
    double value(double z) const {
        const double a = std::abs(z);
        if (a <= xmax_) return h_ ? (*h_)(a) : (*f_)(a);
        return ylast_ * std::pow(xmax_ / a, q_);
    }
    double derivative(double z) const {
        const double a = std::abs(z);
        const double sg = z < 0 ? -1.0 : 1.0;
        if (a <= xmax_) return sg * (h_ ? h_->prime(a) : f_->prime(a));
        return -sg * q_ * value(a) / a;
    }

private:
    double xmax_, ylast_, q_;
    std::unique_ptr<hermite_t> h_;
    std::unique_ptr<pchip_t> f_;
};

double GroundState::profile(double z) const { return interp->value(z); }
double GroundState::profile_derivative(double z) const { return interp->derivative(z); }
double RieszProfile::value(double z) const { return interp->value(z); }

std::size_t SpectrumResult::count_within(double tol) const {
    return static_cast<std::size_t>(
        std::count_if(eigenvalues.begin(), eigenvalues.end(), [&](double l) { return std::abs(l) < tol; }));
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }
double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }
double max_abs(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double pos_pow(double u, double p) { return u > 0.0 ? std::pow(u, p) : 0.0; }

// mirror about x = 0, which sits at index n/2 of a make() lattice
void symmetrize(Vec& u) {
    const std::size_t n = u.size();
    for (std::size_t j = 1; j < n / 2; ++j) {
        const double m = 0.5 * (u[j] + u[n - j]);
        u[j] = m;
        u[n - j] = m;
    }
}

Vec pde_residual(const LineMultiplierPlan& plan, const Vec& u, double p) {
    Vec r = plan.apply(std::span<const double>(u));
    for (std::size_t j = 0; j < u.size(); ++j) r[j] += u[j] - pos_pow(u[j], p);
    return r;
}

// G(U) = U - (D + 1)^{-1} U_+^p
Vec fixed_point_map(const LineMultiplierPlan& plan, const Vec& u, double p) {
    Vec f(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) f[j] = pos_pow(u[j], p);
    Vec g = plan.resolvent(f);
    for (std::size_t j = 0; j < u.size(); ++j) g[j] = u[j] - g[j];
    return g;
}

// restarted GMRES, x0 = 0
template <class Op>
Vec gmres(const Op& A, const Vec& b, double rtol, int restart, int maxit) {
    const std::size_t n = b.size();
    Vec x(n, 0.0);
    const double bn = norm2(b);
    if (bn == 0.0) return x;
    int total = 0;
    while (total < maxit) {
        Vec r = A(x);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = norm2(r);
        if (beta <= rtol * bn) break;
        std::vector<Vec> V;
        V.reserve(restart + 1);
        for (double& v : r) v /= beta;
        V.push_back(std::move(r));
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
        std::vector<double> cs(restart), sn(restart), g(restart + 1, 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < restart && total < maxit; ++k, ++total) {
            Vec w = A(V[k]);
            for (int i = 0; i <= k; ++i) {
                H(i, k) = dot(w, V[i]);
                for (std::size_t t = 0; t < n; ++t) w[t] -= H(i, k) * V[i][t];
            }
            H(k + 1, k) = norm2(w);
            for (int i = 0; i < k; ++i) {
                const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = t;
            }
            const double den = std::hypot(H(k, k), H(k + 1, k));
            cs[k] = H(k, k) / den;
            sn[k] = H(k + 1, k) / den;
            H(k, k) = den;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            const bool done = std::abs(g[k + 1]) <= rtol * bn;
            const double wn = norm2(w);
            if (done || wn == 0.0) {
                ++k;
                ++total;
                break;
            }
            for (double& v : w) v /= wn;
            V.push_back(std::move(w));
        }
        Eigen::VectorXd y(k);
        for (int i = k - 1; i >= 0; --i) {
            double t = g[i];
            for (int j = i + 1; j < k; ++j) t -= H(i, j) * y(j);
            y(i) = t / H(i, i);
        }
        for (int i = 0; i < k; ++i)
            for (std::size_t t = 0; t < n; ++t) x[t] += y(i) * V[i][t];
        if (std::abs(g[k]) <= rtol * bn) break;
    }
    return x;
}

// report index i <-> solve index i + offset
std::size_t report_offset(const GroundStateOptions& o) { return (o.pad - 1) * o.n / 2; }

void check_options(const ModelParams& P, const GroundStateOptions& o) {
    P.validate();
    if (P.N != 1) throw ConfigError("ground state: only N = 1 is implemented");
    if (o.pad < 1) throw ConfigError("ground state: pad must be >= 1");
    if (o.n < 64 || o.n % 2) throw ConfigError("ground state: n must be even and >= 64");
    if (!(o.L > 0.0)) throw ConfigError("ground state: L must be positive");
    if (!(o.tol > 0.0)) throw ConfigError("ground state: tol must be positive");
}

Interval profile_domain(const GroundStateOptions& o) {
    // the line problem has no domain; keep a nominal one well inside
    const double a = std::min(1.0, 0.25 * o.L);
    return Interval{-a, a};
}

// everything derived from a converged solve-lattice U
void finish(GroundState& G) {
    const auto& o = G.opt;
    const double p = G.P.p;
    const GridPtr sg = G.U_solve.grid_ptr();
    LineMultiplierPlan plan(sg, G.P.s, o.tail_floor);
    const Vec& us = G.U_solve.vec();

    G.residual_norm = max_abs(pde_residual(plan, us, p));
    const Vec dus = plan.derivative(std::span<const double>(us));

    const GridPtr rg = Grid::make(o.L, o.n, profile_domain(o));
    const std::size_t off = report_offset(o);
    Vec u(o.n), du(o.n);
    for (std::size_t i = 0; i < o.n; ++i) {
        u[i] = us[i + off];
        du[i] = dus[i + off];
    }
    for (double v : u)
        if (!(v > 0.0)) throw NumericalError("ground state: profile is not positive on the window");
    const std::size_t c = o.n / 2;
    const auto top = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    if (top != c) throw NumericalError("ground state: maximum is off center");
    G.peak_value = u[c];
    G.tail_ratio = u[o.n - 1] / u[c];

    G.monotone = true;
    for (std::size_t i = c; i + 1 < o.n; ++i)
        if (!(u[i + 1] < u[i])) G.monotone = false;

    const double q = G.P.N + 2.0 * G.P.s;
    G.alpha_hat = INFINITY;
    G.beta_hat = 0.0;
    for (std::size_t i = 0; i < o.n; ++i) {
        const double e = u[i] * (1.0 + std::pow(std::abs(rg->x(i)), q));
        G.alpha_hat = std::min(G.alpha_hat, e);
        G.beta_hat = std::max(G.beta_hat, e);
    }

    Vec fx, fy;
    for (std::size_t i = c; i < o.n; ++i) {
        const double x = rg->x(i);
        if (x >= 0.25 * o.L && x <= 0.5 * o.L) {
            fx.push_back(x);
            fy.push_back(u[i]);
        }
    }
    G.decay_slope = fit_loglog(fx, fy).slope;

    Vec hx, hy, hd;
    for (std::size_t i = c; i < o.n; ++i) {
        hx.push_back(rg->x(i) - rg->x(c));
        hy.push_back(u[i]);
        hd.push_back(du[i]);
    }
    hd[0] = 0.0;
    G.interp = std::make_shared<ProfileInterpolant>(std::move(hx), std::move(hy), std::move(hd), -G.decay_slope);

    G.U = Field(rg, std::move(u), ExteriorRule::Free);
    G.dU = Field(rg, std::move(du), ExteriorRule::Free);
}

} // namespace

GroundState solve_ground_state(const ModelParams& P, const GroundStateOptions& opt, const std::optional<Field>& init) {
    check_options(P, opt);
    const double p = P.p;
    const std::size_t ns = opt.n * opt.pad;
    const GridPtr sg = Grid::make(opt.L * static_cast<double>(opt.pad), ns, profile_domain(opt));
    LineMultiplierPlan plan(sg, P.s, opt.tail_floor);
    const std::size_t off = report_offset(opt);

    Vec u(ns, 0.0);
    if (init) {
        const auto& g = init->grid();
        if (g.size() == ns && std::abs(g.h() - sg->h()) < 1e-12 * sg->h()) {
            u = init->vec();
        } else if (g.size() == opt.n && std::abs(g.h() - sg->h()) < 1e-12 * sg->h()) {
            for (std::size_t i = 0; i < opt.n; ++i) u[i + off] = (*init)[i];
        } else {
            for (std::size_t j = 0; j < ns; ++j) {
                const double x = sg->x(j);
                if (x >= g.x(0) && x <= g.x(g.size() - 1)) u[j] = (*init)[g.nearest_node(x)];
            }
        }
    } else {
        const double q = P.N + 2.0 * P.s;
        Vec phi(ns);
        for (std::size_t j = 0; j < ns; ++j) phi[j] = std::pow(1.0 + sg->x(j) * sg->x(j), -0.5 * q);
        // a^{p-1} <phi^{p+1}> = <(D+1)phi, phi>
        const Vec Mphi = plan.apply(std::span<const double>(phi));
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
            num += (Mphi[j] + phi[j]) * phi[j];
            den += std::pow(phi[j], p + 1.0);
        }
        const double a = opt.init_amplitude_factor * std::pow(num / den, 1.0 / (p - 1.0));
        for (std::size_t j = 0; j < ns; ++j) u[j] = a * phi[j];
    }
    symmetrize(u);
    const auto trivial = [&](const Vec& v) {
        if (max_abs(v) < 1e-10)
            throw NumericalError("ground state: trivial attractor (iterate collapsed to zero); "
                                 "use a larger init amplitude");
    };
    trivial(u);

    GroundState G;
    G.P = P;
    G.opt = opt;

    // Petviashvili warm start
    const double gamma = p / (p - 1.0);
    for (int it = 0; it < opt.max_warm; ++it) {
        Vec f(ns);
        for (std::size_t j = 0; j < ns; ++j) f[j] = pos_pow(u[j], p);
        const Vec Mu = plan.apply(std::span<const double>(u));
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
            num += (Mu[j] + u[j]) * u[j];
            den += f[j] * u[j];
        }
        if (!(den > 0.0)) trivial(Vec(1, 0.0));
        Vec next = plan.resolvent(f);
        const double S = std::pow(num / den, gamma);
        for (double& v : next) v *= S;
        symmetrize(next);
        trivial(next);
        double change = 0.0;
        for (std::size_t j = 0; j < ns; ++j) change = std::max(change, std::abs(next[j] - u[j]));
        u = std::move(next);
        G.warm_iterations = it + 1;
        if (change < opt.warm_tol * max_abs(u)) break;
    }

    // damped Newton-GMRES on G(U) = U - (D+1)^{-1}U^p
    Vec F = fixed_point_map(plan, u, p);
    double res = max_abs(pde_residual(plan, u, p));
    int it = 0;
    for (; it < opt.max_newton && res >= opt.tol; ++it) {
        Vec dp(ns);
        for (std::size_t j = 0; j < ns; ++j) dp[j] = p * pos_pow(u[j], p - 1.0);
        const auto J = [&](const Vec& v) {
            Vec w(ns);
            for (std::size_t j = 0; j < ns; ++j) w[j] = dp[j] * v[j];
            Vec r = plan.resolvent(w);
            for (std::size_t j = 0; j < ns; ++j) r[j] = v[j] - r[j];
            return r;
        };
        Vec rhs(ns);
        for (std::size_t j = 0; j < ns; ++j) rhs[j] = -F[j];
        const double fn = norm2(F);
        const Vec delta = gmres(J, rhs, std::min(1e-3, std::max(1e-13, fn)), 40, 400);
        double lam = 1.0;
        Vec trial(ns), Ft;
        for (int ls = 0; ls < 12; ++ls, lam *= 0.5) {
            for (std::size_t j = 0; j < ns; ++j) trial[j] = u[j] + lam * delta[j];
            symmetrize(trial);
            Ft = fixed_point_map(plan, trial, p);
            if (norm2(Ft) < (1.0 - 1e-4 * lam) * fn) break;
        }
        trivial(trial);
        u = trial;
        F = std::move(Ft);
        res = max_abs(pde_residual(plan, u, p));
        spdlog::debug("ground state newton {} residual {:.3e} step {}", it, res, lam);
    }
    G.newton_iterations = it;
    trivial(u);
    if (res >= opt.tol)
        throw NumericalError("ground state: no convergence after " + std::to_string(it) +
                             " Newton steps, last residual " + std::to_string(res));

    G.U_solve = Field(sg, std::move(u), ExteriorRule::Free);
    finish(G);
    return G;
}

// ------------------------------------------------------------------ spectrum

namespace {

void orthonormalize_columns(Eigen::MatrixXd& S, std::size_t keep, std::vector<Eigen::Index>& kept) {
    // modified Gram-Schmidt twice; the first `keep` columns are already orthonormal
    kept.clear();
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
        if (static_cast<std::size_t>(j) < keep) {
            kept.push_back(j);
            continue;
        }
        const double n0 = S.col(j).norm();
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (auto i : kept) S.col(j) -= S.col(i).dot(S.col(j)) * S.col(i);
        const double n1 = S.col(j).norm();
        if (n1 < 1e-10 * n0) continue;
        S.col(j) /= n1;
        kept.push_back(j);
    }
}

} // namespace

SpectrumResult nondegeneracy_spectrum(const GroundState& G, std::size_t k) {
    if (k == 0) throw ConfigError("spectrum: k must be positive");
    const double p = G.P.p;
    const GridPtr sg = G.U_solve.grid_ptr();
    LineMultiplierPlan plan(sg, G.P.s, G.opt.tail_floor);
    const Vec& u = G.U_solve.vec();
    const std::size_t n = u.size();
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::VectorXd pot(N);
    for (std::size_t j = 0; j < n; ++j) pot(j) = 1.0 - p * pos_pow(u[j], p - 1.0);

    const auto L = [&](const Eigen::VectorXd& v) {
        Vec r = plan.apply(std::span<const double>(v.data(), n));
        Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(r.data(), N);
        return Eigen::VectorXd(out + pot.cwiseProduct(v));
    };
    const auto T = [&](const Eigen::VectorXd& v) {
        Vec r = plan.resolvent(std::span<const double>(v.data(), n));
        return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(r.data(), N));
    };

    const Vec du = plan.derivative(std::span<const double>(u));
    const Eigen::Map<const Eigen::VectorXd> U(u.data(), N), dU(du.data(), N);

    const auto b = static_cast<Eigen::Index>(k + 3);
    Eigen::MatrixXd X(N, b);
    X.col(0) = U;
    X.col(1) = dU;
    for (Eigen::Index c = 2; c < b; ++c)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = sg->x(j);
            X(j, c) = u[j] * std::pow(x / std::sqrt(1.0 + x * x), static_cast<double>(c));
        }
    {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
        X = qr.householderQ() * Eigen::MatrixXd::Identity(N, b);
    }
    Eigen::MatrixXd AX(N, b);
    for (Eigen::Index c = 0; c < b; ++c) AX.col(c) = L(X.col(c));
    Eigen::VectorXd lam;
    {
        Eigen::MatrixXd H = X.transpose() * AX;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
        X = X * es.eigenvectors();
        AX = AX * es.eigenvectors();
        lam = es.eigenvalues();
    }

    const double tol = 1e-8;
    const int maxit = 300;
    Eigen::MatrixXd P(N, 0), AP(N, 0);
    SpectrumResult out;
    Eigen::VectorXd rn(b);
    int it = 0;
    for (;; ++it) {
        Eigen::MatrixXd R = AX - X * lam.asDiagonal();
        bool done = true;
        for (Eigen::Index c = 0; c < b; ++c) {
            rn(c) = R.col(c).norm();
            // eigenvalues below the essential spectrum (which starts at 1) must converge
            if (lam(c) < 0.9 && rn(c) > tol) done = false;
        }
        if (done || it >= maxit) break;

        Eigen::MatrixXd S(N, b + b + P.cols());
        S.leftCols(b) = X;
        for (Eigen::Index c = 0; c < b; ++c) S.col(b + c) = T(R.col(c));
        if (P.cols()) S.rightCols(P.cols()) = P;
        std::vector<Eigen::Index> kept;
        orthonormalize_columns(S, static_cast<std::size_t>(b), kept);
        const auto m = static_cast<Eigen::Index>(kept.size());
        Eigen::MatrixXd Q(N, m), AQ(N, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            Q.col(c) = S.col(kept[c]);
            AQ.col(c) = c < b ? Eigen::VectorXd(AX.col(c)) : L(Q.col(c));
        }
        Eigen::MatrixXd H = Q.transpose() * AQ;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
        const Eigen::MatrixXd Y = es.eigenvectors().leftCols(b);
        lam = es.eigenvalues().head(b);
        P = Q.rightCols(m - b) * Y.bottomRows(m - b);
        AP = AQ.rightCols(m - b) * Y.bottomRows(m - b);
        X = Q * Y;
        AX = AQ * Y;
    }
    out.iterations = it;
    for (Eigen::Index c = 0; c < b; ++c)
        if (lam(c) < 0.9 && rn(c) > tol)
            throw NumericalError("spectrum: eigensolver did not converge (residual " + std::to_string(rn(c)) + ")");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto c) { return std::abs(lam(a)) < std::abs(lam(c)); });
    for (std::size_t i = 0; i < k; ++i) {
        const auto c = order[i];
        out.eigenvalues.push_back(lam(c));
        out.residual_norms.push_back(rn(c));
        out.eigenvectors.emplace_back(X.col(c).data(), X.col(c).data() + n);
    }
    out.near_zero = out.eigenvalues.front();
    out.lowest = lam(0);
    const auto c0 = order.front();
    out.overlap_derivative = std::abs(X.col(c0).dot(dU)) / (X.col(c0).norm() * dU.norm());
    out.derivative_mode_residual = L(dU).norm() / dU.norm();

    const Eigen::VectorXd LU = L(U);
    double up1 = 0.0;
    out.LU_residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        up1 += std::pow(u[j], p + 1.0);
        out.LU_residual = std::max(out.LU_residual, std::abs(LU(j) - (1.0 - p) * pos_pow(u[j], p)));
    }
    const double quad = LU.dot(U);
    out.rayleigh_U = quad / U.squaredNorm();
    out.morse_identity = std::abs(quad - (1.0 - p) * up1) / std::abs((1.0 - p) * up1);
    return out;
}

// ------------------------------------------------------------------ constants

RieszProfile riesz_profile(const GroundState& G) {
    const auto& g = G.U.grid();
    const std::size_t n = g.size();
    RieszKernel K(G.P.N, G.P.s, g.h(), n);
    Vec u2(n);
    for (std::size_t i = 0; i < n; ++i) u2[i] = G.U[i] * G.U[i];
    RieszProfile R{riesz_apply(K, Field(G.U.grid_ptr(), std::move(u2), ExteriorRule::Free)), 0.0, nullptr};
    for (double w : R.W.values())
        if (!(w > 0.0)) throw NumericalError("riesz profile: W is not positive");
    const std::size_t c = n / 2;
    const double L = G.opt.L;
    Vec fx, fy, hx, hy;
    for (std::size_t i = c; i < n; ++i) {
        const double x = g.x(i) - g.x(c);
        if (x >= 0.25 * L && x <= 0.5 * L) {
            fx.push_back(x);
            fy.push_back(R.W[i]);
        }
        hx.push_back(x);
        hy.push_back(R.W[i]);
    }
    R.tail_slope = fit_loglog(fx, fy).slope;
    R.interp = std::make_shared<ProfileInterpolant>(std::move(hx), std::move(hy), Vec{}, -R.tail_slope);
    return R;
}

LimitConstants limit_constants(const GroundState& G, const RieszProfile& Wp) {
    require_same_grid(G.U, Wp.W);
    const auto& g = G.U.grid();
    const std::size_t n = g.size();
    const double p = G.P.p, h = g.h();
    LimitConstants k;
    double up1 = 0.0, u2 = 0.0, u2w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = G.U[i];
        up1 += std::pow(u, p + 1.0);
        u2 += u * u;
        u2w += u * u * Wp.W[i];
    }
    k.A1 = (0.5 - 1.0 / (p + 1.0)) * h * up1;
    k.B = h * u2;
    k.A2 = h * u2w;

    // c_{N,s} sum sum U^2 U^2 |x-y|^{2s-N} on every second node of |x| <= 100
    const std::size_t c = n / 2;
    const double X = std::min(100.0, 0.5 * G.opt.L);
    const auto half = static_cast<std::size_t>(X / (2.0 * h));
    Vec f;
    for (std::size_t i = c - 2 * half; i <= c + 2 * half; i += 2) f.push_back(G.U[i] * G.U[i]);
    const double h2 = 2.0 * h;
    RieszKernel K(G.P.N, G.P.s, h2, f.size());
    double dd = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) row += K[i > j ? i - j : j - i] * f[j];
        dd += f[i] * row;
    }
    k.A2_double = h2 * dd;
    return k;
}

// ------------------------------------------------------------------ rescale

namespace {

template <class F>
Field rescaled(const GroundState& G, const ModelParams& P, double xi, const GridPtr& grid, F&& f) {
    if (!(P.eps > 0.0)) throw ConfigError("rescale: eps must be positive");
    double zmax = 0.0;
    for (std::size_t j = 0; j < grid->size(); ++j) zmax = std::max(zmax, std::abs(grid->x(j) - xi) / P.eps);
    if (zmax > G.window()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "profile window exhausted: need L >= %.6g (have %.6g)", zmax, G.window());
        throw NumericalError(buf);
    }
    Vec v(grid->size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f((grid->x(j) - xi) / P.eps);
    return Field(grid, std::move(v), ExteriorRule::Free);
}

} // namespace

Field rescale_to(const GroundState& G, const ModelParams& P, double xi, const GridPtr& grid) {
    return rescaled(G, P, xi, grid, [&](double z) { return G.profile(z); });
}

Field rescale_derivative(const GroundState& G, const ModelParams& P, double xi, const GridPtr& grid) {
    return rescaled(G, P, xi, grid, [&](double z) { return -G.profile_derivative(z) / P.eps; });
}

// ------------------------------------------------------------------ storage

void save_ground_state(const GroundState& G, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_binary(G.U_solve, dir / "U_solve");
    nlohmann::json j;
    j["N"] = G.P.N;
    j["s"] = G.P.s;
    j["p"] = G.P.p;
    j["L"] = G.opt.L;
    j["n"] = G.opt.n;
    j["pad"] = G.opt.pad;
    j["tol"] = G.opt.tol;
    j["tail_floor"] = G.opt.tail_floor;
    j["warm_iterations"] = G.warm_iterations;
    j["newton_iterations"] = G.newton_iterations;
    j["peak_value"] = G.peak_value;
    j["residual_norm"] = G.residual_norm;
    std::ofstream(dir / "ground.json") << j.dump(2) << "\n";
}

GroundState load_ground_state(const std::filesystem::path& dir) {
    std::ifstream in(dir / "ground.json");
    if (!in) throw DependencyError("ground state not found in " + dir.string() + " (run `fracpeak ground` first)");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DependencyError("ground state metadata unreadable: " + std::string(e.what()));
    }
    GroundState G;
    G.P.N = j.at("N");
    G.P.s = j.at("s");
    G.P.p = j.at("p");
    G.opt.L = j.at("L");
    G.opt.n = j.at("n");
    G.opt.pad = j.at("pad");
    G.opt.tol = j.at("tol");
    G.opt.tail_floor = j.at("tail_floor");
    G.warm_iterations = j.at("warm_iterations");
    G.newton_iterations = j.at("newton_iterations");
    G.U_solve = read_binary(dir / "U_solve");
    finish(G);
    return G;
}

} // namespace fracpeak
