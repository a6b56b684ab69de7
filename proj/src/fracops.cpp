#include "fracpeak/fracops.hpp"

#include "fracpeak/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fracpeak {

double fractional_laplacian_constant(int N, double s) {
    const double n2 = 0.5 * N;
    return std::pow(4.0, s) * std::tgamma(n2 + s) / (std::pow(std::numbers::pi, n2) * std::abs(std::tgamma(-s)));
}

double riesz_constant(int N, double s) {
    const double n2 = 0.5 * N;
    return std::tgamma(n2 - s) / (std::pow(4.0, s) * std::pow(std::numbers::pi, n2) * std::tgamma(s));
}

// ---------------------------------------------------------------- line

LineMultiplierPlan::LineMultiplierPlan(GridPtr grid, double s, double tail_floor)
    : grid_(std::move(grid)), s_(s), floor_(tail_floor) {
    k_ = rfft_wavenumbers(grid_->size(), grid_->h());
    symbol_.resize(k_.size());
    for (std::size_t j = 0; j < k_.size(); ++j) symbol_[j] = j == 0 ? 0.0 : std::pow(k_[j], 2.0 * s_);
    fft_ = std::make_shared<RealFft>(grid_->size());
}

std::vector<double> LineMultiplierPlan::multiply(std::span<const double> u, std::span<const double> m) const {
    auto U = fft_->forward(u);
    for (std::size_t j = 0; j < U.size(); ++j) U[j] *= m[j];
    return fft_->inverse(U);
}

std::vector<double> LineMultiplierPlan::apply(std::span<const double> u) const { return multiply(u, symbol_); }

std::vector<double> LineMultiplierPlan::resolvent(std::span<const double> u, double shift) const {
    std::vector<double> m(symbol_.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = 1.0 / (symbol_[j] + shift);
    return multiply(u, m);
}

std::vector<double> LineMultiplierPlan::derivative(std::span<const double> u) const {
    auto U = fft_->forward(u);
    const std::size_t n = grid_->size();
    for (std::size_t j = 0; j < U.size(); ++j) {
        if (n % 2 == 0 && j == n / 2)
            U[j] = 0.0;
        else
            U[j] *= std::complex<double>(0.0, k_[j]);
    }
    return fft_->inverse(U);
}

double LineMultiplierPlan::tail_ratio(std::span<const double> u) const {
    double mx = 0.0;
    for (double v : u) mx = std::max(mx, std::abs(v));
    if (mx == 0.0) return 0.0;
    return std::max(std::abs(u.front()), std::abs(u.back())) / mx;
}

Field LineMultiplierPlan::apply(const Field& u) const {
    if (!u.grid().same_as(*grid_)) throw ConfigError("apply_line: grid mismatch");
    const double t = tail_ratio(u.values());
    if (t > floor_) spdlog::warn("apply_line: window-edge tail {:.3e} above floor {:.1e}", t, floor_);
    return Field(grid_, apply(u.values()), ExteriorRule::Free);
}

Field apply_line(const LineMultiplierPlan& plan, const Field& u) { return plan.apply(u); }

// ---------------------------------------------------------------- weights

namespace {
// second difference of t^a / (a(a-1)) at integer k, times nothing; small k only
double second_diff_pow(double a, double k) {
    return (std::pow(k + 1.0, a) - 2.0 * std::pow(k, a) + std::pow(k - 1.0, a)) / (a * (a - 1.0));
}

constexpr std::size_t kSeriesFrom = 40;

// second difference of F with F'' = t^b, divided by h^2 and normalized by
// k^b: sum_j 2/(2j+2)! * b(b-1)...(b-2j+1) k^{-2j}
std::vector<double> even_moment_coefficients(double b) {
    std::vector<double> c(6);
    double fall = 1.0, fact = 2.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        c[j] = 2.0 * fall / fact;
        fall *= (b - 2.0 * j) * (b - 2.0 * j - 1.0);
        fact *= (2.0 * j + 3.0) * (2.0 * j + 4.0);
    }
    return c;
}

double series(const std::vector<double>& c, double k) {
    const double k2 = 1.0 / (k * k);
    double acc = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) acc = acc * k2 + c[j];
    return acc;
}
} // namespace

HypersingularWeights::HypersingularWeights(double h, double s, std::size_t kmax) : h_(h), s_(s), w_(kmax + 1, 0.0) {
    const double hs = std::pow(h, -2.0 * s);
    const double taylor = 1.0 / (2.0 - 2.0 * s);
    const bool log_case = std::abs(s - 0.5) < 1e-14;
    const double a = 1.0 - 2.0 * s;
    if (kmax >= 1) {
        if (log_case)
            w_[1] = hs * (taylor + 1.0 - std::log(2.0));
        else
            w_[1] = hs * (taylor + 1.0 / (2.0 * s) + (std::pow(2.0, a) - 1.0) / (2.0 * s * (2.0 * s - 1.0)));
    }
    // far offsets: central-difference expansion of the second difference
    const auto coef = even_moment_coefficients(-1.0 - 2.0 * s);
    for (std::size_t k = 2; k <= kmax; ++k) {
        const double kk = static_cast<double>(k);
        if (k >= kSeriesFrom) {
            w_[k] = hs * std::pow(kk, -1.0 - 2.0 * s) * series(coef, kk);
        } else if (log_case) {
            w_[k] = -hs * std::log1p(-1.0 / (kk * kk));
        } else {
            w_[k] = hs * second_diff_pow(a, kk);
        }
    }
    total_ = log_case ? hs * (taylor + 1.0) : hs * (taylor + 1.0 / (2.0 * s));
    // tails as total minus the stored weights, so that row sums, the
    // diagonal 2C*total and the pair form agree to round-off
    tails_.assign(kmax + 1, total_);
    long double acc = 0.0L;
    for (std::size_t k = 1; k <= kmax; ++k) {
        acc += w_[k];
        tails_[k] = static_cast<double>(static_cast<long double>(total_) - acc);
    }
}

double HypersingularWeights::tail(std::size_t K) const {
    return K < tails_.size() ? tails_[K] : tail_closed(K);
}

double HypersingularWeights::tail_closed(std::size_t K) const {
    if (K == 0) return total_;
    const double hs = std::pow(h_, -2.0 * s_);
    const double kk = static_cast<double>(K);
    if (std::abs(s_ - 0.5) < 1e-14) return hs * std::log1p(1.0 / kk);
    const double a = 1.0 - 2.0 * s_;
    // [K^a - (K+1)^a] / (2s(2s-1)) without cancellation
    return hs * std::pow(kk, a) * (-std::expm1(a * std::log1p(1.0 / kk))) / (2.0 * s_ * (2.0 * s_ - 1.0));
}

// ---------------------------------------------------------------- domain

NonlocalMatrix::NonlocalMatrix(GridPtr grid, const ModelParams& P)
    : grid_(std::move(grid)), s_(P.s), C_(fractional_laplacian_constant(P.N, P.s)),
      w_(grid_->h(), P.s, grid_->size()) {
    if (P.N != 1) throw ConfigError("domain operator: only N = 1 is discretized");
    const auto idx = grid_->interior();
    const auto m = static_cast<Eigen::Index>(idx.size());
    if (m == 0) throw ConfigError("domain operator: empty domain mask");
    A_.resize(m, m);
    const double diag = 2.0 * C_ * w_.total();
    for (Eigen::Index i = 0; i < m; ++i) {
        A_(i, i) = diag;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const auto off = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)] - idx[static_cast<std::size_t>(i)]);
            A_(i, j) = A_(j, i) = -C_ * w_[off];
        }
    }
}

NonlocalMatrix build_domain_operator(GridPtr grid, const ModelParams& P) { return NonlocalMatrix(std::move(grid), P); }

double NonlocalMatrix::window_tail(std::size_t j) const { return w_.tail(j) + w_.tail(grid_->size() - 1 - j); }

Eigen::VectorXd NonlocalMatrix::to_interior(const Field& u) const {
    if (!u.grid().same_as(*grid_)) throw ConfigError("domain operator: grid mismatch");
    const auto idx = grid_->interior();
    Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) v(static_cast<Eigen::Index>(i)) = u[idx[i]];
    return v;
}

Eigen::VectorXd NonlocalMatrix::exterior_coupling(const Field& g) const {
    if (!g.grid().same_as(*grid_)) throw ConfigError("domain operator: grid mismatch");
    const auto idx = grid_->interior();
    const auto ext = grid_->exterior();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        double acc = 0.0;
        for (auto k : ext) {
            if (g[k] == 0.0) continue;
            const auto off = k > idx[i] ? k - idx[i] : idx[i] - k;
            acc += w_[off] * g[k];
        }
        r(static_cast<Eigen::Index>(i)) = C_ * acc;
    }
    return r;
}

Eigen::VectorXd NonlocalMatrix::apply_full(const Field& u) const {
    return A_ * to_interior(u) - exterior_coupling(u);
}

Eigen::VectorXd NonlocalMatrix::far_coupling(const std::function<double(double)>& g) const {
    const auto idx = grid_->interior();
    const double h = grid_->h();
    const double left = grid_->x(0) - 0.5 * h;
    const double right = grid_->x(grid_->size() - 1) + 0.5 * h;
    const double q = -1.0 - 2.0 * s_;
    // one composite Gauss rule on doubling panels [a, 2a] beyond each edge,
    // shared by all nodes; the kernel is smooth there on the panel scale
    const double gap = std::min(grid_->x(idx.front()) - left, right - grid_->x(idx.back()));
    using gl = boost::math::quadrature::gauss<double, 16>;
    std::vector<double> t, w;
    const auto panel = [&](double a, double b) {
        const double c = 0.5 * (a + b), r = 0.5 * (b - a);
        const auto& x = gl::abscissa();
        const auto& wt = gl::weights();
        for (std::size_t k = 0; k < x.size(); ++k) {
            t.push_back(c + r * x[k]);
            w.push_back(r * wt[k]);
            if (x[k] != 0.0) {
                t.push_back(c - r * x[k]);
                w.push_back(r * wt[k]);
            }
        }
    };
    double a = 0.5 * gap;
    panel(0.0, a);
    for (int j = 0; j < 64; ++j, a *= 2.0) panel(a, 2.0 * a);
    std::vector<double> gr(t.size()), gl_(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        gr[k] = w[k] * g(right + t[k]);
        gl_[k] = w[k] * g(left - t[k]);
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double xi = grid_->x(idx[i]);
        const double dr = right - xi, dl = xi - left;
        double acc = 0.0;
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (gr[k] != 0.0) acc += gr[k] * std::pow(dr + t[k], q);
            if (gl_[k] != 0.0) acc += gl_[k] * std::pow(dl + t[k], q);
        }
        r(static_cast<Eigen::Index>(i)) = C_ * acc;
    }
    return r;
}

std::vector<double> NonlocalMatrix::exterior_transpose(const Eigen::VectorXd& v) const {
    const auto idx = grid_->interior();
    std::vector<double> out(grid_->size(), 0.0);
    for (auto k : grid_->exterior()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto off = k > idx[i] ? k - idx[i] : idx[i] - k;
            acc += w_[off] * v(static_cast<Eigen::Index>(i));
        }
        out[k] = C_ * acc;
    }
    return out;
}

Field NonlocalMatrix::normal_derivative(const Field& u) const {
    if (!u.grid().same_as(*grid_)) throw ConfigError("normal derivative: grid mismatch");
    const auto idx = grid_->interior();
    std::vector<double> out(grid_->size(), 0.0);
    for (auto k : grid_->exterior()) {
        double acc = 0.0;
        for (auto j : idx) {
            const auto off = k > j ? k - j : j - k;
            acc += w_[off] * (u[k] - u[j]);
        }
        out[k] = C_ * acc;
    }
    return Field(grid_, std::move(out), ExteriorRule::Free);
}

double NonlocalMatrix::bilinear(const Field& u, const Field& v) const {
    require_same_grid(u, v);
    if (!u.grid().same_as(*grid_)) throw ConfigError("bilinear: grid mismatch");
    const auto idx = grid_->interior();
    const auto ext = grid_->exterior();
    double inner = 0.0, cross = 0.0, far = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        const auto i = idx[a];
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const auto j = idx[b];
            inner += w_[j - i] * (u[i] - u[j]) * (v[i] - v[j]);
        }
        for (auto k : ext) {
            const auto off = k > i ? k - i : i - k;
            cross += w_[off] * (u[i] - u[k]) * (v[i] - v[k]);
        }
        far += window_tail(i) * u[i] * v[i];
    }
    return grid_->h() * C_ * (inner + cross + far);
}

// ---------------------------------------------------------------- solvers

ScreenedSolver::ScreenedSolver(std::shared_ptr<const NonlocalMatrix> A, double eps)
    : A_(std::move(A)), eps_(eps), e2s_(std::pow(eps, 2.0 * A_->s())) {
    if (!(eps > 0.0)) throw ConfigError("screened solve: eps > 0 required");
    Eigen::MatrixXd M = e2s_ * A_->matrix();
    M.diagonal().array() += 1.0;
    llt_.compute(M);
    if (llt_.info() != Eigen::Success) throw NumericalError("screened solve: factorization failed");
}

Eigen::VectorXd ScreenedSolver::solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
Eigen::MatrixXd ScreenedSolver::solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

Eigen::VectorXd ScreenedSolver::apply(const Eigen::VectorXd& v) const { return e2s_ * (A_->matrix() * v) + v; }

double ScreenedSolver::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return A_->grid().h() * u.dot(apply(v));
}

Field ScreenedSolver::solve_field(const Field& rhs) const {
    const Eigen::VectorXd r = A_->to_interior(rhs);
    const Eigen::VectorXd u = solve(r);
    if (r.minCoeff() >= 0.0) {
        const double scale = std::max(u.cwiseAbs().maxCoeff(), 1e-300);
        if (u.minCoeff() < -1e-12 * scale) throw NumericalError("screened solve: maximum principle violated");
    }
    return Field::from_interior(A_->grid_ptr(), std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
}

PoissonSolver::PoissonSolver(std::shared_ptr<const NonlocalMatrix> A) : A_(std::move(A)) {
    llt_.compute(A_->matrix());
    if (llt_.info() != Eigen::Success) throw NumericalError("poisson solve: factorization failed");
}

Eigen::VectorXd PoissonSolver::solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

Field solve_screened(GridPtr grid, const ModelParams& P, const Field& rhs) {
    auto A = std::make_shared<const NonlocalMatrix>(std::move(grid), P);
    ScreenedSolver S(A, P.eps);
    return S.solve_field(rhs);
}

// ---------------------------------------------------------------- riesz

RieszKernel::RieszKernel(int N, double s, double h, std::size_t kmax)
    : s_(s), h_(h), c_(riesz_constant(N, s)), rho_(kmax + 1) {
    if (N != 1) throw ConfigError("riesz kernel: only N = 1 is tabulated");
    const double hs = c_ * std::pow(h, 2.0 * s);
    const double a = 2.0 * s + 1.0;
    rho_[0] = 2.0 * hs / (2.0 * s * a);
    const auto coef = even_moment_coefficients(2.0 * s - 1.0);
    for (std::size_t k = 1; k <= kmax; ++k) {
        const double kk = static_cast<double>(k);
        if (k >= kSeriesFrom)
            rho_[k] = hs * std::pow(kk, 2.0 * s - 1.0) * series(coef, kk);
        else
            rho_[k] = hs * second_diff_pow(a, kk);
    }
}

double RieszKernel::value(double x) const { return c_ * std::pow(std::abs(x), 2.0 * s_ - 1.0); }

Field riesz_apply(const RieszKernel& K, const Field& f) {
    const auto& g = f.grid();
    if (std::abs(g.h() - K.h()) > 1e-12 * K.h()) throw ConfigError("riesz_apply: kernel spacing does not match grid");
    if (K.table().size() < g.size()) throw ConfigError("riesz_apply: kernel table too short");
    auto y = toeplitz_apply(K.table(), f.values());
    return Field(f.grid_ptr(), std::move(y), ExteriorRule::Free);
}

// ---------------------------------------------------------------- identity

Field nonlocal_normal_derivative(const Field& u, const NonlocalMatrix& A) { return A.normal_derivative(u); }

double GreenIdentityTerms::scale() const {
    return std::max({std::abs(bilinear), std::abs(interior), std::abs(exterior)});
}

GreenIdentityTerms green_identity(const NonlocalMatrix& A, const Field& u, const Field& v) {
    require_same_grid(u, v);
    GreenIdentityTerms t;
    const auto& g = A.grid();
    const double h = g.h();
    t.bilinear = A.bilinear(u, v);
    const Eigen::VectorXd Au = A.apply_full(u);
    const auto idx = g.interior();
    for (std::size_t i = 0; i < idx.size(); ++i) t.interior += h * v[idx[i]] * Au(static_cast<Eigen::Index>(i));
    const Field Nu = A.normal_derivative(u);
    for (auto k : g.exterior()) t.exterior += h * v[k] * Nu[k];
    t.residual = std::abs(t.bilinear - t.interior - t.exterior);
    return t;
}

double green_identity_residual(const Field& u, const Field& v, const NonlocalMatrix& A) {
    return green_identity(A, u, v).residual;
}

} // namespace fracpeak
