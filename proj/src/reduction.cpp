#include "fracpeak/reduction.hpp"

#include "fracpeak/errors.hpp"
#include "fracpeak/poisson.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fracpeak {

ReductionWorkspace::ReductionWorkspace(const ModelParams& P, GridPtr grid, double eps) : P_(P), grid_(std::move(grid)) {
    P_.eps = eps;
    P_.domain = grid_->domain();
    P_.validate();
    A_ = std::make_shared<const NonlocalMatrix>(grid_, P_);
    screened_ = std::make_unique<ScreenedSolver>(A_, eps);
    poisson_ = std::make_unique<PoissonSolver>(A_);
}

double ReductionWorkspace::norm(const Eigen::VectorXd& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

EnergyParts energy_parts(const ReductionWorkspace& W, const Eigen::VectorXd& u) {
    const double p = W.params().p;
    EnergyParts e;
    const Eigen::VectorXd u2 = u.cwiseProduct(u);
    e.kinetic = 0.5 * W.inner(u, u);
    e.poisson = 0.25 * W.h() * W.phi(u2).dot(u2);
    double pw = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) < 0.0) e.negative_part = true;
        else pw += std::pow(u(i), p + 1.0);
    }
    e.power = W.h() * pw / (p + 1.0);
    e.total = e.kinetic + e.poisson - e.power;
    return e;
}

double energy(const ReductionWorkspace& W, const Eigen::VectorXd& u) { return energy_parts(W, u).total; }

double energy(const ModelParams& P, const GridPtr& grid, const Field& u) {
    if (!u.grid().same_as(*grid)) throw ConfigError("energy: field on a different grid");
    for (auto k : grid->exterior())
        if (u[k] != 0.0) throw ConfigError("energy: field must vanish outside the domain");
    ReductionWorkspace W(P, grid, P.eps);
    return energy(W, W.op()->to_interior(u));
}

namespace {

Eigen::VectorXd positive_power(const Eigen::VectorXd& u, double q) {
    Eigen::VectorXd out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = u(i) > 0.0 ? std::pow(u(i), q) : 0.0;
    return out;
}

} // namespace

TangentBasis tangent_basis(const ReductionWorkspace& W, const GroundState& G, const ProjectionResult& R,
                           const ReductionOptions& opt) {
    const auto& A = *W.op();
    if (!R.PU.grid().same_as(A.grid())) throw ConfigError("tangent basis: projection on a different grid");
    TangentBasis T;
    T.Z = A.to_interior(project_derivative(W.screened(), G, R));
    T.gram = W.inner(T.Z, T.Z);
    if (!(T.gram > 0.0)) throw NumericalError("tangent basis: Gram entry is not positive");
    if (opt.cross_check) {
        const auto& g = A.grid();
        ProjectionOptions loose = opt.projection;
        loose.min_d_over_h = std::min(loose.min_d_over_h, R.d / g.h() - 2.0);
        // centered differences at steps h and 2h, Richardson-combined: the
        // peak curvature makes the plain O((h/eps)^2) error several percent
        auto centered = [&](std::size_t k) -> Eigen::VectorXd {
            const auto Rp = project(W.screened(), G, g.x(R.node + k), loose);
            const auto Rm = project(W.screened(), G, g.x(R.node - k), loose);
            return (A.to_interior(Rp.PU) - A.to_interior(Rm.PU)) / (2.0 * static_cast<double>(k) * g.h());
        };
        const Eigen::VectorXd fd = (4.0 * centered(1) - centered(2)) / 3.0;
        T.fd_mismatch = W.norm(T.Z - fd) / std::sqrt(T.gram);
        T.flagged = T.fd_mismatch > opt.fd_tol;
    }
    return T;
}

struct ReducedProblem::Spectrum {
    Eigen::VectorXd v;       // Householder vector sending L^T Z to the first axis
    double beta = 0.0;
    Eigen::MatrixXd V;       // eigenvectors of the deflated block
    Eigen::VectorXd lambda;
    double unprojected = 0.0;
};

ReducedProblem::ReducedProblem(const ReductionWorkspace& W, const GroundState& G, double xi,
                               const ReductionOptions& opt)
    : W_(&W), opt_(opt), R_(project(W.screened(), G, xi, opt.projection)) {
    const auto& A = *W.op();
    const double p = W.params().p;
    u_ = A.to_interior(R_.U);
    pu_ = A.to_interior(R_.PU);
    up_ = positive_power(u_, p);
    pup_ = positive_power(pu_, p);
    pup1_ = p * positive_power(pu_, p - 1.0);
    phi_pu2_ = W.phi(pu_.cwiseProduct(pu_));
    T_ = tangent_basis(W, G, R_, opt);
}

Eigen::VectorXd ReducedProblem::project_E(const Eigen::VectorXd& w) const {
    return w - (W_->inner(w, T_.Z) / T_.gram) * T_.Z;
}

Eigen::VectorXd ReducedProblem::l() const {
    const Eigen::VectorXd f = up_ - pup_ + phi_pu2_.cwiseProduct(pu_);
    return project_E(W_->represent(f));
}

double ReducedProblem::L(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd f = up_ - pup_ + phi_pu2_.cwiseProduct(pu_);
    return W_->h() * f.dot(w);
}

Eigen::VectorXd ReducedProblem::q_density(const Eigen::VectorXd& w) const {
    return (phi_pu2_ - pup1_).cwiseProduct(w) + 2.0 * pu_.cwiseProduct(W_->phi(pu_.cwiseProduct(w)));
}

double ReducedProblem::Q(const Eigen::VectorXd& w1, const Eigen::VectorXd& w2) const {
    return W_->inner(w1, w2) + W_->h() * q_density(w1).dot(w2);
}

Eigen::VectorXd ReducedProblem::apply_A(const Eigen::VectorXd& w) const {
    return project_E(w + W_->represent(q_density(w)));
}

double ReducedProblem::remainder(const Eigen::VectorXd& w) const {
    const double p = W_->params().p;
    const Eigen::VectorXd w2 = w.cwiseProduct(w);
    const Eigen::VectorXd phw2 = W_->phi(w2);
    const double h = W_->h();
    const Eigen::VectorXd full = positive_power(pu_ + w, p + 1.0);
    const Eigen::VectorXd base = positive_power(pu_, p + 1.0);
    return h * (phw2.dot(pu_.cwiseProduct(w)) + 0.25 * phw2.dot(w2) - (full.sum() - base.sum()) / (p + 1.0) +
                pup_.dot(w) + 0.5 * pup1_.dot(w2));
}

Eigen::VectorXd ReducedProblem::remainder_density(const Eigen::VectorXd& w) const {
    const double p = W_->params().p;
    const Eigen::VectorXd phw2 = W_->phi(w.cwiseProduct(w));
    const Eigen::VectorXd phpw = W_->phi(pu_.cwiseProduct(w));
    const Eigen::VectorXd power = positive_power(pu_ + w, p) - pup_ - pup1_.cwiseProduct(w);
    return phw2.cwiseProduct(pu_) + 2.0 * phpw.cwiseProduct(w) + phw2.cwiseProduct(w) - power;
}

Eigen::VectorXd ReducedProblem::remainder_gradient(const Eigen::VectorXd& w) const {
    return project_E(W_->represent(remainder_density(w)));
}

void ReducedProblem::build_spectrum() const {
    if (spec_) return;
    const auto& M = W_->screened().factor();
    const auto& Pf = W_->poisson().factor();
    const Eigen::Index m = static_cast<Eigen::Index>(W_->m());
    auto S = std::make_shared<Spectrum>();

    // y = L^T w turns <.,.>_eps into h times the Euclidean product, and Q into
    // h y^T (I + X K X^T) y with X = L^{-1}, K = D + 2 diag(PU) A^{-1} diag(PU)
    Eigen::MatrixXd X = Eigen::MatrixXd::Identity(m, m);
    M.matrixL().solveInPlace(X);
    const Eigen::VectorXd D = phi_pu2_ - pup1_;
    Eigen::MatrixXd Y = pu_.asDiagonal() * X.transpose();
    Pf.matrixL().solveInPlace(Y);
    Eigen::MatrixXd Sm = Eigen::MatrixXd::Identity(m, m);
    Sm.noalias() += X * D.asDiagonal() * X.transpose();
    Sm.noalias() += 2.0 * Y.transpose() * Y;
    X.resize(0, 0);
    Y.resize(0, 0);
    Sm = 0.5 * (Sm + Sm.transpose()).eval();

    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sm, Eigen::EigenvaluesOnly);
        S->unprojected = es.eigenvalues().cwiseAbs().minCoeff();
    }

    const Eigen::VectorXd z = M.matrixU() * T_.Z;
    S->v = z;
    S->v(0) += (z(0) >= 0.0 ? 1.0 : -1.0) * z.norm();
    S->beta = S->v.squaredNorm();
    const Eigen::VectorXd Sv = Sm * S->v;
    const double a = S->v.dot(Sv);
    const double c = 2.0 / S->beta;
    Sm.noalias() -= c * (S->v * Sv.transpose() + Sv * S->v.transpose());
    Sm.noalias() += (c * c * a) * (S->v * S->v.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sm.bottomRightCorner(m - 1, m - 1));
    if (es.info() != Eigen::Success) throw NumericalError("reduction: eigensolver failed on the projected operator");
    S->V = es.eigenvectors();
    S->lambda = es.eigenvalues();
    spec_ = std::move(S);
}

double ReducedProblem::coercivity() const {
    build_spectrum();
    return spec_->lambda.cwiseAbs().minCoeff();
}

double ReducedProblem::coercivity_unprojected() const {
    build_spectrum();
    return spec_->unprojected;
}

Eigen::VectorXd ReducedProblem::solve_A(const Eigen::VectorXd& rhs) const {
    build_spectrum();
    const auto& M = W_->screened().factor();
    const auto& S = *spec_;
    const Eigen::Index m = rhs.size();
    auto householder = [&](Eigen::VectorXd y) {
        y -= (2.0 * S.v.dot(y) / S.beta) * S.v;
        return y;
    };
    const Eigen::VectorXd t = householder(M.matrixU() * project_E(rhs));
    Eigen::VectorXd coef = S.V.transpose() * t.tail(m - 1);
    coef = coef.cwiseQuotient(S.lambda);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    y.tail(m - 1) = S.V * coef;
    y = householder(std::move(y));
    return project_E(M.matrixU().solve(y));
}

LFunctional l_functional(const ReducedProblem& RP) {
    const auto& W = RP.workspace();
    LFunctional out;
    out.l = RP.l();
    out.norm = W.norm(out.l);
    const double zn = std::sqrt(RP.tangent().gram);
    out.z_overlap = out.norm > 0.0 ? std::abs(W.inner(out.l, RP.tangent().Z)) / (out.norm * zn) : 0.0;
    return out;
}

Eigen::VectorXd apply_A(const ReducedProblem& RP, const Eigen::VectorXd& w) { return RP.apply_A(w); }

double coercivity_estimate(const ReducedProblem& RP) { return RP.coercivity(); }

Corrector solve_corrector(const ReducedProblem& RP, const CorrectorOptions& opt) {
    const auto& W = RP.workspace();
    const double scale = std::pow(RP.eps(), 0.5 * W.params().N);
    const double tol = RP.options().step_tol * scale;
    const Eigen::Index m = static_cast<Eigen::Index>(W.m());
    const Eigen::VectorXd l = opt.zero_l ? Eigen::VectorXd::Zero(m) : RP.l();

    Corrector C;
    Eigen::VectorXd w = opt.start ? RP.project_E(*opt.start) : Eigen::VectorXd::Zero(m);
    const double blowup = 10.0 * W.norm(RP.PU());
    for (int k = 0; k < RP.options().max_iterations; ++k) {
        Eigen::VectorXd next = -RP.solve_A(l + RP.remainder_gradient(w));
        const double step = W.norm(next - w);
        C.steps.push_back(step);
        w = std::move(next);
        C.iterations = k + 1;
        if (step < tol) {
            C.converged = true;
            break;
        }
        if (!std::isfinite(step) || W.norm(w) > blowup) {
            C.contraction_factor = std::numeric_limits<double>::infinity();
            break;
        }
    }
    for (std::size_t k = 1; k < C.steps.size(); ++k) {
        if (C.steps[k - 1] > 1e3 * tol) C.contraction_factor = std::max(C.contraction_factor, C.steps[k] / C.steps[k - 1]);
    }
    C.omega = std::move(w);
    C.norm_eps = W.norm(C.omega);
    C.constraint_excess = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i)
        C.constraint_excess = std::max(C.constraint_excess, std::abs(C.omega(i)) - RP.PU()(i));
    C.constraint_ok = C.constraint_excess <= 0.0;
    const double zn = std::sqrt(RP.tangent().gram);
    C.z_overlap = C.norm_eps > 0.0 ? std::abs(W.inner(C.omega, RP.tangent().Z)) / (C.norm_eps * zn) : 0.0;
    if (C.flagged())
        spdlog::debug("corrector at xi={} eps={}: converged={} factor={} constraint={}", RP.xi(), RP.eps(),
                      C.converged, C.contraction_factor, C.constraint_ok);
    return C;
}

double reduced_energy(const ReducedProblem& RP, const Corrector& C) {
    return energy(RP.workspace(), RP.PU() + C.omega);
}

EnergyBreakdown energy_expansion_check(const ReductionWorkspace& W, const LimitConstants& K, const GreenTable& H,
                                       const ProjectionResult& R, const ReductionParams& rp) {
    if (std::abs(H.xi - R.xi) > 0.5 * W.h()) throw ConfigError("energy expansion: Green table built for another xi");
    const auto& P = W.params();
    const double N = P.N, s = P.s, p = P.p, eps = W.eps();
    EnergyBreakdown e;
    e.eps = eps;
    e.xi = R.xi;
    e.d = R.d;
    e.J_PU = energy(W, W.op()->to_interior(R.PU));
    e.term_A1 = std::pow(eps, N) * K.A1;
    e.term_A2 = 0.25 * std::pow(eps, N + 2 * s) * K.A2;
    e.term_green = -0.25 * std::pow(eps, 2 * N) * K.B * K.B * H.robin;
    e.term_tau = 0.5 * R.tau_direct;
    e.residual = e.J_PU - (e.term_A1 + e.term_A2 + e.term_green + e.term_tau);
    e.budget = std::pow(eps, N) * (std::pow(eps / e.d, (1 + p) * (N + 2 * s) - N) + expansion_order(P, eps, e.d) +
                                   std::pow(eps, 2 * s + rp.zeta0 * (N - 2 * s)));
    e.ratio = std::abs(e.residual) / e.budget;
    return e;
}

EnergyBreakdown energy_expansion_check(const ReducedProblem& RP, const LimitConstants& K, const GreenTable& H,
                                       const ReductionParams& rp) {
    return energy_expansion_check(RP.workspace(), K, H, RP.projection(), rp);
}

} // namespace fracpeak
