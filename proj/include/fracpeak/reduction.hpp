#pragma once

#include "fracpeak/exponents.hpp"
#include "fracpeak/fracops.hpp"
#include "fracpeak/greenfn.hpp"
#include "fracpeak/groundstate.hpp"
#include "fracpeak/projection.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fracpeak {

// Everything below works on interior vectors of one grid. Integrals are
// h-weighted sums, <u,v>_eps = h u^T (eps^{2s}A + I) v, and the Riesz
// representer of w -> h f^T w is (eps^{2s}A + I)^{-1} f.

// one factorization pair per (grid, eps), shared by every xi
class ReductionWorkspace {
public:
    ReductionWorkspace(const ModelParams& P, GridPtr grid, double eps);

    const ModelParams& params() const { return P_; }
    const GridPtr& grid() const { return grid_; }
    double eps() const { return P_.eps; }
    double h() const { return grid_->h(); }
    std::size_t m() const { return grid_->interior_count(); }
    const std::shared_ptr<const NonlocalMatrix>& op() const { return A_; }
    const ScreenedSolver& screened() const { return *screened_; }
    const PoissonSolver& poisson() const { return *poisson_; }

    double integral(const Eigen::VectorXd& f) const { return h() * f.sum(); }
    double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return screened_->inner(u, v); }
    double norm(const Eigen::VectorXd& u) const;
    // Phi[f] on the interior
    Eigen::VectorXd phi(const Eigen::VectorXd& f) const { return poisson_->solve(f); }
    // representer of the functional w -> int f w
    Eigen::VectorXd represent(const Eigen::VectorXd& f) const { return screened_->solve(f); }

private:
    ModelParams P_;
    GridPtr grid_;
    std::shared_ptr<const NonlocalMatrix> A_;
    std::unique_ptr<ScreenedSolver> screened_;
    std::unique_ptr<PoissonSolver> poisson_;
};

struct EnergyParts {
    double kinetic = 0.0;   // 1/2 |u|_eps^2
    double poisson = 0.0;   // 1/4 int Phi[u^2] u^2
    double power = 0.0;     // 1/(p+1) int u_+^{p+1}
    double total = 0.0;
    bool negative_part = false;  // u < 0 somewhere; dropped from the power term
};

EnergyParts energy_parts(const ReductionWorkspace& W, const Eigen::VectorXd& u);
double energy(const ReductionWorkspace& W, const Eigen::VectorXd& u);
// u must vanish outside the domain
double energy(const ModelParams& P, const GridPtr& grid, const Field& u);

struct TangentBasis {
    Eigen::VectorXd Z;          // d PU / d xi on the interior
    double gram = 0.0;          // <Z, Z>_eps
    double fd_mismatch = 0.0;   // |Z - centered difference|_eps / |Z|_eps
    bool flagged = false;
};

struct ReductionOptions {
    ProjectionOptions projection;
    double fd_tol = 0.01;
    bool cross_check = true;
    double step_tol = 1e-10;  // times eps^{N/2}
    int max_iterations = 50;
};

TangentBasis tangent_basis(const ReductionWorkspace& W, const GroundState& G, const ProjectionResult& R,
                           const ReductionOptions& opt = {});

// The reduced problem at one (eps, xi): l, the operator A of Q, the remainder
// R and its gradient, all as representers in E = {w : <w, Z>_eps = 0}.
class ReducedProblem {
public:
    ReducedProblem(const ReductionWorkspace& W, const GroundState& G, double xi, const ReductionOptions& opt = {});

    const ReductionWorkspace& workspace() const { return *W_; }
    const ProjectionResult& projection() const { return R_; }
    const TangentBasis& tangent() const { return T_; }
    const ReductionOptions& options() const { return opt_; }
    const Eigen::VectorXd& PU() const { return pu_; }
    const Eigen::VectorXd& phi_PU2() const { return phi_pu2_; }
    double xi() const { return R_.xi; }
    double d() const { return R_.d; }
    double eps() const { return W_->eps(); }

    Eigen::VectorXd project_E(const Eigen::VectorXd& w) const;

    // L(w) = int (U^p - PU^p) w + int Phi[PU^2] PU w, the projection equation
    // having absorbed <PU, w>_eps - int U^p w
    Eigen::VectorXd l() const;
    double L(const Eigen::VectorXd& w) const;
    double Q(const Eigen::VectorXd& w1, const Eigen::VectorXd& w2) const;
    Eigen::VectorXd apply_A(const Eigen::VectorXd& w) const;
    double remainder(const Eigen::VectorXd& w) const;
    Eigen::VectorXd remainder_gradient(const Eigen::VectorXd& w) const;

    // spectral data of A on E (dense, built on first use)
    double coercivity() const;
    // smallest |eigenvalue| of Q against <.,.>_eps on the full space
    double coercivity_unprojected() const;
    Eigen::VectorXd solve_A(const Eigen::VectorXd& rhs) const;

private:
    Eigen::VectorXd q_density(const Eigen::VectorXd& w) const;
    Eigen::VectorXd remainder_density(const Eigen::VectorXd& w) const;
    void build_spectrum() const;

    const ReductionWorkspace* W_;
    ReductionOptions opt_;
    ProjectionResult R_;
    TangentBasis T_;
    Eigen::VectorXd u_, up_, pu_, pup_, pup1_, phi_pu2_;

    struct Spectrum;
    mutable std::shared_ptr<Spectrum> spec_;
};

// representer and its eps-norm
struct LFunctional {
    Eigen::VectorXd l;
    double norm = 0.0;
    double z_overlap = 0.0;  // |<l, Z>| / (|l| |Z|)
};
LFunctional l_functional(const ReducedProblem& RP);
Eigen::VectorXd apply_A(const ReducedProblem& RP, const Eigen::VectorXd& w);
double coercivity_estimate(const ReducedProblem& RP);

struct Corrector {
    Eigen::VectorXd omega;
    double norm_eps = 0.0;
    int iterations = 0;
    double contraction_factor = 0.0;  // max ratio of successive step norms; inf on blow-up
    std::vector<double> steps;
    bool converged = false;
    bool constraint_ok = false;       // |omega| <= PU
    double constraint_excess = 0.0;   // max (|omega| - PU), over the domain
    double z_overlap = 0.0;
    bool flagged() const { return !converged || contraction_factor >= 1.0 || !constraint_ok; }
};

struct CorrectorOptions {
    std::optional<Eigen::VectorXd> start;  // projected onto E before use
    bool zero_l = false;                   // homogeneous map, for the trivial check
};

Corrector solve_corrector(const ReducedProblem& RP, const CorrectorOptions& opt = {});

// M_eps(xi) = J(PU + omega)
double reduced_energy(const ReducedProblem& RP, const Corrector& C);

struct EnergyBreakdown {
    double eps = 0.0, xi = 0.0, d = 0.0;
    double J_PU = 0.0;
    double term_A1 = 0.0;     // eps^N A1
    double term_A2 = 0.0;     // eps^{N+2s} A2 / 4
    double term_green = 0.0;  // -eps^{2N} B^2 H(xi, xi) / 4
    double term_tau = 0.0;    // tau / 2
    double residual = 0.0;    // J_PU minus the four terms
    double budget = 0.0;      // eps^N [(eps/d)^{(1+p)(N+2s)-N} + mu + eps^{2s+zeta0(N-2s)}]
    double ratio = 0.0;       // |residual| / budget
};

EnergyBreakdown energy_expansion_check(const ReducedProblem& RP, const LimitConstants& K, const GreenTable& H,
                                       const ReductionParams& rp);
EnergyBreakdown energy_expansion_check(const ReductionWorkspace& W, const LimitConstants& K, const GreenTable& H,
                                       const ProjectionResult& R, const ReductionParams& rp);

} // namespace fracpeak
