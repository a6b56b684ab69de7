#pragma once

#include "fracpeak/fft.hpp"
#include "fracpeak/gridcore.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace fracpeak {

// C_{N,s} = 4^s Gamma(N/2+s) / (pi^{N/2} |Gamma(-s)|)
double fractional_laplacian_constant(int N, double s);
// c_{N,s} = Gamma(N/2-s) / (4^s pi^{N/2} Gamma(s)), kernel of the inverse
double riesz_constant(int N, double s);

class LineMultiplierPlan {
public:
    LineMultiplierPlan(GridPtr grid, double s, double tail_floor = 1e-6);

    const Grid& grid() const { return *grid_; }
    double s() const { return s_; }
    const std::vector<double>& symbol() const { return symbol_; }
    const std::vector<double>& wavenumbers() const { return k_; }
    const RealFft& fft() const { return *fft_; }

    Field apply(const Field& u) const;
    std::vector<double> apply(std::span<const double> u) const;
    // (|k|^{2s} + shift)^{-1} u
    std::vector<double> resolvent(std::span<const double> u, double shift = 1.0) const;
    std::vector<double> derivative(std::span<const double> u) const;
    // generic real even multiplier, one value per rfft bin
    std::vector<double> multiply(std::span<const double> u, std::span<const double> m) const;

    // |edge value| / max|u|, compared against tail_floor by apply()
    double tail_ratio(std::span<const double> u) const;

private:
    GridPtr grid_;
    double s_, floor_;
    std::vector<double> k_, symbol_;
    std::shared_ptr<RealFft> fft_;
};

Field apply_line(const LineMultiplierPlan& plan, const Field& u);

// One-sided lattice weights w_k (k >= 1) of the hypersingular kernel
// |t|^{-1-2s}: product integration against hat functions for k >= 2, and
// for k = 1 the hat restricted to [h, 2h] plus the second-order Taylor moment
// of the cell [-h, h]. Units absorb h, so (Au)_i = C sum_j w_{|i-j|}(u_i - u_j).
class HypersingularWeights {
public:
    HypersingularWeights(double h, double s, std::size_t kmax);

    double operator[](std::size_t k) const { return w_[k]; }
    std::size_t kmax() const { return w_.size() - 1; }
    // sum over all k >= 1
    double total() const { return total_; }
    // sum over k > K, taken as total minus the stored weights
    double tail(std::size_t K) const;
    // the same sum in closed form
    double tail_closed(std::size_t K) const;

private:
    double h_, s_, total_;
    std::vector<double> w_, tails_;
};

// Restricted fractional Laplacian on the interior nodes of a grid, with the
// window nodes outside the domain available as exterior data carriers.
class NonlocalMatrix {
public:
    NonlocalMatrix(GridPtr grid, const ModelParams& P);

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    double s() const { return s_; }
    double C() const { return C_; }
    std::size_t m() const { return grid_->interior_count(); }
    const Eigen::MatrixXd& matrix() const { return A_; }
    const HypersingularWeights& weights() const { return w_; }
    // beyond-window kernel mass seen from window node j
    double window_tail(std::size_t j) const;

    Eigen::VectorXd apply(const Eigen::VectorXd& interior) const { return A_ * interior; }
    // (-D)^s at interior nodes of a field given on the whole window, using its
    // exterior values inside the window (zero beyond)
    Eigen::VectorXd apply_full(const Field& u) const;
    // C sum_{k exterior} w_{|i-k|} g_k for each interior node i
    Eigen::VectorXd exterior_coupling(const Field& g) const;
    // C int_{beyond window} g(y)|x_i - y|^{-1-2s} dy for each interior node i
    Eigen::VectorXd far_coupling(const std::function<double(double)>& g) const;
    // C sum_{j interior} w_{|k-j|} v_j at every exterior node k (zero on interior)
    std::vector<double> exterior_transpose(const Eigen::VectorXd& interior) const;

    // nonlocal normal derivative at exterior nodes; interior entries zero
    Field normal_derivative(const Field& u) const;
    // discrete bilinear form over pairs touching the domain
    double bilinear(const Field& u, const Field& v) const;

    Eigen::VectorXd to_interior(const Field& u) const;

private:
    GridPtr grid_;
    double s_, C_;
    HypersingularWeights w_;
    Eigen::MatrixXd A_;
};

NonlocalMatrix build_domain_operator(GridPtr grid, const ModelParams& P);

// Cholesky of eps^{2s} A + I
class ScreenedSolver {
public:
    ScreenedSolver(std::shared_ptr<const NonlocalMatrix> A, double eps);

    const NonlocalMatrix& op() const { return *A_; }
    const std::shared_ptr<const NonlocalMatrix>& op_ptr() const { return A_; }
    double eps() const { return eps_; }
    double e2s() const { return e2s_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    // h u^T (eps^{2s}A + I) v, the discrete <u,v>_eps
    double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
    // solve with the maximum-principle assertion
    Field solve_field(const Field& rhs) const;
    const Eigen::LLT<Eigen::MatrixXd>& factor() const { return llt_; }

private:
    std::shared_ptr<const NonlocalMatrix> A_;
    double eps_, e2s_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Cholesky of A itself (the Poisson field solve)
class PoissonSolver {
public:
    explicit PoissonSolver(std::shared_ptr<const NonlocalMatrix> A);
    const NonlocalMatrix& op() const { return *A_; }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    const Eigen::LLT<Eigen::MatrixXd>& factor() const { return llt_; }

private:
    std::shared_ptr<const NonlocalMatrix> A_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

Field solve_screened(GridPtr grid, const ModelParams& P, const Field& rhs);

// c_{N,s}|x|^{2s-N} tabulated as hat-function moments on a lattice of
// spacing h; entry k is the weight of offset k (h absorbed)
class RieszKernel {
public:
    RieszKernel(int N, double s, double h, std::size_t kmax);

    double c() const { return c_; }
    double s() const { return s_; }
    double h() const { return h_; }
    double operator[](std::size_t k) const { return rho_[k]; }
    std::span<const double> table() const { return rho_; }
    double value(double x) const;

private:
    double s_, h_, c_;
    std::vector<double> rho_;
};

Field riesz_apply(const RieszKernel& K, const Field& f);

Field nonlocal_normal_derivative(const Field& u, const NonlocalMatrix& A);

struct GreenIdentityTerms {
    double bilinear = 0.0;
    double interior = 0.0;
    double exterior = 0.0;
    double residual = 0.0;
    double scale() const;
};

GreenIdentityTerms green_identity(const NonlocalMatrix& A, const Field& u, const Field& v);
double green_identity_residual(const Field& u, const Field& v, const NonlocalMatrix& A);

} // namespace fracpeak
