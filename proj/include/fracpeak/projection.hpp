#pragma once

#include "fracpeak/fracops.hpp"
#include "fracpeak/groundstate.hpp"
#include "fracpeak/gridcore.hpp"

#include <memory>
#include <vector>

namespace fracpeak {

struct ProjectionResult {
    double xi = 0.0;  // snapped to an interior node
    double eps = 0.0;
    double d = 0.0;
    std::size_t node = 0;
    Field U;    // U_{eps,xi} on the whole window
    Field PU;   // zero outside
    Field eta;  // U - PU, equal to U outside
    double tau_direct = 0.0;
    double tau_boundary = 0.0;
    double tau_green = 0.0;        // eps^{2s} int_ext U (N eta - N U)
    double eta_norm_sq = 0.0;      // eps^{2s} int_ext eta N eta
    double max_eta = 0.0;          // over the domain
    double min_eta = 0.0;          // over the window
    double consistency = 0.0;      // max |PU - solve(U^p)| / max U
    bool flagged = false;          // tau forms disagree beyond tolerance

    double tau_mismatch() const;
};

struct ProjectionOptions {
    double tau_tol = 0.02;
    double min_eps_over_h = 10.0;
    double min_d_over_h = 5.0;
};

ProjectionResult project(const ScreenedSolver& solver, const GroundState& G, double xi,
                         const ProjectionOptions& opt = {});
ProjectionResult project(const ModelParams& P, const GridPtr& grid, const GroundState& G, double xi,
                         const ProjectionOptions& opt = {});

// int_Omega U^p eta
double tau_direct(const ProjectionResult& R, const GroundState& G);
// C eps^{2s} int_{R\Omega} U(x) int_Omega PU(y)|x-y|^{-N-2s}, window part plus far part
double tau_boundary(const ProjectionResult& R, const ScreenedSolver& solver, const GroundState& G);

// d/dxi of PU_{eps,xi}: derivative of U minus the exterior solve with that data
Field project_derivative(const ScreenedSolver& solver, const GroundState& G, const ProjectionResult& R);

struct TauFit {
    std::vector<double> d, tau, ratio;  // ratio = eps/d
    std::vector<bool> flagged;          // d < 10 eps, or tau forms disagree
    double slope = 0.0;
    std::vector<double> c;              // tau / (eps^N (eps/d)^{N+4s})
    double c_lo = 0.0, c_hi = 0.0;
};

// slope of log tau against log(eps/d) at fixed eps
TauFit tau_scaling_fit(const ModelParams& P, const GridPtr& grid, const GroundState& G,
                       const std::vector<double>& xi_list, const ProjectionOptions& opt = {});

// R^{N+4s} times the ball cross term of the tau upper bound at radius R = d/eps
double cross_term_ratio(const ModelParams& P, double R);

} // namespace fracpeak
