#pragma once

#include "fracpeak/fracops.hpp"
#include "fracpeak/greenfn.hpp"
#include "fracpeak/groundstate.hpp"

#include <string>

namespace fracpeak {

struct PoissonField {
    Field phi;  // zero outside
    std::string source;
    double xi = 0.0;
    double eps = 0.0;
};

// A phi = f g on the interior, no identity term and no eps
PoissonField solve_phi(const PoissonSolver& solver, const Field& f, const Field& g, std::string source = "f*g");
PoissonField solve_phi(const ModelParams& P, const GridPtr& grid, const Field& f, const Field& g);

// mu_{eps,xi}, with the case split on the sign of N + 4s - 2
double expansion_order(const ModelParams& P, double eps, double d);
bool expansion_log_case(const ModelParams& P);

struct DecayCheck {
    double xi = 0.0, eps = 0.0, d = 0.0;
    double C_u2 = 0.0;       // max of Phi[U^2] over the envelope eps^{2s}/(1+|z|^{N-2s})
    double C_u = 0.0;        // the same for Phi[U]
    double phi_at_xi = 0.0;  // Phi[U^2](xi)
    double leading = 0.0;    // eps^{2s} W(0)
    double comparison_excess = 0.0;  // max over the domain of Phi[U^2] - W[U^2] (<= 0 expected)
};

DecayCheck phi_decay_check(const PoissonSolver& solver, const GroundState& G, const RieszProfile& Wp, double xi,
                           double eps);
DecayCheck phi_decay_check(const ModelParams& P, const GridPtr& grid, const GroundState& G, double xi, double eps);

struct ExpansionError {
    double xi = 0.0, eps = 0.0, d = 0.0;
    double mu = 0.0;
    bool log_case = true;
    double residual_max = 0.0;  // |Phi - eps^{2s}W + eps^N B H| over the probe set
    double leading_only = 0.0;  // |Phi - eps^{2s}W| over the probe set
    double ratio = 0.0;         // residual_max / mu
    std::size_t probes = 0;
};

// probe set: interior nodes with |x - xi| <= d/2
ExpansionError phi_expansion_residual(const PoissonSolver& solver, const GroundState& G, const RieszProfile& Wp,
                                      const LimitConstants& K, const GreenTable& H, double eps);
ExpansionError phi_expansion_residual(const ModelParams& P, const GridPtr& grid, const GroundState& G,
                                      const RieszProfile& Wp, const GreenTable& H, double xi, double eps);

} // namespace fracpeak
