#pragma once

#include "fracpeak/fracops.hpp"
#include "fracpeak/gridcore.hpp"

#include <memory>
#include <vector>

namespace fracpeak {

// a_{N,s}|x - xi|^{2s-N}, the fundamental solution of (-D)^s
class SingularSolution {
public:
    SingularSolution(const ModelParams& P, double a);
    double a() const { return a_; }
    double operator()(double x, double xi) const;

private:
    double a_, q_;
};

struct SingularConstant {
    double a = 0.0;
    std::vector<double> widths;
    std::vector<double> ratios;  // quadrature of S (-D)^s phi over phi(xi)
    bool verified = false;
};

// a_{N,s} checked against smooth bumps of three widths
SingularConstant singular_constant(const ModelParams& P);

struct GreenTable {
    double xi = 0.0;        // snapped to an interior node
    std::size_t node = 0;
    double d = 0.0;
    double robin = 0.0;     // H(xi, xi)
    Field H;                // interior solve, exterior carries S(., xi)
    double far_part = 0.0;  // max over the domain of the beyond-window data's effect
};

// H on the interior of the operator's grid with exterior data S(., xi)
GreenTable regular_part(const PoissonSolver& solver, const SingularSolution& S, double xi);
GreenTable regular_part(const ModelParams& P, const GridPtr& grid, double xi);

// G = S - H at interior nodes (the singular node is left at +inf)
std::vector<double> green_function(const GreenTable& T, const SingularSolution& S);

struct RobinFit {
    std::vector<double> d, robin;
    double slope = 0.0;
    double intercept = 0.0;
};

RobinFit robin_scaling_fit(const ModelParams& P, const GridPtr& grid, const std::vector<double>& d_list);

} // namespace fracpeak
