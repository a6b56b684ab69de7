#pragma once

#include "fracpeak/fracops.hpp"
#include "fracpeak/gridcore.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace fracpeak {

struct GroundStateOptions {
    // reporting window [-L, L) with n samples; the solve runs on pad times
    // the window at the same spacing so periodic images stay out of the tail
    double L = 4000.0;
    std::size_t n = 262144;
    std::size_t pad = 4;
    double tol = 1e-11;
    int max_newton = 40;
    int max_warm = 600;
    double warm_tol = 1e-7;
    double tail_floor = 1e-6;
    double init_amplitude_factor = 1.5;
};

class ProfileInterpolant;

struct GroundState {
    ModelParams P;
    GroundStateOptions opt;
    Field U;        // reporting window
    Field U_solve;  // padded solve lattice
    Field dU;       // spectral derivative on the reporting window
    double peak_value = 0.0;
    double decay_slope = 0.0;
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double residual_norm = 0.0;
    double tail_ratio = 0.0;  // U(L)/U(0)
    bool monotone = false;
    int warm_iterations = 0;
    int newton_iterations = 0;

    std::shared_ptr<const ProfileInterpolant> interp;

    double window() const { return U.grid().L(); }
    // U(z), monotone cubic inside the window, fitted power tail outside
    double profile(double z) const;
    double profile_derivative(double z) const;
};

GroundState solve_ground_state(const ModelParams& P, const GroundStateOptions& opt = {},
                               const std::optional<Field>& init = std::nullopt);

struct SpectrumResult {
    std::vector<double> eigenvalues;       // sorted by |lambda|
    std::vector<double> residual_norms;
    std::vector<std::vector<double>> eigenvectors;  // on the solve lattice
    double near_zero = 0.0;                // eigenvalue closest to zero
    double lowest = 0.0;                   // smallest eigenvalue
    double overlap_derivative = 0.0;       // cosine with dU/dx
    double derivative_mode_residual = 0.0; // |L U'| / |U'|
    double rayleigh_U = 0.0;               // <LU,U>/<U,U>
    double morse_identity = 0.0;           // <LU,U> - (1-p) int U^{p+1}, relative
    double LU_residual = 0.0;              // max |LU - (1-p)U^p|
    int iterations = 0;
    std::size_t count_within(double tol) const;
};

SpectrumResult nondegeneracy_spectrum(const GroundState& G, std::size_t k = 3);

struct RieszProfile {
    Field W;
    double tail_slope = 0.0;
    std::shared_ptr<const ProfileInterpolant> interp;
    double value(double z) const;
};

RieszProfile riesz_profile(const GroundState& G);

struct LimitConstants {
    double A1 = 0.0;
    double A2 = 0.0;         // int U^2 W
    double A2_double = 0.0;  // direct double sum on a coarsened lattice
    double B = 0.0;
};

LimitConstants limit_constants(const GroundState& G, const RieszProfile& Wp);

// U((x - xi)/eps) on every node of the grid
Field rescale_to(const GroundState& G, const ModelParams& P, double xi, const GridPtr& grid);
// d/dxi of the same field: -U'((x - xi)/eps)/eps
Field rescale_derivative(const GroundState& G, const ModelParams& P, double xi, const GridPtr& grid);

void save_ground_state(const GroundState& G, const std::filesystem::path& dir);
GroundState load_ground_state(const std::filesystem::path& dir);

} // namespace fracpeak
