#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fracpeak {

struct Interval {
    double a = -1.0;
    double b = 1.0;

    double length() const { return b - a; }
    bool contains(double x) const { return x > a && x < b; }
    // distance from an inside point to the nearer endpoint
    double distance_to_boundary(double x) const;
};

struct ModelParams {
    int N = 1;
    double s = 1.0 / 3.0;
    double p = 2.0;
    double eps = 0.1;
    Interval domain{};

    // throws ConfigError naming the first violated inequality
    void validate() const;
    double critical_exponent() const { return (N + 2.0 * s) / (N - 2.0 * s); }
};

enum class ExteriorRule { ZeroOutside, Free };

std::string to_string(ExteriorRule r);
ExteriorRule exterior_rule_from_string(const std::string& s);

// Uniform lattice x_j = x0 + j h. make() gives the periodic-window layout
// (x0 = -L, h = 2L/n); aligned() puts the domain endpoints on cell faces so
// that every interior node owns a full cell of width h.
class Grid {
public:
    static std::shared_ptr<const Grid> make(double L, std::size_t n, Interval domain);
    static std::shared_ptr<const Grid> aligned(Interval domain, std::size_t interior,
                                               double exterior_width);
    // rebuild from stored layout (binary sidecar)
    static std::shared_ptr<const Grid> restore(double x0, double h, std::size_t n, double L,
                                               Interval domain, bool aligned);

    double L() const { return L_; }
    std::size_t size() const { return n_; }
    double h() const { return h_; }
    double x0() const { return x0_; }
    double x(std::size_t j) const { return x0_ + static_cast<double>(j) * h_; }
    const Interval& domain() const { return domain_; }
    bool inside(std::size_t j) const { return mask_[j] != 0; }
    bool is_aligned() const { return aligned_; }

    std::span<const std::size_t> interior() const { return interior_; }
    std::span<const std::size_t> exterior() const { return exterior_; }
    std::size_t interior_count() const { return interior_.size(); }

    std::size_t nearest_node(double x) const;
    std::vector<double> nodes() const;

    bool same_as(const Grid& o) const;

private:
    Grid(double x0, double h, std::size_t n, double L, Interval domain, bool aligned);

    double x0_, h_, L_;
    std::size_t n_;
    Interval domain_;
    bool aligned_;
    std::vector<unsigned char> mask_;
    std::vector<std::size_t> interior_, exterior_;
};

using GridPtr = std::shared_ptr<const Grid>;

class Field {
public:
    Field() = default;  // empty placeholder, holds no grid
    Field(GridPtr grid, std::vector<double> values, ExteriorRule rule);

    static Field zeros(GridPtr grid, ExteriorRule rule);
    static Field sample(GridPtr grid, ExteriorRule rule, const std::function<double(double)>& f);
    // values on interior nodes only, zero elsewhere
    static Field from_interior(GridPtr grid, std::span<const double> interior_values);

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::span<const double> values() const { return values_; }
    const std::vector<double>& vec() const { return values_; }
    double operator[](std::size_t j) const { return values_[j]; }
    std::size_t size() const { return values_.size(); }
    ExteriorRule rule() const { return rule_; }

    std::vector<double> interior_values() const;
    double max_abs() const;

private:
    GridPtr grid_;
    std::vector<double> values_;
    ExteriorRule rule_ = ExteriorRule::Free;
};

void require_same_grid(const Field& u, const Field& v);

// trapezoid over the support given by the exterior rule; on a zero-outside
// field the two end pieces between the domain endpoints and the first/last
// interior node are added with constant extension
double integrate(const Field& f);
std::vector<double> quadrature_weights(const Grid& g, ExteriorRule rule);

// int eps^{2s} (-D)^{s/2}u (-D)^{s/2}v + uv, half powers by the periodic symbol
double eps_inner(const Field& u, const Field& v, const ModelParams& P);

void write_csv(const Field& f, const std::filesystem::path& path);
void write_binary(const Field& f, const std::filesystem::path& stem);
Field read_binary(const std::filesystem::path& stem);

} // namespace fracpeak
