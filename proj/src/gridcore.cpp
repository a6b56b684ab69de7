#include "fracpeak/gridcore.hpp"

#include "fracpeak/errors.hpp"
#include "fracpeak/fft.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fracpeak {

double Interval::distance_to_boundary(double x) const { return std::min(x - a, b - x); }

void ModelParams::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("model: violated " + what); };
    constexpr double tol = 1e-12;
    if (N < 1) fail("N >= 1");
    if (!(s > 0.0 && s < 1.0)) fail("0 < s < 1");
    if (!(2.0 * s < N)) fail("2s < N");
    if (!(N <= 6.0 * s + tol)) fail("N <= 6s");
    if (!(N < 8.0 * s)) fail("N < 8s");
    if (!(p > 1.0)) fail("p > 1");
    if (!(p < critical_exponent())) fail("p < (N+2s)/(N-2s)");
    if (!(eps > 0.0)) fail("eps > 0");
    if (!(domain.b > domain.a)) fail("b > a");
}

std::string to_string(ExteriorRule r) { return r == ExteriorRule::ZeroOutside ? "zero_outside" : "free"; }

ExteriorRule exterior_rule_from_string(const std::string& s) {
    if (s == "zero_outside") return ExteriorRule::ZeroOutside;
    if (s == "free") return ExteriorRule::Free;
    throw ConfigError("unknown exterior rule '" + s + "'");
}

Grid::Grid(double x0, double h, std::size_t n, double L, Interval domain, bool aligned)
    : x0_(x0), h_(h), L_(L), n_(n), domain_(domain), aligned_(aligned), mask_(n, 0) {
    for (std::size_t j = 0; j < n; ++j) {
        if (domain.contains(x(j))) {
            mask_[j] = 1;
            interior_.push_back(j);
        } else {
            exterior_.push_back(j);
        }
    }
}

std::shared_ptr<const Grid> Grid::make(double L, std::size_t n, Interval domain) {
    if (n < 16) throw ConfigError("grid: n >= 16 required");
    if (!(L > 0.0)) throw ConfigError("grid: L > 0 required");
    const double h = 2.0 * L / static_cast<double>(n);
    if (!(domain.a > -L && domain.b < L - h)) throw ConfigError("grid: domain exceeds window");
    auto g = std::shared_ptr<const Grid>(new Grid(-L, h, n, L, domain, false));
    if (g->interior_.empty()) throw ConfigError("grid: domain mask is empty");
    return g;
}

std::shared_ptr<const Grid> Grid::aligned(Interval domain, std::size_t interior, double exterior_width) {
    if (interior < 4) throw ConfigError("grid: at least 4 interior nodes required");
    if (!(domain.b > domain.a)) throw ConfigError("grid: b > a required");
    const double h = domain.length() / static_cast<double>(interior);
    const auto e = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(exterior_width / h - 1e-9)));
    const std::size_t n = interior + 2 * e;
    const double x0 = domain.a + 0.5 * h - static_cast<double>(e) * h;
    const double L = 0.5 * static_cast<double>(n) * h;
    auto g = std::shared_ptr<const Grid>(new Grid(x0, h, n, L, domain, true));
    if (g->interior_.size() != interior) throw NumericalError("grid: aligned mask count mismatch");
    return g;
}

std::shared_ptr<const Grid> Grid::restore(double x0, double h, std::size_t n, double L, Interval domain,
                                          bool aligned) {
    return std::shared_ptr<const Grid>(new Grid(x0, h, n, L, domain, aligned));
}

std::size_t Grid::nearest_node(double xx) const {
    const double t = std::round((xx - x0_) / h_);
    if (t <= 0.0) return 0;
    return std::min(n_ - 1, static_cast<std::size_t>(t));
}

std::vector<double> Grid::nodes() const {
    std::vector<double> v(n_);
    for (std::size_t j = 0; j < n_; ++j) v[j] = x(j);
    return v;
}

bool Grid::same_as(const Grid& o) const {
    return this == &o || (x0_ == o.x0_ && h_ == o.h_ && n_ == o.n_ && domain_.a == o.domain_.a &&
                          domain_.b == o.domain_.b);
}

Field::Field(GridPtr grid, std::vector<double> values, ExteriorRule rule)
    : grid_(std::move(grid)), values_(std::move(values)), rule_(rule) {
    if (!grid_) throw ConfigError("field: null grid");
    if (values_.size() != grid_->size()) throw ConfigError("field: value count does not match grid");
    for (std::size_t j = 0; j < values_.size(); ++j) {
        if (!std::isfinite(values_[j])) throw NumericalError("field: non-finite value at node " + std::to_string(j));
        if (rule_ == ExteriorRule::ZeroOutside && !grid_->inside(j) && values_[j] != 0.0)
            throw ConfigError("field: zero-outside field has nonzero exterior value");
    }
}

Field Field::zeros(GridPtr grid, ExteriorRule rule) {
    const auto n = grid->size();
    return Field(std::move(grid), std::vector<double>(n, 0.0), rule);
}

Field Field::sample(GridPtr grid, ExteriorRule rule, const std::function<double(double)>& f) {
    std::vector<double> v(grid->size(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j)
        if (rule == ExteriorRule::Free || grid->inside(j)) v[j] = f(grid->x(j));
    return Field(std::move(grid), std::move(v), rule);
}

Field Field::from_interior(GridPtr grid, std::span<const double> iv) {
    if (iv.size() != grid->interior_count()) throw ConfigError("field: interior value count mismatch");
    std::vector<double> v(grid->size(), 0.0);
    auto idx = grid->interior();
    for (std::size_t i = 0; i < iv.size(); ++i) v[idx[i]] = iv[i];
    return Field(std::move(grid), std::move(v), ExteriorRule::ZeroOutside);
}

std::vector<double> Field::interior_values() const {
    std::vector<double> r;
    r.reserve(grid_->interior_count());
    for (auto j : grid_->interior()) r.push_back(values_[j]);
    return r;
}

double Field::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

void require_same_grid(const Field& u, const Field& v) {
    if (!u.grid().same_as(v.grid())) throw ConfigError("grid mismatch between fields");
}

std::vector<double> quadrature_weights(const Grid& g, ExteriorRule rule) {
    const double h = g.h();
    if (rule == ExteriorRule::Free) return std::vector<double>(g.size(), h);
    std::vector<double> w(g.size(), 0.0);
    auto idx = g.interior();
    if (idx.empty()) return w;
    if (idx.size() == 1) {
        w[idx[0]] = g.domain().length();
        return w;
    }
    for (auto j : idx) w[j] = h;
    w[idx.front()] = 0.5 * h + (g.x(idx.front()) - g.domain().a);
    w[idx.back()] = 0.5 * h + (g.domain().b - g.x(idx.back()));
    return w;
}

double integrate(const Field& f) {
    const auto w = quadrature_weights(f.grid(), f.rule());
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * f[j];
    return s;
}

double eps_inner(const Field& u, const Field& v, const ModelParams& P) {
    require_same_grid(u, v);
    const auto& g = u.grid();
    const std::size_t n = g.size();
    RealFft fft(n);
    const auto U = fft.forward(u.values());
    const auto V = fft.forward(v.values());
    const auto k = rfft_wavenumbers(n, g.h());
    const double e2s = std::pow(P.eps, 2.0 * P.s);
    double acc = 0.0;
    for (std::size_t j = 0; j < U.size(); ++j) {
        const double mult = e2s * std::pow(k[j], 2.0 * P.s) + 1.0;
        const bool single = (j == 0) || (n % 2 == 0 && j == n / 2);
        acc += (single ? 1.0 : 2.0) * mult * (U[j] * std::conj(V[j])).real();
    }
    return acc * g.h() / static_cast<double>(n);
}

void write_csv(const Field& f, const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw Error("cannot open " + path.string());
    std::fprintf(fp, "x,value\n");
    for (std::size_t j = 0; j < f.size(); ++j) std::fprintf(fp, "%.12e,%.12e\n", f.grid().x(j), f[j]);
    std::fclose(fp);
}

void write_binary(const Field& f, const std::filesystem::path& stem) {
    auto bin = stem;
    bin += ".bin";
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw Error("cannot open " + bin.string());
    os.write(reinterpret_cast<const char*>(f.values().data()),
             static_cast<std::streamsize>(sizeof(double) * f.size()));
    const auto& g = f.grid();
    nlohmann::json meta = {{"x0", g.x0()},         {"h", g.h()},
                           {"n", g.size()},        {"L", g.L()},
                           {"domain", {g.domain().a, g.domain().b}},
                           {"aligned", g.is_aligned()},
                           {"exterior_rule", to_string(f.rule())},
                           {"dtype", "float64-le"}};
    auto side = stem;
    side += ".json";
    std::ofstream js(side);
    js << meta.dump(2) << "\n";
}

Field read_binary(const std::filesystem::path& stem) {
    auto side = stem;
    side += ".json";
    auto bin = stem;
    bin += ".bin";
    std::ifstream js(side);
    if (!js) throw DependencyError("missing field sidecar " + side.string());
    nlohmann::json meta;
    js >> meta;
    const std::size_t n = meta.at("n").get<std::size_t>();
    Interval dom{meta.at("domain")[0].get<double>(), meta.at("domain")[1].get<double>()};
    auto g = Grid::restore(meta.at("x0").get<double>(), meta.at("h").get<double>(), n,
                           meta.at("L").get<double>(), dom, meta.at("aligned").get<bool>());
    std::vector<double> v(n);
    std::ifstream is(bin, std::ios::binary);
    if (!is) throw DependencyError("missing field dump " + bin.string());
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
    if (!is) throw DependencyError("truncated field dump " + bin.string());
    return Field(g, std::move(v), exterior_rule_from_string(meta.at("exterior_rule").get<std::string>()));
}

} // namespace fracpeak
