#include "fracpeak/config.hpp"

#include "fracpeak/errors.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace fracpeak {

namespace {

double to_double(const std::string& key, const std::string& v) {
    const auto t = boost::trim_copy(v);
    double x = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(x))
        throw ConfigError(key + ": '" + v + "' is not a finite number");
    return x;
}

template <class I>
I to_integer(const std::string& key, const std::string& v) {
    const auto t = boost::trim_copy(v);
    long long x = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
    if constexpr (std::is_unsigned_v<I>)
        if (x < 0) throw ConfigError(key + ": must be >= 0");
    return static_cast<I>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<std::string> parts;
    const auto t = boost::trim_copy(v);
    if (t.empty()) return {};
    boost::split(parts, t, boost::is_any_of(","));
    std::vector<double> out;
    for (const auto& s : parts) out.push_back(to_double(key, s));
    return out;
}

// shortest text that reads back to the same double
std::string fmt_double(double x) { return fmt::format("{}", x); }
std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
    return s;
}

struct Entry {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

// member accessors by lambda; the key order here is the echo order
const std::vector<std::pair<std::string, Entry>>& table() {
    static const std::vector<std::pair<std::string, Entry>> t = [] {
        std::vector<std::pair<std::string, Entry>> v;
        auto dbl = [&](const std::string& k, auto ref) {
            v.push_back({k, {[ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
                             [ref](RunConfig& c, const std::string& key, const std::string& s) { ref(c) = to_double(key, s); }}});
        };
        auto size = [&](const std::string& k, auto ref) {
            v.push_back({k, {[ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
                             [ref](RunConfig& c, const std::string& key, const std::string& s) {
                                 ref(c) = to_integer<std::remove_reference_t<decltype(ref(c))>>(key, s);
                             }}});
        };
        auto list = [&](const std::string& k, auto ref) {
            v.push_back({k, {[ref](const RunConfig& c) { return fmt_list(ref(const_cast<RunConfig&>(c))); },
                             [ref](RunConfig& c, const std::string& key, const std::string& s) { ref(c) = to_list(key, s); }}});
        };
        using C = RunConfig;
        size("model.N", [](C& c) -> int& { return c.model.N; });
        dbl("model.s", [](C& c) -> double& { return c.model.s; });
        dbl("model.p", [](C& c) -> double& { return c.model.p; });
        dbl("model.a", [](C& c) -> double& { return c.model.domain.a; });
        dbl("model.b", [](C& c) -> double& { return c.model.domain.b; });

        dbl("ground.L", [](C& c) -> double& { return c.ground.L; });
        size("ground.n", [](C& c) -> std::size_t& { return c.ground.n; });
        size("ground.pad", [](C& c) -> std::size_t& { return c.ground.pad; });
        dbl("ground.tol", [](C& c) -> double& { return c.ground.tol; });
        size("ground.max_newton", [](C& c) -> int& { return c.ground.max_newton; });
        size("ground.modes", [](C& c) -> std::size_t& { return c.spectrum_modes; });

        dbl("operators.fourier_L", [](C& c) -> double& { return c.operators.fourier_L; });
        size("operators.fourier_n", [](C& c) -> std::size_t& { return c.operators.fourier_n; });
        size("operators.fourier_mode", [](C& c) -> int& { return c.operators.fourier_mode; });
        size("operators.green_m", [](C& c) -> std::size_t& { return c.operators.green_m; });
        dbl("operators.green_exterior", [](C& c) -> double& { return c.operators.green_exterior; });
        size("operators.green_pairs", [](C& c) -> std::size_t& { return c.operators.green_pairs; });
        dbl("operators.riesz_L", [](C& c) -> double& { return c.operators.riesz_L; });
        size("operators.riesz_n", [](C& c) -> std::size_t& { return c.operators.riesz_n; });
        dbl("operators.riesz_support", [](C& c) -> double& { return c.operators.riesz_support; });

        size("green.m", [](C& c) -> std::size_t& { return c.green.m; });
        size("green.m_fine", [](C& c) -> std::size_t& { return c.green.m_fine; });
        dbl("green.exterior_width", [](C& c) -> double& { return c.green.exterior_width; });
        list("green.d", [](C& c) -> std::vector<double>& { return c.green.d; });

        dbl("projection.eps", [](C& c) -> double& { return c.projection.eps; });
        size("projection.m", [](C& c) -> std::size_t& { return c.projection.m; });
        dbl("projection.exterior_width", [](C& c) -> double& { return c.projection.exterior_width; });
        list("projection.d", [](C& c) -> std::vector<double>& { return c.projection.d; });
        dbl("projection.tau_tol", [](C& c) -> double& { return c.projection.tau_tol; });
        list("projection.prefactor_eps", [](C& c) -> std::vector<double>& { return c.projection.prefactor_eps; });
        dbl("projection.prefactor_d_over_eps", [](C& c) -> double& { return c.projection.prefactor_d_over_eps; });
        dbl("projection.nodes_per_eps", [](C& c) -> double& { return c.projection.nodes_per_eps; });

        size("poisson.m", [](C& c) -> std::size_t& { return c.poisson.m; });
        dbl("poisson.exterior_width", [](C& c) -> double& { return c.poisson.exterior_width; });
        list("poisson.envelope_eps", [](C& c) -> std::vector<double>& { return c.poisson.envelope_eps; });
        list("poisson.expansion_eps", [](C& c) -> std::vector<double>& { return c.poisson.expansion_eps; });
        dbl("poisson.d_exp", [](C& c) -> double& { return c.poisson.d_exp; });

        dbl("reduce.eps", [](C& c) -> double& { return c.reduce.eps; });
        v.push_back({"reduce.xi",
                     {[](const RunConfig& c) { return c.reduce.xi ? fmt_double(*c.reduce.xi) : std::string(); },
                      [](RunConfig& c, const std::string& key, const std::string& s) {
                          if (boost::trim_copy(s).empty())
                              c.reduce.xi.reset();
                          else
                              c.reduce.xi = to_double(key, s);
                      }}});
        dbl("reduce.d_exp", [](C& c) -> double& { return c.reduce.d_exp; });
        list("reduce.energy_eps", [](C& c) -> std::vector<double>& { return c.reduce.energy_eps; });
        dbl("reduce.energy_d_exp", [](C& c) -> double& { return c.reduce.energy_d_exp; });
        size("reduce.energy_m", [](C& c) -> std::size_t& { return c.reduce.energy_m; });
        list("reduce.schedule_eps", [](C& c) -> std::vector<double>& { return c.reduce.schedule_eps; });

        dbl("mesh.nodes_per_eps", [](C& c) -> double& { return c.mesh.nodes_per_eps; });
        size("mesh.min_nodes", [](C& c) -> std::size_t& { return c.mesh.min_nodes; });
        dbl("mesh.exterior_width", [](C& c) -> double& { return c.mesh.exterior_width; });

        list("scan.eps", [](C& c) -> std::vector<double>& { return c.scan.eps; });
        list("scan.full_eps", [](C& c) -> std::vector<double>& { return c.scan.full_eps; });
        size("scan.d_points", [](C& c) -> std::size_t& { return c.scan.d_points; });
        size("scan.free_points", [](C& c) -> std::size_t& { return c.scan.free_points; });
        dbl("scan.free_lo", [](C& c) -> double& { return c.scan.free_lo; });

        dbl("reduction.varpi", [](C& c) -> double& { return c.reduction.varpi; });
        dbl("reduction.mu", [](C& c) -> double& { return c.reduction.mu_exp; });
        dbl("reduction.zeta0", [](C& c) -> double& { return c.reduction.zeta0; });
        dbl("reduction.zeta", [](C& c) -> double& { return c.reduction.zeta; });
        dbl("reduction.step_tol", [](C& c) -> double& { return c.step_tol; });
        size("reduction.max_iterations", [](C& c) -> int& { return c.max_iterations; });
        dbl("reduction.fd_tol", [](C& c) -> double& { return c.fd_tol; });
        dbl("reduction.coercivity_floor", [](C& c) -> double& { return c.coercivity_floor; });

        v.push_back({"run.out", {[](const RunConfig& c) { return c.out.string(); },
                                 [](RunConfig& c, const std::string&, const std::string& s) { c.out = boost::trim_copy(s); }}});
        size("run.workers", [](C& c) -> int& { return c.workers; });
        size("run.seed", [](C& c) -> std::uint64_t& { return c.seed; });
        return v;
    }();
    return t;
}

const Entry& entry(const std::string& key) {
    for (const auto& [k, e] : table())
        if (k == key) return e;
    throw ConfigError("unknown config key '" + key + "'");
}

void check_list(const std::vector<double>& v, const std::string& key, double lo, double hi) {
    if (v.empty()) throw ConfigError(key + ": violated nonempty list");
    for (double x : v)
        if (!(x > lo && x < hi)) throw ConfigError(fmt::format("{}: violated {} < {} < {}", key, lo, x, hi));
}

} // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> k;
    for (const auto& [name, e] : table()) k.push_back(name);
    return k;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) { entry(key).set(c, key, value); }

std::string get_config_value(const RunConfig& c, const std::string& key) { return entry(key).get(c); }

std::string RunConfig::echo() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [key, e] : table()) {
        const auto dot = key.find('.');
        const auto sec = key.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        os << key.substr(dot + 1) << " = " << e.get(*this) << '\n';
    }
    return os.str();
}

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: violated " + what); };
    model.validate();
    reduction.validate(model);
    const double half = 0.5 * model.domain.length();

    if (!(ground.L > 0.0)) fail("ground.L > 0");
    if (ground.n < 64 || (ground.n & (ground.n - 1)) != 0) fail("ground.n a power of two >= 64");
    if (ground.pad < 1) fail("ground.pad >= 1");
    if (!(ground.tol > 0.0)) fail("ground.tol > 0");
    if (spectrum_modes < 1) fail("ground.modes >= 1");

    if (operators.fourier_n < 16 || operators.fourier_mode < 1 ||
        static_cast<std::size_t>(operators.fourier_mode) >= operators.fourier_n / 2)
        fail("1 <= operators.fourier_mode < operators.fourier_n / 2");
    if (operators.green_m < 8) fail("operators.green_m >= 8");
    if (operators.green_pairs < 1) fail("operators.green_pairs >= 1");
    if (!(operators.riesz_support < operators.riesz_L)) fail("operators.riesz_support < operators.riesz_L");

    if (green.m < 8 || green.m_fine < green.m) fail("8 <= green.m <= green.m_fine");
    check_list(green.d, "green.d", 0.0, half);
    if (green.d.size() < 3) fail("green.d has >= 3 distances");

    if (!(projection.eps > 0.0 && projection.eps < 1.0)) fail("0 < projection.eps < 1");
    check_list(projection.d, "projection.d", 0.0, half);
    if (projection.d.size() < 3) fail("projection.d has >= 3 distances");
    if (!(projection.tau_tol > 0.0)) fail("projection.tau_tol > 0");
    check_list(projection.prefactor_eps, "projection.prefactor_eps", 0.0, 1.0);
    for (double e : projection.prefactor_eps)
        if (!(projection.prefactor_d_over_eps * e < half)) fail("projection.prefactor_d_over_eps * eps < half the domain");
    if (!(projection.nodes_per_eps >= 10.0)) fail("projection.nodes_per_eps >= 10");

    if (poisson.m < 8) fail("poisson.m >= 8");
    check_list(poisson.envelope_eps, "poisson.envelope_eps", 0.0, 1.0);
    check_list(poisson.expansion_eps, "poisson.expansion_eps", 0.0, 1.0);
    if (!(poisson.d_exp > 0.0 && poisson.d_exp < 1.0)) fail("0 < poisson.d_exp < 1");

    if (!(reduce.eps > 0.0 && reduce.eps < 1.0)) fail("0 < reduce.eps < 1");
    if (reduce.xi && !model.domain.contains(*reduce.xi)) fail("reduce.xi inside the domain");
    if (!(reduce.d_exp > 0.0 && reduce.d_exp < 1.0)) fail("0 < reduce.d_exp < 1");
    check_list(reduce.energy_eps, "reduce.energy_eps", 0.0, 1.0);
    check_list(reduce.schedule_eps, "reduce.schedule_eps", 0.0, 1.0);
    if (reduce.energy_m < 8) fail("reduce.energy_m >= 8");

    if (!(mesh.nodes_per_eps >= 10.0)) fail("mesh.nodes_per_eps >= 10");
    if (!(mesh.exterior_width > 0.0)) fail("mesh.exterior_width > 0");

    check_list(scan.eps, "scan.eps", 0.0, 1.0);
    for (double e : scan.full_eps)
        if (!(e > 0.0 && e < 1.0)) fail("0 < scan.full_eps < 1");
    if (scan.d_points < 12) fail("scan.d_points >= 12");
    if (!(scan.free_lo > 0.0)) fail("scan.free_lo > 0");

    if (!(step_tol > 0.0)) fail("reduction.step_tol > 0");
    if (max_iterations < 1) fail("reduction.max_iterations >= 1");
    if (!(fd_tol > 0.0)) fail("reduction.fd_tol > 0");
    if (!(coercivity_floor >= 0.0)) fail("reduction.coercivity_floor >= 0");
    if (workers < 1) fail("run.workers >= 1");
    if (out.empty()) fail("run.out nonempty");
}

RunConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            if (!value.empty()) throw ConfigError("config: nested key under " + section + "." + key);
            set_config_value(c, section + "." + key, value.data());
        }
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

void apply_override(RunConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    set_config_value(c, boost::trim_copy(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

} // namespace fracpeak
