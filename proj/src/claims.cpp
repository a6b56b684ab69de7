#include "fracpeak/claims.hpp"

#include "fracpeak/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>

namespace fracpeak {

using json = nlohmann::json;

namespace {

// pinned tolerances
constexpr double kRoundOff = 1e-12;
constexpr double kGreenIdentity = 1e-10;
constexpr double kRieszInverse = 0.01;
constexpr double kGroundResidual = 1e-9;
constexpr double kSlopeBand = 0.10;       // relative, decay / deficiency / tau slopes
constexpr double kNearZero = 1e-4;
constexpr double kOverlap = 0.999;
constexpr double kDerivativeMode = 1e-3;
constexpr double kTauForms = 0.02;
constexpr double kPrefactorSpread = 1.15;
constexpr double kEnvelopeSpread = 1.20;
constexpr double kExpansionMax = 0.1;
constexpr double kExpansionSpread = 3.0;
constexpr double kRobinBand = 0.05;
constexpr double kGridDoubling = 0.01;
constexpr double kBudgetRatio = 1.0;
constexpr double kCoercivityDrift = 0.30;
constexpr double kKappaBand = 0.25;       // relative
constexpr double kSurrogateSlope = 0.05;
constexpr double kFullSlope = 0.15;
constexpr double kBalanceLo = 0.2, kBalanceHi = 5.0;
constexpr double kNearKernelDrop = 0.5;

double num(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    throw Error("not a number: " + j.dump());
}

struct Builder {
    const json& s;
    std::vector<Claim> out;
    void add(int criterion, std::string claim, std::string citation, std::string tolerance,
             const std::function<std::pair<json, bool>(const json&)>& eval) {
        Claim c{criterion, std::move(claim), std::move(citation), nullptr, std::move(tolerance), false};
        try {
            auto [m, p] = eval(s);
            c.measured = std::move(m);
            c.pass = p;
        } catch (const std::exception& e) {
            c.measured = {{"error", e.what()}};
            c.pass = false;
        }
        out.push_back(std::move(c));
    }
};

bool within_rel(double v, double target, double band) { return std::abs(v - target) <= band * std::abs(target); }

} // namespace

json to_json(const Claim& c) {
    return {{"criterion", c.criterion}, {"claim", c.claim},        {"citation", c.citation},
            {"measured", c.measured},   {"tolerance", c.tolerance}, {"pass", c.pass}};
}

std::string criterion_title(int k) {
    static const std::map<int, std::string> t{{0, "supplementary"},
                                              {1, "operator identities"},
                                              {2, "ground state"},
                                              {3, "deficiency law"},
                                              {4, "boundary energy"},
                                              {5, "Poisson field"},
                                              {6, "Green regular part"},
                                              {7, "energy expansion"},
                                              {8, "reduction machinery"},
                                              {9, "concentration exponent"},
                                              {10, "exponent bookkeeping"}};
    const auto it = t.find(k);
    return it == t.end() ? "unknown" : it->second;
}

std::vector<Claim> evaluate_claims(const json& stages) {
    Builder b{stages, {}};

    // 1
    b.add(1, "a lattice Fourier mode is an eigenfunction of the line operator with eigenvalue |k|^{2s}",
          "Fourier-symbol definition of the fractional Laplacian", "max error < 1e-12", [](const json& s) {
              const double e = num(s.at("operators").at("fourier").at("max_error"));
              return std::pair{json(e), e < kRoundOff};
          });
    b.add(1, "discrete fractional Green formula with the nonlocal normal derivative on random pairs",
          "fractional Green formula", "max relative residual < 1e-10", [](const json& s) {
              const double e = num(s.at("operators").at("green_identity").at("max_relative_residual"));
              return std::pair{json(e), e < kGreenIdentity};
          });
    b.add(1, "the Riesz potential inverts the fractional Laplacian on a smooth bump",
          "Riesz potential as inverse of the fractional Laplacian", "interior relative max error < 1%",
          [](const json& s) {
              const double e = num(s.at("operators").at("riesz_inverse").at("relative_error"));
              return std::pair{json(e), e < kRieszInverse};
          });

    // 2
    b.add(2, "ground state solves the limit equation", "ground-state existence", "residual < 1e-9", [](const json& s) {
        const double r = num(s.at("ground").at("residual_norm"));
        return std::pair{json(r), r < kGroundResidual};
    });
    b.add(2, "ground state tail decays like |x|^{-(N+2s)}", "ground-state algebraic decay", "slope within 10% of -(N+2s)",
          [](const json& s) {
              const auto& g = s.at("ground");
              const double v = num(g.at("decay_slope")), t = num(g.at("decay_target"));
              return std::pair{json{{"slope", v}, {"target", t}}, within_rel(v, t, kSlopeBand)};
          });
    b.add(2, "exactly one near-zero eigenvalue of the linearization", "non-degeneracy of the ground state",
          "count of |lambda| < 1e-4 equals 1", [](const json& s) {
              const auto& sp = s.at("ground").at("spectrum");
              const auto n = sp.at("count_within_1e-4").get<std::size_t>();
              return std::pair{json{{"count", n}, {"near_zero", sp.at("near_zero")}}, n == 1 && std::abs(num(sp.at("near_zero"))) < kNearZero};
          });
    b.add(2, "the kernel mode is the translation derivative", "non-degeneracy of the ground state", "overlap >= 0.999",
          [](const json& s) {
              const double v = num(s.at("ground").at("spectrum").at("overlap_derivative"));
              return std::pair{json(v), v >= kOverlap};
          });
    b.add(2, "the linearization annihilates dU/dx", "non-degeneracy of the ground state", "relative residual < 1e-3",
          [](const json& s) {
              const double v = num(s.at("ground").at("spectrum").at("derivative_mode_residual"));
              return std::pair{json(v), v < kDerivativeMode};
          });

    // 3
    b.add(3, "max deficiency of the projection decays like d^{-(N+2s)} at fixed eps", "deficiency estimate of the projection",
          "slope within 10% of -(N+2s)", [](const json& s) {
              const auto& p = s.at("projection");
              const double v = num(p.at("eta_slope")), t = num(p.at("eta_target"));
              return std::pair{json{{"slope", v}, {"target", t}}, within_rel(v, t, kSlopeBand)};
          });

    // 4
    b.add(4, "direct and boundary forms of tau agree", "boundary energy via the fractional Green formula",
          "relative mismatch < 2% at every d", [](const json& s) {
              const double v = num(s.at("projection").at("tau_mismatch_max"));
              return std::pair{json(v), v < kTauForms};
          });
    b.add(4, "tau scales like (eps/d)^{N+4s} at fixed eps", "two-sided boundary-energy estimate",
          "slope within 10% of N+4s", [](const json& s) {
              const auto& p = s.at("projection");
              const double v = num(p.at("tau_slope")), t = num(p.at("tau_target"));
              return std::pair{json{{"slope", v}, {"target", t}}, within_rel(v, t, kSlopeBand)};
          });
    b.add(4, "tau carries an eps^N prefactor at fixed d/eps", "two-sided boundary-energy estimate",
          "max/min of tau/eps^N < 1.15", [](const json& s) {
              const auto& p = s.at("projection").at("prefactor");
              const double v = num(p.at("spread"));
              return std::pair{json{{"spread", v}, {"tau_over_eps_N", p.at("tau_over_eps_N")}}, v < kPrefactorSpread};
          });

    // 5
    b.add(5, "Poisson field envelope eps^{2s}/(1+|z|^{N-2s}) has an eps-uniform constant", "Poisson field decay estimate",
          "max/min of the constant < 1.2", [](const json& s) {
              std::vector<double> c;
              for (const auto& e : s.at("poisson").at("envelope")) c.push_back(num(e.at("C_u2")));
              const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
              return std::pair{json{{"constants", c}, {"spread", *hi / *lo}}, c.size() >= 2 && *hi / *lo < kEnvelopeSpread};
          });
    b.add(5, "two-term expansion residual of the Poisson field is O(mu) as eps halves",
          "two-term expansion of the Poisson field", "residual/mu: max < 0.1 and max/min < 3", [](const json& s) {
              std::vector<double> r;
              for (const auto& e : s.at("poisson").at("expansion")) r.push_back(num(e.at("ratio")));
              const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
              return std::pair{json{{"ratios", r}, {"spread", *hi / *lo}},
                               r.size() >= 4 && *hi < kExpansionMax && *hi / *lo < kExpansionSpread};
          });
    b.add(5, "Poisson field is dominated samplewise by the Riesz potential of the same source",
          "comparison with the whole-space potential", "max(Phi - W) <= 0", [](const json& s) {
              double worst = -std::numeric_limits<double>::infinity();
              for (const auto& e : s.at("poisson").at("envelope")) worst = std::max(worst, num(e.at("comparison_excess")));
              return std::pair{json(worst), worst <= 0.0};
          });

    // 6
    b.add(6, "Robin value H(xi,xi) grows like d^{-(N-2s)}", "asymptotics of the regular part near the boundary",
          "slope within 0.05 of -(N-2s)", [](const json& s) {
              const auto& g = s.at("green");
              const double v = num(g.at("slope")), t = num(g.at("target_slope"));
              return std::pair{json{{"slope", v}, {"target", t}}, std::abs(v - t) < kRobinBand};
          });
    b.add(6, "Robin slope is stable under grid doubling", "asymptotics of the regular part near the boundary",
          "|slope(m) - slope(2m)| < 0.01", [](const json& s) {
              const auto& g = s.at("green");
              const double v = std::abs(num(g.at("slope")) - num(g.at("slope_fine")));
              return std::pair{json(v), v < kGridDoubling};
          });

    // 7
    b.add(7, "energy of the projected peak matches its four-term expansion within the error budget",
          "energy expansion of the approximate solution", "|residual|/budget < 1 at >= 3 eps values", [](const json& s) {
              std::vector<double> r;
              for (const auto& e : s.at("reduce").at("energy_expansion")) r.push_back(num(e.at("ratio")));
              const double hi = r.empty() ? NAN : *std::max_element(r.begin(), r.end());
              return std::pair{json{{"ratios", r}}, r.size() >= 3 && hi < kBudgetRatio};
          });
    b.add(7, "Green term is negative and boundary term positive", "energy expansion of the approximate solution",
          "term_green < 0 < term_tau at every eps", [](const json& s) {
              bool ok = true;
              json m = json::array();
              for (const auto& e : s.at("reduce").at("energy_expansion")) {
                  const double g = num(e.at("term_green")), t = num(e.at("term_tau"));
                  ok = ok && g < 0.0 && t > 0.0;
                  m.push_back({{"term_green", g}, {"term_tau", t}});
              }
              return std::pair{m, ok && !m.empty()};
          });

    // 8
    b.add(8, "quadratic form is coercive on the complement of the tangent field", "coercivity of the linearized operator",
          "tau_min > 0 at every scheduled point", [](const json& s) {
              std::vector<double> c;
              for (const auto& r : s.at("reduce").at("schedule")) c.push_back(num(r.at("coercivity")));
              return std::pair{json(c), !c.empty() && *std::min_element(c.begin(), c.end()) > 0.0};
          });
    b.add(8, "coercivity constant is uniform as eps halves", "coercivity of the linearized operator",
          "|tau_min(eps/2)/tau_min(eps) - 1| < 30%", [](const json& s) {
              std::vector<double> c, dev;
              for (const auto& r : s.at("reduce").at("schedule")) c.push_back(num(r.at("coercivity")));
              for (std::size_t i = 1; i < c.size(); ++i) dev.push_back(std::abs(c[i] / c[i - 1] - 1.0));
              const double hi = dev.empty() ? NAN : *std::max_element(dev.begin(), dev.end());
              return std::pair{json{{"coercivity", c}, {"max_drift", hi}}, !dev.empty() && hi < kCoercivityDrift};
          });
    b.add(8, "corrector map contracts and converges", "fixed-point construction of the corrector",
          "contraction factor < 1 and converged at every scheduled point", [](const json& s) {
              bool ok = true;
              json m = json::array();
              for (const auto& r : s.at("reduce").at("schedule")) {
                  if (!r.at("solved").get<bool>()) {
                      ok = false;
                      m.push_back({{"eps", r.at("eps")}, {"solved", false}});
                      continue;
                  }
                  const auto& C = r.at("corrector");
                  const double f = num(C.at("contraction_factor"));
                  const bool conv = C.at("converged").get<bool>();
                  ok = ok && f < 1.0 && conv;
                  m.push_back({{"eps", r.at("eps")}, {"contraction", C.at("contraction_factor")}, {"converged", conv},
                               {"iterations", C.at("iterations")}});
              }
              return std::pair{m, ok && !m.empty()};
          });
    b.add(8, "corrector limit is unique from two starts", "uniqueness of the corrector in the ball",
          "|omega_0 - omega_random| < 1e-8 eps^{N/2}", [](const json& s) {
              bool ok = true;
              json m = json::array();
              for (const auto& r : s.at("reduce").at("schedule")) {
                  const double u = num(r.at("uniqueness")), t = num(r.at("uniqueness_tol"));
                  ok = ok && u < t;
                  m.push_back({{"eps", r.at("eps")}, {"difference", u}, {"tol", t}});
              }
              return std::pair{m, ok && !m.empty()};
          });
    b.add(8, "corrector norm follows eps^{N/2} eps^kappa", "corrector norm estimate",
          "slope of log(|omega|/eps^{N/2}) within 25% of kappa", [](const json& s) {
              const auto& r = s.at("reduce");
              const double v = num(r.at("norm_slope")), k = num(r.at("kappa"));
              return std::pair{json{{"slope", r.at("norm_slope")}, {"kappa", k}}, std::isfinite(v) && within_rel(v, k, kKappaBand)};
          });

    // 9
    auto slope_claim = [](const char* key, double band) {
        return [key, band](const json& s) {
            const auto& f = s.at("scan").at(key);
            const double t = num(s.at("scan").at("target_slope"));
            json m = {{"slope", f.at("slope")}, {"target", t}};
            if (f.contains("error")) m["error"] = f.at("error");
            if (f.contains("eps")) m["eps"] = f.at("eps");
            const double v = num(f.at("slope"));
            return std::pair{m, std::isfinite(v) && std::abs(v - t) <= band};
        };
    };
    b.add(9, "surrogate minimizer distance scales like eps^{2/3} over eps in [0.01, 0.2]",
          "concentration distance of the peak", "fitted slope within 0.05 of 2/3", slope_claim("surrogate", kSurrogateSlope));
    b.add(9, "reduced-energy minimizer distance scales like eps^{2/3} over eps in [0.05, 0.2]",
          "concentration distance of the peak", "fitted slope within 0.15 of 2/3", slope_claim("full", kFullSlope));
    b.add(9, "every minimizer is interior to the window [eps^{1-varpi}, eps^{1-mu}]",
          "minimum of the reduced energy is an interior point of the window", "all argmins interior",
          [](const json& s) {
              std::size_t n = 0, in = 0;
              json m = json::array();
              for (const auto& e : s.at("scan").at("per_eps")) {
                  const auto& a = e.at("full").get<bool>() ? e.at("full_argmin") : e.at("surrogate_argmin");
                  const bool interior = a.at("found").get<bool>() && a.at("interior").get<bool>();
                  ++n;
                  in += interior ? 1 : 0;
                  m.push_back({{"eps", e.at("eps")},
                               {"kind", e.at("full").get<bool>() ? "full" : "surrogate"},
                               {"found", a.at("found")},
                               {"interior", interior},
                               {"d", a.at("d")}});
              }
              return std::pair{json{{"interior", in}, {"total", n}, {"points", m}}, n > 0 && in == n};
          });

    // 10
    b.add(10, "boundary and Green exponents cross at 1/3 for every admissible (N, s)",
          "exponent comparison in the reduced energy", "|crossing - 1/3| < 1e-12 and strict ordering on each side",
          [](const json& s) {
              const auto& x = s.at("exponents");
              const double e = num(x.at("crossing_error"));
              return std::pair{json{{"crossing_error", e}, {"ordering_ok", x.at("ordering_ok")}},
                               e < 1e-12 && x.at("ordering_ok").get<bool>()};
          });
    b.add(10, "window exponent range is nonempty for every admissible (N, s, p)", "peak window exponents",
          "no empty windows", [](const json& s) {
              const auto& x = s.at("exponents");
              const auto n = x.at("empty_windows").get<std::size_t>();
              return std::pair{json{{"empty_windows", n}, {"triples", x.at("triples")}}, n == 0};
          });
    b.add(10, "validator matches the closed admissible set", "admissible dimensions and orders",
          "no mismatches over the lattice", [](const json& s) {
              const auto& x = s.at("exponents");
              const auto n = x.at("set_mismatches").get<std::size_t>();
              return std::pair{json{{"mismatches", n}, {"points", x.at("points")}}, n == 0};
          });
    b.add(10, "N <= 6 versus N <= 6s discrepancy is flagged, not resolved", "hypothesis versus concluding remark",
          "discrepancy detected and reported", [](const json& s) {
              const auto& x = s.at("exponents");
              const auto n = x.at("discrepancy_points").get<std::size_t>();
              return std::pair{json{{"points_admitted_only_by_N_le_6", n},
                                    {"of_which_empty_window", x.at("discrepancy_empty_windows")},
                                    {"examples", x.at("discrepancy_examples")}},
                               n > 0};
          });

    // supplementary
    b.add(0, "unconstrained surrogate minimizer distance scales like eps^{2/3}", "first-order balance of the reduced energy",
          "fitted slope within 0.05 of 2/3", slope_claim("free_surrogate", kSurrogateSlope));
    b.add(0, "at the surrogate minimizer the boundary and Green terms balance", "first-order balance of the reduced energy",
          "term_tau/|term_green| in [0.2, 5] at every eps", [](const json& s) {
              bool ok = true;
              json m = json::array();
              for (const auto& e : s.at("scan").at("per_eps")) {
                  const double v = num(e.at("balance_at_free"));
                  ok = ok && v >= kBalanceLo && v <= kBalanceHi;
                  m.push_back({{"eps", e.at("eps")}, {"ratio", v}});
              }
              return std::pair{json{{"ratios", m}, {"first_order_value", s.at("scan").at("balance_target")}}, ok};
          });
    b.add(0, "full and surrogate argmins agree within one d-grid step", "two computations of the same landscape",
          "gap <= 1 grid step at every full-scan eps", [](const json& s) {
              bool ok = true, any = false;
              json m = json::array();
              for (const auto& e : s.at("scan").at("per_eps")) {
                  if (!e.at("full").get<bool>()) continue;
                  any = true;
                  const double g = num(e.at("argmin_gap_steps"));
                  ok = ok && g <= 1.0;
                  m.push_back({{"eps", e.at("eps")}, {"gap_steps", e.at("argmin_gap_steps")}});
              }
              return std::pair{m, ok && any};
          });
    b.add(0, "reduced energy differs from J(PU) by O(|l||omega| + |omega|^2)", "reduced energy expansion",
          "|M - J| <= |l||omega| + |omega|^2 at the reduce point", [](const json& s) {
              const auto& p = s.at("reduce").at("point");
              const double d = std::abs(num(p.at("M_minus_J"))), bnd = num(p.at("M_minus_J_bound"));
              return std::pair{json{{"M_minus_J", d}, {"bound", bnd}}, d <= bnd};
          });
    b.add(0, "the near kernel lives along the tangent field", "coercivity of the linearized operator",
          "unprojected minimum < 0.5 tau_min at the reduce point", [](const json& s) {
              const auto& p = s.at("reduce").at("point");
              const double u = num(p.at("coercivity_unprojected")), t = num(p.at("coercivity"));
              return std::pair{json{{"unprojected", u}, {"projected", t}}, u < kNearKernelDrop * t};
          });
    b.add(0, "tangent field agrees with finite differences of the projection", "tangent space of the approximate solutions",
          "mismatch below the configured tolerance at the reduce point", [](const json& s) {
              const auto& t = s.at("reduce").at("point").at("tangent");
              return std::pair{json{{"fd_mismatch", t.at("fd_mismatch")}}, !t.at("flagged").get<bool>()};
          });
    return b.out;
}

json load_stage_summaries(const std::filesystem::path& dir) {
    static const std::pair<const char*, const char*> files[] = {
        {"operators", "operators.json"}, {"ground", "constants.json"}, {"green", "green.json"},
        {"projection", "projection.json"}, {"poisson", "poisson.json"}, {"reduce", "reduce.json"},
        {"scan", "fit.json"}};
    json out;
    std::vector<std::string> missing;
    for (const auto& [key, file] : files) {
        std::ifstream in(dir / file);
        if (!in) {
            missing.push_back(file);
            continue;
        }
        try {
            in >> out[key];
        } catch (const std::exception& e) {
            throw DependencyError(fmt::format("{} is unreadable: {}", (dir / file).string(), e.what()));
        }
    }
    if (!missing.empty()) {
        std::string m;
        for (const auto& f : missing) m += (m.empty() ? "" : ", ") + f;
        throw DependencyError("report needs the outputs of every stage; missing in " + dir.string() + ": " + m);
    }
    return out;
}

std::vector<CriterionVerdict> group_by_criterion(const std::vector<Claim>& claims) {
    std::map<int, CriterionVerdict> by;
    for (const auto& c : claims) {
        auto& v = by[c.criterion];
        if (v.rows.empty()) {
            v.criterion = c.criterion;
            v.title = criterion_title(c.criterion);
            v.pass = true;
        }
        v.rows.push_back(&c);
        v.pass = v.pass && c.pass;
    }
    std::vector<CriterionVerdict> out;
    for (auto& [k, v] : by) out.push_back(std::move(v));
    return out;
}

} // namespace fracpeak
