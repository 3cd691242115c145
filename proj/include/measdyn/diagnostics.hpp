#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <nlohmann/json.hpp>

#include "measdyn/char_flow.hpp"
#include "measdyn/flat_metric.hpp"
#include "measdyn/io.hpp"
#include "measdyn/measure.hpp"
#include "measdyn/models.hpp"
#include "measdyn/picard.hpp"
#include "measdyn/presets.hpp"
#include "measdyn/random.hpp"
#include "measdyn/rates.hpp"

namespace measdyn {

// ---------------------------------------------------------------------------
// Scalar ODE oracle

/// Weight of a single Dirac at x_star under the selection model with eps = 0:
/// w' = (b(x*) - m(x*, w)) w, integrated with adaptive Dormand-Prince
/// (absolute and relative tolerance `tol`). Returns w at each of `times`
/// (nondecreasing, starting at or after 0).
inline std::vector<double> dirac_ode_oracle(const SpeRates& rates, const Point& x_star, double w0,
                                            const std::vector<double>& times, double tol = 1e-12) {
    using namespace boost::numeric::odeint;
    const double b = rates.b(x_star);
    auto rhs = [&](const double& w, double& dwdt, double) { dwdt = (b - rates.m(x_star, w)) * w; };
    std::vector<double> out;
    out.reserve(times.size());
    double w = w0;
    double t = 0.0;
    auto stepper = make_controlled(tol, tol, runge_kutta_dopri5<double>());
    for (double target : times) {
        if (target < t) throw Error("dirac_ode_oracle: times must be nondecreasing and nonnegative");
        if (target > t) integrate_adaptive(stepper, rhs, w, t, target, std::min(1e-3, target - t));
        t = target;
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct CaseOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    /// Positive means violated.
    double margin = 0.0;
    bool violated = false;
    std::string detail;
    std::map<std::string, double> metrics;
};

struct PropertyReport {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t cases = 0;
    std::size_t violations = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();
    std::map<std::string, double> tolerances;
    std::vector<CaseOutcome> outcomes;
    std::map<std::string, double> metrics;

    bool passed() const { return violations == 0; }

    std::string replay_command(const CaseOutcome& c) const {
        return "measdyn verify --suite " + name + " --seed " + std::to_string(seed) + " --cases " +
               std::to_string(cases) + " --only-case " + std::to_string(c.index);
    }

    nlohmann::json to_json() const {
        nlohmann::json viol = nlohmann::json::array();
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& c : outcomes) {
            seeds.push_back(c.seed);
            if (!c.violated) continue;
            viol.push_back({{"case", c.index},
                            {"seed", c.seed},
                            {"margin", c.margin},
                            {"detail", c.detail},
                            {"replay", replay_command(c)}});
        }
        nlohmann::json j = {{"property", name},
                            {"seed", seed},
                            {"cases", cases},
                            {"violations", violations},
                            {"tolerances", tolerances},
                            {"metrics", metrics},
                            {"case_seeds", seeds},
                            {"violation_list", viol},
                            {"passed", passed()}};
        j["worst_margin"] = outcomes.empty() ? nlohmann::json(nullptr) : nlohmann::json(worst_margin);
        return j;
    }
};

namespace diag {

using CaseFn = std::function<CaseOutcome(Rng&, std::size_t)>;

struct Suite {
    std::size_t default_cases = 100;
    std::map<std::string, double> tolerances;
    CaseFn run;
};

inline CaseOutcome outcome(double margin, std::string detail = {}) {
    CaseOutcome c;
    c.margin = margin;
    c.violated = !(margin <= 0.0);  // NaN counts as a violation
    c.detail = std::move(detail);
    return c;
}

inline std::string fmt(double v) { return format_double(v); }

inline AtomicMeasure signed_measure(Rng& rng, std::size_t dim, std::size_t max_atoms, double lo, double hi) {
    RandomMeasureSpec s;
    s.dim = dim;
    s.max_atoms = max_atoms;
    s.lower.assign(dim, lo);
    s.upper.assign(dim, hi);
    return random_measure(rng, s);
}

inline AtomicMeasure positive_measure(Rng& rng, const Region& box, std::size_t max_atoms) {
    RandomMeasureSpec s;
    s.dim = box.dim;
    s.max_atoms = max_atoms;
    s.weight_lo = 0.0;
    s.weight_hi = 1.0;
    s.lower.resize(box.dim);
    s.upper.resize(box.dim);
    for (std::size_t k = 0; k < box.dim; ++k) {
        s.lower[k] = *box.lower[k];
        s.upper[k] = *box.upper[k];
    }
    return random_measure(rng, s);
}

inline ScalarField random_scalar_field(Rng& rng, std::size_t dim) {
    auto vec = [&](double lo, double hi) {
        Point p(dim);
        for (auto& v : p) v = uniform(rng, lo, hi);
        return p;
    };
    switch (uniform_int(rng, 0, 3)) {
        case 0: return ScalarField::constant(uniform(rng, -2, 2));
        case 1: {
            const double lo = uniform(rng, -1.5, 0.0);
            const double hi = uniform(rng, 0.0, 1.5);
            return ScalarField::affine_capped(uniform(rng, -1, 1), vec(-2, 2), lo, hi);
        }
        case 2:
            return ScalarField::gaussian_bump(uniform(rng, -1, 1), uniform(rng, -2, 2), vec(-2, 2),
                                              uniform(rng, 0.1, 2.0));
        default:
            return ScalarField::sinusoid(uniform(rng, -1, 1), uniform(rng, -2, 2), uniform(rng, 0.1, 5.0),
                                         uniform(rng, 0, 6.3), static_cast<std::size_t>(uniform_int(rng, 0, long(dim) - 1)));
    }
}

/// Smooth test fields on [-3, 3]^dim: linear, constant, or per-axis sine.
inline VectorFieldSpec random_field(Rng& rng, std::size_t dim) {
    const Region box = Region::box(Point(dim, -3.0), Point(dim, 3.0));
    switch (uniform_int(rng, 0, 2)) {
        case 0: return VectorFieldSpec::linear(dim, uniform(rng, -1, 1), box);
        case 1: {
            Point c(dim);
            for (auto& v : c) v = uniform(rng, -1, 1);
            return VectorFieldSpec::constant(c);
        }
        default: {
            const double amp = uniform(rng, 0, 1), freq = uniform(rng, 0.1, 2.0), ph = uniform(rng, 0, 6.3);
            VectorFieldSpec f;
            f.dim = dim;
            f.velocity = [=](std::span<const double> x, std::span<double> v) {
                for (std::size_t k = 0; k < v.size(); ++k) v[k] = amp * std::sin(freq * x[k] + ph);
            };
            f.lip_const = amp * freq;
            f.sup_bound = amp * std::sqrt(static_cast<double>(dim));
            f.declared_domain = Region::whole(dim);
            return f;
        }
    }
}

inline RunConfig preset_run(const std::string& model) { return load_config_json(presets::by_name(model)); }

/// Preset model with a random positive initial datum (case 0 keeps the preset datum).
inline RunConfig random_run(const std::string& model, Rng& rng, std::size_t index) {
    RunConfig rc = preset_run(model);
    if (index == 0) return rc;
    const std::size_t max_atoms = rc.model.dim == 1 ? 20 : 8;
    rc.initial = positive_measure(rng, rc.model.sampling_box, max_atoms);
    return rc;
}

inline double max_of(const std::vector<double>& v, double init = 0.0) {
    for (double x : v) init = std::max(init, x);
    return init;
}

// ---------------------------------------------------------------------------
// Case functions

inline CaseOutcome product_bound_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const ScalarField b = random_scalar_field(rng, dim);
    const AtomicMeasure mu = signed_measure(rng, dim, 20, -2, 2);
    const auto chk = product_bound_check(b.as_function(), mu, 1e-9);
    double margin = chk.lhs - chk.rhs - 1e-9;
    std::string det = b.family + " lhs=" + fmt(chk.lhs) + " rhs=" + fmt(chk.rhs);
    if (mu.size() <= 3) {
        // Both sides re-derived with the grid oracle (h = 1e-2).
        const double h = 1e-2;
        const double lhs_o = bl_norm_oracle(multiply(b.as_function(), mu), h);
        const double gap = std::abs(lhs_o - chk.lhs) - (3 * h + 1e-6);
        margin = std::max(margin, gap);
        det += " oracle_lhs=" + fmt(lhs_o);
    }
    return outcome(margin, det);
}

inline CaseOutcome norm_axioms_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const AtomicMeasure mu = signed_measure(rng, dim, 20, 0, 2);
    const AtomicMeasure nu = signed_measure(rng, dim, 20, 0, 2);
    const double c = uniform(rng, -3, 3);
    const double nm = bl_norm(mu), nn = bl_norm(nu);
    const double homog = std::abs(bl_norm(scale(c, mu)) - std::abs(c) * nm) - 1e-9 * std::max(1.0, std::abs(c) * nm);
    const double tri = bl_norm(linear_combine(1, mu, 1, nu)) - nm - nn - 1e-9;
    const double dom = nm - tv_norm(mu) - 1e-12;
    const double sym = std::abs(bl_distance(mu, nu) - bl_distance(nu, mu)) - 1e-12;
    // Input order: rebuild from the reversed atom list.
    auto atoms = mu.atoms();
    std::reverse(atoms.begin(), atoms.end());
    const double order = bl_norm(AtomicMeasure::from_atoms(dim, atoms)) == nm ? -1.0 : 1.0;
    const double margin = std::max({-nm, homog, tri, dom, sym, order});
    return outcome(margin, "homog=" + fmt(homog) + " tri=" + fmt(tri) + " dom=" + fmt(dom));
}

inline CaseOutcome oracle_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const AtomicMeasure mu = signed_measure(rng, dim, 3, 0, 2);
    const double h = 1e-3;
    const double lp = bl_norm(mu), orc = bl_norm_oracle(mu, h);
    const double tol = static_cast<double>(mu.size()) * h + 1e-6;
    CaseOutcome c = outcome(std::abs(lp - orc) - tol, "lp=" + fmt(lp) + " oracle=" + fmt(orc));
    c.metrics["diff"] = std::abs(lp - orc);
    return c;
}

inline CaseOutcome duality_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const AtomicMeasure mu = signed_measure(rng, dim, 20, 0, 3);
    double margin = -1.0;
    std::string det;
    for (NormForm form : {NormForm::sum, NormForm::max}) {
        const auto r = bl_norm_solve(mu, form);
        const double viol = witness_violation(mu, r.witness, form) - 1e-8;
        const double gap = std::abs(pairing(r.witness, mu) - r.value) - 1e-8 * std::max(1.0, tv_norm(mu));
        margin = std::max({margin, viol, gap});
        det += (form == NormForm::sum ? "sum" : " max") + std::string(": viol=") + fmt(viol) + " gap=" + fmt(gap);
    }
    return outcome(margin, det);
}

inline CaseOutcome norm_equivalence_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const AtomicMeasure mu = signed_measure(rng, dim, 20, 0, 4);
    const double s = bl_norm(mu, NormForm::sum), m = bl_norm(mu, NormForm::max);
    const double margin = std::max(s - m - 1e-12, m - 2 * s - 1e-12);
    return outcome(margin, "sum=" + fmt(s) + " max=" + fmt(m));
}

inline CaseOutcome kr_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    RandomMeasureSpec s;
    s.dim = dim;
    s.max_atoms = 3;
    s.weight_lo = 0.05;
    s.weight_hi = 1.0;
    s.lower.assign(dim, 0.0);
    s.upper.assign(dim, 3.0);
    const AtomicMeasure mu = random_measure(rng, s);
    AtomicMeasure nu = random_measure(rng, s);
    nu = scale(total_mass(mu) / total_mass(nu), nu);
    // Re-balance the last atom so the masses agree to round-off.
    auto atoms = nu.atoms();
    atoms.back().w += total_mass(mu) - total_mass(nu);
    nu = AtomicMeasure::from_atoms(dim, atoms);
    const double bl = bl_distance(mu, nu);
    const double kr = kr_distance(mu, nu);
    const double margin = std::max(bl - 2 * kr - 1e-9, 0.5 * kr - bl - 1e-9);
    return outcome(margin, "bl=" + fmt(bl) + " kr=" + fmt(kr));
}

inline CaseOutcome prune_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const AtomicMeasure mu = signed_measure(rng, dim, 12, 0, 1);
    const double floor = uniform01(rng) < 0.3 ? 0.0 : uniform(rng, 0, 0.3);
    const double radius = uniform01(rng) < 0.3 ? 0.0 : uniform(rng, 0, 0.3);
    const auto pr = prune_merge(mu, floor, radius);
    const double moved = bl_distance(mu, pr.measure);
    return outcome(moved - pr.error_bound - 1e-9, "bl=" + fmt(moved) + " bound=" + fmt(pr.error_bound));
}

inline CaseOutcome flow_expansion_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const VectorFieldSpec f = random_field(rng, dim);
    const double t = uniform(rng, 0, 2), dt = 1e-2;
    double margin = -1.0;
    for (int p = 0; p < 10; ++p) {
        Point x(dim), y(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = uniform(rng, -1, 1);
            y[k] = x[k] + uniform(rng, -0.5, 0.5);
        }
        const double d0 = distance(x, y);
        if (d0 == 0.0) continue;
        const double d1 = distance(flow_map(f, t, x, dt), flow_map(f, t, y, dt));
        margin = std::max(margin, d1 / d0 - flow_lipschitz_bound(f, t) * (1 + 1e-4));
    }
    return outcome(margin);
}

inline CaseOutcome flow_semigroup_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    VectorFieldSpec f = random_field(rng, dim);
    const double t = uniform(rng, 0, 1), s = uniform(rng, 0, 1), dt = 0.05;
    Point x(dim);
    for (auto& v : x) v = uniform(rng, -1, 1);
    const Point whole = flow_map(f, t + s, x, dt);
    const Point composed = flow_map(f, t, flow_map(f, s, x, dt), dt);
    const double tol = 10 * std::pow(dt, 4) * (t + s);
    return outcome(distance(whole, composed) - tol, "err=" + fmt(distance(whole, composed)) + " tol=" + fmt(tol));
}

inline CaseOutcome path_continuity_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const VectorFieldSpec f = random_field(rng, dim);
    const AtomicMeasure u0 = signed_measure(rng, dim, dim == 1 ? 10 : 6, -1, 1);
    const double t = uniform(rng, 0, 1), tau = uniform(rng, 0, 1), dt = 1e-2;
    const double d = bl_distance(flow_pushforward(f, t, u0, dt), flow_pushforward(f, tau, u0, dt));
    const double bound = std::abs(t - tau) * f.sup_bound * tv_norm(u0);
    return outcome(d - bound - 1e-9, "bl=" + fmt(d) + " bound=" + fmt(bound));
}

inline CaseOutcome kernel_lipschitz_case(Rng& rng, std::size_t) {
    const std::size_t dim = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    MutationKernelSpec k;
    if (uniform01(rng) < 0.2) {
        k = MutationKernelSpec::copy(dim);
    } else {
        const double cells[] = {4.0, 10.0, 20.0};
        const double c = cells[uniform_int(rng, 0, 2)];
        const int hw = static_cast<int>(uniform_int(rng, 0, dim == 1 ? 3 : 1));
        const bool reflect = uniform01(rng) < 0.5;
        k = MutationKernelSpec::lattice_gaussian(dim, c, uniform(rng, 0.02, 0.3), hw, 0.0,
                                                 reflect ? std::optional<double>(0.0) : std::nullopt,
                                                 reflect ? std::optional<double>(1.0) : std::nullopt);
    }
    Point y(dim), z(dim);
    const double spread = uniform01(rng) < 0.5 ? 0.05 : 0.5;
    for (std::size_t a = 0; a < dim; ++a) {
        y[a] = uniform(rng, 0, 1);
        z[a] = std::clamp(y[a] + uniform(rng, -spread, spread), 0.0, 1.0);
    }
    const AtomicMeasure gy = k(y), gz = k(z);
    const double mass = std::max(std::abs(total_mass(gy) - 1.0), std::abs(total_mass(gz) - 1.0)) - 1e-12;
    const double d = bl_distance(gy, gz);
    const double bound = k.lip * distance(y, z) * (1 + 1e-3) + 1e-12;
    return outcome(std::max(mass, d - bound), k.family + " bl=" + fmt(d) + " bound=" + fmt(bound));
}

inline CaseOutcome h4_case(const std::string& model, Rng& rng, std::size_t) {
    const RunConfig rc = preset_run(model);
    const ModelSpec& M = rc.model;
    const std::size_t max_atoms = M.dim == 1 ? 20 : 6;
    const AtomicMeasure u = positive_measure(rng, M.sampling_box, max_atoms);
    const AtomicMeasure v = positive_measure(rng, M.sampling_box, max_atoms);
    const double R = std::max(tv_norm(u), tv_norm(v));
    const double L = estimate_constants(M, R).lip_n;
    const double lhs = bl_distance(M.rhs(0.0, u), M.rhs(0.0, v));
    const double rhs = L * bl_distance(u, v);
    return outcome(lhs - rhs * 1.01, "lhs=" + fmt(lhs) + " L_N*d=" + fmt(rhs));
}

inline CaseOutcome h5_case(const std::string& model, Rng& rng, std::size_t) {
    const RunConfig rc = preset_run(model);
    const ModelSpec& M = rc.model;
    const AtomicMeasure u = positive_measure(rng, M.sampling_box, M.dim == 1 ? 20 : 8);
    const double R = tv_norm(u);
    const double tv = tv_norm(M.rhs(0.0, u));
    const double cr = estimate_constants(M, R).c_r;
    return outcome(tv - cr * (1 + 1e-12), "tv=" + fmt(tv) + " C_R=" + fmt(cr));
}

/// Largest contraction factor and iteration count over a run, plus the TV
/// excess over 2 ||u0_window||_TV inside windows.
struct RunSummary {
    double contraction = 0.0;
    int iters = 0;
    double tv_excess = -std::numeric_limits<double>::infinity();
};

inline RunSummary summarize(const Trajectory& tr) {
    RunSummary s;
    for (const auto& w : tr.windows) {
        s.contraction = std::max(s.contraction, w.contraction);
        s.iters = std::max(s.iters, w.picard_iters);
    }
    const auto& g = tr.grid;
    std::size_t wi = 0;
    for (std::size_t i = 0; i < g.times.size(); ++i) {
        while (wi + 1 < tr.windows.size() && g.times[i] > tr.windows[wi].start + tr.windows[wi].length) ++wi;
        if (tr.windows.empty()) break;
        const double cap = 2.0 * tr.windows[wi].initial_tv + tr.accumulated_prune_error;
        s.tv_excess = std::max(s.tv_excess, g.tv[i] - cap);
    }
    return s;
}

inline CaseOutcome contraction_case(const std::string& model, Rng& rng, std::size_t index) {
    RunConfig rc = random_run(model, rng, index);
    const Trajectory tr = solve(rc.initial, rc.model, rc.solver);
    const RunSummary s = summarize(tr);
    double margin = s.contraction - 1.0;
    if (s.iters > 25) margin = std::max(margin, double(s.iters - 25));
    margin = std::max(margin, s.tv_excess);
    if (tr.termination != Termination::horizon_reached) margin = std::max(margin, 1.0);
    CaseOutcome c = outcome(margin, "contraction=" + fmt(s.contraction) + " iters=" + std::to_string(s.iters) +
                                        " tv_excess=" + fmt(s.tv_excess) + " " + to_string(tr.termination));
    c.metrics["contraction"] = s.contraction;
    c.metrics["max_iters"] = s.iters;
    c.metrics["windows"] = static_cast<double>(tr.windows.size());
    if (index == 0) {
        // Largest dt from which every finer tested dt contracts on all windows.
        double dt0 = 0.0;
        for (double dt : {2e-2, 1e-2, 5e-3, 2e-3, 1e-3}) {
            RunConfig r2 = preset_run(model);
            r2.solver.dt = dt;
            r2.solver.snapshot_every = 1;
            const Trajectory t2 = solve(r2.initial, r2.model, r2.solver);
            const bool ok = t2.termination == Termination::horizon_reached && summarize(t2).contraction < 1.0;
            if (ok && dt0 == 0.0) dt0 = dt;
            if (!ok) dt0 = 0.0;
        }
        c.metrics["dt0"] = dt0;
    }
    return c;
}

inline CaseOutcome dependence_case(Rng& rng, std::size_t index) {
    RunConfig rc = load_config_json(presets::logistic_dirac(0.2));
    AtomicMeasure a = rc.initial, b = AtomicMeasure::dirac({0.5}, 0.21);
    if (index > 0) {
        rc = preset_run("spe");
        a = positive_measure(rng, rc.model.sampling_box, 10);
        auto atoms = a.atoms();
        for (auto& at : atoms) at.w *= 1.0 + uniform(rng, 0.0, 0.1);
        b = AtomicMeasure::from_atoms(1, atoms);
    }
    const DependenceRun run = continuous_dependence_run(a, b, rc.model, rc.solver);
    double margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < run.times.size(); ++i)
        margin = std::max(margin, run.measured[i] - run.bound[i] * 1.01);
    if (run.times.empty() || run.a.termination != Termination::horizon_reached ||
        run.b.termination != Termination::horizon_reached)
        margin = std::max(margin, 1.0);
    CaseOutcome c = outcome(margin, "L_N=" + fmt(run.lip_n) + " final measured=" + fmt(run.measured.back()) +
                                        " bound=" + fmt(run.bound.back()));
    c.metrics["grid_points"] = static_cast<double>(run.times.size());
    return c;
}

inline CaseOutcome positivity_case(const std::string& model, Rng& rng, std::size_t index) {
    RunConfig rc = random_run(model, rng, index);
    const Trajectory tr = solve(rc.initial, rc.model, rc.solver);
    double minw = 0.0;
    for (double w : tr.grid.min_weight) minw = std::min(minw, w);
    double margin = -minw - 1e-12;
    if (tr.termination != Termination::horizon_reached) margin = std::max(margin, 1.0);
    CaseOutcome c = outcome(margin, "min_weight=" + fmt(minw) + " " + to_string(tr.termination));
    c.metrics["min_weight"] = minw;
    return c;
}

inline CaseOutcome confinement_case(const std::string& model, Rng& rng, std::size_t index) {
    RunConfig rc = random_run(model, rng, index);
    const Trajectory tr = solve(rc.initial, rc.model, rc.solver);
    const double out = max_of(tr.grid.mass_outside);
    double margin = out - 1e-12;
    if (!(tr.outflow >= 0.0) || !std::isfinite(tr.outflow)) margin = std::max(margin, 1.0);
    if (tr.termination != Termination::horizon_reached) margin = std::max(margin, 1.0);
    CaseOutcome c = outcome(margin, "mass_outside=" + fmt(out) + " outflow=" + fmt(tr.outflow));
    c.metrics["mass_outside"] = out;
    c.metrics["outflow"] = tr.outflow;
    return c;
}

/// Random single-Dirac selection model (eps = 0) with its oracle.
struct DiracProblem {
    json config;
    SpeRates rates;
    Point x;
    double w0 = 0.2;
};

inline DiracProblem dirac_problem(Rng& rng, std::size_t index) {
    DiracProblem p;
    p.config = presets::logistic_dirac(0.2);
    p.x = {0.5};
    if (index > 0) {
        const double b = uniform(rng, 0.5, 2.0), base = uniform(rng, 0.0, 0.5), kappa = uniform(rng, 0.5, 2.0);
        p.w0 = uniform(rng, 0.05, 1.0);
        p.x = {uniform(rng, 0.0, 1.0)};
        p.config["rates"]["b"] = presets::scalar("constant", {{"value", b}});
        p.config["rates"]["m"]["params"] = {{"base", presets::scalar("constant", {{"value", base}})}, {"kappa", kappa}};
        p.config["initial"] = {{"atoms", {{{"x", p.x}, {"w", p.w0}}}}};
    }
    const auto& r = p.config["rates"];
    p.rates.b = ScalarField::constant(r["b"]["params"]["value"].get<double>());
    p.rates.m = PopulationMortality::logistic_in_P(
        ScalarField::constant(r["m"]["params"]["base"]["params"]["value"].get<double>()),
        r["m"]["params"]["kappa"].get<double>());
    return p;
}

inline double final_weight(const Trajectory& tr) {
    const auto& s = tr.final_state();
    return s.empty() ? 0.0 : total_mass(s);
}

inline CaseOutcome dirac_oracle_case(Rng& rng, std::size_t index) {
    const DiracProblem p = dirac_problem(rng, index);
    const RunConfig rc = load_config_json(p.config);
    const Trajectory tr = solve(rc.initial, rc.model, rc.solver);
    const double w = final_weight(tr);
    const double ref = dirac_ode_oracle(p.rates, p.x, p.w0, {rc.solver.t_max}).back();
    double margin = std::abs(w - ref) - 1e-3;
    if (tr.final_state().size() != 1) margin = std::max(margin, 1.0);
    CaseOutcome c = outcome(margin, "solver=" + fmt(w) + " oracle=" + fmt(ref));
    c.metrics["error"] = std::abs(w - ref);
    return c;
}

/// dt in {8,4,2,1}e-3: successive BL differences must shrink by >= 1.8 and the
/// error against the scalar oracle must show order >= 0.9 over {4,2,1}e-3.
inline CaseOutcome self_convergence_case(Rng& rng, std::size_t index) {
    const DiracProblem p = dirac_problem(rng, index);
    const std::vector<double> dts = {8e-3, 4e-3, 2e-3, 1e-3};
    std::vector<AtomicMeasure> finals;
    std::vector<double> errs;
    double t_end = 1.0;
    for (double dt : dts) {
        json j = p.config;
        j["solver"]["dt"] = dt;
        const RunConfig rc = load_config_json(j);
        t_end = rc.solver.t_max;
        const Trajectory tr = solve(rc.initial, rc.model, rc.solver);
        finals.push_back(tr.final_state());
        errs.push_back(final_weight(tr));
    }
    const double ref = dirac_ode_oracle(p.rates, p.x, p.w0, {t_end}).back();
    for (double& e : errs) e = std::abs(e - ref);
    std::vector<double> diffs;
    for (std::size_t i = 0; i + 1 < finals.size(); ++i) diffs.push_back(bl_distance(finals[i], finals[i + 1]));
    const double r1 = diffs[0] / diffs[1], r2 = diffs[1] / diffs[2];
    const double o1 = std::log2(errs[1] / errs[2]), o2 = std::log2(errs[2] / errs[3]);
    CaseOutcome c = outcome(std::max({1.8 - r1, 1.8 - r2, 0.9 - o1, 0.9 - o2}),
                            "ratios=" + fmt(r1) + "," + fmt(r2) + " oracle_orders=" + fmt(o1) + "," + fmt(o2));
    c.metrics["ratio"] = std::min(r1, r2);
    c.metrics["oracle_order"] = std::min(o1, o2);
    c.metrics["oracle_error_finest"] = errs.back();
    return c;
}

inline CaseOutcome eps_invariance_case(Rng& rng, std::size_t index) {
    std::vector<Trajectory> runs;
    json base = presets::spe_copy(0.0);
    if (index > 0) {
        base["rates"]["b"] = presets::scalar(
            "gaussian_bump", {{"base", uniform(rng, 0, 1)}, {"height", uniform(rng, 0, 1)},
                              {"center", {uniform(rng, 0, 1)}}, {"width", uniform(rng, 0.1, 0.5)}});
        base["rates"]["m"]["params"]["kappa"] = uniform(rng, 0.1, 2.0);
        RunConfig rc = load_config_json(base);
        const AtomicMeasure u0 = positive_measure(rng, rc.model.sampling_box, 10);
        json atoms = json::array();
        for (std::size_t i = 0; i < u0.size(); ++i) atoms.push_back({{"x", {u0.location(i)[0]}}, {"w", u0.weight(i)}});
        base["initial"] = {{"atoms", atoms}};
    }
    for (double eps : {0.0, 0.5, 1.0}) {
        json j = base;
        j["eps"] = eps;
        const RunConfig rc = load_config_json(j);
        runs.push_back(solve(rc.initial, rc.model, rc.solver));
    }
    double worst = 0.0;
    bool grid_ok = true;
    for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::size_t b = a + 1; b < runs.size(); ++b) {
            if (runs[a].times != runs[b].times) {
                grid_ok = false;
                continue;
            }
            for (std::size_t s = 0; s < runs[a].states.size(); ++s)
                worst = std::max(worst, bl_distance(runs[a].states[s], runs[b].states[s]));
        }
    const double margin = grid_ok ? worst - 1e-8 : 1.0;
    CaseOutcome c = outcome(margin, "max_bl=" + fmt(worst));
    c.metrics["max_bl"] = worst;
    return c;
}

inline CaseOutcome window_formula_case(Rng& rng, std::size_t) {
    auto draw = [&]() { return uniform01(rng) < 0.3 ? 0.0 : uniform(rng, 1e-3, 10.0); };
    const double tv = uniform(rng, 0.01, 5.0);
    const double c_r = draw(), lip_f = draw(), lip_n = draw();
    ModelSpec M;
    M.name = "synthetic";
    M.dim = 1;
    M.field = VectorFieldSpec::zero(1);
    M.field.lip_const = lip_f;
    M.lip_estimate = [lip_n](double) { return lip_n; };
    M.tv_bound = [c_r](double) { return c_r; };
    const double got = local_window(AtomicMeasure::dirac({0.0}, tv), M);
    std::vector<double> cands;
    if (c_r != 0.0) cands.push_back(tv / c_r);
    if (lip_f != 0.0) cands.push_back(1.0 / lip_f);
    if (lip_n != 0.0) cands.push_back(1.0 / (3.0 * lip_n));
    const double want = cands.empty() ? std::numeric_limits<double>::infinity()
                                      : *std::min_element(cands.begin(), cands.end());
    return outcome(got == want ? -1.0 : 1.0, "got=" + fmt(got) + " want=" + fmt(want));
}

/// Samples a model's declared constants: field Lipschitz/sup bounds and the
/// Lipschitz bound of its rate functions on the sampling box.
inline CaseOutcome declared_constants_case(const std::string& model, Rng& rng, std::size_t) {
    const RunConfig rc = preset_run(model);
    const ModelSpec& M = rc.model;
    const json& rates = rc.resolved["rates"];
    const std::size_t d = M.dim;
    auto point = [&]() {
        Point p(d);
        for (std::size_t k = 0; k < d; ++k) p[k] = uniform(rng, *M.sampling_box.lower[k], *M.sampling_box.upper[k]);
        return p;
    };
    double margin = -1.0;
    std::string worst;
    auto note = [&](double m, const std::string& what) {
        if (m > margin) {
            margin = m;
            worst = what;
        }
    };
    std::vector<double> vx(d), vy(d);
    // Scalar rates re-parsed from the resolved config.
    std::vector<std::pair<std::string, ScalarField>> fields;
    std::vector<std::pair<std::string, PopulationMortality>> morts;
    for (auto it = rates.begin(); it != rates.end(); ++it) {
        json scratch;
        const detail::Node n{it.value(), "/rates/" + it.key()};
        const std::string& fam = it.value()["family"].get_ref<const std::string&>();
        if (it.key() == "m") morts.emplace_back(it.key(), detail::parse_mortality(n, d, scratch));
        else if (it.key() == "g") fields.emplace_back(it.key(), detail::parse_scalar(n, 1, scratch));
        else if (it.key() == "b" || it.key() == "d0") fields.emplace_back(it.key(), detail::parse_scalar(n, d, scratch));
        (void)fam;
    }
    for (int i = 0; i < 1000; ++i) {
        const Point x = point(), y = point();
        const double dxy = distance(x, y);
        M.field.velocity(x, vx);
        M.field.velocity(y, vy);
        double nv = 0.0;
        for (double v : vx) nv += v * v;
        note(std::sqrt(nv) - M.field.sup_bound * (1 + 1e-6) - 1e-15, "field sup");
        note(distance(vx, vy) - M.field.lip_const * dxy * (1 + 1e-6) - 1e-15, "field lipschitz");
        for (const auto& [name, f] : fields) {
            const std::span<const double> xs = name == "g" ? std::span<const double>(x).subspan(1, 1) : x;
            const std::span<const double> ys = name == "g" ? std::span<const double>(y).subspan(1, 1) : y;
            note(std::abs(f(xs)) - f.sup_bound * (1 + 1e-6) - 1e-15, name + " sup");
            note(std::abs(f(xs) - f(ys)) - f.lip_bound * distance(xs, ys) * (1 + 1e-6) - 1e-15, name + " lipschitz");
        }
        for (const auto& [name, m] : morts) {
            const double p1 = uniform(rng, 0, 2), p2 = uniform(rng, 0, 2), q1 = uniform(rng, 0, 2), q2 = uniform(rng, 0, 2);
            note(std::abs(m(x, p1, q1) - m(x, p2, q2)) -
                     m.lip_population() * (std::abs(p1 - p2) + std::abs(q1 - q2)) * (1 + 1e-6) - 1e-15,
                 "mortality population lipschitz");
            note(std::abs(m(x, p1, q1)) - m.sup_bound(std::max(p1, q1)) * (1 + 1e-6) - 1e-15, "mortality sup");
        }
    }
    return outcome(margin, "worst=" + worst);
}

inline CaseOutcome grid_shift_case(const std::string& model, Rng&, std::size_t index) {
    RunConfig rc = preset_run(model);
    rc.solver.snapshot_every = 1;
    const Trajectory a = solve(rc.initial, rc.model, rc.solver);
    rc.solver.snapshot_every = static_cast<int>(3 + index);
    const Trajectory b = solve(rc.initial, rc.model, rc.solver);
    std::size_t j = 0, compared = 0;
    bool same = true;
    for (std::size_t i = 0; i < b.times.size(); ++i) {
        while (j < a.times.size() && a.times[j] < b.times[i]) ++j;
        if (j == a.times.size() || a.times[j] != b.times[i]) {
            same = false;
            break;
        }
        same = same && a.states[j] == b.states[i];
        ++compared;
    }
    return outcome(same ? -1.0 : 1.0, "compared " + std::to_string(compared) + " snapshots");
}

// ---------------------------------------------------------------------------
// Registry

inline std::vector<std::string> split_model_suffix(const std::string& name, std::string& base) {
    const auto p = name.find(':');
    base = name.substr(0, p);
    if (p == std::string::npos) return presets::model_names();
    const std::string m = name.substr(p + 1);
    const auto all = presets::model_names();
    if (std::find(all.begin(), all.end(), m) == all.end()) throw Error("unknown model '" + m + "' in suite name");
    return {m};
}

/// Suite for a model-indexed family: case i runs models[i % models.size()].
inline CaseFn per_model(std::vector<std::string> models,
                        std::function<CaseOutcome(const std::string&, Rng&, std::size_t)> fn) {
    return [models, fn](Rng& rng, std::size_t index) {
        const std::size_t k = models.size();
        CaseOutcome c = fn(models[index % k], rng, index / k);
        c.detail = models[index % k] + ": " + c.detail;
        return c;
    };
}

inline std::optional<Suite> find_suite(const std::string& name) {
    std::string base;
    if (name == "product_bound") return Suite{1000, {{"slack", 1e-9}}, product_bound_case};
    if (name == "norm_axioms") return Suite{200, {{"relative", 1e-9}, {"absolute", 1e-9}}, norm_axioms_case};
    if (name == "oracle_agreement") return Suite{100, {{"grid_step", 1e-3}, {"extra", 1e-6}}, oracle_case};
    if (name == "duality") return Suite{200, {{"feasibility", 1e-8}, {"gap", 1e-8}}, duality_case};
    if (name == "norm_equivalence") return Suite{200, {{"slack", 1e-12}}, norm_equivalence_case};
    if (name == "kr_comparison") return Suite{200, {{"slack", 1e-9}}, kr_case};
    if (name == "prune_bound") return Suite{200, {{"slack", 1e-9}}, prune_case};
    if (name == "flow_expansion") return Suite{200, {{"relative", 1e-4}}, flow_expansion_case};
    if (name == "flow_semigroup") return Suite{200, {{"factor", 10.0}, {"dt", 0.05}}, flow_semigroup_case};
    if (name == "path_continuity") return Suite{200, {{"slack", 1e-9}}, path_continuity_case};
    if (name == "kernel_lipschitz") return Suite{200, {{"relative", 1e-3}, {"mass", 1e-12}}, kernel_lipschitz_case};
    if (name == "continuous_dependence") return Suite{4, {{"relative", 1e-2}}, dependence_case};
    if (name == "dirac_oracle") return Suite{10, {{"absolute", 1e-3}}, dirac_oracle_case};
    if (name == "self_convergence") return Suite{4, {{"min_ratio", 1.8}, {"min_order", 0.9}}, self_convergence_case};
    if (name == "eps_invariance") return Suite{3, {{"absolute", 1e-8}}, eps_invariance_case};
    if (name == "window_formula") return Suite{50, {{"exact", 0.0}}, window_formula_case};

    const auto colon = name.find(':');
    base = name.substr(0, colon);
    auto models = [&]() { return split_model_suffix(name, base); };
    if (base == "h4") return Suite{200, {{"relative", 1e-2}}, per_model(models(), h4_case)};
    if (base == "h5") return Suite{200, {{"relative", 1e-12}}, per_model(models(), h5_case)};
    if (base == "contraction")
        return Suite{colon == std::string::npos ? 4u : 1u, {{"factor", 1.0}, {"max_iters", 25}},
                     per_model(models(), contraction_case)};
    if (base == "positivity") return Suite{20, {{"min_weight", -1e-12}}, per_model(models(), positivity_case)};
    if (base == "support_confinement") {
        std::vector<std::string> ms;
        if (colon == std::string::npos) ms = {"age", "agesize"};
        else ms = models();
        return Suite{20, {{"mass_outside", 1e-12}}, per_model(ms, confinement_case)};
    }
    if (base == "declared_constants") return Suite{4, {{"relative", 1e-6}}, per_model(models(), declared_constants_case)};
    if (base == "grid_shift") {
        std::vector<std::string> ms;
        if (colon == std::string::npos) ms = {"spe", "selmut"};
        else ms = models();
        return Suite{2, {{"exact", 0.0}}, per_model(ms, grid_shift_case)};
    }
    return std::nullopt;
}

}  // namespace diag

inline std::vector<std::string> suite_names() {
    return {"product_bound",    "norm_axioms",        "oracle_agreement",
            "duality",          "norm_equivalence",   "kr_comparison",
            "prune_bound",      "flow_expansion",     "flow_semigroup",
            "path_continuity",  "kernel_lipschitz",   "h4[:model]",
            "h5[:model]",       "contraction[:model]", "continuous_dependence",
            "positivity[:model]", "support_confinement[:model]", "dirac_oracle",
            "self_convergence", "eps_invariance",     "window_formula",
            "declared_constants[:model]", "grid_shift[:model]"};
}

inline std::size_t default_cases(const std::string& suite) {
    const auto s = diag::find_suite(suite);
    if (!s) throw Error("unknown suite '" + suite + "'");
    return s->default_cases;
}

/// Runs `n_cases` cases of a registered suite; case i uses case_seed(seed, i).
/// With `only_case`, just that case is run (the report keeps n_cases for replay).
inline PropertyReport run_suite(const std::string& suite, std::uint64_t seed, std::size_t n_cases,
                                std::optional<std::size_t> only_case = std::nullopt) {
    const auto s = diag::find_suite(suite);
    if (!s) throw Error("unknown suite '" + suite + "'");
    PropertyReport rep;
    rep.name = suite;
    rep.seed = seed;
    rep.cases = n_cases;
    rep.tolerances = s->tolerances;
    for (std::size_t i = 0; i < n_cases; ++i) {
        if (only_case && *only_case != i) continue;
        const std::uint64_t cs = case_seed(seed, i);
        Rng rng(cs);
        CaseOutcome c;
        try {
            c = s->run(rng, i);
        } catch (const std::exception& e) {
            c = diag::outcome(std::numeric_limits<double>::infinity(), std::string("exception: ") + e.what());
        }
        c.index = i;
        c.seed = cs;
        if (c.violated) ++rep.violations;
        rep.worst_margin = std::max(rep.worst_margin, c.margin);
        for (const auto& [k, v] : c.metrics) {
            const std::string key = "max_" + k;
            rep.metrics[key] = rep.metrics.count(key) ? std::max(rep.metrics[key], v) : v;
            const std::string key2 = "min_" + k;
            rep.metrics[key2] = rep.metrics.count(key2) ? std::min(rep.metrics[key2], v) : v;
        }
        rep.outcomes.push_back(std::move(c));
    }
    return rep;
}

}  // namespace measdyn
