#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "measdyn/char_flow.hpp"
#include "measdyn/flat_metric.hpp"
#include "measdyn/measure.hpp"
#include "measdyn/models.hpp"

namespace measdyn {

class SupportViolation : public Error {
public:
    using Error::Error;
};

struct SolverConfig {
    double dt = 1e-3;
    double picard_tol = 1e-8;
    int max_picard_iters = 25;
    double t_max = 1.0;
    /// Blow-up is declared once the TV norm exceeds this multiple of the initial TV.
    double tv_blowup_factor = 1e6;
    double prune_floor = 1e-14;
    /// Merge radius applied to each window's terminal state.
    double merge_radius = 0.0;
    int snapshot_every = 1;
    /// Above this many atoms (in dimension > 1) Picard residuals are measured
    /// with the TV upper bound of the flat norm instead of the exact LP.
    std::size_t exact_metric_atoms = 100;
    std::size_t max_windows = 1000000;
    std::function<void(const struct WindowRecord&)> on_window;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("solver: dt must be positive");
        if (!(picard_tol > 0.0)) throw Error("solver: picard_tol must be positive");
        if (max_picard_iters < 1) throw Error("solver: max_picard_iters must be at least 1");
        if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw Error("solver: t_max must be finite and nonnegative");
        if (!(tv_blowup_factor > 1.0)) throw Error("solver: tv_blowup_factor must exceed 1");
        if (prune_floor < 0.0 || merge_radius < 0.0) throw Error("solver: prune settings must be nonnegative");
        if (snapshot_every < 1) throw Error("solver: snapshot_every must be at least 1");
        const double steps = t_max / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
            throw Error("solver: t_max must be an integer multiple of dt");
    }
};

enum class Termination { horizon_reached, blow_up, iteration_failure };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::horizon_reached: return "horizon_reached";
        case Termination::blow_up: return "blow_up";
        case Termination::iteration_failure: return "iteration_failure";
    }
    return "?";
}

struct WindowRecord {
    double start = 0.0;
    double length = 0.0;
    double step = 0.0;
    std::size_t steps = 0;
    double formula_length = 0.0;  // min{TV/C_R, 1/L_F, 1/(3 L_N)}, +inf if unconstrained
    double lip_n = 0.0;
    double c_r = 0.0;
    int picard_iters = 0;
    /// Largest ratio of successive Picard residuals (0 when fewer than two
    /// residuals were above round-off).
    double contraction = 0.0;
    std::vector<double> residuals;
    bool exact_metric = true;
    double initial_tv = 0.0;
};

/// Per grid point observables, recorded at every solver step.
struct GridStats {
    std::vector<double> times;
    std::vector<double> tv;
    std::vector<double> min_weight;
    std::vector<double> mass_outside;
    std::vector<std::size_t> atoms;

    void push(double t, const AtomicMeasure& u, const Region& domain) {
        times.push_back(t);
        tv.push_back(tv_norm(u));
        min_weight.push_back(u.empty() ? 0.0 : *std::min_element(u.weights().begin(), u.weights().end()));
        mass_outside.push_back(tv_outside(u, domain));
        atoms.push_back(u.size());
    }
};

struct Trajectory {
    std::size_t dim = 1;
    double dt = 0.0;
    std::vector<double> times;           // snapshot times
    std::vector<AtomicMeasure> states;   // snapshots
    std::vector<double> tv_history;      // TV at snapshot times
    std::vector<WindowRecord> windows;
    GridStats grid;
    double accumulated_prune_error = 0.0;
    double outflow = 0.0;
    Termination termination = Termination::horizon_reached;
    std::string message;

    /// Last snapshot; the zero measure for an empty trajectory.
    AtomicMeasure final_state() const { return states.empty() ? AtomicMeasure(dim) : states.back(); }
};

// ---------------------------------------------------------------------------
// Window length

/// min{tv / C_R, 1 / L_F, 1 / (3 L_N)}; a term with zero denominator is +inf.
inline double window_formula(double tv, double c_r, double lip_f, double lip_n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double a = c_r > 0.0 ? tv / c_r : inf;
    const double b = lip_f > 0.0 ? 1.0 / lip_f : inf;
    const double c = lip_n > 0.0 ? 1.0 / (3.0 * lip_n) : inf;
    return std::min({a, b, c});
}

struct WindowChoice {
    double length = 0.0;
    double R = 0.0;
    ModelConstants constants;
};

/// Local existence window for initial datum u0 with R = 2 ||u0||_TV.
inline WindowChoice local_window_detail(const AtomicMeasure& u0, const ModelSpec& model) {
    const double tv = tv_norm(u0);
    if (tv == 0.0) return {std::numeric_limits<double>::infinity(), 0.0, {}};
    WindowChoice w;
    w.R = 2.0 * tv;
    w.constants = estimate_constants(model, w.R);
    w.length = window_formula(tv, w.constants.c_r, model.field.lip_const, w.constants.lip_n);
    return w;
}

inline double local_window(const AtomicMeasure& u0, const ModelSpec& model) {
    return local_window_detail(u0, model).length;
}

// ---------------------------------------------------------------------------
// The fixed-point map

struct GammaResult {
    MeasureCurve curve;
    double prune_error = 0.0;
    double outflow = 0.0;
};

namespace detail {

/// Applies the model's support policy; returns the absorbed TV.
inline double enforce_support(AtomicMeasure& u, const ModelSpec& model) {
    switch (model.support) {
        case SupportPolicy::none: return 0.0;
        case SupportPolicy::confined: {
            const double out = tv_outside(u, model.domain);
            if (out > 1e-12)
                throw SupportViolation("model '" + model.name + "': mass " + std::to_string(out) +
                                       " left the domain");
            return 0.0;
        }
        case SupportPolicy::absorbing: {
            const double out = tv_outside(u, model.domain);
            if (out > 0.0) u = restrict_to(u, model.domain);
            return out;
        }
    }
    return 0.0;
}

}  // namespace detail

/// Gamma(curve) on the curve's grid, computed with the one-step recursion
///   G_0 = u0,  G_{k+1} = X_h # (G_k + h N(t_k, curve_k)),
/// which equals the left-rectangle Duhamel sum when the flow over j steps is
/// the j-fold RK4 step. Mass is absorbed or checked after every step and
/// atoms below `prune_floor` are dropped.
inline GammaResult gamma_apply_recursive(const MeasureCurve& curve, const AtomicMeasure& u0,
                                         const ModelSpec& model, double prune_floor = 0.0) {
    const double h = curve.dt;
    GammaResult res;
    res.curve.t0 = curve.t0;
    res.curve.dt = h;
    res.curve.states.reserve(curve.states.size());
    res.curve.states.push_back(u0);
    AtomicMeasure G = u0;
    for (std::size_t k = 0; k + 1 < curve.states.size(); ++k) {
        const AtomicMeasure Nk = model.rhs(curve.time(k), curve.states[k]);
        G = flow_step(model.field, linear_combine(1.0, G, h, Nk), h);
        res.outflow += detail::enforce_support(G, model);
        if (prune_floor > 0.0) {
            auto pr = prune_merge(G, prune_floor, 0.0);
            res.prune_error += pr.error_bound;
            G = std::move(pr.measure);
        }
        res.curve.states.push_back(G);
    }
    return res;
}

/// Gamma(curve)(t_k) = X_{t_k} # u0 + sum_{j<k} dt X_{t_k - s_j} # N(s_j, curve_j),
/// evaluated term by term (quadratic cost). Reference implementation of the map.
inline GammaResult gamma_apply(const MeasureCurve& curve, const AtomicMeasure& u0, const ModelSpec& model,
                               double dt) {
    if (std::abs(curve.dt - dt) > 1e-15 * std::max(1.0, dt))
        throw Error("gamma_apply: curve grid step differs from dt");
    GammaResult res;
    res.curve.t0 = curve.t0;
    res.curve.dt = dt;
    std::vector<AtomicMeasure> rhs;
    rhs.reserve(curve.states.size());
    for (std::size_t j = 0; j + 1 < curve.states.size(); ++j) rhs.push_back(model.rhs(curve.time(j), curve.states[j]));
    for (std::size_t k = 0; k < curve.states.size(); ++k) {
        const double tk = static_cast<double>(k) * dt;
        std::vector<AtomicMeasure> parts;
        parts.push_back(flow_pushforward(model.field, tk, u0, dt));
        for (std::size_t j = 0; j < k; ++j) {
            const double lag = static_cast<double>(k - j) * dt;
            parts.push_back(scale(dt, flow_pushforward(model.field, lag, rhs[j], dt)));
        }
        AtomicMeasure s = sum_of(parts, u0.dim());
        res.outflow += detail::enforce_support(s, model);
        res.curve.states.push_back(std::move(s));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Solver

namespace detail {

/// sup_k metric(a_k - b_k), metric = exact flat norm or its TV upper bound.
/// Exact norms are only evaluated where the TV bound can still raise the sup.
inline double curve_distance(const MeasureCurve& a, const MeasureCurve& b, bool exact) {
    const std::size_t n = a.states.size();
    std::vector<AtomicMeasure> diffs;
    diffs.reserve(n);
    std::vector<double> tv(n);
    for (std::size_t k = 0; k < n; ++k) {
        diffs.push_back(linear_combine(1.0, a.states[k], -1.0, b.states[k]));
        tv[k] = tv_norm(diffs.back());
    }
    if (!exact) return n ? *std::max_element(tv.begin(), tv.end()) : 0.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return tv[i] > tv[j]; });
    double best = 0.0;
    for (std::size_t k : order) {
        if (tv[k] <= best) break;
        best = std::max(best, bl_norm(diffs[k]));
    }
    return best;
}

constexpr int kTickBits = 30;
constexpr std::int64_t kTicksPerStep = std::int64_t{1} << kTickBits;

}  // namespace detail

/// Picard iteration of Gamma on successive local windows.
///
/// Each window starts from the transported initial guess t -> X_t # u0 (the
/// constant curve when F = 0) and iterates until the sup over grid times of
/// the flat distance between successive iterates is at most
/// picard_tol * max(1, ||u0||_TV).
inline Trajectory solve(const AtomicMeasure& initial, const ModelSpec& model, const SolverConfig& cfg) {
    cfg.validate();
    if (initial.dim() != model.dim) throw DimensionMismatch("solve: initial datum dimension mismatch");
    Trajectory traj;
    traj.dim = model.dim;
    traj.dt = cfg.dt;
    const double tv0 = tv_norm(initial);
    if (tv0 == 0.0) return traj;

    if (model.support != SupportPolicy::none && tv_outside(initial, model.domain) > 1e-12)
        throw SupportViolation("solve: initial datum is not supported in the model domain");

    using detail::kTicksPerStep;
    const auto total_steps = static_cast<std::int64_t>(std::llround(cfg.t_max / cfg.dt));
    const std::int64_t end_tick = total_steps * kTicksPerStep;
    const double blowup = cfg.tv_blowup_factor * tv0;
    auto tick_time = [&](std::int64_t tick) {
        return cfg.dt * (static_cast<double>(tick) / static_cast<double>(kTicksPerStep));
    };

    AtomicMeasure u = initial;
    std::int64_t tick = 0;
    traj.times.push_back(0.0);
    traj.states.push_back(u);
    traj.tv_history.push_back(tv0);
    traj.grid.push(0.0, u, model.domain);

    auto snapshot = [&](std::int64_t at, const AtomicMeasure& state) {
        if (at % kTicksPerStep != 0) return;
        const std::int64_t step = at / kTicksPerStep;
        if (step % cfg.snapshot_every != 0 && at != end_tick) return;
        traj.times.push_back(tick_time(at));
        traj.states.push_back(state);
        traj.tv_history.push_back(tv_norm(state));
    };

    while (tick < end_tick) {
        if (traj.windows.size() >= cfg.max_windows) {
            traj.termination = Termination::iteration_failure;
            traj.message = "window limit reached";
            return traj;
        }
        const WindowChoice wc = local_window_detail(u, model);
        WindowRecord rec;
        rec.start = tick_time(tick);
        rec.formula_length = wc.length;
        rec.lip_n = wc.constants.lip_n;
        rec.c_r = wc.constants.c_r;
        rec.initial_tv = tv_norm(u);

        // Step size and count on the dyadic tick grid.
        std::int64_t h_ticks = kTicksPerStep;
        std::int64_t m = 0;
        const double remaining = tick_time(end_tick) - tick_time(tick);
        const double T = std::min(wc.length, remaining);
        if (tick % kTicksPerStep == 0 && T >= cfg.dt * (1.0 - 1e-12)) {
            m = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(T / cfg.dt * (1.0 + 1e-12))));
            m = std::min(m, (end_tick - tick) / kTicksPerStep);
        } else {
            while (h_ticks > 1 && (tick % h_ticks != 0 || cfg.dt * static_cast<double>(h_ticks) /
                                                               static_cast<double>(kTicksPerStep) > T))
                h_ticks /= 2;
            const double h = cfg.dt * static_cast<double>(h_ticks) / static_cast<double>(kTicksPerStep);
            if (h > T) {
                traj.termination = Termination::iteration_failure;
                traj.message = "window length underflows the finest admissible step";
                return traj;
            }
            const std::int64_t to_next = kTicksPerStep - (tick % kTicksPerStep);
            m = std::max<std::int64_t>(1, std::min(static_cast<std::int64_t>(std::floor(T / h)), to_next / h_ticks));
        }
        const double h = cfg.dt * static_cast<double>(h_ticks) / static_cast<double>(kTicksPerStep);
        rec.step = h;
        rec.steps = static_cast<std::size_t>(m);
        rec.length = h * static_cast<double>(m);

        // Initial guess: transported initial datum.
        MeasureCurve cur;
        cur.t0 = rec.start;
        cur.dt = h;
        cur.states.reserve(static_cast<std::size_t>(m) + 1);
        cur.states.push_back(u);
        for (std::int64_t k = 0; k < m; ++k) cur.states.push_back(flow_step(model.field, cur.states.back(), h));

        const double scale_tol = cfg.picard_tol * std::max(1.0, rec.initial_tv);
        const double noise = 1e-12 * std::max(1.0, rec.initial_tv);
        bool converged = false;
        GammaResult next;
        try {
            for (int it = 1; it <= cfg.max_picard_iters; ++it) {
                next = gamma_apply_recursive(cur, u, model, cfg.prune_floor);
                if (it == 1) {
                    // The metric is fixed per window from the first image's atom counts.
                    std::size_t max_atoms = 0;
                    for (const auto& s : next.curve.states) max_atoms = std::max(max_atoms, s.size());
                    rec.exact_metric = model.dim == 1 || max_atoms <= cfg.exact_metric_atoms;
                }
                const double delta = detail::curve_distance(next.curve, cur, rec.exact_metric);
                if (!rec.residuals.empty() && rec.residuals.back() > noise)
                    rec.contraction = std::max(rec.contraction, delta / rec.residuals.back());
                rec.residuals.push_back(delta);
                rec.picard_iters = it;
                cur = std::move(next.curve);
                if (delta <= scale_tol) {
                    converged = true;
                    break;
                }
                double peak = 0.0;
                for (const auto& s : cur.states) peak = std::max(peak, tv_norm(s));
                if (peak > blowup) break;
            }
        } catch (const NonFiniteValue& e) {
            traj.windows.push_back(rec);
            traj.termination = Termination::iteration_failure;
            traj.message = e.what();
            return traj;
        }

        // Record the accepted iterate (or the last one, on failure).
        bool blew_up = false;
        for (std::int64_t k = 1; k <= m; ++k) {
            const AtomicMeasure& s = cur.states[static_cast<std::size_t>(k)];
            const std::int64_t at = tick + k * h_ticks;
            if (k < m) {
                traj.grid.push(tick_time(at), s, model.domain);
                snapshot(at, s);
            }
            if (tv_norm(s) > blowup) {
                if (k == m) {
                    traj.grid.push(tick_time(at), s, model.domain);
                    snapshot(at, s);
                }
                blew_up = true;
                break;
            }
        }
        traj.windows.push_back(rec);
        if (cfg.on_window) cfg.on_window(rec);
        if (blew_up) {
            traj.termination = Termination::blow_up;
            traj.message = "TV norm exceeded the blow-up threshold";
            return traj;
        }
        if (!converged) {
            traj.termination = Termination::iteration_failure;
            traj.message = "Picard iteration did not reach tolerance within max_picard_iters";
            return traj;
        }
        traj.accumulated_prune_error += next.prune_error;
        traj.outflow += next.outflow;

        tick += m * h_ticks;
        u = std::move(cur.states.back());
        if (cfg.merge_radius > 0.0 || cfg.prune_floor > 0.0) {
            auto pr = prune_merge(u, cfg.prune_floor, cfg.merge_radius);
            traj.accumulated_prune_error += pr.error_bound;
            u = std::move(pr.measure);
        }
        traj.grid.push(tick_time(tick), u, model.domain);
        snapshot(tick, u);
    }
    traj.termination = Termination::horizon_reached;
    return traj;
}

// ---------------------------------------------------------------------------
// Continuous dependence

struct DependenceRun {
    std::vector<double> times;
    std::vector<double> measured;
    std::vector<double> bound;
    double lip_f = 0.0;
    double lip_n = 0.0;
    double R = 0.0;
    Trajectory a, b;
};

/// Solves from both initial data (concurrently) and compares them on the
/// shared snapshot grid against e^{(L_F + L_N) t} ||u0a - u0b||, with L_N
/// evaluated at R = the largest TV reached by either trajectory.
inline DependenceRun continuous_dependence_run(const AtomicMeasure& u0a, const AtomicMeasure& u0b,
                                               const ModelSpec& model, SolverConfig cfg) {
    cfg.snapshot_every = 1;
    cfg.on_window = nullptr;
    auto fa = std::async(std::launch::async, [&] { return solve(u0a, model, cfg); });
    Trajectory tb = solve(u0b, model, cfg);
    Trajectory ta = fa.get();

    DependenceRun out;
    out.lip_f = model.field.lip_const;
    for (double v : ta.grid.tv) out.R = std::max(out.R, v);
    for (double v : tb.grid.tv) out.R = std::max(out.R, v);
    out.lip_n = out.R > 0.0 ? estimate_constants(model, out.R).lip_n : 0.0;
    const double d0 = bl_distance(u0a, u0b);
    std::size_t j = 0;
    for (std::size_t i = 0; i < ta.times.size(); ++i) {
        while (j < tb.times.size() && tb.times[j] < ta.times[i]) ++j;
        if (j == tb.times.size()) break;
        if (tb.times[j] != ta.times[i]) continue;
        out.times.push_back(ta.times[i]);
        out.measured.push_back(bl_distance(ta.states[i], tb.states[j]));
        out.bound.push_back(std::exp((out.lip_f + out.lip_n) * ta.times[i]) * d0);
    }
    out.a = std::move(ta);
    out.b = std::move(tb);
    return out;
}

}  // namespace measdyn
