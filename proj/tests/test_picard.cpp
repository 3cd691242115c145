#include <gtest/gtest.h>

#include <cmath>
#include <future>
#include <limits>

#include "measdyn/diagnostics.hpp"
#include "measdyn/io.hpp"
#include "measdyn/picard.hpp"
#include "measdyn/presets.hpp"

using namespace measdyn;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelSpec synthetic(double lip_f, double lip_n, double c_r) {
    ModelSpec M = make_linear_model(1, 0.0, VectorFieldSpec::zero(1));
    M.field.lip_const = lip_f;
    M.lip_estimate = [lip_n](double) { return lip_n; };
    M.tv_bound = [c_r](double) { return c_r; };
    return M;
}

ModelSpec null_model(std::size_t dim) { return make_linear_model(dim, 0.0, VectorFieldSpec::zero(dim)); }

MeasureCurve constant_curve(const AtomicMeasure& u, double dt, std::size_t steps) {
    MeasureCurve c;
    c.dt = dt;
    c.states.assign(steps + 1, u);
    return c;
}

/// Logistic closed form w(t) = w0 e^t / (1 + w0 (e^t - 1)).
double logistic(double w0, double t) { return w0 * std::exp(t) / (1 + w0 * (std::exp(t) - 1)); }

}  // namespace

TEST(LocalWindow, Formula) {
    EXPECT_DOUBLE_EQ(window_formula(1, 4, 0.5, 1), 0.25);
    EXPECT_EQ(window_formula(1, 0, 0, 0), kInf);
    EXPECT_EQ(window_formula(2, 1, 1e-12, 1e-12), 2.0);
    EXPECT_DOUBLE_EQ(window_formula(1, 0, 0, 2), 1.0 / 6.0);
}

TEST(LocalWindow, UsesTwiceTheTvNorm) {
    ModelSpec M = synthetic(0.5, 1.0, 4.0);
    double seen_R = 0.0;
    M.lip_estimate = [&seen_R](double R) {
        seen_R = R;
        return 1.0;
    };
    EXPECT_DOUBLE_EQ(local_window(AtomicMeasure::dirac({0.0}, -1.0), M), 0.25);
    EXPECT_EQ(seen_R, 2.0);
    EXPECT_EQ(local_window(AtomicMeasure::dirac({0.0}), synthetic(0, 0, 0)), kInf);
}

TEST(GammaApply, NullModelReturnsInitialDatum) {
    const auto u0 = AtomicMeasure::from_atoms(1, {{{0.0}, 1.0}, {{0.5}, -0.3}});
    const auto curve = constant_curve(AtomicMeasure::dirac({7.0}, 3.0), 0.1, 5);
    const auto g = gamma_apply(curve, u0, null_model(1), 0.1);
    for (const auto& s : g.curve.states) EXPECT_EQ(s, u0);
}

TEST(GammaApply, TranslationOnly) {
    const auto M = make_linear_model(1, 0.0, VectorFieldSpec::constant({2.0}));
    const auto u0 = AtomicMeasure::dirac({0.0}, 1.0);
    const auto g = gamma_apply(constant_curve(u0, 0.1, 4), u0, M, 0.1);
    for (std::size_t k = 0; k < g.curve.states.size(); ++k)
        EXPECT_NEAR(g.curve.states[k].location(0)[0], 0.2 * static_cast<double>(k), 1e-14);
}

TEST(GammaApply, RectangleRuleOnLinearDeath) {
    const auto M = make_linear_model(1, -1.0, VectorFieldSpec::zero(1));
    const auto u0 = AtomicMeasure::dirac({0.0}, 1.0);
    const double dt = 0.1;
    const auto g = gamma_apply(constant_curve(u0, dt, 10), u0, M, dt);
    for (std::size_t k = 0; k < g.curve.states.size(); ++k)
        EXPECT_NEAR(total_mass(g.curve.states[k]), 1.0 - dt * static_cast<double>(k), 1e-14);
}

TEST(GammaApply, RecursiveMatchesDirectSum) {
    const auto rc = load_config_json(presets::age());
    const ModelSpec& M = rc.model;
    const double dt = 0.01;
    MeasureCurve curve;
    curve.dt = dt;
    curve.states.push_back(rc.initial);
    for (int k = 0; k < 15; ++k) curve.states.push_back(flow_step(M.field, curve.states.back(), dt));
    const auto direct = gamma_apply(curve, rc.initial, M, dt);
    const auto rec = gamma_apply_recursive(curve, rc.initial, M, 0.0);
    ASSERT_EQ(direct.curve.states.size(), rec.curve.states.size());
    for (std::size_t k = 0; k < rec.curve.states.size(); ++k)
        EXPECT_LE(bl_distance(direct.curve.states[k], rec.curve.states[k]), 1e-12) << "k=" << k;
}

TEST(GammaApply, RecursiveMatchesDirectSumWithFlow) {
    const auto rc = load_config_json(presets::agesize());
    const ModelSpec& M = rc.model;
    const double dt = 0.02;
    MeasureCurve curve;
    curve.dt = dt;
    curve.states.assign(11, rc.initial);
    const auto direct = gamma_apply(curve, rc.initial, M, dt);
    const auto rec = gamma_apply_recursive(curve, rc.initial, M, 0.0);
    for (std::size_t k = 0; k < rec.curve.states.size(); ++k)
        EXPECT_LE(bl_distance(direct.curve.states[k], rec.curve.states[k]), 1e-10) << "k=" << k;
}

TEST(Solve, NullModelIsConstant) {
    const auto u0 = AtomicMeasure::from_atoms(2, {{{0.0, 1.0}, 1.0}, {{0.5, 0.2}, -0.3}});
    SolverConfig cfg;
    cfg.t_max = 0.5;
    const auto tr = solve(u0, null_model(2), cfg);
    EXPECT_EQ(tr.termination, Termination::horizon_reached);
    ASSERT_EQ(tr.windows.size(), 1u);
    EXPECT_EQ(tr.windows[0].picard_iters, 1);
    for (const auto& s : tr.states) EXPECT_EQ(s, u0);
    EXPECT_EQ(tr.times.back(), 0.5);
}

TEST(Solve, ZeroInitialDataGivesEmptyTrajectory) {
    const auto tr = solve(AtomicMeasure(1), null_model(1), SolverConfig{});
    EXPECT_TRUE(tr.states.empty());
    EXPECT_TRUE(tr.final_state().empty());
    EXPECT_EQ(tr.termination, Termination::horizon_reached);
}

TEST(Solve, LinearDeath) {
    const auto tr = solve(AtomicMeasure::dirac({0.0}), make_linear_model(1, -1.0, VectorFieldSpec::zero(1)),
                          SolverConfig{});
    ASSERT_EQ(tr.termination, Termination::horizon_reached);
    EXPECT_NEAR(total_mass(tr.final_state()), std::exp(-1.0), 5e-3);
    // Several windows of length 1/3 with left-endpoint quadrature: first order error.
    EXPECT_GT(tr.windows.size(), 2u);
}

TEST(Solve, LogisticDiracMatchesClosedForm) {
    const auto rc = load_config_json(presets::logistic_dirac(0.2));
    const auto tr = solve(rc.initial, rc.model, rc.solver);
    ASSERT_EQ(tr.termination, Termination::horizon_reached);
    ASSERT_EQ(tr.final_state().size(), 1u);
    EXPECT_NEAR(total_mass(tr.final_state()), logistic(0.2, 1.0), 1e-3);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        EXPECT_NEAR(total_mass(tr.states[i]), logistic(0.2, tr.times[i]), 1e-3);
}

TEST(Solve, LogisticErrorIsFirstOrder) {
    std::vector<double> err;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        json j = presets::logistic_dirac(0.2);
        j["solver"]["dt"] = dt;
        const auto rc = load_config_json(j);
        err.push_back(std::abs(total_mass(solve(rc.initial, rc.model, rc.solver).final_state()) - logistic(0.2, 1)));
    }
    EXPECT_NEAR(std::log2(err[0] / err[1]), 1.0, 0.1);
    EXPECT_NEAR(std::log2(err[1] / err[2]), 1.0, 0.1);
}

TEST(Solve, BlowUpDetected) {
    // w' = w^2 from w0 = 1 blows up at t = 1.
    ModelSpec M = make_linear_model(1, 0.0, VectorFieldSpec::zero(1));
    M.rhs = [](double, const AtomicMeasure& u) { return scale(total_mass(u), u); };
    M.lip_estimate = [](double R) { return 2 * R; };
    M.tv_bound = [](double R) { return R * R; };
    SolverConfig cfg;
    cfg.t_max = 2.0;
    cfg.tv_blowup_factor = 50.0;
    const auto tr = solve(AtomicMeasure::dirac({0.0}), M, cfg);
    EXPECT_EQ(tr.termination, Termination::blow_up);
    EXPECT_LT(tr.times.back(), 1.05);
    EXPECT_GT(tr.times.back(), 0.9);
}

TEST(Solve, IterationFailureWhenBudgetTooSmall) {
    const auto rc = load_config_json(presets::spe());
    SolverConfig cfg = rc.solver;
    cfg.max_picard_iters = 1;
    const auto tr = solve(rc.initial, rc.model, cfg);
    EXPECT_EQ(tr.termination, Termination::iteration_failure);
}

TEST(Solve, SubStepWindows) {
    // L_N = 1000 forces windows of 1/3000, below dt = 1e-3.
    const auto M = make_linear_model(1, -1000.0, VectorFieldSpec::zero(1));
    SolverConfig cfg;
    cfg.t_max = 2e-3;
    cfg.picard_tol = 1e-12;
    const auto tr = solve(AtomicMeasure::dirac({0.0}), M, cfg);
    ASSERT_EQ(tr.termination, Termination::horizon_reached);
    for (const auto& w : tr.windows) EXPECT_LE(w.length, w.formula_length * (1 + 1e-12));
    EXPECT_EQ(tr.times.back(), 2e-3);
    EXPECT_GE(total_mass(tr.final_state()), 0.0);
    EXPECT_LT(total_mass(tr.final_state()), 0.5);
}

TEST(Solve, WindowsRespectFormulaAndTvCap) {
    for (const auto& name : presets::model_names()) {
        const auto rc = load_config_json(presets::by_name(name));
        const auto tr = solve(rc.initial, rc.model, rc.solver);
        ASSERT_EQ(tr.termination, Termination::horizon_reached) << name;
        for (const auto& w : tr.windows) {
            EXPECT_LE(w.length, w.formula_length * (1 + 1e-12)) << name;
            EXPECT_LT(w.contraction, 1.0) << name;
            EXPECT_LE(w.picard_iters, 25) << name;
        }
        const auto s = diag::summarize(tr);
        EXPECT_LE(s.tv_excess, 0.0) << name;
    }
}

TEST(Solve, TrajectoryIsBlContinuous) {
    const auto rc = load_config_json(presets::spe());
    SolverConfig cfg = rc.solver;
    cfg.snapshot_every = 1;
    const auto tr = solve(rc.initial, rc.model, cfg);
    const double R = *std::max_element(tr.tv_history.begin(), tr.tv_history.end());
    const double C = estimate_constants(rc.model, R).c_r;
    for (std::size_t i = 1; i < tr.states.size(); ++i)
        EXPECT_LE(bl_distance(tr.states[i], tr.states[i - 1]), C * (tr.times[i] - tr.times[i - 1]) * 1.01 + 1e-12);
}

TEST(Solve, SnapshotEveryIsObservational) {
    const auto rc = load_config_json(presets::selmut());
    SolverConfig a = rc.solver, b = rc.solver;
    a.snapshot_every = 1;
    b.snapshot_every = 7;
    const auto ta = solve(rc.initial, rc.model, a);
    const auto tb = solve(rc.initial, rc.model, b);
    EXPECT_EQ(ta.final_state(), tb.final_state());
    EXPECT_EQ(tb.times.back(), 1.0);
    EXPECT_EQ(ta.grid.tv, tb.grid.tv);
}

TEST(Solve, ValidatesConfig) {
    SolverConfig cfg;
    cfg.dt = 0.3;
    EXPECT_THROW(solve(AtomicMeasure::dirac({0.0}), null_model(1), cfg), Error);
    cfg = SolverConfig{};
    cfg.picard_tol = 0.0;
    EXPECT_THROW(solve(AtomicMeasure::dirac({0.0}), null_model(1), cfg), Error);
    EXPECT_THROW(solve(AtomicMeasure::dirac({0.0, 0.0}), null_model(1), SolverConfig{}), DimensionMismatch);
}

TEST(Solve, ConfinedModelRejectsOutsideData) {
    const auto rc = load_config_json(presets::spe());
    EXPECT_THROW(solve(AtomicMeasure::dirac({1.5}, 0.1), rc.model, rc.solver), SupportViolation);
}

TEST(ContinuousDependence, IdenticalDataAndNullModel) {
    const auto u = AtomicMeasure::from_atoms(1, {{{0.1}, 0.3}, {{0.6}, 0.2}});
    SolverConfig cfg;
    cfg.t_max = 0.2;
    const auto same = continuous_dependence_run(u, u, null_model(1), cfg);
    for (std::size_t i = 0; i < same.times.size(); ++i) {
        EXPECT_EQ(same.measured[i], 0.0);
        EXPECT_EQ(same.bound[i], 0.0);
    }
    const auto v = AtomicMeasure::dirac({0.3}, 0.4);
    const auto pair = continuous_dependence_run(u, v, null_model(1), cfg);
    const double d0 = bl_distance(u, v);
    for (std::size_t i = 0; i < pair.times.size(); ++i) {
        EXPECT_DOUBLE_EQ(pair.measured[i], d0);
        EXPECT_DOUBLE_EQ(pair.bound[i], d0);
    }
}

TEST(ContinuousDependence, LogisticPair) {
    const auto rc = load_config_json(presets::logistic_dirac(0.2));
    const auto run = continuous_dependence_run(rc.initial, AtomicMeasure::dirac({0.5}, 0.21), rc.model, rc.solver);
    ASSERT_EQ(run.times.size(), 1001u);
    for (std::size_t i = 0; i < run.times.size(); ++i) EXPECT_LE(run.measured[i], run.bound[i] * 1.01);
    // Exact difference of the two logistic curves.
    EXPECT_NEAR(run.measured.back(), logistic(0.21, 1) - logistic(0.2, 1), 1e-4);
}

TEST(Solve, ConcurrentRunsAreBitIdentical) {
    const auto rc = load_config_json(presets::spe());
    auto f = std::async(std::launch::async, [&] { return solve(rc.initial, rc.model, rc.solver); });
    const auto a = solve(rc.initial, rc.model, rc.solver);
    const auto b = f.get();
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
}
