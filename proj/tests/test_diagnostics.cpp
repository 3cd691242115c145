#include <gtest/gtest.h>

#include <cmath>

#include "measdyn/diagnostics.hpp"

using namespace measdyn;

namespace {

SpeRates rates(double b, double base, double kappa) {
    SpeRates r;
    r.b = ScalarField::constant(b);
    r.m = kappa == 0.0 ? PopulationMortality::constant(base)
                       : PopulationMortality::logistic_in_P(ScalarField::constant(base), kappa);
    return r;
}

}  // namespace

TEST(DiracOracle, LogisticClosedForm) {
    const auto w = dirac_ode_oracle(rates(1, 0, 1), {0.5}, 0.2, {0.0, 0.5, 1.0});
    const double e = std::exp(1.0);
    EXPECT_EQ(w[0], 0.2);
    EXPECT_NEAR(w[2], 0.2 * e / (1 + 0.2 * (e - 1)), 1e-10);
    const double eh = std::exp(0.5);
    EXPECT_NEAR(w[1], 0.2 * eh / (1 + 0.2 * (eh - 1)), 1e-10);
}

TEST(DiracOracle, TrivialCases) {
    EXPECT_EQ(dirac_ode_oracle(rates(0, 0, 0), {0.1}, 0.7, {2.0}).back(), 0.7);
    EXPECT_NEAR(dirac_ode_oracle(rates(0, 0.3, 0), {0.1}, 0.7, {2.0}).back(), 0.7 * std::exp(-0.6), 1e-10);
    EXPECT_THROW(dirac_ode_oracle(rates(0, 0, 0), {0.1}, 0.7, {1.0, 0.5}), Error);
}

TEST(RunSuite, EmptyReportPasses) {
    const auto r = run_suite("product_bound", 1, 0);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.outcomes.size(), 0u);
    EXPECT_TRUE(r.to_json()["worst_margin"].is_null());
}

TEST(RunSuite, UnknownSuite) {
    EXPECT_THROW(run_suite("no_such_suite", 1, 3), Error);
    EXPECT_THROW(run_suite("h4:no_such_model", 1, 3), Error);
}

TEST(RunSuite, DeterministicGivenSeed) {
    const auto a = run_suite("norm_axioms", 42, 20);
    const auto b = run_suite("norm_axioms", 42, 20);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    const auto c = run_suite("norm_axioms", 43, 20);
    EXPECT_NE(a.to_json()["case_seeds"], c.to_json()["case_seeds"]);
}

TEST(RunSuite, OnlyCaseReplaysSameOutcome) {
    const auto all = run_suite("kr_comparison", 9, 10);
    const auto one = run_suite("kr_comparison", 9, 10, 6);
    ASSERT_EQ(one.outcomes.size(), 1u);
    EXPECT_EQ(one.outcomes[0].index, 6u);
    EXPECT_EQ(one.outcomes[0].seed, all.outcomes[6].seed);
    EXPECT_EQ(one.outcomes[0].margin, all.outcomes[6].margin);
}

TEST(RunSuite, ViolationsCarryReplayCommand) {
    PropertyReport r;
    r.name = "demo";
    r.seed = 3;
    r.cases = 5;
    CaseOutcome c;
    c.index = 2;
    c.margin = 0.5;
    c.violated = true;
    r.outcomes.push_back(c);
    r.violations = 1;
    const auto j = r.to_json();
    EXPECT_FALSE(j["passed"].get<bool>());
    EXPECT_EQ(j["violation_list"][0]["replay"], "measdyn verify --suite demo --seed 3 --cases 5 --only-case 2");
}

TEST(Positivity, NoMortalityKeepsWeightsPositive) {
    SpeRates r;
    r.b = ScalarField::gaussian_bump(0.2, 1.0, {0.5}, 0.2);
    const auto M = make_spe_model(r, MutationKernelSpec::lattice_gaussian(1, 20.0, 0.05, 2, 0.0, 0.0, 1.0), 0.1,
                                  Region::box(Point{0.0}, Point{1.0}));
    SolverConfig cfg;
    cfg.t_max = 0.5;
    const auto tr = solve(AtomicMeasure::from_atoms(1, {{{0.3}, 0.2}, {{0.7}, 0.1}}), M, cfg);
    ASSERT_EQ(tr.termination, Termination::horizon_reached);
    for (double w : tr.grid.min_weight) EXPECT_GE(w, 0.0);
}

struct SuiteCase {
    const char* name;
    std::size_t cases;
};

void PrintTo(const SuiteCase& c, std::ostream* os) { *os << c.name << " x" << c.cases; }

class FastSuites : public ::testing::TestWithParam<SuiteCase> {};

TEST_P(FastSuites, ZeroViolations) {
    const auto r = run_suite(GetParam().name, 1234, GetParam().cases);
    for (const auto& c : r.outcomes)
        EXPECT_FALSE(c.violated) << "case " << c.index << ": " << c.detail << "\n" << r.replay_command(c);
    EXPECT_TRUE(r.passed());
}

INSTANTIATE_TEST_SUITE_P(Registry, FastSuites,
                         ::testing::Values(SuiteCase{"product_bound", 300}, SuiteCase{"norm_axioms", 50},
                                           SuiteCase{"oracle_agreement", 10}, SuiteCase{"duality", 50},
                                           SuiteCase{"norm_equivalence", 50}, SuiteCase{"kr_comparison", 50},
                                           SuiteCase{"prune_bound", 50}, SuiteCase{"flow_expansion", 50},
                                           SuiteCase{"flow_semigroup", 50}, SuiteCase{"path_continuity", 50},
                                           SuiteCase{"kernel_lipschitz", 50}, SuiteCase{"h4", 40},
                                           SuiteCase{"h5", 40}, SuiteCase{"window_formula", 50},
                                           SuiteCase{"declared_constants", 4}, SuiteCase{"dirac_oracle", 4},
                                           SuiteCase{"self_convergence", 2}, SuiteCase{"eps_invariance", 2},
                                           SuiteCase{"grid_shift:spe", 1}, SuiteCase{"contraction:spe", 2},
                                           SuiteCase{"continuous_dependence", 2}),
                         [](const auto& info) {
                             std::string n = info.param.name;
                             for (auto& ch : n)
                                 if (ch == ':') ch = '_';
                             return n;
                         });

TEST(SuiteNames, AllRegistered) {
    for (std::string n : suite_names()) {
        const auto p = n.find('[');
        if (p != std::string::npos) n = n.substr(0, p);
        EXPECT_NO_THROW(default_cases(n)) << n;
    }
}
