#include <gtest/gtest.h>

#include <cmath>

#include "measdyn/detail/dense_lp.hpp"
#include "measdyn/flat_metric.hpp"
#include "measdyn/random.hpp"

using namespace measdyn;

namespace {

AtomicMeasure two_atom(double d) { return AtomicMeasure::from_atoms(1, {{{0.0}, 1.0}, {{d}, -1.0}}); }

/// The primal LP written out directly and handed to the dense tableau solver:
/// max sum w_i psi_i  s.t. |psi_i| <= a, |psi_i - psi_j| <= L d_ij, a + L <= 1
/// (sum form) or a <= 1, L <= 1 (max form).
double dense_reference(const AtomicMeasure& mu, NormForm form) {
    const std::size_t n = mu.size();
    if (n == 0) return 0.0;
    // Columns: psi+ (n), psi- (n), a, L, then one slack per inequality row.
    const std::size_t pairs = n * (n - 1);
    const std::size_t budget_rows = form == NormForm::sum ? 1 : 2;
    const std::size_t rows = 2 * n + pairs + budget_rows;
    const std::size_t cols = 2 * n + 2 + rows;
    detail::DenseLp lp(rows, cols);
    const std::size_t A = 2 * n, L = 2 * n + 1;
    std::size_t r = 0;
    auto slack = [&](std::size_t row) { lp.at(row, 2 * n + 2 + row) = 1.0; };
    for (std::size_t i = 0; i < n; ++i) {
        for (double sgn : {1.0, -1.0}) {
            lp.at(r, i) = sgn;
            lp.at(r, n + i) = -sgn;
            lp.at(r, A) = -1.0;
            slack(r);
            ++r;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            lp.at(r, i) = 1.0;
            lp.at(r, n + i) = -1.0;
            lp.at(r, j) = -1.0;
            lp.at(r, n + j) = 1.0;
            lp.at(r, L) = -distance(mu.location(i), mu.location(j));
            slack(r);
            ++r;
        }
    if (form == NormForm::sum) {
        lp.at(r, A) = 1.0;
        lp.at(r, L) = 1.0;
        lp.b[r] = 1.0;
        slack(r);
        ++r;
    } else {
        lp.at(r, A) = 1.0;
        lp.b[r] = 1.0;
        slack(r);
        ++r;
        lp.at(r, L) = 1.0;
        lp.b[r] = 1.0;
        slack(r);
        ++r;
    }
    for (std::size_t i = 0; i < n; ++i) {
        lp.c[i] = -mu.weight(i);
        lp.c[n + i] = mu.weight(i);
    }
    const auto res = detail::dense_lp_minimize(std::move(lp));
    if (!res) throw Error("dense reference LP failed");
    return -res->objective;
}

AtomicMeasure random_signed(Rng& rng, std::size_t dim, std::size_t max_atoms, double hi) {
    RandomMeasureSpec s;
    s.dim = dim;
    s.max_atoms = max_atoms;
    s.lower.assign(dim, 0.0);
    s.upper.assign(dim, hi);
    return random_measure(rng, s);
}

}  // namespace

TEST(Pairing, Examples) {
    const auto mu = AtomicMeasure::from_atoms(1, {{{0.0}, 0.5}, {{1.0}, -0.25}});
    EXPECT_EQ(pairing(BoundedLipschitzFunction{[](std::span<const double>) { return 1.0; }, 1, 0}, mu), 0.25);
    EXPECT_EQ(pairing(BoundedLipschitzFunction{[](std::span<const double> x) { return x[0]; }, 0, 1},
                      AtomicMeasure::dirac({2.0}, 3.0)),
              6.0);
    EXPECT_EQ(pairing(BoundedLipschitzFunction{[](std::span<const double>) { return 0.0; }, 0, 0}, mu), 0.0);
}

TEST(BlNorm, SingleAtomAndEmpty) {
    EXPECT_NEAR(bl_norm(AtomicMeasure::dirac({0.0})), 1.0, 1e-12);
    EXPECT_NEAR(bl_norm(AtomicMeasure::dirac({0.3, 0.4}, -2.5)), 2.5, 1e-12);
    EXPECT_EQ(bl_norm(AtomicMeasure(2)), 0.0);
}

TEST(BlNorm, TwoAtomClosedForm) {
    for (double d : {0.1, 1.0, 10.0}) {
        const double oracle = bl_norm_oracle(two_atom(d), 1e-3);
        const double closed = 2 * d / (d + 2);
        EXPECT_NEAR(oracle, closed, 2e-3) << "d=" << d;
        EXPECT_NEAR(bl_norm(two_atom(d)), closed, 1e-9) << "d=" << d;
    }
    EXPECT_NEAR(bl_norm(two_atom(1.0)), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(bl_norm(two_atom(10.0)), 5.0 / 3.0, 1e-12);
}

TEST(BlNorm, TwoAtomParameterScan) {
    // Scan over a in [0, 1] with psi_1 = -psi_2 = min(a, (1 - a) d / 2).
    for (double d : {0.1, 0.5, 1.0, 3.0, 10.0}) {
        double best = 0.0;
        for (int k = 0; k <= 10000; ++k) {
            const double a = k * 1e-4;
            best = std::max(best, 2 * std::min(a, (1 - a) * d / 2));
        }
        EXPECT_NEAR(bl_norm(two_atom(d)), best, 1e-4) << "d=" << d;
    }
}

TEST(BlNorm, MaxFormTwoAtoms) {
    EXPECT_NEAR(bl_norm(two_atom(0.1), NormForm::max), 0.1, 1e-12);
    EXPECT_NEAR(bl_norm(two_atom(1.0), NormForm::max), 1.0, 1e-12);
    EXPECT_NEAR(bl_norm(two_atom(10.0), NormForm::max), 2.0, 1e-12);
}

TEST(BlNorm, MatchesDenseLp) {
    Rng rng(2024);
    for (int i = 0; i < 150; ++i) {
        const std::size_t dim = 1 + static_cast<std::size_t>(i % 2);
        const auto mu = random_signed(rng, dim, 7, 3.0);
        for (NormForm f : {NormForm::sum, NormForm::max})
            EXPECT_NEAR(bl_norm(mu, f), dense_reference(mu, f), 1e-9) << "case " << i;
    }
}

TEST(BlNorm, WitnessCertifiesValue) {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto mu = random_signed(rng, 2, 40, 2.0);
        const auto r = bl_norm_solve(mu);
        EXPECT_LE(witness_violation(mu, r.witness, NormForm::sum), 1e-9);
        EXPECT_NEAR(pairing(r.witness, mu), r.value, 1e-9);
        EXPECT_LE(r.value, tv_norm(mu) + 1e-12);
    }
}

TEST(BlNorm, Homogeneity) {
    Rng rng(5);
    const auto mu = random_signed(rng, 1, 15, 2.0);
    for (double c : {-3.0, -0.5, 0.0, 2.0})
        EXPECT_NEAR(bl_norm(scale(c, mu)), std::abs(c) * bl_norm(mu), 1e-10);
}

TEST(BlNorm, LargeOneDimensionalInstance) {
    Rng rng(1);
    RandomMeasureSpec s;
    s.min_atoms = 1000;
    s.max_atoms = 1000;
    const auto big = random_measure(rng, s);
    const auto r = bl_norm_solve(big);
    EXPECT_LE(witness_violation(big, r.witness, NormForm::sum), 1e-8);
    EXPECT_NEAR(pairing(r.witness, big), r.value, 1e-8);
}

TEST(BlDistance, Examples) {
    const auto m = AtomicMeasure::from_atoms(1, {{{0.0}, 1.0}, {{2.0}, -0.3}});
    EXPECT_EQ(bl_distance(m, m), 0.0);
    EXPECT_NEAR(bl_distance(AtomicMeasure::dirac({0.0}), AtomicMeasure::dirac({1.0})), 2.0 / 3.0, 1e-12);
    for (double s : {0.01, 0.2, 0.7}) {
        const double d = bl_distance(AtomicMeasure::dirac({0.3}), AtomicMeasure::dirac({0.3 + s}));
        EXPECT_LE(d, s + 1e-12);
    }
}

TEST(Oracle, Examples) {
    EXPECT_NEAR(bl_norm_oracle(AtomicMeasure::dirac({0.0}), 1e-3), 1.0, 1e-3);
    EXPECT_NEAR(bl_norm_oracle(two_atom(1.0), 1e-3), 2.0 / 3.0, 2e-3);
    EXPECT_EQ(bl_norm_oracle(AtomicMeasure(1), 1e-3), 0.0);
    EXPECT_THROW(bl_norm_oracle(AtomicMeasure::from_atoms(1, {{{0.0}, 1}, {{1.0}, 1}, {{2.0}, 1}, {{3.0}, 1}}), 1e-2),
                 Error);
}

TEST(Oracle, ThreeAtomsAgreeWithLp) {
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        const std::size_t dim = 1 + static_cast<std::size_t>(i % 2);
        const auto mu = random_signed(rng, dim, 3, 2.0);
        EXPECT_NEAR(bl_norm_oracle(mu, 1e-2), bl_norm(mu), 3e-2 + 1e-9) << "case " << i;
    }
}

TEST(ProductBound, Examples) {
    Rng rng(4);
    const auto mu = random_signed(rng, 1, 10, 3.0);
    const BoundedLipschitzFunction one{[](std::span<const double>) { return 1.0; }, 1.0, 0.0};
    const auto c1 = product_bound_check(one, mu);
    EXPECT_NEAR(c1.lhs, c1.rhs, 1e-12);
    EXPECT_TRUE(c1.ok);
    const BoundedLipschitzFunction zero{[](std::span<const double>) { return 0.0; }, 0.0, 0.0};
    EXPECT_EQ(product_bound_check(zero, mu).lhs, 0.0);
    const BoundedLipschitzFunction cosine{[](std::span<const double> x) { return std::cos(x[0]); }, 1.0, 1.0};
    const auto c2 = product_bound_check(cosine, AtomicMeasure::dirac({0.0}));
    EXPECT_NEAR(c2.lhs, 1.0, 1e-12);
    EXPECT_NEAR(c2.rhs, 2.0, 1e-12);
    EXPECT_TRUE(c2.ok);
}

TEST(NormForms, EquivalentWithinFactorTwo) {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto mu = random_signed(rng, 1 + static_cast<std::size_t>(i % 2), 12, 4.0);
        const double s = bl_norm(mu, NormForm::sum), m = bl_norm(mu, NormForm::max);
        EXPECT_LE(s, m + 1e-12);
        EXPECT_LE(m, 2 * s + 1e-12);
    }
}

TEST(Kantorovich, TwoDiracs) {
    for (double d : {0.1, 0.5, 1.0, 4.0}) {
        const double kr = kr_distance(AtomicMeasure::dirac({0.0}), AtomicMeasure::dirac({d}));
        EXPECT_NEAR(kr, std::min(d, 1.0), 1e-12);
        const double bl = bl_distance(AtomicMeasure::dirac({0.0}), AtomicMeasure::dirac({d}));
        EXPECT_LE(0.5 * kr, bl + 1e-12);
        EXPECT_LE(bl, 2 * kr + 1e-12);
    }
    EXPECT_THROW(kr_distance(AtomicMeasure::dirac({0.0}), AtomicMeasure::dirac({1.0}, 2.0)), Error);
    EXPECT_THROW(kr_distance(AtomicMeasure::dirac({0.0}, -1.0), AtomicMeasure::dirac({1.0}, -1.0)), Error);
}

TEST(Kantorovich, SplitTransport) {
    // Mass 1 at 0 against halves at +-0.2: every unit travels 0.2.
    const auto mu = AtomicMeasure::dirac({0.0});
    const auto nu = AtomicMeasure::from_atoms(1, {{{-0.2}, 0.5}, {{0.2}, 0.5}});
    EXPECT_NEAR(kr_distance(mu, nu), 0.2, 1e-12);
}
