#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "measdyn/flat_metric.hpp"
#include "measdyn/measure.hpp"
#include "measdyn/random.hpp"

using namespace measdyn;

namespace {

AtomicMeasure line(std::initializer_list<std::pair<double, double>> atoms) {
    std::vector<Atom> a;
    for (auto [x, w] : atoms) a.push_back({{x}, w});
    return AtomicMeasure::from_atoms(1, a);
}

}  // namespace

TEST(AtomicMeasure, CanonicalFormSortsAndMerges) {
    const auto mu = line({{1.0, 2.0}, {0.0, 1.0}, {1.0, -0.5}, {0.5, 0.0}});
    ASSERT_EQ(mu.size(), 2u);
    EXPECT_EQ(mu.location(0)[0], 0.0);
    EXPECT_EQ(mu.location(1)[0], 1.0);
    EXPECT_EQ(mu.weight(1), 1.5);
}

TEST(AtomicMeasure, CoincidentAtomsAdd) {
    const auto mu = line({{0.0, 1.0}, {0.0, 1.0}});
    ASSERT_EQ(mu.size(), 1u);
    EXPECT_EQ(tv_norm(mu), 2.0);
}

TEST(AtomicMeasure, LexicographicOrderIn2D) {
    const auto mu = AtomicMeasure::from_atoms(2, {{{1.0, 0.0}, 1.0}, {{0.0, 5.0}, 1.0}, {{0.0, -1.0}, 1.0}});
    EXPECT_EQ(mu.location(0)[1], -1.0);
    EXPECT_EQ(mu.location(1)[1], 5.0);
    EXPECT_EQ(mu.location(2)[0], 1.0);
}

TEST(AtomicMeasure, RejectsBadInput) {
    EXPECT_THROW(AtomicMeasure::from_atoms(2, {{{1.0}, 1.0}}), DimensionMismatch);
    EXPECT_THROW(line({{std::nan(""), 1.0}}), NonFiniteValue);
    EXPECT_THROW(line({{0.0, std::numeric_limits<double>::infinity()}}), NonFiniteValue);
    EXPECT_THROW(AtomicMeasure(0), Error);
}

TEST(AtomicMeasure, TvAndMass) {
    const auto mu = line({{0.0, 0.5}, {1.0, -0.25}});
    EXPECT_EQ(tv_norm(mu), 0.75);
    EXPECT_EQ(total_mass(mu), 0.25);
    EXPECT_EQ(tv_norm(AtomicMeasure(1)), 0.0);
}

TEST(AtomicMeasure, LinearCombine) {
    const auto d0 = AtomicMeasure::dirac({0.0});
    const auto d1 = AtomicMeasure::dirac({1.0});
    EXPECT_TRUE(linear_combine(1, d0, -1, d0).empty());
    EXPECT_EQ(linear_combine(2, d0, 0, d1), AtomicMeasure::dirac({0.0}, 2.0));
    const auto s = linear_combine(1, d0, 1, d1);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(tv_norm(s), 2.0);
    EXPECT_THROW(linear_combine(1, d0, 1, AtomicMeasure::dirac({0.0, 0.0})), DimensionMismatch);
}

TEST(AtomicMeasure, SumOfMatchesPairwiseSums) {
    Rng rng(7);
    RandomMeasureSpec spec;
    std::vector<AtomicMeasure> parts;
    for (int i = 0; i < 5; ++i) parts.push_back(random_measure(rng, spec));
    AtomicMeasure acc(1);
    for (const auto& p : parts) acc = linear_combine(1, acc, 1, p);
    const auto s = sum_of(parts, 1);
    ASSERT_EQ(s.size(), acc.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s.location(i)[0], acc.location(i)[0]);
        EXPECT_NEAR(s.weight(i), acc.weight(i), 1e-15);
    }
}

TEST(AtomicMeasure, PushForward) {
    const auto shifted = push_forward(AtomicMeasure::dirac({0.0}, 0.7), [](std::span<const double> x) {
        return Point{x[0] + 3.0};
    });
    EXPECT_EQ(shifted, AtomicMeasure::dirac({3.0}, 0.7));
    const auto mu = line({{0.0, 1.0}, {1.0, -1.0}});
    EXPECT_EQ(push_forward(mu, [](std::span<const double> x) { return Point(x.begin(), x.end()); }), mu);
    const auto collapsed = push_forward(line({{0.0, 0.5}, {2.0, 0.5}}), [](std::span<const double>) { return Point{0.0}; });
    EXPECT_EQ(collapsed, AtomicMeasure::dirac({0.0}, 1.0));
}

TEST(Region, MassIn) {
    const Region unit = Region::box(Point{0.0}, Point{1.0});
    EXPECT_EQ(mass_in(AtomicMeasure::dirac({0.5}, 0.2), unit), 0.2);
    EXPECT_EQ(mass_in(AtomicMeasure::dirac({-1.0}, 5.0), Region::positive_orthant(1)), 0.0);
    EXPECT_EQ(mass_in(line({{0.2, 1.0}, {1.5, 2.0}}), unit), 1.0);
    EXPECT_EQ(tv_outside(line({{0.2, 1.0}, {1.5, -2.0}}), unit), 2.0);
    EXPECT_TRUE(unit.contains(Point{1.0}));
    EXPECT_EQ(restrict_to(line({{0.2, 1.0}, {1.5, 2.0}}), unit), AtomicMeasure::dirac({0.2}, 1.0));
}

TEST(Region, HalfBoundedBox) {
    const Region r = Region::box({0.0, std::nullopt}, {std::nullopt, 1.0});
    EXPECT_TRUE(r.contains(Point{5.0, -100.0}));
    EXPECT_FALSE(r.contains(Point{-0.1, 0.0}));
    EXPECT_FALSE(r.contains(Point{0.0, 1.1}));
    EXPECT_FALSE(r.bounded());
}

TEST(PruneMerge, DropsBelowFloor) {
    const auto pr = prune_merge(line({{0.0, 1e-15}, {1.0, 1.0}}), 1e-12, 0.0);
    EXPECT_EQ(pr.measure, AtomicMeasure::dirac({1.0}, 1.0));
    EXPECT_DOUBLE_EQ(pr.error_bound, 1e-15);
}

TEST(PruneMerge, MergesAtBarycenter) {
    const auto pr = prune_merge(line({{0.0, 1.0}, {1e-9, 1.0}}), 0.0, 1e-6);
    ASSERT_EQ(pr.measure.size(), 1u);
    EXPECT_NEAR(pr.measure.location(0)[0], 5e-10, 1e-24);
    EXPECT_EQ(pr.measure.weight(0), 2.0);
    EXPECT_LE(pr.error_bound, 2 * 5e-10 * (1 + 1e-12));
}

TEST(PruneMerge, IdentitySettings) {
    const auto mu = line({{0.0, 1.0}, {1e-9, -1.0}, {3.0, 1e-300}});
    const auto pr = prune_merge(mu, 0.0, 0.0);
    EXPECT_EQ(pr.measure, mu);
    EXPECT_EQ(pr.error_bound, 0.0);
}

TEST(PruneMerge, BoundDominatesFlatDistance) {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        RandomMeasureSpec spec;
        spec.dim = 1 + static_cast<std::size_t>(i % 2);
        spec.max_atoms = 10;
        spec.lower.assign(spec.dim, 0.0);
        spec.upper.assign(spec.dim, 1.0);
        const auto mu = random_measure(rng, spec);
        const auto pr = prune_merge(mu, 0.1, 0.2);
        EXPECT_LE(bl_distance(mu, pr.measure), pr.error_bound + 1e-9) << "case " << i;
    }
}

TEST(Random, ReproducibleAndSeedSensitive) {
    RandomMeasureSpec spec;
    Rng a(case_seed(5, 3)), b(case_seed(5, 3)), c(case_seed(5, 4));
    const auto ma = random_measure(a, spec);
    EXPECT_EQ(ma, random_measure(b, spec));
    EXPECT_FALSE(ma == random_measure(c, spec));
    EXPECT_NE(case_seed(0, 0), case_seed(0, 1));
    EXPECT_NE(case_seed(0, 1), case_seed(1, 0));
}

TEST(Random, RespectsSpec) {
    Rng rng(3);
    RandomMeasureSpec spec;
    spec.dim = 2;
    spec.min_atoms = 2;
    spec.max_atoms = 4;
    spec.lower = {1.0, 2.0};
    spec.upper = {1.5, 3.0};
    spec.weight_lo = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto mu = random_measure(rng, spec);
        EXPECT_GE(mu.size(), 1u);
        EXPECT_LE(mu.size(), 4u);
        for (std::size_t k = 0; k < mu.size(); ++k) {
            EXPECT_GE(mu.weight(k), 0.0);
            EXPECT_GE(mu.location(k)[0], 1.0);
            EXPECT_LE(mu.location(k)[1], 3.0);
        }
    }
}

TEST(MeasureCurve, Times) {
    MeasureCurve c;
    c.t0 = 1.0;
    c.dt = 0.25;
    c.states.assign(5, AtomicMeasure(1));
    EXPECT_EQ(c.time(4), 2.0);
    EXPECT_EQ(c.steps(), 4u);
}
