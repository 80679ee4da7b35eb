#include <gtest/gtest.h>

#include <random>

#include "ljcell/core.hpp"

using namespace ljcell;

namespace {

Domain unit_box(bool px = true) {
    Domain d;
    d.lengths = {1, 1, 1};
    d.periodic = {px, true, true};
    d.reflecting = {!px, false, false};
    return d;
}

}  // namespace

TEST(WrapPosition, Examples) {
    const Domain d = unit_box();
    EXPECT_EQ(wrap_position({0.5, 0.5, 0.5}, d), (Vec3{0.5, 0.5, 0.5}));
    EXPECT_EQ(wrap_position({1.25, 0, 0}, d), (Vec3{0.25, 0, 0}));
    EXPECT_EQ(wrap_position({-0.25, 0, 0}, d), (Vec3{0.75, 0, 0}));
}

TEST(WrapPosition, NonPeriodicUntouched) {
    const Domain d = unit_box(false);
    EXPECT_EQ(wrap_position({1.25, 1.25, 0}, d), (Vec3{1.25, 0.25, 0}));
}

TEST(WrapPosition, IdempotentAndInRange) {
    Domain d;
    d.lengths = {3.7, 5.0, 11.3};
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int k = 0; k < 20000; ++k) {
        const Vec3 r{u(gen), u(gen), u(gen)};
        const Vec3 w = wrap_position(r, d);
        EXPECT_EQ(wrap_position(w, d), w);
        for (int a = 0; a < 3; ++a) {
            EXPECT_GE(w[a], 0.0);
            EXPECT_LT(w[a], d.lengths[a]);
        }
    }
    // tiny negative values round to L, which must not be returned
    const Vec3 w = wrap_position({-1e-18, 0, 0}, d);
    EXPECT_LT(w.x, d.lengths.x);
}

TEST(MinimumImage, Examples) {
    EXPECT_DOUBLE_EQ(minimum_image({0.6, 0, 0}, unit_box()).x, -0.4);
    EXPECT_EQ(minimum_image({0.4, 0, 0}, unit_box()).x, 0.4);
    EXPECT_EQ(minimum_image({0.6, 0, 0}, unit_box(false)).x, 0.6);
}

TEST(MinimumImage, AntisymmetricAndHalfOpen) {
    Domain d;
    d.lengths = {2.0, 3.0, 7.5};
    std::mt19937_64 gen(11);
    for (int k = 0; k < 20000; ++k) {
        Vec3 dr;
        for (int a = 0; a < 3; ++a) dr[a] = std::uniform_real_distribution<double>(-d.lengths[a], d.lengths[a])(gen);
        const Vec3 p = minimum_image(dr, d);
        const Vec3 m = minimum_image(-dr, d);
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(p[a] + m[a], 0.0);
            EXPECT_GE(p[a], -0.5 * d.lengths[a]);
            EXPECT_LT(p[a], 0.5 * d.lengths[a]);
        }
    }
}

TEST(SpeciesTable, MixedTablesSymmetricWithPureDiagonal) {
    SpeciesTable t({{"A", 1.0, 1.0, 1.0}, {"B", 3.0, 4.0, 2.0}, {"C", 0.7, 0.3, 1.5}});
    t.set_binary(0, 2, 0.9, 1.05);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(t.mixed_sigma(i, i), t[i].sigma);
        EXPECT_EQ(t.mixed_epsilon(i, i), t[i].epsilon);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(t.mixed_sigma(i, j), t.mixed_sigma(j, i));
            EXPECT_EQ(t.mixed_epsilon(i, j), t.mixed_epsilon(j, i));
            EXPECT_EQ(t.xi(i, j), t.xi(j, i));
        }
    }
    EXPECT_EQ(t.mixed_sigma(0, 1), 2.0);
    EXPECT_EQ(t.mixed_epsilon(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(t.mixed_epsilon(0, 2), 0.9 * std::sqrt(0.3));
}

TEST(SpeciesTable, RejectsNonPositive) {
    EXPECT_THROW(SpeciesTable({{"A", 0.0, 1.0, 1.0}}), ConfigError);
    EXPECT_THROW(SpeciesTable({{"A", 1.0, -1.0, 1.0}}), ConfigError);
    SpeciesTable t({{"A", 1, 1, 1}, {"B", 1, 1, 1}});
    EXPECT_THROW(t.set_binary(0, 1, 0.0, 1.0), ConfigError);
}

TEST(Domain, Validation) {
    Domain d;
    d.lengths = {10, 10, 10};
    EXPECT_NO_THROW(d.validate());
    d.periodic[2] = false;
    EXPECT_THROW(d.validate(), ConfigError);
    d.wall = WallSpec{1.0, 1.0, 2.5};
    EXPECT_NO_THROW(d.validate());
    d.periodic[0] = false;
    EXPECT_THROW(d.validate(), ConfigError);
    d.reflecting[0] = true;
    EXPECT_NO_THROW(d.validate());
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int k = 0; k < 1000; ++k) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, DerivedStreamsIndependentOfParentUse) {
    Rng parent(7);
    const Rng before = parent.derive(rng_purpose::monte_carlo, 3);
    for (int k = 0; k < 10; ++k) parent.next_u64();
    Rng after = parent.derive(rng_purpose::monte_carlo, 3);
    Rng b = before;
    for (int k = 0; k < 100; ++k) EXPECT_EQ(b.next_u64(), after.next_u64());
    Rng other = parent.derive(rng_purpose::monte_carlo, 4);
    Rng again = parent.derive(rng_purpose::monte_carlo, 3);
    EXPECT_NE(other.next_u64(), again.next_u64());
}

TEST(Rng, UniformAndBelowRanges) {
    Rng r(5);
    double sum = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.005);
    std::vector<int> hist(7, 0);
    for (int k = 0; k < 70000; ++k) ++hist[r.below(7)];
    for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, NormalMoments) {
    Rng r(9);
    double s1 = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double x = r.normal();
        s1 += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s1 / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}
