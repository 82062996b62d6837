#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <set>
#include <vector>

#include "ocbc/random.hpp"

using namespace ocbc;

TEST(Random, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs = differs || x != c.next();
    }
    EXPECT_TRUE(differs);
}

TEST(Random, DerivedSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 4; ++s) {
        for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(s, i));
    }
    EXPECT_EQ(seen.size(), 4000u);
    EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Random, UniformRanges) {
    Rng rng(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = rng.uniform_pos();
        ASSERT_GT(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(Random, UniformIntIsUniform) {
    Rng rng(2);
    const int n = 7;
    const int draws = 70000;
    std::vector<double> counts(n, 0.0);
    for (int i = 0; i < draws; ++i) {
        const int k = rng.uniform_int(n);
        ASSERT_GE(k, 0);
        ASSERT_LT(k, n);
        counts[static_cast<std::size_t>(k)] += 1;
    }
    double chi2 = 0.0;
    const double expected = static_cast<double>(draws) / n;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(n - 1);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.999));
}

TEST(Random, CategoricalMatchesWeights) {
    Rng rng(3);
    const std::vector<double> w{0.5, 0.0, 1.5, 2.0};
    std::vector<double> counts(w.size(), 0.0);
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) counts[static_cast<std::size_t>(rng.categorical(w))] += 1;
    EXPECT_EQ(counts[1], 0.0);
    double chi2 = 0.0;
    for (std::size_t i : {0u, 2u, 3u}) {
        const double expected = draws * w[i] / 4.0;
        chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    }
    boost::math::chi_squared dist(2);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.999));
}

TEST(Random, CategoricalAllZeroReturnsMinusOne) {
    Rng rng(4);
    const std::vector<double> w{0.0, 0.0};
    EXPECT_EQ(rng.categorical(w), -1);
}
