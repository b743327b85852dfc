#include <sigexec/parallel.hpp>
#include <sigexec/rng.hpp>
#include <sigexec/stats.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <numeric>

using namespace sigexec;

TEST(Philox, KnownAnswerVectors) {
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(PathStream, PureFunctionOfAddress) {
    const PathStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    EXPECT_EQ(a.uniforms(3, 1), b.uniforms(3, 1));
    EXPECT_NE(a.uniforms(3, 1), c.uniforms(3, 1));
    EXPECT_NE(a.uniforms(3, 1), d.uniforms(3, 1));
    EXPECT_NE(a.uniforms(3, 1), a.uniforms(3, 2));
    EXPECT_NE(a.uniforms(3, 1), a.uniforms(4, 1));
    // High bits of seed and path index are used.
    EXPECT_NE(PathStream(1, 0).uniforms(0, 0), PathStream(1 + (1ull << 32), 0).uniforms(0, 0));
    EXPECT_NE(PathStream(1, 0).uniforms(0, 0), PathStream(1, 1ull << 32).uniforms(0, 0));
}

TEST(PathStream, UniformMoments) {
    const PathStream s(1, 0);
    std::vector<double> u;
    for (std::uint32_t i = 0; i < 100000; ++i)
        for (double x : s.uniforms(i, 0)) {
            ASSERT_GE(x, 0.0);
            ASSERT_LT(x, 1.0);
            u.push_back(x);
        }
    EXPECT_NEAR(stats::mean(u), 0.5, 4.0 * std::sqrt(1.0 / 12.0 / u.size()));
    EXPECT_NEAR(stats::variance(u), 1.0 / 12.0, 0.002);
}

TEST(PathStream, NormalMoments) {
    const PathStream s(9, 3);
    std::vector<double> z;
    for (std::uint32_t i = 0; i < 200000; ++i) z.push_back(s.normal(i, 2));
    EXPECT_NEAR(stats::mean(z), 0.0, 4.0 / std::sqrt(z.size()));
    EXPECT_NEAR(stats::variance(z), 1.0, 0.015);
}

TEST(Stats, PairwiseSumAndMoments) {
    std::vector<double> xs(1000);
    std::iota(xs.begin(), xs.end(), 1.0);
    EXPECT_EQ(stats::pairwise_sum(xs), 500500.0);
    EXPECT_EQ(stats::mean(xs), 500.5);
    EXPECT_NEAR(stats::variance(xs), (1000.0 * 1000.0 - 1.0) / 12.0, 1e-9);
    EXPECT_NEAR(stats::standard_error(xs), std::sqrt((1000.0 * 1000.0 - 1.0) / 12.0 * 1000.0 / 999.0 / 1000.0), 1e-12);
    EXPECT_EQ(stats::mean(std::vector<double>{}), 0.0);
    EXPECT_EQ(stats::standard_error(std::vector<double>{1.0}), 0.0);
}

TEST(Parallel, VisitsEveryIndexOnce) {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<std::atomic<int>> hits(1001);
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
        for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
}

TEST(Parallel, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(100, 4, [](std::size_t i) {
                     if (i == 57) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}
