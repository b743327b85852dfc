#include <sigexec/eval.hpp>
#include <sigexec/order_flow.hpp>
#include <sigexec/policy.hpp>

#include <gtest/gtest.h>

using namespace sigexec;

namespace {

std::shared_ptr<const Policy> small_policy(const MarketParams& mp, double p_hat = 0.2) {
    static const GridSpec spec{0.01, 1.0, -10.0, 10.0};
    return std::make_shared<Policy>(solve(mp, benchmark_marks(p_hat), spec).policy);
}

} // namespace

static_assert(TradingAgent<Agent>);

TEST(Agent, DoNothing) {
    const MarketParams mp;
    const auto a = Agent::do_nothing(mp);
    const MarketState s{0.0, -8.0, 100.0, 0.0, false};
    EXPECT_EQ(a.name(), "do_nothing");
    EXPECT_EQ(a.decision_step(), 0.0);
    EXPECT_EQ(a.on_signal(0.3, s, -1), 0.0);
    EXPECT_EQ(a.on_state(0.3, s), 0.0);
    EXPECT_EQ(a.on_state(1.0, s), 8.0);
}

TEST(Agent, ImmediateTradesToTargetWithinLiquidity) {
    const MarketParams mp;
    const auto a = Agent::immediate(mp);
    EXPECT_EQ(a.decision_step(), mp.horizon);
    EXPECT_EQ(a.on_state(0.0, {0.0, -8.0, 100.0, 0.0, false}), 8.0);
    EXPECT_EQ(a.on_state(0.0, {-37.0, -8.0, 100.0, 0.0, false}), 3.0);
    EXPECT_EQ(a.on_state(0.0, {0.0, -8.0, 100.0, 0.0, true}), 0.0);
    const auto b = Agent::immediate(mp, 2.0);
    EXPECT_EQ(b.on_state(0.0, {0.0, 5.0, 100.0, 0.0, false}), -3.0);

    // On a simulated path it executes exactly once, at t = 0.
    const auto path = simulate_path(mp, benchmark_marks(0.2), a, {0.0, -8.0, 100.0, 0.0, false}, 1, 0);
    ASSERT_EQ(path.trades.size(), 1u);
    EXPECT_EQ(path.trades[0].time, 0.0);
    EXPECT_EQ(path.trades[0].size, 8.0);
    EXPECT_EQ(path.final_state.q, 0.0);
}

TEST(Agent, TwapScheduleIsMonotoneAndCompletes) {
    const MarketParams mp;
    for (double q0 : {-8.0, -3.0, 5.0, 0.0}) {
        const auto a = Agent::twap(mp, q0, 0.0, 0.05);
        EXPECT_EQ(a.decision_step(), 0.05);
        MarketState s{0.0, q0, 100.0, 0.0, false};
        double prev_gap = std::abs(q0);
        for (int k = 0; k < 20; ++k) {
            const double t = 0.05 * k;
            const double trade = a.on_state(t, s);
            EXPECT_GE(trade * (0.0 - s.q), 0.0);
            s.q += trade;
            const double scheduled = q0 * (1.0 - std::min(1.0, (t + 0.05)));
            EXPECT_LE(std::abs(s.q - scheduled), 0.5 + 1e-9) << "q0=" << q0 << " t=" << t;
            EXPECT_LE(std::abs(s.q), prev_gap);
            prev_gap = std::abs(s.q);
        }
        EXPECT_EQ(s.q, 0.0);
    }
}

TEST(Agent, SolvedFollowsPolicyLookup) {
    const MarketParams mp;
    const auto pol = small_policy(mp);
    const auto a = Agent::solved(pol, mp);
    EXPECT_EQ(a.decision_step(), 0.01);
    const auto& g = pol->grid;
    std::size_t nonzero = 0;
    for (double t : {0.0, 0.33, 0.9})
        for (double lambda : {-38.0, -20.0, -5.3, 10.0})
            for (double q : {-8.0, -2.0, 0.0, 3.0})
                for (int z : {-1, 1}) {
                    const MarketState s{lambda, q, 100.0, 0.0, false};
                    const std::size_t k = g.nearest_slice(mp.horizon - t);
                    const double expect = clip_to_liquidity(
                        pol->gamma_star(k, g.nearest_lambda_row(lambda), g.nearest_q_col(q), z), lambda, mp.lambda_lower);
                    EXPECT_EQ(a.on_signal(t, s, z), expect);
                    nonzero += expect != 0.0;
                    EXPECT_EQ(a.on_state(t, s),
                              clip_to_liquidity(pol->delta_star(k, g.nearest_lambda_row(lambda), g.nearest_q_col(q)),
                                                lambda, mp.lambda_lower));
                }
    EXPECT_GT(nonzero, 0u);
    const MarketState halted{-40.0, -8.0, 100.0, 0.0, true};
    EXPECT_EQ(a.on_signal(0.5, halted, -1), 0.0);
    EXPECT_EQ(a.on_state(0.5, halted), 0.0);
    EXPECT_EQ(a.on_signal(0.5, {0.0, -8.0, 100.0, 0.0, false}, 0), 0.0);
    EXPECT_EQ(a.on_state(1.0, {0.0, -8.0, 100.0, 0.0, false}), 8.0);
}

TEST(Agent, SolvedRequiresStoredControls) {
    const MarketParams mp;
    EXPECT_THROW(Agent::solved(nullptr, mp), std::invalid_argument);
    const auto empty = std::make_shared<Policy>(solve(mp, benchmark_marks(), {0.01, 1.0, -4.0, 4.0}, {1, false, false}).policy);
    EXPECT_THROW(Agent::solved(empty, mp), std::invalid_argument);
}

TEST(Agent, SolvedWithoutSignalNeverSpeculates) {
    const MarketParams mp;
    const auto a = Agent::solved(small_policy(mp, 0.0), mp);
    const auto mm = benchmark_marks(0.0);
    for (std::size_t i = 0; i < 300; ++i) {
        const auto path = simulate_path(mp, mm, a, {0.0, -8.0, 100.0, 0.0, false}, 3, i);
        for (const auto& tr : path.trades) EXPECT_GT(tr.size, 0.0);
    }
}

TEST(Agent, SolvedBeatsEveryBaseline) {
    // Benchmark desk grid and initial state; common random numbers make the paired test sharp.
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    const auto pol = std::make_shared<const Policy>(solve(mp, mm, {0.005, 1.0, -12.0, 12.0}).policy);
    const MarketState s0{0.0, -8.0, 100.0, 0.0, false};
    const std::vector<Arm> arms{{"solved", Agent::solved(pol, mp), mp, mm, s0},
                                {"do_nothing", Agent::do_nothing(mp), mp, mm, s0},
                                {"immediate", Agent::immediate(mp), mp, mm, s0},
                                {"twap", Agent::twap(mp, s0.q), mp, mm, s0}};
    constexpr std::size_t n = 100000;
    const auto r = run_experiment(arms, n, 20240611, 4);
    for (std::size_t k = 1; k < arms.size(); ++k) {
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = r[0].utility[i] - r[k].utility[i];
        const double se = stats::standard_error(diff);
        EXPECT_GT(stats::mean(diff), 3.0 * se) << r[k].label << ": " << r[0].mean_utility << " vs " << r[k].mean_utility;
    }
}
