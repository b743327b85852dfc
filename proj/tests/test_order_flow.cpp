#include "oracles.hpp"

#include <sigexec/order_flow.hpp>
#include <sigexec/stats.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace sigexec;

namespace {

// Buys one lot on every visible signal, whatever its direction.
struct SignalBuyer {
    double on_signal(double, const MarketState&, int) const { return 1.0; }
    double on_state(double, const MarketState&) const { return 0.0; }
    double decision_step() const { return 0.0; }
};

// Sells one lot on a fixed clock; event times (continuous) never hit the clock.
struct ClockSeller {
    double on_signal(double, const MarketState&, int) const { return 0.0; }
    double on_state(double t, const MarketState&) const {
        return std::abs(10.0 * t - std::round(10.0 * t)) < 1e-12 ? -1.0 : 0.0;
    }
    double decision_step() const { return 0.1; }
};

double chi_square(const std::vector<double>& counts, double mean, std::size_t n, std::size_t* dof) {
    // Bins k = lo..hi with two open tails, merged so each expected count is at least 5.
    const auto pmf = oracle::poisson_pmf(mean, 4 * static_cast<std::size_t>(mean) + 40);
    std::vector<double> expected(pmf.size()), observed(pmf.size());
    for (std::size_t k = 0; k < pmf.size(); ++k) expected[k] = pmf[k] * static_cast<double>(n);
    for (double c : counts) observed[std::min(static_cast<std::size_t>(c), pmf.size() - 1)] += 1.0;
    std::vector<std::pair<double, double>> bins;
    double e = 0.0, o = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        e += expected[k];
        o += observed[k];
        if (e >= 5.0) {
            bins.push_back({e, o});
            e = o = 0.0;
        }
    }
    bins.back().first += e;
    bins.back().second += o;
    double chi2 = 0.0;
    for (auto [ex, ob] : bins) chi2 += (ob - ex) * (ob - ex) / ex;
    *dof = bins.size() - 1;
    return chi2;
}

} // namespace

TEST(SimulatePath, ThinningCountsArePoissonWithConstantRates) {
    MarketParams mp;
    mp.kappa_f = mp.kappa_g = 0.0;
    mp.lambda_lower = -1000.0;  // keeps the breaker out of reach
    const auto mm = benchmark_marks(0.0);
    const std::size_t n = 10000;
    std::vector<double> market(n), limit(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto path = simulate_path(mp, mm, PassiveAgent{}, {0.0, 0.0, 100.0, 0.0, false}, 5, i);
        ASSERT_FALSE(path.final_state.halted);
        const auto v = path_variation(path, mp, mm);
        market[i] = static_cast<double>(v.live_market_orders);
        limit[i] = static_cast<double>(v.live_limit_events);
    }
    std::size_t dof = 0;
    const double c1 = chi_square(market, 20.0, n, &dof);
    EXPECT_LT(c1, oracle::chi2_quantile_99(static_cast<double>(dof))) << "dof=" << dof;
    const double c2 = chi_square(limit, 40.0, n, &dof);
    EXPECT_LT(c2, oracle::chi2_quantile_99(static_cast<double>(dof))) << "dof=" << dof;
}

TEST(SimulatePath, LiveCountsMatchFixedStepOracle) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.0);
    const std::size_t n = 4000;
    std::vector<double> exact_m, exact_l, euler_m, euler_l;
    std::mt19937_64 rng(99);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = path_variation(simulate_path(mp, mm, PassiveAgent{}, {-20.0, 0.0, 100.0, 0.0, false}, 17, i), mp, mm);
        exact_m.push_back(static_cast<double>(v.live_market_orders));
        exact_l.push_back(static_cast<double>(v.live_limit_events));
        const auto e = oracle::euler_thinning(mp, mm, -20.0, rng);
        euler_m.push_back(e.market_orders);
        euler_l.push_back(e.limit_events);
    }
    auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
        const double se = std::hypot(stats::standard_error(a), stats::standard_error(b));
        return std::abs(stats::mean(a) - stats::mean(b)) / se;
    };
    // Fixed-step discretisation bias is O(dt * rate) ~ 0.5%, far below 1 SE here.
    EXPECT_LT(close(exact_m, euler_m), 4.0);
    EXPECT_LT(close(exact_l, euler_l), 4.0);
}

TEST(SimulatePath, SignalsAttachToLiveEventsWithProbability) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    std::size_t live = 0, shown = 0;
    for (std::size_t i = 0; i < 2000; ++i) {
        const auto path = simulate_path(mp, mm, PassiveAgent{}, {0.0, 0.0, 100.0, 0.0, false}, 8, i);
        for (const auto& ev : path.events) {
            if (!ev.live) {
                EXPECT_EQ(ev.signal, 0);
                continue;
            }
            ++live;
            if (ev.signal != 0) {
                ++shown;
                EXPECT_EQ(ev.signal, ev.kind == OrderKind::post ? 1 : -1);
            }
        }
    }
    const double frac = static_cast<double>(shown) / static_cast<double>(live);
    EXPECT_NEAR(frac, 0.2, 4.0 * std::sqrt(0.16 / static_cast<double>(live)));
}

TEST(SimulatePath, LiquidityFloorAndFreeze) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    std::size_t halted = 0;
    for (std::size_t i = 0; i < 2000; ++i) {
        const auto path = simulate_path(mp, mm, SignalBuyer{}, {-30.0, 0.0, 100.0, 0.0, false}, 21, i);
        bool frozen = false;
        MarketState at_halt;
        for (const auto& ev : path.events) {
            if (frozen) {
                ASSERT_FALSE(ev.live);
                ASSERT_EQ(ev.post_trade, at_halt);
                continue;
            }
            ASSERT_GE(ev.post_trade.lambda, mp.lambda_lower);
            ASSERT_LE(ev.post_trade.lambda, mp.lambda_upper);
            if (ev.post_trade.halted) {
                frozen = true;
                at_halt = ev.post_trade;
                EXPECT_EQ(at_halt.lambda, mp.lambda_lower);
                EXPECT_EQ(ev.time, path.breaker_time);
            }
        }
        halted += frozen;
        EXPECT_EQ(frozen, path.final_state.halted);
    }
    EXPECT_GT(halted, 0u);
}

TEST(SimulatePath, BreakerExampleFromTheFloor) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.0);
    // Half a lot above the trigger: the first market order (size >= 1) halts the market.
    for (std::size_t i = 0; i < 50; ++i) {
        const auto path = simulate_path(mp, mm, PassiveAgent{}, {mp.lambda_lower + 0.5, 0.0, 100.0, 0.0, false}, 4, i);
        for (const auto& ev : path.events) {
            if (!ev.live) continue;
            if (ev.kind == OrderKind::market) {
                EXPECT_TRUE(ev.post_trade.halted);
                EXPECT_EQ(std::abs(ev.eta_filled), 0.5);
                break;
            }
            if (ev.kind == OrderKind::post) break;
        }
    }
}

TEST(SimulatePath, DeterministicAndCommonRandomNumbers) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    const MarketState s0{0.0, -8.0, 100.0, 0.0, false};
    const auto a = simulate_path(mp, mm, PassiveAgent{}, s0, 77, 3);
    const auto b = simulate_path(mp, mm, PassiveAgent{}, s0, 77, 3);
    ASSERT_EQ(a.events.size(), b.events.size());
    EXPECT_EQ(a.terminal_wealth, b.terminal_wealth);
    EXPECT_EQ(a.final_state, b.final_state);

    // Same candidate stream for a different agent and signal probability.
    const auto c = simulate_path(mp, benchmark_marks(0.0), SignalBuyer{}, s0, 77, 3);
    ASSERT_EQ(a.events.size(), c.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        EXPECT_EQ(a.events[k].time, c.events[k].time);
        EXPECT_EQ(a.events[k].band_coordinate, c.events[k].band_coordinate);
        EXPECT_EQ(a.events[k].mark, c.events[k].mark);
    }
    EXPECT_EQ(a.auction_draw, c.auction_draw);
    EXPECT_NE(simulate_path(mp, mm, PassiveAgent{}, s0, 77, 4).terminal_wealth, a.terminal_wealth);
}

TEST(SimulatePath, RejectsInitialLiquidityOutsideBounds) {
    const MarketParams mp;
    const auto mm = benchmark_marks();
    EXPECT_THROW(simulate_path(mp, mm, PassiveAgent{}, {-41.0, 0.0, 100.0, 0.0, false}, 1), std::invalid_argument);
    EXPECT_THROW(simulate_path(mp, mm, PassiveAgent{}, {41.0, 0.0, 100.0, 0.0, false}, 1), std::invalid_argument);
}

TEST(SimulatePath, PassiveWealthAndControlVariate) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    const MarketState s0{0.0, -8.0, 100.0, 0.0, false};
    std::vector<double> cv;
    for (std::size_t i = 0; i < 4000; ++i) {
        const auto path = simulate_path(mp, mm, PassiveAgent{}, s0, 12, i);
        EXPECT_TRUE(path.trades.empty());
        EXPECT_EQ(path.final_state.q, -8.0);
        EXPECT_EQ(path.terminal_wealth, terminal_wealth(path.final_state, mp, path.auction_draw));
        // Passive trader: wealth change from the price path equals the control variate
        // up to the liquidation cost difference.
        const double mtm = path.final_state.q * (path.final_state.p - s0.p);
        const double auction = terminal_wealth(path.final_state, mp, path.auction_draw) -
                               terminal_wealth(path.final_state, mp, 0.0);
        EXPECT_NEAR(path.external_pnl, mtm + auction, 1e-9);
        cv.push_back(path.external_pnl);
    }
    EXPECT_LT(std::abs(stats::mean(cv)), 4.0 * stats::standard_error(cv));
}

TEST(SimulatePath, ClockAgentTradesOnSchedule) {
    const MarketParams mp;
    const auto path = simulate_path(mp, benchmark_marks(0.0), ClockSeller{}, {0.0, 0.0, 100.0, 0.0, false}, 2, 0);
    std::vector<double> times;
    for (const auto& tr : path.trades) {
        EXPECT_EQ(tr.origin, TradeRecord::Origin::clock);
        EXPECT_EQ(tr.size, -1.0);
        times.push_back(tr.time);
    }
    ASSERT_EQ(times.size(), 10u);
    for (std::size_t k = 0; k < times.size(); ++k) EXPECT_NEAR(times[k], 0.1 * static_cast<double>(k), 1e-12);
    EXPECT_EQ(path.final_state.q, -10.0);
}

TEST(VbarBound, DominatesTakingVariation) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.2);
    for (std::size_t i = 0; i < 2000; ++i) {
        const auto path = simulate_path(mp, mm, SignalBuyer{}, {-10.0, 0.0, 100.0, 0.0, false}, 31, i);
        const auto v = path_variation(path, mp, mm);
        // Recompute the taking volume independently from the trade and event records.
        double taking = 0.0;
        for (const auto& tr : path.trades) taking += std::abs(tr.size);
        for (const auto& ev : path.events)
            if (ev.live) taking += std::abs(ev.eta_filled) + std::max(-ev.rho_filled, 0.0);
        EXPECT_NEAR(v.taking(), taking, 1e-9);
        EXPECT_GE(vbar_bound(-10.0, path, mp, mm) + 1e-9, taking);
    }
}

TEST(PathVariation, MomentBound) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.0);
    const double lambda0 = 0.0;
    const std::size_t n = 10000;
    std::vector<double> v1(n), v2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = path_variation(simulate_path(mp, mm, PassiveAgent{}, {lambda0, -8.0, 100.0, 0.0, false}, 3, i), mp, mm);
        v1[i] = v.taking();
        v2[i] = v1[i] * v1[i];
    }
    double rho1 = 0.0, rho2 = 0.0;
    for (const auto& m : mm.marks) {
        const double r = std::max(m.rho(), 0.0);
        if (!mm.is_market(&m - mm.marks.data())) {
            rho1 += m.probability * r;
            rho2 += m.probability * r * r;
        }
    }
    const double head = lambda0 - mp.lambda_lower;
    const double tg = mp.horizon * mp.g(mp.lambda_lower);
    const double nu = mm.class_mass(false);
    const double bound1 = 2.0 * head + 2.0 * tg * rho1;
    const double bound2 = 3.0 * head * head + 3.0 * tg * tg * nu * rho2;
    EXPECT_LE(stats::mean(v1), bound1 + 3.0 * stats::standard_error(v1));
    EXPECT_LE(stats::mean(v2), bound2 + 3.0 * stats::standard_error(v2));
}

TEST(PathVariation, QuadraticVariationMatchesCompensator) {
    const MarketParams mp;
    const auto mm = benchmark_marks(0.0);
    const std::size_t n = 10000;
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = path_variation(simulate_path(mp, mm, PassiveAgent{}, {0.0, -8.0, 100.0, 0.0, false}, 6, i), mp, mm);
        diff[i] = v.price_qv - v.compensator;
    }
    EXPECT_LT(std::abs(stats::mean(diff)), 3.0 * stats::standard_error(diff));
}

TEST(PathLog, HeaderAndRows) {
    const MarketParams mp;
    const auto path = simulate_path(mp, benchmark_marks(0.2), SignalBuyer{}, {0.0, 0.0, 100.0, 0.0, false}, 1, 9);
    std::ostringstream os;
    write_path_log_header(os);
    write_path_log(os, path);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "path_id,t,kind,z,gamma,eta,rho,lambda,q,p,x");
    std::size_t rows = 0, live = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(line.rfind("9,", 0), 0u);
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);
    }
    for (const auto& ev : path.events) live += ev.live;
    EXPECT_EQ(rows, live);
}
