#pragma once

// Event-driven simulation of the marked point process with liquidity-dependent
// thinning, trade signals and the circuit breaker.
//
// Candidate events arrive at the constant dominating rate f(lambda_upper) +
// g(lambda_lower). The band coordinate of a candidate falls either in the market
// band [0, f(lambda_upper)) or in the limit band of width g(lambda_lower); the
// candidate is live when its coordinate inside the band is below f(lambda-) resp.
// g(lambda-). Liquidity is capped at lambda_upper, so the dominating rate is exact
// and the candidate stream of a path depends only on (seed, path index).

#include "error.hpp"
#include "market_core.hpp"
#include "marks.hpp"
#include "rng.hpp"

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

namespace sigexec {

template <class A>
concept TradingAgent = requires(const A& a, double t, const MarketState& s, int z) {
    { a.on_signal(t, s, z) } -> std::convertible_to<double>;
    { a.on_state(t, s) } -> std::convertible_to<double>;
    { a.decision_step() } -> std::convertible_to<double>;
};

/// Agent that never trades before the horizon.
struct PassiveAgent {
    double on_signal(double, const MarketState&, int) const { return 0.0; }
    double on_state(double, const MarketState&) const { return 0.0; }
    double decision_step() const { return 0.0; }
};

struct EventRecord {
    double time = 0.0;
    std::size_t mark = 0;     ///< index into MarkModel::marks
    OrderKind kind = OrderKind::market;
    double band_coordinate = 0.0;  ///< thinning coordinate y within its class band
    bool live = false;             ///< survived thinning and the market was open
    int signal = 0;
    double gamma = 0.0;        ///< requested signal-based trade
    double gamma_filled = 0.0;
    double eta_filled = 0.0;
    double rho_filled = 0.0;
    double state_trade = 0.0;  ///< requested state-based trade after the shock
    double state_trade_filled = 0.0;
    MarketState pre;
    MarketState post_shock;
    MarketState post_trade;
};

struct TradeRecord {
    double time = 0.0;
    double size = 0.0;  ///< executed (possibly clipped) size
    enum class Origin { signal, state, clock, terminal } origin = Origin::state;
};

struct PathRecord {
    std::vector<EventRecord> events;  ///< every candidate, live or thinned
    std::vector<TradeRecord> trades;  ///< every trader execution
    MarketState initial;
    MarketState final_state;
    double breaker_time = std::numeric_limits<double>::infinity();
    double auction_draw = 0.0;
    double terminal_wealth = 0.0;
    /// Mark-to-market gain of the trader's position from external market orders and the
    /// auction. It has mean zero under symmetric market-order flow, which makes it a
    /// control variate for terminal wealth.
    double external_pnl = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
};

namespace stream {
inline constexpr std::uint32_t kArrival = 0;  ///< inter-arrival time, band coordinate
inline constexpr std::uint32_t kMark = 1;     ///< mark choice, signal visibility
inline constexpr std::uint32_t kAuction = 2;
} // namespace stream

namespace detail {

inline std::size_t pick_mark(const MarkModel& mm, bool market, double u) {
    std::size_t last = mm.marks.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < mm.marks.size(); ++i) {
        if (mm.is_market(i) != market) continue;
        acc += mm.marks[i].probability;
        last = i;
        if (u < acc) return i;
    }
    return last;
}

} // namespace detail

/// Simulates one path on [0, horizon]. The agent sees each live event's signal before
/// the external volume executes, then reacts to the post-shock state; agents with a
/// positive decision step are additionally consulted on that clock.
template <TradingAgent Agent>
PathRecord simulate_path(const MarketParams& mp, const MarkModel& mm, const Agent& agent, const MarketState& initial,
                         std::uint64_t seed, std::uint64_t path_index = 0) {
    if (!(initial.lambda >= mp.lambda_lower && initial.lambda <= mp.lambda_upper))
        throw std::invalid_argument("simulate_path: initial liquidity outside [lambda_lower, lambda_upper]");

    PathRecord rec;
    rec.seed = seed;
    rec.path_index = path_index;
    rec.initial = initial;
    const PathStream rng(seed, path_index);
    MarketState s = initial;

    const double T = mp.horizon;
    const double market_band = mp.f(mp.lambda_upper);
    const double limit_band = mp.g(mp.lambda_lower);
    const double dominating = market_band + limit_band;
    const bool has_market = mm.class_mass(true) > 0.0;
    const bool has_limit = mm.class_mass(false) > 0.0;

    auto trade = [&](double t, double size, TradeRecord::Origin origin) {
        if (size == 0.0 || s.halted) return 0.0;
        const auto out = apply_shock_detailed(s, {size, 0.0, 0.0}, mp, true);
        s = out.state;
        if (out.triggered) rec.breaker_time = std::min(rec.breaker_time, t);
        if (out.gamma_filled != 0.0) rec.trades.push_back({t, out.gamma_filled, origin});
        return out.gamma_filled;
    };

    const double step = agent.decision_step();
    std::uint64_t clock_index = 0;
    auto next_decision = [&] { return step > 0.0 ? static_cast<double>(clock_index) * step : T; };
    auto run_clock_until = [&](double t_stop) {
        while (step > 0.0 && next_decision() < t_stop) {
            const double td = next_decision();
            ++clock_index;
            if (!s.halted) trade(td, agent.on_state(td, s), TradeRecord::Origin::clock);
        }
    };

    double t = 0.0;
    for (std::uint64_t k = 0;; ++k) {
        if (k > std::numeric_limits<std::uint32_t>::max())
            throw PathError("simulate_path: random stream exhausted", seed, path_index);
        double t_next = std::numeric_limits<double>::infinity();
        std::array<double, 2> arrival{};
        if (dominating > 0.0) {
            arrival = rng.uniforms(static_cast<std::uint32_t>(k), stream::kArrival);
            t_next = t - std::log1p(-arrival[0]) / dominating;
        }
        run_clock_until(std::min(t_next, T));
        if (!(t_next < T)) break;
        t = t_next;

        const auto choice = rng.uniforms(static_cast<std::uint32_t>(k), stream::kMark);
        const double y = arrival[1] * dominating;
        const bool market = y < market_band;
        if ((market && !has_market) || (!market && !has_limit)) continue;

        EventRecord ev;
        ev.time = t;
        ev.mark = detail::pick_mark(mm, market, choice[0]);
        ev.kind = mm.marks[ev.mark].kind;
        ev.band_coordinate = market ? y : y - market_band;
        ev.pre = s;
        const double threshold = market ? mp.f(s.lambda) : mp.g(s.lambda);
        ev.live = !s.halted && ev.band_coordinate <= threshold;

        if (ev.live) {
            const Mark& m = mm.marks[ev.mark];
            ev.signal = emit_signal(m.kind, choice[1] < mm.signal_prob);
            ev.gamma = ev.signal != 0 ? static_cast<double>(agent.on_signal(t, s, ev.signal)) : 0.0;
            const auto out = apply_shock_detailed(s, {ev.gamma, m.eta(), m.rho()}, mp, true);
            s = out.state;
            s.lambda = std::min(s.lambda, mp.lambda_upper);
            ev.gamma_filled = out.gamma_filled;
            ev.eta_filled = out.eta_filled;
            ev.rho_filled = out.rho_filled;
            if (out.gamma_filled != 0.0) rec.trades.push_back({t, out.gamma_filled, TradeRecord::Origin::signal});
            if (out.eta_filled != 0.0)
                rec.external_pnl += out.state.q * price_impact(out.eta_filled, ev.pre.lambda - std::abs(out.gamma_filled), mp);
            if (out.triggered) rec.breaker_time = std::min(rec.breaker_time, t);
            ev.post_shock = s;
            if (!s.halted) {
                ev.state_trade = agent.on_state(t, s);
                ev.state_trade_filled = trade(t, ev.state_trade, TradeRecord::Origin::state);
            }
        } else {
            ev.post_shock = s;
        }
        ev.post_trade = s;
        rec.events.push_back(ev);
    }

    rec.final_state = s;
    rec.auction_draw = rng.normal(0, stream::kAuction);
    rec.terminal_wealth = terminal_wealth(s, mp, rec.auction_draw);
    rec.external_pnl += terminal_wealth(s, mp, rec.auction_draw) - terminal_wealth(s, mp, 0.0);
    return rec;
}

/// Upper bound on the liquidity that can arrive over the path: initial headroom plus
/// every limit-band candidate's volume.
inline double vbar_bound(double initial_lambda, const PathRecord& path, const MarketParams& mp, const MarkModel& mm) {
    double v = initial_lambda - mp.lambda_lower;
    for (const auto& ev : path.events)
        if (ev.kind != OrderKind::market) v += std::abs(mm.marks[ev.mark].rho());
    return v;
}

/// Path totals used by the moment and quadratic-variation checks.
struct PathVariation {
    double trader = 0.0;          ///< V(Q)
    double market_orders = 0.0;   ///< V(M~)
    double cancellations = 0.0;   ///< V(L~-)
    double price_qv = 0.0;        ///< sum of squared price jumps from external market orders
    double compensator = 0.0;     ///< integral of sigma^2(lambda_{t-}) dt while the market is open
    std::size_t live_market_orders = 0;
    std::size_t live_limit_events = 0;

    double taking() const { return trader + market_orders + cancellations; }
};

inline PathVariation path_variation(const PathRecord& path, const MarketParams& mp, const MarkModel& mm) {
    PathVariation v;
    for (const auto& tr : path.trades) v.trader += std::abs(tr.size);
    double t_prev = 0.0;
    double lambda_prev = path.initial.lambda;
    bool open = !path.initial.halted;
    const double stop = std::min(mp.horizon, path.breaker_time);
    for (const auto& ev : path.events) {
        if (!ev.live) continue;
        if (open) {
            const double sig = price_volatility(lambda_prev, mm, mp);
            v.compensator += sig * sig * (std::min(ev.time, stop) - t_prev);
        }
        v.market_orders += std::abs(ev.eta_filled);
        if (ev.rho_filled < 0.0) v.cancellations += -ev.rho_filled;
        if (ev.kind == OrderKind::market) {
            ++v.live_market_orders;
            const double jump = price_impact(ev.eta_filled, ev.pre.lambda - std::abs(ev.gamma_filled), mp);
            v.price_qv += jump * jump;
        } else {
            ++v.live_limit_events;
        }
        t_prev = ev.time;
        lambda_prev = ev.post_trade.lambda;
        open = !ev.post_trade.halted;
    }
    if (open && stop > t_prev) {
        const double sig = price_volatility(lambda_prev, mm, mp);
        v.compensator += sig * sig * (stop - t_prev);
    }
    return v;
}

/// CSV path log: one row per live event plus clock trades.
inline void write_path_log_header(std::ostream& os) {
    os << "path_id,t,kind,z,gamma,eta,rho,lambda,q,p,x\n";
}

inline void write_path_log(std::ostream& os, const PathRecord& path) {
    auto row = [&](double t, const char* kind, int z, double gamma, double eta, double rho, const MarketState& s) {
        os << path.path_index << ',' << t << ',' << kind << ',' << z << ',' << gamma << ',' << eta << ',' << rho
           << ',' << s.lambda << ',' << s.q << ',' << s.p << ',' << s.x << '\n';
    };
    std::size_t next_trade = 0;
    auto flush_clock = [&](double until) {
        for (; next_trade < path.trades.size() && path.trades[next_trade].time <= until; ++next_trade) {
            const auto& tr = path.trades[next_trade];
            if (tr.origin == TradeRecord::Origin::clock) {
                MarketState blank = path.final_state;
                blank.lambda = blank.q = blank.p = blank.x = std::numeric_limits<double>::quiet_NaN();
                row(tr.time, "trade", 0, tr.size, 0.0, 0.0, blank);
            }
        }
    };
    for (const auto& ev : path.events) {
        if (!ev.live) continue;
        flush_clock(ev.time);
        row(ev.time, to_string(ev.kind), ev.signal, ev.gamma_filled + ev.state_trade_filled, ev.eta_filled,
            ev.rho_filled, ev.post_trade);
    }
    flush_clock(std::numeric_limits<double>::infinity());
}

} // namespace sigexec
