#pragma once

// Monte-Carlo evaluation of trading agents with common random numbers.

#include "error.hpp"
#include "hjb.hpp"
#include "market_core.hpp"
#include "marks.hpp"
#include "order_flow.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "stats.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sigexec {

struct Arm {
    std::string label;
    Agent agent;
    MarketParams params;
    MarkModel marks;
    MarketState initial;
};

struct Histogram {
    double lower = 0.0;
    double width = 0.05;
    std::vector<std::size_t> counts;
};

struct EvalReport {
    std::string label;
    std::string agent;
    MarketParams params;
    double signal_prob = 0.0;
    MarketState initial;
    std::uint64_t seed = 0;
    std::vector<double> wealth;     ///< terminal wealth per path, in path order
    std::vector<double> utility;    ///< U(wealth - (x0 + p0 q0)) per path
    std::vector<char> speculative;  ///< per-path roundtrip flag
    std::vector<double> external_pnl;  ///< per-path control variate (see PathRecord)
    double mean = 0.0;
    double variance = 0.0;  ///< population variance
    double mean_utility = 0.0;
    double utility_se = 0.0;
    double speculation_fraction = 0.0;
    double breaker_fraction = 0.0;
    Histogram histogram;

    std::size_t n_sim() const { return wealth.size(); }
    double stddev() const { return std::sqrt(variance); }
};

/// True if the trader both bought and sold, counting the liquidation at the horizon
/// when the market is still open.
inline bool detect_speculation(const PathRecord& path, double target_q = 0.0) {
    bool buy = false, sell = false;
    for (const auto& t : path.trades) {
        buy |= t.size > 0.0;
        sell |= t.size < 0.0;
    }
    if (!path.final_state.halted) {
        const double rest = target_q - path.final_state.q;
        buy |= rest > 0.0;
        sell |= rest < 0.0;
    }
    return buy && sell;
}

inline Histogram make_histogram(std::span<const double> xs, double width) {
    Histogram h;
    h.width = width;
    if (xs.empty()) return h;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    h.lower = std::floor(*lo / width) * width;
    const auto bins = static_cast<std::size_t>(std::floor((*hi - h.lower) / width)) + 1;
    h.counts.assign(bins, 0);
    for (double x : xs) {
        auto b = static_cast<std::size_t>(std::floor((x - h.lower) / width));
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

/// Simulates n_sim paths per arm. Path i of every arm uses the candidate event stream of
/// (base_seed, i), so arms differ only through their agent, signal probability and spread.
inline std::vector<EvalReport> run_experiment(const std::vector<Arm>& arms, std::size_t n_sim, std::uint64_t base_seed,
                                              unsigned threads = 1, double histogram_width = 0.05) {
    if (n_sim < 1) throw std::invalid_argument("run_experiment: n_sim must be >= 1");
    std::vector<EvalReport> out;
    for (const auto& arm : arms) {
        arm.params.validate();
        arm.marks.validate();
        EvalReport r;
        r.label = arm.label;
        r.agent = arm.agent.name();
        r.params = arm.params;
        r.signal_prob = arm.marks.signal_prob;
        r.initial = arm.initial;
        r.seed = base_seed;
        r.wealth.resize(n_sim);
        r.utility.resize(n_sim);
        r.speculative.resize(n_sim);
        r.external_pnl.resize(n_sim);
        std::vector<char> halted(n_sim);
        const double w0 = arm.initial.x + arm.initial.p * arm.initial.q;
        parallel_for(n_sim, threads, [&](std::size_t i) {
            const auto path = simulate_path(arm.params, arm.marks, arm.agent, arm.initial, base_seed, i);
            r.wealth[i] = path.terminal_wealth;
            r.utility[i] = utility(path.terminal_wealth - w0, arm.params.alpha);
            r.speculative[i] = detect_speculation(path, arm.agent.target());
            r.external_pnl[i] = path.external_pnl;
            halted[i] = path.final_state.halted;
        });
        r.mean = stats::mean(r.wealth);
        r.variance = stats::variance(r.wealth);
        r.mean_utility = stats::mean(r.utility);
        r.utility_se = stats::standard_error(r.utility);
        std::size_t spec = 0, brk = 0;
        for (std::size_t i = 0; i < n_sim; ++i) {
            spec += r.speculative[i] != 0;
            brk += halted[i] != 0;
        }
        r.speculation_fraction = static_cast<double>(spec) / static_cast<double>(n_sim);
        r.breaker_fraction = static_cast<double>(brk) / static_cast<double>(n_sim);
        r.histogram = make_histogram(r.wealth, histogram_width);
        out.push_back(std::move(r));
    }
    return out;
}

/// (mean(with) - mean(without)) / sd(with), population standard deviation. Empty when sd(with) = 0.
inline std::optional<double> signal_sharpe_ratio(std::span<const double> with_signal, std::span<const double> without) {
    if (with_signal.empty() || without.empty())
        throw std::invalid_argument("signal_sharpe_ratio: sample sets must be non-empty");
    const double sd = std::sqrt(stats::variance(with_signal));
    if (sd == 0.0) return std::nullopt;
    return (stats::mean(with_signal) - stats::mean(without)) / sd;
}

struct ConsistencyResult {
    double simulated = 0.0;  ///< mean utility (normalized by |U(x0 + p0 q0)|)
    double solver = 0.0;     ///< v(T, s0) on the same scale
    double discrepancy = 0.0;
    double standard_error = 0.0;
    double allowance = 0.0;  ///< 3 SE + relative allowance * |solver|
    bool pass = false;
};

/// Compares the simulated mean utility with the solver's value at the initial state.
inline ConsistencyResult consistency_check(const ValueSurface& surface, const EvalReport& report,
                                           double relative_allowance = 0.02) {
    if (!surface.params.same_model(report.params) || surface.signal_prob != report.signal_prob)
        throw std::invalid_argument("consistency_check: surface and report were produced with different parameters");
    ConsistencyResult c;
    c.simulated = report.mean_utility;
    // EvalReport::utility factors out the initial mark-to-market wealth, which leaves w itself.
    c.solver = surface.reduced_value(report.initial.lambda, report.initial.q);
    c.discrepancy = std::abs(c.simulated - c.solver);
    c.standard_error = report.utility_se;
    c.allowance = 3.0 * c.standard_error + relative_allowance * std::abs(c.solver);
    c.pass = c.discrepancy <= c.allowance;
    return c;
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"label", r.label},
            {"agent", r.agent},
            {"n_sim", r.n_sim()},
            {"seed", r.seed},
            {"signal_prob", r.signal_prob},
            {"initial", {{"lambda", r.initial.lambda}, {"q", r.initial.q}, {"p", r.initial.p}, {"x", r.initial.x}}},
            {"market", market_to_json(r.params)},
            {"mean", r.mean},
            {"variance", r.variance},
            {"mean_utility", r.mean_utility},
            {"utility_se", r.utility_se},
            {"speculation_fraction", r.speculation_fraction},
            {"breaker_fraction", r.breaker_fraction},
            {"histogram", {{"lower", r.histogram.lower}, {"width", r.histogram.width}, {"counts", r.histogram.counts}}}};
}

inline void write_samples_csv(std::ostream& os, const EvalReport& r) {
    os << "path_id,terminal_wealth,utility,speculative\n";
    for (std::size_t i = 0; i < r.n_sim(); ++i)
        os << i << ',' << r.wealth[i] << ',' << r.utility[i] << ',' << int(r.speculative[i]) << '\n';
}

inline void write_histogram_csv(std::ostream& os, const EvalReport& r) {
    os << "bin_lower,bin_upper,count\n";
    for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
        const double lo = r.histogram.lower + static_cast<double>(b) * r.histogram.width;
        os << lo << ',' << lo + r.histogram.width << ',' << r.histogram.counts[b] << '\n';
    }
}

} // namespace sigexec
