#pragma once

// Finite mark model of the external order flow and the volatility / elasticity
// quantities derived from it.

#include "error.hpp"
#include "market_core.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace sigexec {

enum class OrderKind { market, post, cancel };

inline const char* to_string(OrderKind k) {
    switch (k) {
    case OrderKind::market: return "market";
    case OrderKind::post: return "post";
    case OrderKind::cancel: return "cancel";
    }
    return "?";
}

/// Direction of liquidity change announced by a visible signal: -1 taking, +1 providing, 0 unseen.
inline int emit_signal(OrderKind kind, bool visible) {
    if (!visible) return 0;
    return kind == OrderKind::post ? +1 : -1;
}

struct Mark {
    OrderKind kind = OrderKind::market;
    double volume = 0.0;       ///< signed lots for market orders, size (> 0) for posts and cancels
    double probability = 0.0;  ///< probability within its class (market orders / limit events)

    double eta() const { return kind == OrderKind::market ? volume : 0.0; }
    double rho() const {
        switch (kind) {
        case OrderKind::post: return volume;
        case OrderKind::cancel: return -volume;
        default: return 0.0;
        }
    }
    /// Signal value a visible announcement of this mark carries.
    int signal() const { return emit_signal(kind, true); }
};

/// Market orders arrive at total rate f(lambda) and limit events (posts and cancels)
/// at total rate g(lambda); within each class a mark is drawn with its probability.
struct MarkModel {
    std::vector<Mark> marks;
    double signal_prob = 0.0;  ///< probability that a live event is announced to the trader

    bool is_market(std::size_t i) const { return marks[i].kind == OrderKind::market; }

    /// Intensity of mark i at liquidity lambda.
    double intensity(std::size_t i, double lambda, const MarketParams& mp) const {
        return marks[i].probability * (is_market(i) ? mp.f(lambda) : mp.g(lambda));
    }

    double class_mass(bool market) const {
        double m = 0.0;
        for (std::size_t i = 0; i < marks.size(); ++i)
            if (is_market(i) == market) m += marks[i].probability;
        return m;
    }

    /// Mean limit-order volume per limit event; positive means provision dominates cancellations.
    double mean_limit_volume() const {
        double s = 0.0;
        for (const auto& m : marks) s += m.probability * m.rho();
        return s;
    }
    bool resilient() const { return mean_limit_volume() > 0.0; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw ConfigError("marks: " + msg); };
        if (marks.empty()) fail("at least one mark is required");
        if (!(signal_prob >= 0.0 && signal_prob <= 1.0)) fail("signal probability must lie in [0,1]");
        for (const auto& m : marks) {
            if (!(m.probability >= 0.0)) fail("mark probabilities must be nonnegative");
            if (m.volume == 0.0) fail("marks must carry a nonzero volume");
            if (m.kind != OrderKind::market && m.volume < 0.0) fail("limit-order sizes must be positive");
            if (m.eta() * m.rho() != 0.0) fail("a mark cannot be both market order and limit flow");
        }
        for (bool market : {true, false}) {
            bool any = false;
            for (std::size_t i = 0; i < marks.size(); ++i) any |= is_market(i) == market;
            if (any && std::abs(class_mass(market) - 1.0) > 1e-12)
                fail(std::string(market ? "market-order" : "limit-event") + " probabilities must sum to 1");
        }
    }

    /// Merge marks with identical (kind, volume); preserves every rate-weighted sum.
    MarkModel compact() const {
        std::map<std::tuple<int, double>, double> merged;
        for (const auto& m : marks) merged[{static_cast<int>(m.kind), m.volume}] += m.probability;
        MarkModel out;
        out.signal_prob = signal_prob;
        for (const auto& [key, prob] : merged)
            if (prob > 0.0) out.marks.push_back({static_cast<OrderKind>(std::get<0>(key)), std::get<1>(key), prob});
        return out;
    }
};

/// Benchmark flow. Market orders buy or sell 1, 2 or 3 lots (probabilities 0.2, 0.2,
/// 0.1 per side); limit events have size 1, 2, 3 with probabilities 0.4, 0.4, 0.2 and
/// are posts with probability `post_prob`, cancellations otherwise. Built on the full
/// product mark space and compacted.
inline MarkModel benchmark_marks(double signal_prob = 0.2, double post_prob = 0.75) {
    const std::vector<std::pair<double, double>> side = {{-3, 0.1}, {-2, 0.2}, {-1, 0.2},
                                                         {1, 0.2},  {2, 0.2},  {3, 0.1}};
    const std::vector<std::pair<double, double>> size = {{1, 0.4}, {2, 0.4}, {3, 0.2}};
    MarkModel full;
    full.signal_prob = signal_prob;
    for (const auto& [e1, p1] : side)
        for (const auto& [e2, p2] : size) {
            full.marks.push_back({OrderKind::market, e1, p1 * p2});
            full.marks.push_back({OrderKind::post, e2, p1 * p2 * post_prob});
            full.marks.push_back({OrderKind::cancel, e2, p1 * p2 * (1.0 - post_prob)});
        }
    return full.compact();
}

/// L2 norm squared of the market-order price impact at liquidity lambda.
inline double impact_l2_squared(double lambda, const MarkModel& mm, const MarketParams& mp) {
    double s = 0.0;
    for (const auto& m : mm.marks)
        if (m.kind == OrderKind::market) {
            const double i = price_impact(m.eta(), lambda, mp);
            s += m.probability * i * i;
        }
    return s;
}

/// Instantaneous price volatility sigma(lambda) = sqrt(f(lambda) * E[I(eta, lambda)^2]).
inline double price_volatility(double lambda, const MarkModel& mm, const MarketParams& mp) {
    return std::sqrt(mp.f(lambda) * impact_l2_squared(lambda, mm, mp));
}

struct ElasticityPoint {
    double lambda = 0.0;
    double ratio = 0.0;       ///< (f'/f) / (-d/dlambda I^2 / I^2)
    bool degenerate = false;  ///< impact norm does not move with liquidity
    bool pass = false;        ///< 0 < ratio < 1
};

/// Per-point check of the elasticity condition under which volatility falls with liquidity.
inline std::vector<ElasticityPoint> check_elasticity(const MarketParams& mp, const MarkModel& mm,
                                                     const std::vector<double>& lambda_grid) {
    constexpr double h = 1e-4;
    std::vector<ElasticityPoint> out;
    out.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        const double norm = impact_l2_squared(lambda, mm, mp);
        if (norm == 0.0)
            throw std::domain_error("check_elasticity: impact norm vanishes at lambda=" + std::to_string(lambda) +
                                    " (no market-order marks)");
        const double slope =
            (impact_l2_squared(lambda + h, mm, mp) - impact_l2_squared(lambda - h, mm, mp)) / (2.0 * h);
        ElasticityPoint pt{lambda};
        const double relative_decay = -slope / norm;
        if (std::abs(relative_decay) < 1e-14) {
            pt.degenerate = true;
            pt.ratio = std::numeric_limits<double>::infinity();
        } else {
            pt.ratio = mp.kappa_f / relative_decay;
            pt.pass = pt.ratio > 0.0 && pt.ratio < 1.0;
        }
        out.push_back(pt);
    }
    return out;
}

} // namespace sigexec
