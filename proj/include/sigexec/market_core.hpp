#pragma once

// Closed-form primitives of the order-flow driven market: price impact, impact
// cost, arrival rates, the liquidity clipping operator and the one-event state
// updates with and without circuit breaker.

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace sigexec {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }
inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

struct MarketParams {
    // f(lambda) = theta_f * exp(kappa_f * lambda): market-order arrival rate.
    double theta_f = 20.0;
    double kappa_f = 0.01;
    // g(lambda) = theta_g * exp(-kappa_g * lambda): limit-order / cancellation arrival rate.
    double theta_g = 40.0;
    double kappa_g = 0.01;
    // iota(lambda) = theta_iota + kappa_iota * lambda: marginal impact per lot.
    double theta_iota = 0.01;
    double kappa_iota = -0.0002;
    double zeta = 0.005;          ///< half spread
    double sigma_auction = 0.3;   ///< auction price volatility
    double alpha = 0.1;           ///< risk aversion, 0 = risk neutral
    double lambda_lower = -40.0;  ///< liquidity trigger of the circuit breaker
    double lambda_upper = 40.0;   ///< numerical liquidity cap
    double lot_size = 1.0;
    double horizon = 1.0;

    /// Optional non-affine impact density. When set, I and Xi fall back to quadrature
    /// and theta_iota / kappa_iota are ignored.
    std::function<double(double)> custom_iota;

    double iota(double lambda) const {
        return custom_iota ? custom_iota(lambda) : theta_iota + kappa_iota * lambda;
    }
    double f(double lambda) const { return theta_f * std::exp(kappa_f * lambda); }
    double g(double lambda) const { return theta_g * std::exp(-kappa_g * lambda); }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("market: " + m); };
        if (!(theta_f >= 0.0) || !(theta_g >= 0.0)) fail("arrival intensities theta_f, theta_g must be >= 0");
        if (!(kappa_f >= 0.0) || !(kappa_g >= 0.0)) fail("kappa_f, kappa_g must be >= 0 (f increasing, g decreasing)");
        if (!(lambda_lower < lambda_upper)) fail("lambda_lower must be below lambda_upper");
        if (!(lot_size > 0.0)) fail("lot_size must be positive");
        if (!(zeta >= 0.0)) fail("half spread zeta must be >= 0");
        if (!(sigma_auction > 0.0)) fail("sigma_auction must be positive");
        if (!(alpha >= 0.0)) fail("alpha must be >= 0");
        if (!(horizon >= 0.0)) fail("horizon must be >= 0");
        if (!custom_iota) {
            if (kappa_iota > 0.0) fail("kappa_iota must be <= 0 (iota non-increasing)");
            if (iota(lambda_upper) < 0.0 || iota(lambda_lower) < 0.0)
                fail("iota must be nonnegative on [lambda_lower, lambda_upper]");
        }
    }

    /// Value equality of the model coefficients (custom densities compare by presence only).
    bool same_model(const MarketParams& o) const {
        return theta_f == o.theta_f && kappa_f == o.kappa_f && theta_g == o.theta_g && kappa_g == o.kappa_g &&
               theta_iota == o.theta_iota && kappa_iota == o.kappa_iota && zeta == o.zeta &&
               sigma_auction == o.sigma_auction && alpha == o.alpha && lambda_lower == o.lambda_lower &&
               lambda_upper == o.lambda_upper && lot_size == o.lot_size && horizon == o.horizon &&
               static_cast<bool>(custom_iota) == static_cast<bool>(o.custom_iota);
    }
};

namespace detail {

// Composite 8-point Gauss-Legendre on panels of width <= 1.
template <class Fn>
double integrate(Fn&& fn, double a, double b) {
    static constexpr std::array<double, 4> nodes = {0.1834346424956498, 0.5255324099163290,
                                                    0.7966664774136267, 0.9602898564975363};
    static constexpr std::array<double, 4> weights = {0.3626837833783620, 0.3137066458778873,
                                                      0.2223810344533745, 0.1012285362903763};
    if (b <= a) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil(b - a)));
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double mid = a + (k + 0.5) * h, half = 0.5 * h;
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            s += weights[i] * (fn(mid - half * nodes[i]) + fn(mid + half * nodes[i]));
        total += s * half;
    }
    return total;
}

} // namespace detail

/// Signed price change caused by a market order of `delta` lots arriving at liquidity `lambda`.
inline double price_impact(double delta, double lambda, const MarketParams& mp) {
    const double a = std::abs(delta);
    if (a == 0.0) return 0.0;
    if (mp.custom_iota) {
        return sign(delta) * detail::integrate([&](double z) { return mp.custom_iota(lambda - z); }, 0.0, a);
    }
    return sign(delta) * (mp.theta_iota * a + mp.kappa_iota * (lambda * a - 0.5 * a * a));
}

/// Cash slippage of executing `delta` lots at liquidity `lambda` (integral of I over the fill).
inline double impact_cost(double delta, double lambda, const MarketParams& mp) {
    const double a = std::abs(delta);
    if (a == 0.0) return 0.0;
    if (mp.custom_iota) {
        // Fubini: int_0^a int_0^z iota(lambda-u) du dz = int_0^a (a-u) iota(lambda-u) du
        return detail::integrate([&](double u) { return (a - u) * mp.custom_iota(lambda - u); }, 0.0, a);
    }
    return 0.5 * mp.theta_iota * a * a + mp.kappa_iota * (0.5 * lambda * a * a - a * a * a / 6.0);
}

struct ArrivalRates {
    double market;  ///< f(lambda)
    double limit;   ///< g(lambda)
};

inline ArrivalRates arrival_rates(double lambda, const MarketParams& mp) { return {mp.f(lambda), mp.g(lambda)}; }

/// Largest part of `delta` that can be filled without pushing liquidity below the trigger.
inline double clip_to_liquidity(double delta, double lambda, double lambda_lower) {
    if (lambda - std::abs(delta) >= lambda_lower) return delta;
    return sign(delta) * positive_part(lambda - lambda_lower);
}

/// Exponential (alpha > 0) or linear (alpha = 0) utility.
inline double utility(double wealth, double alpha) {
    return alpha > 0.0 ? -std::exp(-alpha * wealth) : wealth;
}

struct MarketState {
    double lambda = 0.0;  ///< liquidity (lots)
    double q = 0.0;       ///< trader inventory (lots)
    double p = 100.0;     ///< asset price
    double x = 0.0;       ///< trader cash
    bool halted = false;  ///< circuit breaker has been triggered

    bool operator==(const MarketState&) const = default;
};

/// Volumes arriving at one event: signal trade, external market order, limit post (+) / cancel (-).
struct ShockTriple {
    double gamma = 0.0;
    double eta = 0.0;
    double rho = 0.0;
};

/// Post-shock state together with what was actually executed.
struct ShockOutcome {
    MarketState state;
    double gamma_filled = 0.0;
    double eta_filled = 0.0;
    double rho_filled = 0.0;
    bool triggered = false;  ///< this shock tripped the circuit breaker
};

/// One-event state update. Order of execution: the trader's trade at the pre-trade
/// liquidity, then the external market order at the reduced liquidity, then the limit
/// flow. With `breaker`, liquidity-taking volumes are clipped at the trigger and the
/// market halts at the first order that would deplete liquidity below it.
inline ShockOutcome apply_shock_detailed(const MarketState& s, const ShockTriple& shock, const MarketParams& mp,
                                         bool breaker) {
    if (shock.eta != 0.0 && shock.rho != 0.0)
        throw std::invalid_argument("apply_shock: market order and limit flow cannot arrive together (eta*rho != 0)");

    ShockOutcome out{s};
    MarketState& n = out.state;

    if (!breaker) {
        const double after_trade = s.lambda - std::abs(shock.gamma);
        n.lambda = after_trade - std::abs(shock.eta) + shock.rho;
        n.q = s.q + shock.gamma;
        n.p = s.p + price_impact(shock.gamma, s.lambda, mp) + price_impact(shock.eta, after_trade, mp);
        n.x = s.x - s.p * shock.gamma - mp.zeta * std::abs(shock.gamma) - impact_cost(shock.gamma, s.lambda, mp);
        out.gamma_filled = shock.gamma;
        out.eta_filled = shock.eta;
        out.rho_filled = shock.rho;
        return out;
    }

    if (s.halted || s.lambda < mp.lambda_lower) {
        n.halted = true;
        return out;
    }

    const double floor = mp.lambda_lower;
    const double gamma = clip_to_liquidity(shock.gamma, s.lambda, floor);
    n.q = s.q + gamma;
    n.p = s.p + price_impact(gamma, s.lambda, mp);
    n.x = s.x - s.p * gamma - mp.zeta * std::abs(gamma) - impact_cost(gamma, s.lambda, mp);
    n.lambda = s.lambda - std::abs(gamma);
    out.gamma_filled = gamma;
    if (gamma != shock.gamma) {
        n.halted = out.triggered = true;
        return out;
    }

    const double level = n.lambda;
    if (shock.eta != 0.0) {
        const double eta = clip_to_liquidity(shock.eta, level, floor);
        n.p += price_impact(eta, level, mp);
        n.lambda = level - std::abs(eta);
        out.eta_filled = eta;
        n.halted = out.triggered = (eta != shock.eta);
    } else if (shock.rho > 0.0) {
        n.lambda = level + shock.rho;
        out.rho_filled = shock.rho;
    } else if (shock.rho < 0.0) {
        const double cancel = clip_to_liquidity(shock.rho, level, floor);
        n.lambda = level - std::abs(cancel);
        out.rho_filled = cancel;
        n.halted = out.triggered = (cancel != shock.rho);
    }
    return out;
}

inline MarketState apply_shock(const MarketState& s, const ShockTriple& shock, const MarketParams& mp, bool breaker) {
    return apply_shock_detailed(s, shock, mp, breaker).state;
}

/// Wealth after liquidating the remaining inventory at the horizon; the part of the
/// position that the available liquidity cannot absorb clears in a Gaussian auction.
inline double terminal_wealth(const MarketState& s, const MarketParams& mp, double auction_draw) {
    const double lambda = s.halted ? std::min(s.lambda, mp.lambda_lower) : s.lambda;
    const double unfilled = positive_part(std::abs(s.q) - positive_part(lambda - mp.lambda_lower));
    return s.x + s.p * s.q + mp.sigma_auction * auction_draw * sign(s.q) * unfilled - mp.zeta * std::abs(s.q) -
           impact_cost(-s.q, lambda, mp);
}

} // namespace sigexec
