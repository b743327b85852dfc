#pragma once

// Executable trading agents: the solved feedback policy and simple baselines.

#include "hjb.hpp"
#include "market_core.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace sigexec {

class Agent {
public:
    enum class Kind { solved, do_nothing, immediate, twap };

    /// Feedback policy from the solver. Trades on every event and on the solver's time nodes.
    static Agent solved(std::shared_ptr<const Policy> policy, const MarketParams& mp, double target_q = 0.0) {
        if (!policy || policy->empty()) throw std::invalid_argument("Agent::solved: policy has no stored controls");
        Agent a(Kind::solved, mp, target_q);
        a.policy_ = std::move(policy);
        return a;
    }
    /// Holds the position until the horizon.
    static Agent do_nothing(const MarketParams& mp, double target_q = 0.0) { return Agent(Kind::do_nothing, mp, target_q); }
    /// Trades to the target at the first opportunity.
    static Agent immediate(const MarketParams& mp, double target_q = 0.0) { return Agent(Kind::immediate, mp, target_q); }
    /// Follows a linear schedule from q0 to the target in whole lots on a fixed clock.
    static Agent twap(const MarketParams& mp, double q0, double target_q = 0.0, double step = 0.05) {
        Agent a(Kind::twap, mp, target_q);
        a.q0_ = q0;
        a.step_ = step;
        return a;
    }

    Kind kind() const { return kind_; }
    double target() const { return target_; }
    std::string name() const {
        switch (kind_) {
        case Kind::solved: return "solved";
        case Kind::do_nothing: return "do_nothing";
        case Kind::immediate: return "immediate";
        case Kind::twap: return "twap";
        }
        return "?";
    }

    double decision_step() const {
        switch (kind_) {
        case Kind::solved: return policy_->grid.spec.dT;
        case Kind::immediate: return mp_.horizon;  // consulted once, at t = 0
        case Kind::twap: return step_;
        default: return 0.0;
        }
    }

    double on_signal(double t, const MarketState& s, int z) const {
        if (kind_ != Kind::solved || s.halted || z == 0 || t >= mp_.horizon) return 0.0;
        const auto& g = policy_->grid;
        const std::size_t k = g.nearest_slice(mp_.horizon - t);
        const double gamma = policy_->gamma_star(k, g.nearest_lambda_row(s.lambda), g.nearest_q_col(s.q), z);
        return clip_to_liquidity(gamma, s.lambda, mp_.lambda_lower);
    }

    double on_state(double t, const MarketState& s) const {
        if (s.halted) return 0.0;
        if (t >= mp_.horizon) return clip_to_liquidity(target_ - s.q, s.lambda, mp_.lambda_lower);
        double trade = 0.0;
        switch (kind_) {
        case Kind::solved: {
            const auto& g = policy_->grid;
            trade = policy_->delta_star(g.nearest_slice(mp_.horizon - t), g.nearest_lambda_row(s.lambda),
                                        g.nearest_q_col(s.q));
            break;
        }
        case Kind::immediate: trade = target_ - s.q; break;
        case Kind::twap: {
            const double frac = std::min(1.0, (t + step_) / mp_.horizon);
            const double scheduled = q0_ + (target_ - q0_) * frac;
            trade = std::round((scheduled - s.q) / mp_.lot_size) * mp_.lot_size;
            if ((target_ - s.q) * trade <= 0.0) trade = 0.0;  // never overshoot the target
            break;
        }
        default: break;
        }
        return clip_to_liquidity(trade, s.lambda, mp_.lambda_lower);
    }

private:
    Agent(Kind k, const MarketParams& mp, double target) : kind_(k), mp_(mp), target_(target) {}

    Kind kind_;
    MarketParams mp_;
    double target_ = 0.0;
    double q0_ = 0.0;
    double step_ = 0.0;
    std::shared_ptr<const Policy> policy_;
};

} // namespace sigexec
