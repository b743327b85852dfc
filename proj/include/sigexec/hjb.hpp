#pragma once

// Explicit monotone scheme for the reduced value function w(T', lambda, q).
//
// Liquidity rows: index 0 is the frozen breaker row at lambda_lower - dLambda,
// index i >= 1 is lambda_lower + (i-1) dLambda. Inventory columns run from q_min to
// q_max in steps of the lot size. Slice k holds w at remaining horizon k dT.
//
// Every transition of the scheme is linear in the slice it reads from, so the
// operators are assembled once into sparse forms (constant + sum coef * w[idx]) and
// reused at every time step.

#include "error.hpp"
#include "market_core.hpp"
#include "marks.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sigexec {

struct GridSpec {
    double dT = 0.005;
    double dLambda = 1.0;
    double q_min = -12.0;
    double q_max = 12.0;
};

class Grid {
public:
    GridSpec spec;
    double horizon = 0.0;
    double lambda_lower = 0.0;
    double lambda_upper = 0.0;
    double dq = 1.0;
    std::size_t n_t = 0;       ///< number of time steps; slices 0..n_t
    std::size_t n_lambda = 0;  ///< rows including the frozen row
    std::size_t n_q = 0;

    static Grid make(const GridSpec& spec, const MarketParams& mp) {
        auto fail = [](const std::string& m) { throw ConfigError("grid: " + m); };
        if (!(spec.dT > 0.0)) fail("dT must be positive");
        if (!(spec.dLambda > 0.0)) fail("dLambda must be positive");
        Grid g;
        g.spec = spec;
        g.horizon = mp.horizon;
        g.lambda_lower = mp.lambda_lower;
        g.lambda_upper = mp.lambda_upper;
        g.dq = mp.lot_size;
        g.n_t = steps(mp.horizon, spec.dT, "horizon is not a multiple of dT");
        g.n_lambda = steps(mp.lambda_upper - mp.lambda_lower, spec.dLambda,
                           "lambda_upper - lambda_lower is not a multiple of dLambda") + 2;
        const double n3 = spec.q_min / g.dq, n4 = spec.q_max / g.dq;
        if (std::abs(n3 - std::round(n3)) > 1e-9 || std::abs(n4 - std::round(n4)) > 1e-9)
            fail("q_min and q_max must be multiples of the lot size");
        if (!(std::round(n3) < std::round(n4))) fail("q_min must be below q_max");
        g.n_q = static_cast<std::size_t>(std::round(n4) - std::round(n3)) + 1;
        return g;
    }

    double lambda_at(std::size_t i) const {
        return i == 0 ? lambda_lower - spec.dLambda : lambda_lower + static_cast<double>(i - 1) * spec.dLambda;
    }
    double q_at(std::size_t j) const { return spec.q_min + static_cast<double>(j) * dq; }
    double time_at(std::size_t k) const { return static_cast<double>(k) * spec.dT; }
    std::size_t nodes() const { return n_lambda * n_q; }
    std::size_t flat(std::size_t i, std::size_t j) const { return i * n_q + j; }

    /// Column of q if it lies on the inventory lattice.
    std::optional<std::size_t> q_index(double q) const {
        const double pos = (q - spec.q_min) / dq;
        const double r = std::round(pos);
        if (std::abs(pos - r) > 1e-9 || r < 0.0 || r > static_cast<double>(n_q - 1)) return std::nullopt;
        return static_cast<std::size_t>(r);
    }
    /// Nearest live row (>= 1) to lambda, clamped to the grid.
    std::size_t nearest_lambda_row(double lambda) const {
        const double pos = std::round((lambda - lambda_lower) / spec.dLambda);
        return 1 + static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_lambda - 2)));
    }
    std::size_t nearest_q_col(double q) const {
        const double pos = std::round((q - spec.q_min) / dq);
        return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_q - 1)));
    }
    /// Nearest slice to a remaining horizon, clamped to [1, n_t].
    std::size_t nearest_slice(double remaining) const {
        const double pos = std::round(remaining / spec.dT);
        return static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(std::max<std::size_t>(n_t, 1))));
    }

    /// Monotonicity of the explicit step: dT * (f(lambda_upper) + g(lambda_lower)) <= 1.
    void check_stability(const MarketParams& mp) const {
        const double total = mp.f(lambda_upper) + mp.g(lambda_lower);
        if (spec.dT * total > 1.0 + 1e-12)
            throw StabilityError("grid: dT=" + std::to_string(spec.dT) + " violates dT*(f(lambda_upper)+g(lambda_lower))" +
                                 " <= 1 with total rate " + std::to_string(total) + "; use dT <= " +
                                 std::to_string(1.0 / total));
    }

    bool operator==(const Grid& o) const {
        return spec.dT == o.spec.dT && spec.dLambda == o.spec.dLambda && spec.q_min == o.spec.q_min &&
               spec.q_max == o.spec.q_max && horizon == o.horizon && lambda_lower == o.lambda_lower &&
               lambda_upper == o.lambda_upper && dq == o.dq;
    }

private:
    static std::size_t steps(double span, double step, const char* msg) {
        const double n = span / step;
        if (n < -1e-9 || std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) throw ConfigError(std::string("grid: ") + msg);
        return static_cast<std::size_t>(std::round(n));
    }
};

/// Value of the breaker row: immediate auction of the whole position.
inline double frozen_value(double q, const MarketParams& mp) {
    const double cost = -mp.zeta * std::abs(q) - impact_cost(q, mp.lambda_lower, mp);
    if (mp.alpha == 0.0) return cost;
    const double a = mp.alpha * mp.sigma_auction;
    return utility(cost, mp.alpha) * std::exp(0.5 * a * a * q * q);
}

/// Reduced value at zero remaining horizon. Rows below lambda_lower are the breaker row.
inline double terminal_condition(double lambda, double q, const MarketParams& mp) {
    if (lambda < mp.lambda_lower) return frozen_value(q, mp);
    const double cost = -mp.zeta * std::abs(q) - impact_cost(q, lambda, mp);
    if (mp.alpha == 0.0) return cost;
    const double a = mp.alpha * mp.sigma_auction;
    const double unfilled = positive_part(std::abs(q) - (lambda - mp.lambda_lower));
    return utility(cost, mp.alpha) * std::exp(0.5 * a * a * unfilled * unfilled);
}

/// Linear interpolation of column j of a slice at liquidity lambda in [lambda_lower - dLambda, lambda_upper].
/// Values above lambda_upper are clamped; `clamped` (optional) reports it.
inline double interpolate_lambda(std::span<const double> slice, const Grid& grid, std::size_t j, double lambda,
                                 bool* clamped = nullptr) {
    if (clamped) *clamped = lambda > grid.lambda_upper;
    lambda = std::min(lambda, grid.lambda_upper);
    const double pos = (lambda - grid.lambda_at(0)) / grid.spec.dLambda;
    const double base = std::clamp(std::floor(pos), 0.0, static_cast<double>(grid.n_lambda - 1));
    const auto lo = static_cast<std::size_t>(base);
    const double frac = pos - base;
    if (lo + 1 >= grid.n_lambda || frac <= 1e-12) return slice[grid.flat(lo, j)];
    return (1.0 - frac) * slice[grid.flat(lo, j)] + frac * slice[grid.flat(lo + 1, j)];
}

/// Admissible trades at node (lambda, q), in scan order 0, -1, +1, -2, +2, ...
inline std::vector<double> action_set(const Grid& grid, double lambda, double q) {
    std::vector<double> out{0.0};
    const double floor = grid.lambda_lower - grid.spec.dLambda;
    for (int n = 1;; ++n) {
        const double a = n * grid.dq;
        if (lambda - a < floor - 1e-12) break;
        for (double d : {-a, a})
            if (grid.q_index(q + d)) out.push_back(d);
    }
    return out;
}

struct ValueSurface {
    Grid grid;
    MarketParams params;  ///< model the surface was solved for (custom densities are not persisted)
    double alpha = 0.0;
    double signal_prob = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::size_t stored_from = 0;  ///< first stored slice (n_t when only the final slice is kept)
    std::vector<double> w;        ///< slices stored_from..n_t, row-major (lambda, q)
    std::size_t clamp_events = 0; ///< post-event liquidity transitions clamped at lambda_upper

    bool has_slice(std::size_t k) const { return k >= stored_from && k <= grid.n_t; }
    std::span<const double> slice(std::size_t k) const {
        if (!has_slice(k)) throw std::out_of_range("ValueSurface: slice " + std::to_string(k) + " not stored");
        return {w.data() + (k - stored_from) * grid.nodes(), grid.nodes()};
    }
    double at(std::size_t k, std::size_t i, std::size_t j) const { return slice(k)[grid.flat(i, j)]; }
    std::span<const double> final_slice() const { return slice(grid.n_t); }

    /// Reduced value at the full horizon for on-grid (lambda, q).
    double reduced_value(double lambda, double q) const {
        const auto j = grid.q_index(q);
        if (!j) throw std::out_of_range("ValueSurface: q=" + std::to_string(q) + " not on the inventory grid");
        return interpolate_lambda(final_slice(), grid, *j, std::max(lambda, grid.lambda_lower));
    }

    /// Value function v(T, s) recovered from w through the exponential (or additive) ansatz.
    double value(const MarketState& s) const {
        const double w0 = reduced_value(s.lambda, s.q);
        if (alpha == 0.0) return w0 + s.x + s.p * s.q;
        return w0 * std::abs(utility(s.x + s.p * s.q, alpha));
    }
};

/// Feedback controls. Slice k (1..n_t) holds the trades chosen when computing w at k dT.
struct Policy {
    Grid grid;
    std::vector<float> gamma;  ///< (k-1, node, z) with z index 0 for -1 and 1 for +1
    std::vector<float> delta;  ///< (k-1, node); 0 means no impulse

    bool empty() const { return delta.empty(); }
    double gamma_star(std::size_t k, std::size_t i, std::size_t j, int z) const {
        return gamma[((k - 1) * grid.nodes() + grid.flat(i, j)) * 2 + (z > 0 ? 1 : 0)];
    }
    double delta_star(std::size_t k, std::size_t i, std::size_t j) const {
        return delta[(k - 1) * grid.nodes() + grid.flat(i, j)];
    }
};

struct SolveOptions {
    unsigned threads = 1;
    bool keep_all_slices = true;
    bool keep_policy = true;
};

struct Solution {
    ValueSurface surface;
    Policy policy;
};

namespace detail {

struct Form {
    double constant = 0.0;
    std::uint32_t begin = 0, end = 0;
};

struct Choice {
    double action = 0.0;
    Form form;
};

struct NodeOps {
    Form base;               ///< unsignaled events
    double base_rate = 0.0;
    double signal_rate[2] = {0.0, 0.0};
    std::uint32_t choice_begin[3] = {0, 0, 0};  ///< z=-1, z=+1, impulse
    std::uint32_t choice_end[3] = {0, 0, 0};
};

struct Outcome {
    bool frozen = false;
    bool clamped = false;
    double lambda = 0.0;
    double q = 0.0;
    double cash = 0.0;  ///< argument of |U|: reduced cash and mark-to-market change
};

// Trade `gamma` at (lambda, q), then optionally apply one external mark.
inline Outcome transition(const MarketParams& mp, double lambda, double q, double gamma, const Mark* mark) {
    Outcome o;
    const double g = clip_to_liquidity(gamma, lambda, mp.lambda_lower);
    o.q = q + g;
    o.lambda = lambda - std::abs(g);
    if (g != 0.0)
        o.cash = -mp.zeta * std::abs(g) - impact_cost(g, lambda, mp) + price_impact(g, lambda, mp) * o.q;
    if (g != gamma) {
        o.frozen = true;
        return o;
    }
    if (!mark) return o;
    const double level = o.lambda;
    if (mark->kind == OrderKind::market) {
        const double eta = clip_to_liquidity(mark->eta(), level, mp.lambda_lower);
        o.cash += price_impact(eta, level, mp) * o.q;
        o.lambda = level - std::abs(eta);
        o.frozen = eta != mark->eta();
    } else if (mark->kind == OrderKind::post) {
        o.lambda = level + mark->rho();
        o.clamped = o.lambda > mp.lambda_upper;
        o.lambda = std::min(o.lambda, mp.lambda_upper);
    } else {
        const double c = clip_to_liquidity(mark->rho(), level, mp.lambda_lower);
        o.lambda = level - std::abs(c);
        o.frozen = c != mark->rho();
    }
    return o;
}

class Assembler {
public:
    Assembler(const Grid& grid, const MarketParams& mp) : grid_(grid), mp_(mp) {}

    std::vector<std::uint32_t> idx;
    std::vector<double> coef;
    std::size_t clamps = 0;

    // Add weight * value-of-outcome to the form under construction.
    void add(Form& f, double weight, const Outcome& o) {
        if (o.clamped) ++clamps;
        double scale = weight;
        if (mp_.alpha > 0.0)
            scale *= std::exp(-mp_.alpha * o.cash);
        else
            f.constant += weight * o.cash;
        if (o.frozen) {
            f.constant += scale * frozen_value(o.q, mp_);
            return;
        }
        const std::size_t j = *grid_.q_index(o.q);
        const double pos = (o.lambda - grid_.lambda_at(0)) / grid_.spec.dLambda;
        double base = std::floor(pos + 1e-9);
        double frac = pos - base;
        if (frac < 1e-9) frac = 0.0;
        const auto lo = static_cast<std::size_t>(std::clamp(base, 1.0, static_cast<double>(grid_.n_lambda - 1)));
        if (lo + 1 >= grid_.n_lambda) frac = 0.0;
        push(grid_.flat(lo, j), scale * (1.0 - frac));
        if (frac > 0.0) push(grid_.flat(lo + 1, j), scale * frac);
    }

    Form open() const { return Form{0.0, static_cast<std::uint32_t>(idx.size()), 0}; }
    void close(Form& f) const { f.end = static_cast<std::uint32_t>(idx.size()); }

private:
    void push(std::size_t i, double c) {
        idx.push_back(static_cast<std::uint32_t>(i));
        coef.push_back(c);
    }
    const Grid& grid_;
    const MarketParams& mp_;
};

struct Operators {
    std::vector<NodeOps> nodes;  ///< live nodes only, in row-major order from row 1
    std::vector<Choice> choices;
    std::vector<std::uint32_t> idx;
    std::vector<double> coef;
    std::size_t clamps = 0;

    double eval(const Form& f, std::span<const double> w) const {
        double s = f.constant;
        for (std::uint32_t k = f.begin; k < f.end; ++k) s += coef[k] * w[idx[k]];
        return s;
    }
};

inline Operators assemble(const Grid& grid, const MarketParams& mp, const MarkModel& mm) {
    Operators ops;
    Assembler as(grid, mp);
    const double p_hat = mm.signal_prob;
    for (std::size_t i = 1; i < grid.n_lambda; ++i) {
        const double lambda = grid.lambda_at(i);
        std::vector<double> rate(mm.marks.size());
        for (std::size_t e = 0; e < mm.marks.size(); ++e) rate[e] = mm.intensity(e, lambda, mp);
        for (std::size_t j = 0; j < grid.n_q; ++j) {
            const double q = grid.q_at(j);
            NodeOps node;
            node.base = as.open();
            for (std::size_t e = 0; e < mm.marks.size(); ++e) {
                const double wgt = (1.0 - p_hat) * rate[e];
                if (wgt == 0.0) continue;
                node.base_rate += wgt;
                as.add(node.base, wgt, transition(mp, lambda, q, 0.0, &mm.marks[e]));
            }
            as.close(node.base);

            const auto actions = action_set(grid, lambda, q);
            for (int zi = 0; zi < 2; ++zi) {
                const int z = zi == 0 ? -1 : 1;
                node.choice_begin[zi] = static_cast<std::uint32_t>(ops.choices.size());
                for (std::size_t e = 0; e < mm.marks.size(); ++e)
                    if (mm.marks[e].signal() == z) node.signal_rate[zi] += p_hat * rate[e];
                if (node.signal_rate[zi] > 0.0) {
                    for (double gamma : actions) {
                        Choice c{gamma, as.open()};
                        for (std::size_t e = 0; e < mm.marks.size(); ++e) {
                            if (mm.marks[e].signal() != z || rate[e] == 0.0) continue;
                            as.add(c.form, p_hat * rate[e], transition(mp, lambda, q, gamma, &mm.marks[e]));
                        }
                        as.close(c.form);
                        ops.choices.push_back(c);
                    }
                }
                node.choice_end[zi] = static_cast<std::uint32_t>(ops.choices.size());
            }
            node.choice_begin[2] = static_cast<std::uint32_t>(ops.choices.size());
            for (double delta : actions) {
                if (delta == 0.0) continue;
                Choice c{delta, as.open()};
                as.add(c.form, 1.0, transition(mp, lambda, q, delta, nullptr));
                as.close(c.form);
                ops.choices.push_back(c);
            }
            node.choice_end[2] = static_cast<std::uint32_t>(ops.choices.size());
            ops.nodes.push_back(node);
        }
    }
    ops.idx = std::move(as.idx);
    ops.coef = std::move(as.coef);
    ops.clamps = as.clamps;
    return ops;
}

inline bool improves(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(std::abs(incumbent), 1e-300);
}

} // namespace detail

/// Fills a slice with the terminal condition.
inline std::vector<double> terminal_slice(const Grid& grid, const MarketParams& mp) {
    std::vector<double> w(grid.nodes());
    for (std::size_t i = 0; i < grid.n_lambda; ++i)
        for (std::size_t j = 0; j < grid.n_q; ++j) w[grid.flat(i, j)] = terminal_condition(grid.lambda_at(i), grid.q_at(j), mp);
    return w;
}

/// One explicit step of the transport operator on live rows; the frozen row is reset
/// to the breaker value. Optionally records the maximizing signal trades.
inline std::vector<double> transport_step(std::span<const double> w, const Grid& grid, const MarketParams& mp,
                                          const detail::Operators& ops, float* gamma_out = nullptr,
                                          unsigned threads = 1) {
    std::vector<double> out(grid.nodes());
    for (std::size_t j = 0; j < grid.n_q; ++j) out[grid.flat(0, j)] = frozen_value(grid.q_at(j), mp);
    const double dT = grid.spec.dT;
    parallel_for(grid.n_lambda - 1, threads, [&](std::size_t r) {
        for (std::size_t j = 0; j < grid.n_q; ++j) {
            const std::size_t n = r * grid.n_q + j;
            const std::size_t flat = grid.flat(r + 1, j);
            const auto& node = ops.nodes[n];
            const double here = w[flat];
            double drift = ops.eval(node.base, w) - node.base_rate * here;
            for (int zi = 0; zi < 2; ++zi) {
                if (node.choice_begin[zi] == node.choice_end[zi]) continue;
                double best = -std::numeric_limits<double>::infinity();
                double arg = 0.0;
                for (auto c = node.choice_begin[zi]; c < node.choice_end[zi]; ++c) {
                    const double v = ops.eval(ops.choices[c].form, w);
                    if (c == node.choice_begin[zi] || detail::improves(v, best)) {
                        best = v;
                        arg = ops.choices[c].action;
                    }
                }
                drift += best - node.signal_rate[zi] * here;
                if (gamma_out) gamma_out[flat * 2 + zi] = static_cast<float>(arg);
            }
            out[flat] = here + dT * drift;
        }
    });
    return out;
}

/// max(w, M w) on live rows; records the impulse trade where it strictly improves.
inline std::vector<double> impulse_step(std::span<const double> w, const Grid& grid, const detail::Operators& ops,
                                        float* delta_out = nullptr, unsigned threads = 1) {
    std::vector<double> out(w.begin(), w.end());
    parallel_for(grid.n_lambda - 1, threads, [&](std::size_t r) {
        for (std::size_t j = 0; j < grid.n_q; ++j) {
            const std::size_t n = r * grid.n_q + j;
            const std::size_t flat = grid.flat(r + 1, j);
            const auto& node = ops.nodes[n];
            double best = w[flat];
            double arg = 0.0;
            for (auto c = node.choice_begin[2]; c < node.choice_end[2]; ++c) {
                const double v = ops.eval(ops.choices[c].form, w);
                if (detail::improves(v, best)) {
                    best = v;
                    arg = ops.choices[c].action;
                }
            }
            out[flat] = best;
            if (delta_out) delta_out[flat] = static_cast<float>(arg);
        }
    });
    return out;
}

/// Backward scheme w^{k+1} = max(L w^k, M L w^k) from the terminal condition to the full horizon.
inline Solution solve(const MarketParams& mp, const MarkModel& mm, const GridSpec& spec, const SolveOptions& opt = {}) {
    mp.validate();
    mm.validate();
    const Grid grid = Grid::make(spec, mp);
    grid.check_stability(mp);
    const auto ops = detail::assemble(grid, mp, mm);

    Solution sol;
    auto& surf = sol.surface;
    surf.grid = grid;
    surf.params = mp;
    surf.alpha = mp.alpha;
    surf.signal_prob = mm.signal_prob;
    surf.clamp_events = ops.clamps;
    surf.stored_from = opt.keep_all_slices ? 0 : grid.n_t;
    sol.policy.grid = grid;
    if (opt.keep_policy) {
        sol.policy.gamma.assign(grid.n_t * grid.nodes() * 2, 0.0f);
        sol.policy.delta.assign(grid.n_t * grid.nodes(), 0.0f);
    }

    std::vector<double> w = terminal_slice(grid, mp);
    if (opt.keep_all_slices) {
        surf.w.reserve((grid.n_t + 1) * grid.nodes());
        surf.w.insert(surf.w.end(), w.begin(), w.end());
    }
    for (std::size_t k = 1; k <= grid.n_t; ++k) {
        float* gamma = opt.keep_policy ? sol.policy.gamma.data() + (k - 1) * grid.nodes() * 2 : nullptr;
        float* delta = opt.keep_policy ? sol.policy.delta.data() + (k - 1) * grid.nodes() : nullptr;
        const auto moved = transport_step(w, grid, mp, ops, gamma, opt.threads);
        w = impulse_step(moved, grid, ops, delta, opt.threads);
        if (opt.keep_all_slices) surf.w.insert(surf.w.end(), w.begin(), w.end());
    }
    if (!opt.keep_all_slices) surf.w = std::move(w);
    return sol;
}

/// Nodewise certainty equivalent of the signal on slice k (default: full horizon).
inline std::vector<double> certainty_equivalent(const ValueSurface& with_signal, const ValueSurface& without,
                                                std::optional<std::size_t> k = std::nullopt) {
    if (!(with_signal.grid == without.grid)) throw std::invalid_argument("certainty_equivalent: grids differ");
    if (with_signal.alpha != without.alpha) throw std::invalid_argument("certainty_equivalent: risk aversions differ");
    const std::size_t slice = k.value_or(with_signal.grid.n_t);
    const auto a = with_signal.slice(slice), b = without.slice(slice);
    std::vector<double> ce(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (with_signal.alpha == 0.0) {
            ce[n] = a[n] - b[n];
        } else {
            if (a[n] == 0.0 || b[n] == 0.0) throw std::domain_error("certainty_equivalent: zero reduced value");
            ce[n] = -std::log(a[n] / b[n]) / with_signal.alpha;
        }
    }
    return ce;
}

/// Largest violations of the structural properties of a solved surface (0 when they hold).
struct SurfaceDiagnostics {
    double q_symmetry = 0.0;      ///< max |w(k,i,q) - w(k,i,-q)|
    double lambda_monotone = 0.0; ///< max (w(k,i,q) - w(k,i+1,q))^+ over live rows
    double time_monotone = 0.0;   ///< max (w(k,i,q) - w(k+1,i,q))^+
};

inline SurfaceDiagnostics diagnose(const ValueSurface& s) {
    SurfaceDiagnostics d;
    const auto& g = s.grid;
    for (std::size_t k = s.stored_from; k <= g.n_t; ++k) {
        const auto w = s.slice(k);
        for (std::size_t i = 0; i < g.n_lambda; ++i)
            for (std::size_t j = 0; j < g.n_q; ++j) {
                if (const auto m = g.q_index(-g.q_at(j)))
                    d.q_symmetry = std::max(d.q_symmetry, std::abs(w[g.flat(i, j)] - w[g.flat(i, *m)]));
                if (i >= 1 && i + 1 < g.n_lambda)
                    d.lambda_monotone = std::max(d.lambda_monotone, w[g.flat(i, j)] - w[g.flat(i + 1, j)]);
                if (k < g.n_t)
                    d.time_monotone = std::max(d.time_monotone, w[g.flat(i, j)] - s.at(k + 1, i, j));
            }
    }
    return d;
}

// Binary dump: a magic line, a one-line JSON header, then little-endian arrays
// (w as float64; gamma and delta as float32 when present).

inline nlohmann::json market_to_json(const MarketParams& mp) {
    return {{"theta_f", mp.theta_f},           {"kappa_f", mp.kappa_f},
            {"theta_g", mp.theta_g},           {"kappa_g", mp.kappa_g},
            {"theta_iota", mp.theta_iota},     {"kappa_iota", mp.kappa_iota},
            {"zeta", mp.zeta},                 {"sigma_auction", mp.sigma_auction},
            {"alpha", mp.alpha},               {"lambda_lower", mp.lambda_lower},
            {"lambda_upper", mp.lambda_upper}, {"lot_size", mp.lot_size},
            {"horizon", mp.horizon}};
}

inline MarketParams market_from_json(const nlohmann::json& j) {
    MarketParams mp;
    mp.theta_f = j.at("theta_f");
    mp.kappa_f = j.at("kappa_f");
    mp.theta_g = j.at("theta_g");
    mp.kappa_g = j.at("kappa_g");
    mp.theta_iota = j.at("theta_iota");
    mp.kappa_iota = j.at("kappa_iota");
    mp.zeta = j.at("zeta");
    mp.sigma_auction = j.at("sigma_auction");
    mp.alpha = j.at("alpha");
    mp.lambda_lower = j.at("lambda_lower");
    mp.lambda_upper = j.at("lambda_upper");
    mp.lot_size = j.at("lot_size");
    mp.horizon = j.at("horizon");
    return mp;
}

inline constexpr const char* kSurfaceMagic = "SIGEXEC-SURFACE v1";

inline void write_solution(std::ostream& os, const Solution& sol) {
    const auto& s = sol.surface;
    const auto& g = s.grid;
    nlohmann::json h = {{"schema_version", 1},
                        {"config_hash", s.config_hash},
                        {"seed", s.seed},
                        {"market", market_to_json(s.params)},
                        {"dT", g.spec.dT},
                        {"dLambda", g.spec.dLambda},
                        {"q_min", g.spec.q_min},
                        {"q_max", g.spec.q_max},
                        {"horizon", g.horizon},
                        {"lambda_lower", g.lambda_lower},
                        {"lambda_upper", g.lambda_upper},
                        {"lot_size", g.dq},
                        {"n_t", g.n_t},
                        {"n_lambda", g.n_lambda},
                        {"n_q", g.n_q},
                        {"alpha", s.alpha},
                        {"signal_prob", s.signal_prob},
                        {"stored_from", s.stored_from},
                        {"clamp_events", s.clamp_events},
                        {"layout", "w[slice][lambda][q] f64; gamma[slice-1][lambda][q][z] f32; delta[slice-1][lambda][q] f32"},
                        {"w_count", s.w.size()},
                        {"gamma_count", sol.policy.gamma.size()},
                        {"delta_count", sol.policy.delta.size()}};
    os << kSurfaceMagic << '\n' << h.dump() << '\n';
    os.write(reinterpret_cast<const char*>(s.w.data()), static_cast<std::streamsize>(s.w.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(sol.policy.gamma.data()),
             static_cast<std::streamsize>(sol.policy.gamma.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(sol.policy.delta.data()),
             static_cast<std::streamsize>(sol.policy.delta.size() * sizeof(float)));
}

inline Solution read_solution(std::istream& is) {
    std::string magic, header;
    std::getline(is, magic);
    if (magic != kSurfaceMagic) throw std::runtime_error("read_solution: not a surface file (bad magic line)");
    std::getline(is, header);
    const auto h = nlohmann::json::parse(header);
    Solution sol;
    auto& s = sol.surface;
    Grid& g = s.grid;
    g.spec = {h.at("dT"), h.at("dLambda"), h.at("q_min"), h.at("q_max")};
    g.horizon = h.at("horizon");
    g.lambda_lower = h.at("lambda_lower");
    g.lambda_upper = h.at("lambda_upper");
    g.dq = h.at("lot_size");
    g.n_t = h.at("n_t");
    g.n_lambda = h.at("n_lambda");
    g.n_q = h.at("n_q");
    s.params = market_from_json(h.at("market"));
    s.alpha = h.at("alpha");
    s.signal_prob = h.at("signal_prob");
    s.config_hash = h.at("config_hash");
    s.seed = h.at("seed");
    s.stored_from = h.at("stored_from");
    s.clamp_events = h.at("clamp_events");
    sol.policy.grid = g;
    s.w.resize(h.at("w_count").get<std::size_t>());
    sol.policy.gamma.resize(h.at("gamma_count").get<std::size_t>());
    sol.policy.delta.resize(h.at("delta_count").get<std::size_t>());
    is.read(reinterpret_cast<char*>(s.w.data()), static_cast<std::streamsize>(s.w.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(sol.policy.gamma.data()),
            static_cast<std::streamsize>(sol.policy.gamma.size() * sizeof(float)));
    is.read(reinterpret_cast<char*>(sol.policy.delta.data()),
            static_cast<std::streamsize>(sol.policy.delta.size() * sizeof(float)));
    if (!is) throw std::runtime_error("read_solution: truncated surface file");
    return sol;
}

} // namespace sigexec
