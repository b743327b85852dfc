#pragma once

// Run configuration: a single JSON document with a versioned schema. Omitted keys
// take the benchmark values; unknown keys are rejected with their key path.

#include "error.hpp"
#include "hjb.hpp"
#include "market_core.hpp"
#include "marks.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sigexec {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
    std::size_t n_sim = 10000;
    std::uint64_t seed = 20240611;
    std::vector<std::string> agents = {"solved", "do_nothing", "immediate", "twap"};
    std::vector<double> signal_probs = {0.0, 0.1, 0.2, 0.3, 0.4};  ///< sweep values
    std::vector<double> spreads;                                    ///< sweep overrides (full spread 2 zeta)
    double twap_step = 0.05;
    double histogram_width = 0.05;
    double consistency_allowance = 0.02;
    std::size_t path_logs = 0;  ///< number of leading paths written to the path log
    std::string policy_file;    ///< surface file for simulate; empty means <out>/surface.bin
    unsigned threads = 1;       ///< not part of the config hash
};

struct OutputConfig {
    std::string directory = "out";
    bool json = true;
    bool csv = true;
};

struct RunConfig {
    MarketParams market;
    MarkModel marks = benchmark_marks();
    double post_prob = 0.75;
    bool custom_marks = false;
    GridSpec grid;
    MarketState initial{0.0, -8.0, 100.0, 0.0, false};
    ExperimentConfig experiment;
    OutputConfig output;

    /// Canonical JSON of every setting that influences results.
    nlohmann::json canonical() const {
        nlohmann::json marks_j = {{"signal_prob", marks.signal_prob}, {"post_prob", post_prob}};
        nlohmann::json list = nlohmann::json::array();
        for (const auto& m : marks.marks)
            list.push_back({{"kind", to_string(m.kind)}, {"volume", m.volume}, {"probability", m.probability}});
        marks_j["marks"] = list;
        return {{"schema_version", kConfigSchemaVersion},
                {"market", market_to_json(market)},
                {"marks", marks_j},
                {"grid", {{"dT", grid.dT}, {"dLambda", grid.dLambda}, {"q_min", grid.q_min}, {"q_max", grid.q_max}}},
                {"initial", {{"lambda", initial.lambda}, {"q", initial.q}, {"p", initial.p}, {"x", initial.x}}},
                {"experiment",
                 {{"n_sim", experiment.n_sim},
                  {"seed", experiment.seed},
                  {"agents", experiment.agents},
                  {"signal_probs", experiment.signal_probs},
                  {"spreads", experiment.spreads},
                  {"twap_step", experiment.twap_step},
                  {"histogram_width", experiment.histogram_width},
                  {"consistency_allowance", experiment.consistency_allowance},
                  {"path_logs", experiment.path_logs}}}};
    }

    /// FNV-1a 64 of the canonical JSON.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : canonical().dump()) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

namespace detail {

class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }
    bool has(const char* key) const { return j_.contains(key); }
    Reader child(const char* key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Reader(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
    }
    const nlohmann::json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
    }
    std::string where() const { return path_; }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline OrderKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "market") return OrderKind::market;
    if (s == "post") return OrderKind::post;
    if (s == "cancel") return OrderKind::cancel;
    throw ConfigError(path + ": kind must be market, post or cancel");
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
    RunConfig c;
    detail::Reader root(doc, "$");
    int version = kConfigSchemaVersion;
    root.get("schema_version", version);
    if (version != kConfigSchemaVersion)
        throw ConfigError("$.schema_version: unsupported version " + std::to_string(version));

    auto m = root.child("market");
    auto& mp = c.market;
    m.get("theta_f", mp.theta_f);
    m.get("kappa_f", mp.kappa_f);
    m.get("theta_g", mp.theta_g);
    m.get("kappa_g", mp.kappa_g);
    m.get("theta_iota", mp.theta_iota);
    m.get("kappa_iota", mp.kappa_iota);
    double spread = 2.0 * mp.zeta;
    m.get("spread", spread);
    mp.zeta = 0.5 * spread;
    m.get("sigma_auction", mp.sigma_auction);
    m.get("alpha", mp.alpha);
    m.get("lambda_lower", mp.lambda_lower);
    m.get("lambda_upper", mp.lambda_upper);
    m.get("lot_size", mp.lot_size);
    m.get("horizon", mp.horizon);
    m.finish();

    auto mk = root.child("marks");
    double signal_prob = 0.2;
    mk.get("signal_prob", signal_prob);
    mk.get("post_prob", c.post_prob);
    if (!(c.post_prob >= 0.0 && c.post_prob <= 1.0)) throw ConfigError("$.marks.post_prob: must lie in [0,1]");
    if (mk.has("custom")) {
        const auto& list = mk.raw("custom");
        if (!list.is_array()) throw ConfigError("$.marks.custom: expected an array");
        MarkModel custom;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string path = "$.marks.custom[" + std::to_string(i) + "]";
            detail::Reader r(list[i], path);
            std::string kind = "market";
            Mark mark;
            r.get("kind", kind);
            r.get("volume", mark.volume);
            r.get("probability", mark.probability);
            r.finish();
            mark.kind = detail::parse_kind(kind, path + ".kind");
            custom.marks.push_back(mark);
        }
        custom.signal_prob = signal_prob;
        c.marks = custom;
        c.custom_marks = true;
    } else {
        c.marks = benchmark_marks(signal_prob, c.post_prob);
    }
    mk.finish();

    auto g = root.child("grid");
    g.get("dT", c.grid.dT);
    g.get("dLambda", c.grid.dLambda);
    g.get("q_min", c.grid.q_min);
    g.get("q_max", c.grid.q_max);
    g.finish();

    auto in = root.child("initial");
    in.get("lambda", c.initial.lambda);
    in.get("q", c.initial.q);
    in.get("p", c.initial.p);
    in.get("x", c.initial.x);
    in.finish();

    auto e = root.child("experiment");
    auto& ex = c.experiment;
    e.get("n_sim", ex.n_sim);
    e.get("seed", ex.seed);
    e.get("agents", ex.agents);
    e.get("signal_probs", ex.signal_probs);
    e.get("spreads", ex.spreads);
    e.get("twap_step", ex.twap_step);
    e.get("histogram_width", ex.histogram_width);
    e.get("consistency_allowance", ex.consistency_allowance);
    e.get("path_logs", ex.path_logs);
    e.get("policy_file", ex.policy_file);
    e.get("threads", ex.threads);
    e.finish();

    auto o = root.child("output");
    o.get("directory", c.output.directory);
    o.get("json", c.output.json);
    o.get("csv", c.output.csv);
    o.finish();
    root.finish();

    mp.validate();
    c.marks.validate();
    Grid::make(c.grid, mp);
    if (!(c.initial.lambda >= mp.lambda_lower && c.initial.lambda <= mp.lambda_upper))
        throw ConfigError("$.initial.lambda: must lie in [lambda_lower, lambda_upper]");
    if (ex.n_sim < 1) throw ConfigError("$.experiment.n_sim: must be >= 1");
    if (!(ex.twap_step > 0.0)) throw ConfigError("$.experiment.twap_step: must be positive");
    if (!(ex.histogram_width > 0.0)) throw ConfigError("$.experiment.histogram_width: must be positive");
    if (!(ex.consistency_allowance >= 0.0)) throw ConfigError("$.experiment.consistency_allowance: must be >= 0");
    for (double p : ex.signal_probs)
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("$.experiment.signal_probs: values must lie in [0,1]");
    for (double s : ex.spreads)
        if (!(s >= 0.0)) throw ConfigError("$.experiment.spreads: values must be >= 0");
    for (const auto& a : ex.agents)
        if (a != "solved" && a != "do_nothing" && a != "immediate" && a != "twap")
            throw ConfigError("$.experiment.agents: unknown agent '" + a + "'");
    return c;
}

/// Loads a config file; an empty file yields the benchmark configuration.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return parse_config(nlohmann::json::object());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(doc);
}

} // namespace sigexec
