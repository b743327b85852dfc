// Command-line front end: sigexec <solve|simulate|evaluate|sweep|check> [--config F] [--seed N] [--out DIR] [--threads N]

#include <sigexec/cli.hpp>
#include <sigexec/config.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Signal-based optimal execution: HJB solver and Monte-Carlo evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;

    const std::vector<std::pair<std::string, sigexec::Mode>> modes = {
        {"solve", sigexec::Mode::solve},
        {"simulate", sigexec::Mode::simulate},
        {"evaluate", sigexec::Mode::evaluate},
        {"sweep", sigexec::Mode::sweep},
        {"check", sigexec::Mode::check},
    };
    const std::map<std::string, std::string> help = {
        {"solve", "solve the value function and write surface, policy and CE table"},
        {"simulate", "simulate agents with a stored policy"},
        {"evaluate", "solve, simulate and compare with and without signal"},
        {"sweep", "SSR and speculation over signal probabilities and spreads"},
        {"check", "run the model and solver property checks"},
    };
    for (const auto& [name, mode] : modes) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "JSON run configuration (empty or omitted: benchmark)");
        sub->add_option("--seed", seed, "base seed for the path streams");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);

    sigexec::RunConfig cfg;
    try {
        cfg = config_path.empty() ? sigexec::parse_config(nlohmann::json::object()) : sigexec::load_config(config_path);
    } catch (const sigexec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return sigexec::kExitConfig;
    }
    if (seed) cfg.experiment.seed = *seed;
    if (out) cfg.output.directory = *out;
    if (threads) cfg.experiment.threads = *threads;

    for (const auto& [name, mode] : modes)
        if (app.got_subcommand(name)) return sigexec::run(cfg, mode, std::cout, std::cerr);
    return 1;
}
