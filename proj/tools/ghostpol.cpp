// Command-line front end: ghostpol <sweep|discriminate|tomo|optimize> --config FILE [--seed N] [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 1 runtime error.

#include <iostream>

#include <CLI11.hpp>

#include "ghostpol/cli/commands.hpp"

namespace {

struct Options {
    std::vector<std::string> configs;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("-c,--config", o.configs, "JSON config; repeat to merge fragments in order")->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("-o,--out", o.out, "output directory (overrides out_dir)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ghost polarimetry simulator"};
    app.require_subcommand(1);
    Options o;
    using Command = std::string (*)(const ghostpol::io::ExperimentConfig&, const std::filesystem::path&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"sweep", "response curves versus sample orientation (CSV + SVG)", ghostpol::cli::cmd_sweep},
        {"discriminate", "repeated runs, confidence regions and distinguishable subsets", ghostpol::cli::cmd_discriminate},
        {"tomo", "maximum-likelihood state tomography", ghostpol::cli::cmd_tomo},
        {"optimize", "search probe/projector settings that separate the samples", ghostpol::cli::cmd_optimize},
    };
    for (const auto& [name, help, fn] : commands) add_common(app.add_subcommand(name, help), o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Command run = nullptr;
    for (const auto& [name, help, fn] : commands)
        if (app.got_subcommand(name)) run = fn;

    ghostpol::io::ExperimentConfig cfg;
    try {
        std::vector<std::filesystem::path> paths(o.configs.begin(), o.configs.end());
        cfg = ghostpol::io::load_config(paths);
        if (o.seed) cfg.seed = *o.seed;
        if (!o.out.empty()) cfg.out_dir = o.out;
    } catch (const ghostpol::io::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        std::cout << run(cfg, cfg.out_dir);
    } catch (const ghostpol::io::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
