#include "rayleigh/cli/commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>

using namespace rayleigh::cli;

int main(int argc, char **argv) {
    CLI::App app{"Two-point-source superresolution lab", "rayleigh-lab"};
    app.require_subcommand(1, 1);

    std::string                  configPath;
    std::string                  outDir;
    std::uint64_t                seed = 0;
    unsigned                     threads = 0;
    std::vector<CLI::App *>      subs;
    const std::pair<const char *, const char *> commands[] = {
        {"crb", "Cramer-Rao bounds of SPADE, direct imaging and the quantum limit"},
        {"fisher", "Fisher and Helstrom information over the separation grid"},
        {"simulate", "Monte Carlo MLE campaigns over the separation grid"},
        {"scheme-dump", "Outcome probabilities and their derivatives at one point"},
    };
    for(const auto &[name, help] : commands) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", configPath, "TOML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", outDir, "output directory (env RAYLEIGH_LAB_OUT)");
        sub->add_option("--seed", seed, "Monte Carlo seed");
        sub->add_option("--threads", threads, "worker threads (env RAYLEIGH_LAB_THREADS)")->check(CLI::PositiveNumber);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch(const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    CLI::App *chosen = app.get_subcommands().front();
    const auto command = *parseCommand(chosen->get_name());

    Overrides overrides;
    if(chosen->count("--out")) overrides.out = outDir;
    if(chosen->count("--seed")) overrides.seed = seed;
    if(chosen->count("--threads")) overrides.threads = threads;

    RunContext context;
    try {
        context = resolveContext(loadConfig(configPath), overrides);
    } catch(const std::exception &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitError;
    }

    const RunSummary summary = runCommand(command, context);
    for(const auto &w : summary.warnings) fmt::print(stderr, "warning: {}\n", w);
    if(!summary.error.empty()) fmt::print(stderr, "error: {}\n", summary.error);
    for(const auto &f : summary.files) fmt::print("{}\n", f.string());
    return summary.exitCode;
}
