#pragma once

#include "rayleigh/cli/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rayleigh::cli {

enum class Command { crb, fisher, simulate, schemeDump };

std::optional<Command> parseCommand(std::string_view name);
std::string_view commandName(Command command);

// Exit codes of a run.
inline constexpr int kExitOk         = 0;
inline constexpr int kExitError      = 1;
inline constexpr int kExitUsage      = 2;
inline constexpr int kExitUnreliable = 3;

struct Overrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t>         seed;
    std::optional<unsigned>              threads;
};

/// Config plus everything the command line and environment decided.
struct RunContext {
    RunConfig config;
    unsigned  threads = 1;
};

/// Flags win over RAYLEIGH_LAB_OUT / RAYLEIGH_LAB_THREADS, which win over the
/// config file. Overrides are folded into the config so the manifest echo
/// reproduces the run.
RunContext resolveContext(RunConfig config, const Overrides &overrides, bool useEnvironment = true);

struct RunSummary {
    int                                exitCode = kExitOk;
    std::vector<std::filesystem::path> files; // CSVs, then the manifest
    std::vector<std::string>           warnings;
    std::string                        error;
};

/// Runs one command and writes its CSVs and manifest.json. Errors are
/// reported through the summary (and the manifest) rather than thrown once
/// the output directory exists.
RunSummary runCommand(Command command, const RunContext &context);

/// One CSV cell; 17 significant digits, '.' separator.
std::string formatNumber(double value);

} // namespace rayleigh::cli
