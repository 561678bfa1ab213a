#pragma once

#include "rayleigh/errors.hpp"
#include "rayleigh/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace rayleigh::cli {

inline constexpr int kSchemaVersion = 1;

/// Config problem, message prefixed with "file:line:column:" when the
/// offending node is known.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Lengths in every block except scene.sigma are in units of the PSF width
// sigma (for tabulated PSFs sigma = 1 / (2 dk)).

struct SceneBlock {
    std::string           psf = "gaussian"; // gaussian | tabulated
    double                sigma = 1.0;
    std::filesystem::path psfFile;          // tabulated: CSV "x,amplitude"
    bool                  normalize        = false;
    double                epsilon          = 1e-3;
    std::int64_t          intervals        = 10'000'000;
    Index                 truncation       = 40;
    double                leakageTolerance = 1e-6;
};

struct SchemeBlock {
    std::string           kind       = "hg-spade";
    double                pixelWidth = 0.1;
    double                extent     = 8.0; // half-width of the pixel array
    Index                 modes      = 0; // 0: full depth
    double                offset     = 0.0;
    std::filesystem::path unitaryFile;
};

struct AnalysisBlock {
    double      theta2Min    = 0.01;
    double      theta2Max    = 5.0;
    int         points       = 60;
    std::string spacing      = "log"; // log | linear
    double      theta1       = 0.0;
    double      theta2       = 1.0;   // single point for scheme-dump
    bool        twoParameter = false;
    std::string derivatives  = "auto"; // auto | analytic | central
    double      step         = 1e-5;
};

struct MonteCarloBlock {
    bool                  present   = false;
    std::int64_t          trials    = 1000;
    std::uint64_t         seed      = 1;
    std::optional<double> photons;
    double                lower     = 0.0;
    std::optional<double> upper;
    double                tolerance = 1e-6;
};

struct OutputBlock {
    std::filesystem::path directory = "out";
    std::string           prefix;
};

struct RunConfig {
    int             schemaVersion = kSchemaVersion;
    SceneBlock      scene;
    SchemeBlock     scheme;
    AnalysisBlock   analysis;
    MonteCarloBlock montecarlo;
    OutputBlock     output;

    std::filesystem::path source; // file the config was read from, if any
};

/// Parses TOML text. Relative file paths resolve against `baseDir`.
RunConfig parseConfig(const std::string &text, const std::filesystem::path &baseDir, const std::string &sourceName = "<config>");
RunConfig loadConfig(const std::filesystem::path &path);

/// Resolved config as TOML; parsing it back yields an equal config.
std::string renderConfig(const RunConfig &config);

} // namespace rayleigh::cli
