#pragma once

#include "rayleigh/random.hpp"
#include "rayleigh/scene.hpp"
#include "rayleigh/schemes.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace rayleigh {

/// Independent Poisson counts with means N p_j, one per outcome; the
/// residual bucket is the last entry.
std::vector<std::int64_t> sampleCounts(const ProbabilityVector &p, double photons, CounterStream &rng);

/// Poisson log-likelihood sum_j [n_j log(N p_j) - N p_j] of `counts` (the
/// constant -log n_j! dropped) at separation `separation`. Returns -inf
/// when a positive count falls on an outcome of zero mean.
double separationLogLikelihood(std::span<const double> counts, const MeasurementScheme &scheme, const SceneModel &scene,
                               double separation);

struct MleOptions {
    double                lower = 0.0;
    double                upper = 5.0;
    std::optional<double> tolerance; // absolute; default 1e-6 PSF widths
};

struct SeparationEstimate {
    double value         = 0.0;
    bool   converged     = false;
    bool   degenerate    = false; // no information in the record; pinned to the lower bound
    double logLikelihood = 0.0;
};

/// Maximum-likelihood separation with the centroid held at the scene's
/// value. Brent's method (golden section with parabolic steps) on
/// [lower, upper]; an optimum on a bound is returned with converged = false.
SeparationEstimate mleSeparation(std::span<const double> counts, const MeasurementScheme &scheme, const SceneModel &scene,
                                 const MleOptions &options);

struct TrialConfig {
    std::shared_ptr<const MeasurementScheme> scheme;
    SceneModel                               scene; // true parameters
    std::int64_t                             trials = 1000;
    std::uint64_t                            seed   = 0;
    std::uint32_t                            stream = 0; // separates campaigns sharing a seed
    MleOptions                               estimator;
    unsigned                                 threads            = 1;
    double                                   maxFailureRate     = 0.2;
};

struct TrialRecord {
    std::vector<std::int64_t> counts;
    double                    estimate      = 0.0;
    bool                      converged     = false;
    double                    logLikelihood = 0.0;
};

struct ErrorReport {
    std::int64_t trials           = 0;
    int          batches          = 0;
    double       mse              = 0.0;
    double       bias             = 0.0;
    double       mseStandardError = 0.0; // batch means
    double       crbClassical     = 0.0; // 1 / J22
    double       crbQuantum       = 0.0; // 1 / K22
    double       mseOverCrb       = 0.0;
    double       convergenceRate  = 0.0;
    bool         unreliable       = false;
};

struct Campaign {
    std::vector<TrialRecord> records;
    ErrorReport              report;
};

/// T trials, trial t drawing from CounterStream(seed, stream, t). Results
/// are independent of the thread count.
Campaign runCampaign(const TrialConfig &config);

} // namespace rayleigh
