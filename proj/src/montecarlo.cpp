#include "rayleigh/montecarlo.hpp"

#include "rayleigh/errors.hpp"
#include "rayleigh/information.hpp"
#include "rayleigh/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace rayleigh {

std::vector<std::int64_t> sampleCounts(const ProbabilityVector &p, double photons, CounterStream &rng) {
    const RVector             all = p.allValues();
    std::vector<std::int64_t> counts(static_cast<std::size_t>(all.size()));
    for(Index j = 0; j < all.size(); ++j) counts[static_cast<std::size_t>(j)] = samplePoisson(photons * all[j], rng);
    return counts;
}

double separationLogLikelihood(std::span<const double> counts, const MeasurementScheme &scheme, const SceneModel &scene,
                               double separation) {
    if(counts.size() != scheme.elements.size())
        throw ValidationError(fmt::format("count vector has {} entries, scheme has {} outcomes", counts.size(), scheme.elements.size()));
    const auto    g   = buildCorrelation(scene.withSeparation(separation), scheme.basis.dimension, scheme.basis.center);
    const RVector all = probabilities(scheme, g).allValues();
    const double  N   = scene.photons();
    double        ll  = 0.0;
    for(Index j = 0; j < all.size(); ++j) {
        const double mean = N * all[j];
        const double n    = counts[static_cast<std::size_t>(j)];
        if(n > 0.0) {
            if(!(mean > 0.0)) return -std::numeric_limits<double>::infinity();
            ll += n * std::log(mean);
        }
        ll -= mean;
    }
    return ll;
}

SeparationEstimate mleSeparation(std::span<const double> counts, const MeasurementScheme &scheme, const SceneModel &scene,
                                 const MleOptions &options) {
    if(!(options.lower >= 0.0) || !(options.upper > options.lower))
        throw ValidationError(fmt::format("estimator bounds [{}, {}] are invalid", options.lower, options.upper));
    const double width = scene.psf.width();
    const double tol   = options.tolerance.value_or(1e-6 * width);
    if(!(tol > 0.0)) throw ValidationError("optimizer tolerance must be positive");

    auto loglik = [&](double s) { return separationLogLikelihood(counts, scheme, scene, s); };

    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const bool   binaryWithoutRest = scheme.kind == MeasurementScheme::Kind::binarySpade && counts.size() == scheme.elements.size() &&
                                   counts[scheme.residualIndex] == 0.0;
    if(total == 0.0 || binaryWithoutRest) {
        return SeparationEstimate{options.lower, false, true, loglik(options.lower)};
    }

    // Brent in units of the PSF width; bits chosen so the step tolerance
    // stays below `tol` across the whole bracket.
    const double reach = std::max(1.0, options.upper / width);
    const int    bits  = std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(tol / (width * reach)))), 4, 52);
    auto objective = [&](double u) {
        const double ll = loglik(u * width);
        return std::isfinite(ll) ? -ll : 1e300;
    };
    std::uintmax_t iterations = 500;
    const auto     best       = boost::math::tools::brent_find_minima(objective, options.lower / width, options.upper / width, bits, iterations);

    SeparationEstimate out{best.first * width, true, false, -best.second};
    const double       window = 4.0 * tol * reach;
    for(double bound : {options.lower, options.upper}) {
        if(std::abs(out.value - bound) > window) continue;
        // the likelihood is even in the separation, so near zero the
        // difference to the bound value is below rounding
        const double atBound = loglik(bound);
        const double slack   = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(out.logLikelihood);
        if(atBound >= out.logLikelihood - slack) {
            out.value         = bound;
            out.logLikelihood = atBound;
            out.converged     = false;
        }
    }
    return out;
}

namespace {

void validate(const TrialConfig &config) {
    if(!config.scheme) throw ValidationError("campaign has no measurement scheme");
    if(config.trials < 1) throw ValidationError(fmt::format("trial count must be >= 1, got {}", config.trials));
    config.scene.validate();
    const double truth = config.scene.separation;
    if(!(config.estimator.lower >= 0.0)) throw ValidationError("estimator lower bound must be >= 0");
    if(!(config.estimator.lower <= truth && truth <= config.estimator.upper))
        throw ValidationError(fmt::format("estimator bounds [{}, {}] do not bracket the true separation {}", config.estimator.lower,
                                          config.estimator.upper, truth));
}

} // namespace

Campaign runCampaign(const TrialConfig &config) {
    validate(config);
    const MeasurementScheme &scheme = *config.scheme;
    const SceneModel        &scene  = config.scene;
    const Index              D      = scheme.basis.dimension;
    const double             N      = scene.photons();
    const double             truth  = scene.separation;

    // fail early rather than inside the optimizer
    (void) buildCorrelation(scene.withSeparation(config.estimator.upper), D, scheme.basis.center);

    DerivativeSpec spec;
    spec.method = scene.psf.kind() == PointSpreadFunction::Kind::gaussian ? DerivativeMethod::analytic : DerivativeMethod::centralDifference;
    const auto g  = buildCorrelation(scene, D, scheme.basis.center);
    const auto dg = buildDerivatives(scene, D, scheme.basis.center, spec);
    const auto pv = probabilities(scheme, g, dg);

    Campaign campaign;
    campaign.records.resize(static_cast<std::size_t>(config.trials));
    parallelFor(config.trials, config.threads, [&](std::int64_t t) {
        CounterStream       rng(config.seed, config.stream, static_cast<std::uint64_t>(t));
        TrialRecord         rec;
        rec.counts = sampleCounts(pv, N, rng);
        std::vector<double> asReal(rec.counts.begin(), rec.counts.end());
        const auto          est = mleSeparation(asReal, scheme, scene, config.estimator);
        rec.estimate            = est.value;
        rec.converged           = est.converged;
        rec.logLikelihood       = est.logLikelihood;
        campaign.records[static_cast<std::size_t>(t)] = std::move(rec);
    });

    ErrorReport &r = campaign.report;
    r.trials       = config.trials;
    const double J = classicalFisher(pv, N).matrix(0, 0);
    const double K = helstromFisher(g, dg, N).matrix(0, 0);
    r.crbClassical = J > 0.0 ? 1.0 / J : std::numeric_limits<double>::infinity();
    r.crbQuantum   = K > 0.0 ? 1.0 / K : std::numeric_limits<double>::infinity();

    // fixed trial-index order keeps the sums deterministic
    const std::int64_t T         = config.trials;
    double             sumErr    = 0.0, sumSq = 0.0;
    std::int64_t       converged = 0;
    for(const auto &rec : campaign.records) {
        const double e = rec.estimate - truth;
        sumErr += e;
        sumSq += e * e;
        converged += rec.converged ? 1 : 0;
    }
    r.mse             = sumSq / static_cast<double>(T);
    r.bias            = sumErr / static_cast<double>(T);
    r.convergenceRate = static_cast<double>(converged) / static_cast<double>(T);
    r.unreliable      = 1.0 - r.convergenceRate > config.maxFailureRate;
    r.mseOverCrb      = r.mse / r.crbClassical;

    r.batches = static_cast<int>(std::min<std::int64_t>(20, T));
    if(r.batches < 2) {
        r.mseStandardError = std::numeric_limits<double>::quiet_NaN();
    } else {
        std::vector<double> batchMse;
        for(int b = 0; b < r.batches; ++b) {
            const std::int64_t lo = T * b / r.batches, hi = T * (b + 1) / r.batches;
            double             s  = 0.0;
            for(std::int64_t t = lo; t < hi; ++t) {
                const double e = campaign.records[static_cast<std::size_t>(t)].estimate - truth;
                s += e * e;
            }
            batchMse.push_back(s / static_cast<double>(hi - lo));
        }
        double mean = 0.0;
        for(double m : batchMse) mean += m;
        mean /= r.batches;
        double var = 0.0;
        for(double m : batchMse) var += (m - mean) * (m - mean);
        var /= (r.batches - 1);
        r.mseStandardError = std::sqrt(var / r.batches);
    }
    return campaign;
}

} // namespace rayleigh
