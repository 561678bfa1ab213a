#include "doctest.h"

#include "rayleigh/errors.hpp"
#include "rayleigh/information.hpp"
#include "rayleigh/montecarlo.hpp"

#include <cmath>

using namespace rayleigh;

namespace {

SceneModel gaussianScene(double separation) {
    SceneModel s;
    s.psf        = PointSpreadFunction::gaussian(1.0);
    s.separation = separation;
    return s;
}

ProbabilityVector flat(std::vector<double> values, double residual) {
    ProbabilityVector p;
    p.values       = Eigen::Map<RVector>(values.data(), static_cast<Index>(values.size()));
    p.residualMass = residual;
    return p;
}

struct Moments {
    double mean, var;
};

Moments moments(const std::vector<double> &xs) {
    double m = 0, v = 0;
    for(double x : xs) m += x / xs.size();
    for(double x : xs) v += (x - m) * (x - m) / (xs.size() - 1);
    return {m, v};
}

} // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter streams are addressable and reproducible") {
    CounterStream a(42, 0, 7), b(42, 0, 7), c(42, 0, 8), d(42, 1, 7);
    for(int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        CHECK(x != c.next());
        CHECK(x != d.next());
    }
    CounterStream u(1, 0, 0);
    for(int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("poisson sampler moments") {
    for(double mean : {0.3, 3.7, 9.99, 10.0, 57.0, 5000.0}) {
        CounterStream       rng(2024, 3, static_cast<std::uint64_t>(mean * 100));
        std::vector<double> xs;
        for(int i = 0; i < 20000; ++i) xs.push_back(static_cast<double>(samplePoisson(mean, rng)));
        const auto m = moments(xs);
        CHECK(std::abs(m.mean - mean) < 4.0 * std::sqrt(mean / xs.size()));
        // variance of the sample variance ~ (mu + 2 mu^2) / n
        CHECK(std::abs(m.var - mean) < 4.0 * std::sqrt((mean + 2 * mean * mean) / xs.size()));
    }
    CounterStream rng(0, 0, 0);
    CHECK(samplePoisson(0.0, rng) == 0);
    CHECK(samplePoisson(-1.0, rng) == 0);
}

TEST_CASE("sampleCounts") {
    SUBCASE("zero-probability outcomes never fire") {
        const auto    p = flat({0.0, 0.6}, 0.4);
        CounterStream rng(9, 0, 0);
        for(int i = 0; i < 1000; ++i) {
            const auto n = sampleCounts(p, 100.0, rng);
            CHECK(n.size() == 3);
            CHECK(n[0] == 0);
        }
    }
    SUBCASE("two equal outcomes at N = 1e4") {
        const auto          p = flat({0.5}, 0.5);
        std::vector<double> first, total;
        for(std::uint64_t t = 0; t < 10000; ++t) {
            CounterStream rng(77, 0, t);
            const auto    n = sampleCounts(p, 1e4, rng);
            first.push_back(static_cast<double>(n[0]));
            total.push_back(static_cast<double>(n[0] + n[1]));
        }
        const auto m = moments(first);
        CHECK(std::abs(m.mean - 5000.0) < 3.0 * std::sqrt(5000.0 / 1e4));
        CHECK(m.var == doctest::Approx(5000.0).epsilon(0.05));
        const auto mt = moments(total);
        CHECK(std::abs(mt.mean - 1e4) < 3.0 * std::sqrt(1e4 / 1e4));
    }
}

TEST_CASE("MLE recovers the separation from noiseless data") {
    const ModeBasis basis{1.0, 0.0, 40};
    for(const auto &scheme : {makeHgSpade(40, 0.0, basis), makeBinarySpade(0.0, basis), makeDirectImaging(PixelGrid::uniform(0.1, 8.0), basis)}) {
        for(double truth : {0.7, 1.0, 2.3}) {
            const auto    scene = gaussianScene(truth);
            const auto    g     = buildCorrelation(scene, 40, 0.0);
            const RVector mean  = scene.photons() * probabilities(scheme, g).allValues();
            const std::vector<double> counts(mean.data(), mean.data() + mean.size());
            MleOptions                opts;
            opts.lower     = 0.0;
            opts.upper     = 5.0;
            const auto est = mleSeparation(counts, scheme, scene, opts);
            CHECK(est.converged);
            CHECK(std::abs(est.value - truth) < 1e-5);
            CHECK(std::isfinite(est.logLikelihood));
        }
    }
}

TEST_CASE("MLE edge cases") {
    const ModeBasis basis{1.0, 0.0, 40};
    const auto      binary = makeBinarySpade(0.0, basis);
    const auto      scene  = gaussianScene(1.0);
    MleOptions      opts;
    opts.lower = 0.0;
    opts.upper = 4.0;

    const std::vector<double> allFundamental{100.0, 0.0};
    auto                      est = mleSeparation(allFundamental, binary, scene, opts);
    CHECK(est.value == 0.0);
    CHECK_FALSE(est.converged);
    CHECK(est.degenerate);

    const std::vector<double> none{0.0, 0.0};
    est = mleSeparation(none, binary, scene, opts);
    CHECK(est.degenerate);
    CHECK(est.value == 0.0);

    // almost everything in the rest bucket pushes the optimum onto the upper bound
    const std::vector<double> allRest{1.0, 1e4};
    est = mleSeparation(allRest, binary, scene, opts);
    CHECK(est.value == 4.0);
    CHECK_FALSE(est.converged);

    CHECK_THROWS_AS(mleSeparation(std::vector<double>{1.0}, binary, scene, opts), ValidationError);
    opts.upper = -1.0;
    CHECK_THROWS_AS(mleSeparation(allRest, binary, scene, opts), ValidationError);
}

TEST_CASE("log-likelihood is finite when zero-mean outcomes have zero counts") {
    // identity scattering: at zero separation only output 0 has nonzero mean, exactly
    const ModeBasis     basis{1.0, 0.0, 40};
    const auto          spade = makeCustomUnitary(CMatrix::Identity(40, 40), basis);
    const auto          scene = gaussianScene(0.0);
    std::vector<double> counts(41, 0.0);
    counts[0] = 1e4;
    CHECK(std::isfinite(separationLogLikelihood(counts, spade, scene, 0.0)));
    counts[3] = 1.0;
    CHECK(separationLogLikelihood(counts, spade, scene, 0.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("campaigns") {
    const ModeBasis basis{1.0, 0.0, 40};
    TrialConfig     cfg;
    cfg.scheme          = std::make_shared<const MeasurementScheme>(makeHgSpade(40, 0.0, basis));
    cfg.scene           = gaussianScene(1.0);
    cfg.trials          = 200;
    cfg.seed            = 12345;
    cfg.estimator.upper = 5.0;

    SUBCASE("a single trial equals one estimator call") {
        TrialConfig one = cfg;
        one.trials      = 1;
        const auto c    = runCampaign(one);
        REQUIRE(c.records.size() == 1);
        CounterStream rng(cfg.seed, 0, 0);
        const auto    g      = buildCorrelation(cfg.scene, 40, 0.0);
        const auto    counts = sampleCounts(probabilities(*cfg.scheme, g), cfg.scene.photons(), rng);
        CHECK(counts == c.records[0].counts);
        const std::vector<double> asReal(counts.begin(), counts.end());
        const auto                est = mleSeparation(asReal, *cfg.scheme, cfg.scene, cfg.estimator);
        CHECK(est.value == c.records[0].estimate);
        CHECK(c.report.mse == (est.value - 1.0) * (est.value - 1.0));
    }
    SUBCASE("deterministic across runs and thread counts") {
        const auto a = runCampaign(cfg);
        TrialConfig threaded = cfg;
        threaded.threads     = 4;
        const auto b         = runCampaign(threaded);
        const auto c         = runCampaign(cfg);
        for(std::size_t t = 0; t < a.records.size(); ++t) {
            CHECK(a.records[t].counts == b.records[t].counts);
            CHECK(a.records[t].estimate == b.records[t].estimate);
        }
        CHECK(a.report.mse == b.report.mse);
        CHECK(a.report.mse == c.report.mse);
        CHECK(a.report.mseStandardError == b.report.mseStandardError);
        CHECK(a.report.batches == 20);
        CHECK(a.report.crbClassical == doctest::Approx(4.0 / cfg.scene.photons()).epsilon(1e-6));
        CHECK(a.report.crbQuantum == doctest::Approx(4.0 / cfg.scene.photons()).epsilon(1e-6));
        CHECK(a.report.mse >= 0.0);
    }
    SUBCASE("a different stream changes the draws") {
        TrialConfig other = cfg;
        other.stream      = 1;
        CHECK(runCampaign(other).report.mse != runCampaign(cfg).report.mse);
    }
    SUBCASE("error reduces with photon budget") {
        double previous = 1e300;
        for(double N : {1e3, 1e4, 1e5}) {
            TrialConfig c = cfg;
            c.trials      = 300;
            c.scene       = cfg.scene.withPhotons(N);
            const auto r  = runCampaign(c).report;
            CHECK(r.mse < previous);
            // CRB respected up to batch-means noise
            if(N >= 1e4) CHECK(r.mse >= (1.0 - 3.0 * r.mseStandardError / r.mse) * r.crbClassical);
            previous = r.mse;
        }
    }
    SUBCASE("config validation") {
        TrialConfig bad = cfg;
        bad.trials      = 0;
        CHECK_THROWS_AS(runCampaign(bad), ValidationError);
        bad             = cfg;
        bad.estimator.upper = 0.5;
        CHECK_THROWS_AS(runCampaign(bad), ValidationError);
        bad        = cfg;
        bad.scheme = nullptr;
        CHECK_THROWS_AS(runCampaign(bad), ValidationError);
        bad                 = cfg;
        bad.estimator.upper = 30.0;
        CHECK_THROWS_AS(runCampaign(bad), TruncationError);
    }
}

TEST_CASE("small-separation direct imaging is flagged unreliable") {
    TrialConfig cfg;
    cfg.scheme          = std::make_shared<const MeasurementScheme>(makeDirectImaging(PixelGrid::uniform(0.2, 8.0), ModeBasis{1.0, 0.0, 40}));
    cfg.scene           = gaussianScene(0.05);
    cfg.trials          = 40;
    cfg.seed            = 3;
    cfg.estimator.upper = 3.0;
    const auto r        = runCampaign(cfg).report;
    CHECK(r.convergenceRate < 0.8);
    CHECK(r.unreliable);
}
