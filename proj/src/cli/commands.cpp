#include "rayleigh/cli/commands.hpp"

#include "rayleigh/information.hpp"
#include "rayleigh/montecarlo.hpp"
#include "rayleigh/parallel.hpp"
#include "rayleigh/scene.hpp"
#include "rayleigh/schemes.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#ifndef RAYLEIGH_LAB_VERSION
#define RAYLEIGH_LAB_VERSION "0.0.0"
#endif

namespace rayleigh::cli {

std::optional<Command> parseCommand(std::string_view name) {
    if(name == "crb") return Command::crb;
    if(name == "fisher") return Command::fisher;
    if(name == "simulate") return Command::simulate;
    if(name == "scheme-dump") return Command::schemeDump;
    return std::nullopt;
}

std::string_view commandName(Command command) {
    switch(command) {
    case Command::crb: return "crb";
    case Command::fisher: return "fisher";
    case Command::simulate: return "simulate";
    case Command::schemeDump: return "scheme-dump";
    }
    return "?";
}

std::string formatNumber(double value) {
    if(std::isnan(value)) return "nan";
    if(std::isinf(value)) return value > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", value);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<std::uint64_t> parseUnsigned(std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if(ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

unsigned defaultThreads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Cells are pre-formatted so each command controls integer vs real output.
class CsvFile {
public:
    CsvFile(const std::filesystem::path &path, const std::vector<std::string> &header) : path_(path), out_(path, std::ios::binary) {
        if(!out_) throw Error(fmt::format("cannot write {}", path.string()));
        row(header);
    }

    void row(const std::vector<std::string> &cells) {
        for(std::size_t i = 0; i < cells.size(); ++i) {
            if(i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        out_.flush(); // partial results survive a later failure
    }

    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream         out_;
};

std::string num(double v) { return formatNumber(v); }
std::string num(std::int64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

// x,amplitude rows; '#' lines and blank lines ignored.
PointSpreadFunction loadPsfCsv(const std::filesystem::path &path, bool normalize) {
    std::ifstream in(path);
    if(!in) throw ValidationError(fmt::format("{}: cannot open PSF table", path.string()));
    std::vector<double> xs, as;
    std::string         line;
    int                 lineNo = 0;
    while(std::getline(in, line)) {
        ++lineNo;
        if(!line.empty() && line.back() == '\r') line.pop_back();
        if(line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        double     x = 0, a = 0;
        bool       ok = comma != std::string::npos;
        if(ok) {
            const char *b = line.data();
            auto r1 = std::from_chars(b, b + comma, x);
            auto r2 = std::from_chars(b + comma + 1, b + line.size(), a);
            ok = r1.ec == std::errc() && r1.ptr == b + comma && r2.ec == std::errc() && r2.ptr == b + line.size();
        }
        if(!ok) throw ValidationError(fmt::format("{}:{}: expected 'x,amplitude'", path.string(), lineNo));
        xs.push_back(x);
        as.push_back(a);
    }
    return PointSpreadFunction::tabulated(std::move(xs), std::move(as), normalize);
}

// Everything a command needs, built once from the config.
struct Setup {
    SceneModel      scene;
    double          sigma = 1.0; // length unit of the config
    Index           dimension = 40;
    AnalysisOptions options;
    std::vector<double> grid; // theta2 / sigma
};

Setup prepare(const RunConfig &cfg) {
    Setup s;
    const auto &sc = cfg.scene;
    s.scene.psf = sc.psf == "tabulated" ? loadPsfCsv(sc.psfFile, sc.normalize) : PointSpreadFunction::gaussian(sc.sigma);
    s.sigma             = s.scene.psf.width();
    s.scene.centroid    = cfg.analysis.theta1 * s.sigma;
    s.scene.epsilon     = sc.epsilon;
    s.scene.intervals   = sc.intervals;
    s.dimension         = sc.truncation;

    auto &o = s.options;
    o.correlation.leakageTolerance = sc.leakageTolerance;
    const std::string &method      = cfg.analysis.derivatives;
    const bool analytic = method == "analytic" || (method == "auto" && s.scene.psf.kind() == PointSpreadFunction::Kind::gaussian);
    o.derivatives.method = analytic ? DerivativeMethod::analytic : DerivativeMethod::centralDifference;
    o.derivatives.step   = cfg.analysis.step * s.sigma;
    if(cfg.analysis.twoParameter) o.derivatives.parameters = {Parameter::centroid, Parameter::separation};

    const auto &a = cfg.analysis;
    for(int i = 0; i < a.points; ++i) {
        if(a.points == 1) {
            s.grid.push_back(a.theta2Min);
        } else if(a.spacing == "log") {
            const double t = static_cast<double>(i) / (a.points - 1);
            s.grid.push_back(a.theta2Min * std::pow(a.theta2Max / a.theta2Min, t));
        } else {
            s.grid.push_back(a.theta2Min + (a.theta2Max - a.theta2Min) * i / (a.points - 1));
        }
    }
    if(a.points > 1) s.grid.back() = a.theta2Max; // no drift at the end point
    return s;
}

MeasurementScheme buildScheme(const RunConfig &cfg, const Setup &s) {
    const ModeBasis basis = sceneBasis(s.scene, s.dimension, s.scene.centroid);
    const auto &m = cfg.scheme;
    if(m.kind == "direct-imaging") return makeDirectImaging(PixelGrid::uniform(m.pixelWidth * s.sigma, m.extent * s.sigma, basis.center), basis);
    if(m.kind == "hg-spade") return makeHgSpade(m.modes > 0 ? m.modes : s.dimension, m.offset * s.sigma, basis);
    if(m.kind == "binary-spade") return makeBinarySpade(m.offset * s.sigma, basis);
    return makeCustomUnitary(loadUnitaryCsv(m.unitaryFile), basis);
}

struct Diagnostics {
    double                   maxLeakage          = 0.0;
    double                   smallestProbability = 1.0;
    int                      droppedPairs        = 0;
    int                      flaggedTerms        = 0;
    std::vector<double>      unreliablePoints;
    std::vector<std::string> warnings;

    void absorb(const InformationResult &r) {
        maxLeakage          = std::max(maxLeakage, r.leakage);
        smallestProbability = std::min(smallestProbability, r.smallestProbability);
        droppedPairs += r.droppedPairs;
        flaggedTerms += r.flaggedTerms;
    }

    void warn(const std::string &w) {
        if(std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
    }
};

std::filesystem::path outputPath(const RunConfig &cfg, const std::string &name) { return cfg.output.directory / (cfg.output.prefix + name); }

// -- crb ---------------------------------------------------------------------

struct CrbRow {
    InformationResult spade;
    double            jDirect = 0;
};

void cmdCrb(const RunContext &ctx, RunSummary &summary, Diagnostics &diag) {
    const auto &cfg = ctx.config;
    if(cfg.scene.psf != "gaussian") throw ValidationError("crb requires scene.psf = \"gaussian\"");
    Setup s = prepare(cfg);
    s.options.derivatives.parameters = {Parameter::separation};
    const double N = s.scene.photons();

    const auto spade = makeHgSpade(s.dimension, 0.0, sceneBasis(s.scene, s.dimension, s.scene.centroid));
    std::vector<CrbRow> rows(s.grid.size());
    parallelFor(static_cast<std::int64_t>(s.grid.size()), ctx.threads, [&](std::int64_t i) {
        const SceneModel scene = s.scene.withSeparation(s.grid[static_cast<std::size_t>(i)] * s.sigma);
        const auto       info  = analyze(spade, scene, s.options);
        CrbRow          &r     = rows[static_cast<std::size_t>(i)];
        r.spade   = info;
        r.jDirect = continuumDirectFisher(scene);
    });

    CsvFile csv(outputPath(cfg, "crb.csv"),
                {"theta2_over_sigma", "J_direct", "J_spade", "K", "crb_direct", "crb_spade", "crb_quantum", "theta2",
                 "J_direct_per_photon", "J_spade_per_photon", "K_per_photon", "crb_direct_per_photon", "crb_spade_per_photon",
                 "crb_quantum_per_photon"});
    summary.files.push_back(csv.path());
    const double s2 = s.sigma * s.sigma;
    for(std::size_t i = 0; i < rows.size(); ++i) {
        const CrbRow &r  = rows[i];
        const double  js = r.spade.J(0, 0), k = r.spade.K(0, 0);
        auto inv = [](double j) { return j > 0.0 ? 1.0 / j : kInf; };
        csv.row({num(s.grid[i]), num(r.jDirect), num(js), num(k), num(inv(r.jDirect)), num(inv(js)), num(inv(k)), num(s.grid[i] * s.sigma),
                 num(r.jDirect * s2 / N), num(js * s2 / N), num(k * s2 / N), num(inv(r.jDirect) * N / s2), num(inv(js) * N / s2),
                 num(inv(k) * N / s2)});
        diag.absorb(r.spade);
    }
}

// -- fisher ------------------------------------------------------------------

void cmdFisher(const RunContext &ctx, RunSummary &summary, Diagnostics &diag) {
    const auto &cfg    = ctx.config;
    const Setup s      = prepare(cfg);
    const auto  scheme = buildScheme(cfg, s);
    const double N     = s.scene.photons();
    const bool   two   = cfg.analysis.twoParameter;

    std::vector<InformationResult> results(s.grid.size());
    std::vector<double>            residual(s.grid.size());
    std::vector<std::vector<std::string>> warnings(s.grid.size());
    parallelFor(static_cast<std::int64_t>(s.grid.size()), ctx.threads, [&](std::int64_t i) {
        const auto       k     = static_cast<std::size_t>(i);
        const SceneModel scene = s.scene.withSeparation(s.grid[k] * s.sigma);
        results[k]             = analyze(scheme, scene, s.options);
        const auto g           = buildCorrelation(scene, s.dimension, scheme.basis.center, s.options.correlation);
        const auto p           = probabilities(scheme, g);
        residual[k]            = p.residualMass;
        warnings[k]            = p.warnings;
    });

    std::vector<std::string> header{"theta2_over_sigma", "theta2"};
    const std::vector<std::string> entries = two ? std::vector<std::string>{"11", "12", "21", "22"} : std::vector<std::string>{"22"};
    for(const auto &e : entries) header.push_back("J" + e);
    for(const auto &e : entries) header.push_back("K" + e);
    for(const char *h : {"crb_J", "crb_K", "J22_per_photon", "K22_per_photon", "residual_mass", "smallest_probability", "flagged_terms",
                         "dropped_pairs", "leakage", "dominance_excess"})
        header.emplace_back(h);

    CsvFile csv(outputPath(cfg, "fisher.csv"), header);
    summary.files.push_back(csv.path());
    const double s2   = s.sigma * s.sigma;
    const Index  last = two ? 1 : 0;
    for(std::size_t i = 0; i < results.size(); ++i) {
        const auto &r = results[i];
        std::vector<std::string> row{num(s.grid[i]), num(s.grid[i] * s.sigma)};
        for(const RMatrix *m : {&r.J, &r.K})
            for(Index a = 0; a < m->rows(); ++a)
                for(Index b = 0; b < m->cols(); ++b) row.push_back(num((*m)(a, b)));
        row.push_back(num(r.crbJ ? (*r.crbJ)(last, last) : kInf));
        row.push_back(num(r.crbK ? (*r.crbK)(last, last) : kInf));
        row.push_back(num(r.J(last, last) * s2 / N));
        row.push_back(num(r.K(last, last) * s2 / N));
        row.push_back(num(residual[i]));
        row.push_back(num(r.smallestProbability));
        row.push_back(num(r.flaggedTerms));
        row.push_back(num(r.droppedPairs));
        row.push_back(num(r.leakage));
        row.push_back(num(r.dominanceExcess()));
        csv.row(row);
        diag.absorb(r);
        for(const auto &w : warnings[i]) diag.warn(w);
    }
}

// -- simulate ----------------------------------------------------------------

void cmdSimulate(const RunContext &ctx, RunSummary &summary, Diagnostics &diag) {
    const auto &cfg = ctx.config;
    Setup       s   = prepare(cfg);
    const auto &mc  = cfg.montecarlo;
    if(mc.photons) s.scene = s.scene.withPhotons(*mc.photons);
    auto scheme = std::make_shared<const MeasurementScheme>(buildScheme(cfg, s));

    MleOptions est;
    est.lower     = mc.lower * s.sigma;
    est.upper     = mc.upper.value_or(std::max(5.0, 2.0 * cfg.analysis.theta2Max)) * s.sigma;
    est.tolerance = mc.tolerance * s.sigma;

    CsvFile points(outputPath(cfg, "simulate.csv"),
                   {"theta2_over_sigma", "theta2", "trials", "photons", "mse", "bias", "mse_stderr", "crb", "crb_quantum", "mse_over_crb",
                    "convergence_rate", "unreliable"});
    CsvFile trials(outputPath(cfg, "trials.csv"), {"point", "theta2_over_sigma", "trial", "estimate", "converged", "log_likelihood"});
    summary.files.push_back(points.path());
    summary.files.push_back(trials.path());

    for(std::size_t i = 0; i < s.grid.size(); ++i) {
        TrialConfig tc;
        tc.scheme    = scheme;
        tc.scene     = s.scene.withSeparation(s.grid[i] * s.sigma);
        tc.trials    = mc.trials;
        tc.seed      = mc.seed;
        tc.stream    = static_cast<std::uint32_t>(i);
        tc.estimator = est;
        tc.threads   = ctx.threads;
        const Campaign c = runCampaign(tc);
        const auto    &r = c.report;
        points.row({num(s.grid[i]), num(s.grid[i] * s.sigma), num(r.trials), num(tc.scene.photons()), num(r.mse), num(r.bias),
                    num(r.mseStandardError), num(r.crbClassical), num(r.crbQuantum), num(r.mseOverCrb), num(r.convergenceRate),
                    num(r.unreliable ? 1 : 0)});
        for(std::size_t t = 0; t < c.records.size(); ++t) {
            const auto &rec = c.records[t];
            trials.row({num(static_cast<std::int64_t>(i)), num(s.grid[i]), num(static_cast<std::int64_t>(t)), num(rec.estimate),
                        num(rec.converged ? 1 : 0), num(rec.logLikelihood)});
        }
        if(r.unreliable) {
            diag.unreliablePoints.push_back(s.grid[i]);
            diag.warn(fmt::format("campaign at theta2 = {} sigma is unreliable (convergence rate {:.3f})", s.grid[i], r.convergenceRate));
        }
    }
}

// -- scheme-dump -------------------------------------------------------------

void cmdSchemeDump(const RunContext &ctx, RunSummary &summary, Diagnostics &diag) {
    const auto &cfg = ctx.config;
    Setup       s   = prepare(cfg);
    s.options.derivatives.parameters = {Parameter::centroid, Parameter::separation};
    const auto       scheme = buildScheme(cfg, s);
    const SceneModel scene  = s.scene.withSeparation(cfg.analysis.theta2 * s.sigma);
    const auto g  = buildCorrelation(scene, s.dimension, scheme.basis.center, s.options.correlation);
    const auto dg = buildDerivatives(scene, s.dimension, scheme.basis.center, s.options.derivatives, s.options.correlation);
    const auto p  = probabilities(scheme, g, dg);

    CsvFile csv(outputPath(cfg, "scheme.csv"), {"index", "label", "p", "dp_dtheta1", "dp_dtheta2"});
    summary.files.push_back(csv.path());
    const RVector values = p.allValues(), d1 = p.allDerivatives(0), d2 = p.allDerivatives(1);
    for(Index j = 0; j < values.size(); ++j)
        csv.row({num(static_cast<std::int64_t>(j)), scheme.labels[static_cast<std::size_t>(j)], num(values[j]), num(d1[j]), num(d2[j])});
    diag.maxLeakage = g.leakage;
    for(const auto &w : p.warnings) diag.warn(w);
}

nlohmann::json manifest(Command command, const RunContext &ctx, const RunSummary &summary, const Diagnostics &diag, double seconds) {
    using nlohmann::json;
    json j;
    j["tool"]           = "rayleigh-lab";
    j["version"]        = RAYLEIGH_LAB_VERSION;
    j["schema_version"] = ctx.config.schemaVersion;
    j["command"]        = std::string(commandName(command));
    j["config_file"]    = ctx.config.source.string();
    j["config"]         = renderConfig(ctx.config);
    j["threads"]        = ctx.threads;
    j["seed"]           = ctx.config.montecarlo.seed;
    json files          = json::array();
    for(const auto &f : summary.files) files.push_back(f.filename().string());
    j["outputs"] = files;

    json d;
    d["max_leakage"]          = diag.maxLeakage;
    d["smallest_probability"] = diag.smallestProbability;
    d["dropped_pairs"]        = diag.droppedPairs;
    d["flagged_terms"]        = diag.flaggedTerms;
    d["unreliable_points"]    = diag.unreliablePoints;
    d["warnings"]             = diag.warnings;
    j["diagnostics"]          = d;

    j["status"]             = summary.exitCode == kExitOk ? "ok" : summary.exitCode == kExitUnreliable ? "unreliable" : "error";
    j["exit_code"]          = summary.exitCode;
    j["error"]              = summary.error.empty() ? json(nullptr) : json(summary.error);
    j["wall_clock_seconds"] = seconds;
    return j;
}

} // namespace

RunContext resolveContext(RunConfig config, const Overrides &overrides, bool useEnvironment) {
    RunContext ctx;
    ctx.threads = defaultThreads();

    if(useEnvironment) {
        if(const char *env = std::getenv("RAYLEIGH_LAB_OUT"); env && *env) config.output.directory = std::filesystem::absolute(env);
        if(const char *env = std::getenv("RAYLEIGH_LAB_THREADS"); env && *env) {
            const auto n = parseUnsigned(env);
            if(!n || *n == 0 || *n > 4096) throw ValidationError(fmt::format("RAYLEIGH_LAB_THREADS must be an integer in [1, 4096], got '{}'", env));
            ctx.threads = static_cast<unsigned>(*n);
        }
    }
    if(overrides.out) config.output.directory = std::filesystem::absolute(*overrides.out);
    if(overrides.threads) {
        if(*overrides.threads == 0) throw ValidationError("--threads must be at least 1");
        ctx.threads = *overrides.threads;
    }
    if(overrides.seed) {
        config.montecarlo.seed    = *overrides.seed;
        config.montecarlo.present = true;
    }
    ctx.config = std::move(config);
    return ctx;
}

RunSummary runCommand(Command command, const RunContext &ctx) {
    const auto  start = std::chrono::steady_clock::now();
    RunSummary  summary;
    Diagnostics diag;

    std::error_code ec;
    std::filesystem::create_directories(ctx.config.output.directory, ec);
    if(ec) {
        summary.exitCode = kExitError;
        summary.error    = fmt::format("cannot create output directory {}: {}", ctx.config.output.directory.string(), ec.message());
        return summary;
    }

    try {
        switch(command) {
        case Command::crb: cmdCrb(ctx, summary, diag); break;
        case Command::fisher: cmdFisher(ctx, summary, diag); break;
        case Command::simulate: cmdSimulate(ctx, summary, diag); break;
        case Command::schemeDump: cmdSchemeDump(ctx, summary, diag); break;
        }
        if(!diag.unreliablePoints.empty()) summary.exitCode = kExitUnreliable;
    } catch(const std::exception &e) {
        summary.exitCode = kExitError;
        summary.error    = e.what();
    }
    summary.warnings = diag.warnings;

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto   path    = outputPath(ctx.config, "manifest.json");
    std::ofstream out(path, std::ios::binary);
    if(out) {
        out << manifest(command, ctx, summary, diag, seconds).dump(2) << '\n';
        summary.files.push_back(path);
    } else if(summary.exitCode == kExitOk) {
        summary.exitCode = kExitError;
        summary.error    = fmt::format("cannot write {}", path.string());
    }
    return summary;
}

} // namespace rayleigh::cli
