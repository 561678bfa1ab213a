#include "rayleigh/cli/commands.hpp"
#include "rayleigh/information.hpp"
#include "rayleigh/montecarlo.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace rayleigh;

namespace {

std::vector<Parameter> parameterList(bool twoParameter) {
    if(twoParameter) return {Parameter::centroid, Parameter::separation};
    return {Parameter::separation};
}

AnalysisOptions analysisOptions(bool twoParameter, const std::string &derivatives, std::optional<double> step, double leakageTolerance) {
    AnalysisOptions o;
    o.derivatives.parameters = parameterList(twoParameter);
    if(derivatives == "analytic")
        o.derivatives.method = DerivativeMethod::analytic;
    else if(derivatives == "central")
        o.derivatives.method = DerivativeMethod::centralDifference;
    else
        throw ValidationError("derivatives must be 'analytic' or 'central'");
    o.derivatives.step               = step;
    o.correlation.leakageTolerance   = leakageTolerance;
    return o;
}

py::dict probabilitiesDict(const ProbabilityVector &p, const MeasurementScheme &scheme) {
    py::dict d;
    d["labels"]   = scheme.labels;
    d["p"]        = p.allValues();
    py::list slopes;
    for(std::size_t mu = 0; mu < p.derivatives.size(); ++mu) slopes.append(p.allDerivatives(mu));
    d["dp"]       = slopes;
    d["residual"] = p.residualMass;
    d["warnings"] = p.warnings;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-point-source superresolution: Fisher information, Helstrom bounds and MLE campaigns";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<TruncationError>(m, "TruncationError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<SupportViolation>(m, "SupportViolation", base.ptr());
    py::register_exception<SingularMatrixError>(m, "SingularMatrixError", base.ptr());
    py::register_exception<QuadratureError>(m, "QuadratureError", base.ptr());

    py::class_<PointSpreadFunction>(m, "PointSpreadFunction")
        .def_static("gaussian", &PointSpreadFunction::gaussian, py::arg("sigma"))
        .def_static("tabulated", &PointSpreadFunction::tabulated, py::arg("positions"), py::arg("amplitudes"), py::arg("normalize") = false)
        .def_property_readonly("kind", [](const PointSpreadFunction &p) { return p.kind() == PointSpreadFunction::Kind::gaussian ? "gaussian" : "tabulated"; })
        .def_property_readonly("width", &PointSpreadFunction::width)
        .def_property_readonly("momentum_variance", &PointSpreadFunction::momentumVariance)
        .def("amplitude", &PointSpreadFunction::amplitude)
        .def("slope", &PointSpreadFunction::slope);

    py::class_<SceneModel>(m, "Scene")
        .def(py::init([](const PointSpreadFunction &psf, double centroid, double separation, double epsilon, std::int64_t intervals) {
                 SceneModel s{psf, centroid, separation, epsilon, intervals};
                 s.validate();
                 return s;
             }),
             py::arg("psf"), py::arg("centroid") = 0.0, py::arg("separation") = 0.0, py::arg("epsilon") = 1e-3, py::arg("intervals") = 10'000'000)
        .def_readwrite("psf", &SceneModel::psf)
        .def_readwrite("centroid", &SceneModel::centroid)
        .def_readwrite("separation", &SceneModel::separation)
        .def_readwrite("epsilon", &SceneModel::epsilon)
        .def_readwrite("intervals", &SceneModel::intervals)
        .def_property_readonly("photons", &SceneModel::photons)
        .def("with_separation", &SceneModel::withSeparation)
        .def("with_centroid", &SceneModel::withCentroid)
        .def("with_photons", &SceneModel::withPhotons);

    py::class_<ModeBasis>(m, "ModeBasis")
        .def(py::init([](double width, double center, Index dimension) { return ModeBasis{width, center, dimension}; }), py::arg("width"),
             py::arg("center"), py::arg("dimension"))
        .def_readonly("width", &ModeBasis::width)
        .def_readonly("center", &ModeBasis::center)
        .def_readonly("dimension", &ModeBasis::dimension)
        .def("evaluate", py::overload_cast<double>(&ModeBasis::evaluate, py::const_));

    m.def(
        "correlation",
        [](const SceneModel &scene, Index dimension, double center, double leakageTolerance) {
            const auto g = buildCorrelation(scene, dimension, center, {leakageTolerance});
            return py::make_tuple(g.entries, g.leakage);
        },
        py::arg("scene"), py::arg("dimension") = 40, py::arg("center") = 0.0, py::arg("leakage_tolerance") = 1e-6,
        "Correlation matrix in the Hermite-Gaussian basis and the truncation leakage.");

    py::class_<MeasurementScheme, std::shared_ptr<MeasurementScheme>>(m, "Scheme")
        .def_property_readonly("kind", [](const MeasurementScheme &s) { return kindName(s.kind); })
        .def_readonly("labels", &MeasurementScheme::labels)
        .def_readonly("basis", &MeasurementScheme::basis)
        .def_property_readonly("outcomes", &MeasurementScheme::outcomeCount);

    m.def(
        "direct_imaging",
        [](double pixelWidth, double extent, const ModeBasis &basis) {
            return std::make_shared<MeasurementScheme>(makeDirectImaging(PixelGrid::uniform(pixelWidth, extent, basis.center), basis));
        },
        py::arg("pixel_width"), py::arg("extent"), py::arg("basis"), "Pixels of the given width tiling center -/+ extent.");
    m.def(
        "hg_spade", [](Index qMax, double offset, const ModeBasis &basis) { return std::make_shared<MeasurementScheme>(makeHgSpade(qMax, offset, basis)); },
        py::arg("modes"), py::arg("offset"), py::arg("basis"));
    m.def(
        "binary_spade", [](double offset, const ModeBasis &basis) { return std::make_shared<MeasurementScheme>(makeBinarySpade(offset, basis)); },
        py::arg("offset"), py::arg("basis"));
    m.def(
        "custom_unitary",
        [](const CMatrix &unitary, const ModeBasis &basis) { return std::make_shared<MeasurementScheme>(makeCustomUnitary(unitary, basis)); },
        py::arg("unitary"), py::arg("basis"));
    m.def("load_unitary_csv", &loadUnitaryCsv, py::arg("path"));

    m.def(
        "probabilities",
        [](const MeasurementScheme &scheme, const SceneModel &scene, bool twoParameter, const std::string &derivatives) {
            const auto o  = analysisOptions(twoParameter, derivatives, std::nullopt, 1e-6);
            const auto g  = buildCorrelation(scene, scheme.basis.dimension, scheme.basis.center, o.correlation);
            const auto dg = buildDerivatives(scene, scheme.basis.dimension, scheme.basis.center, o.derivatives, o.correlation);
            return probabilitiesDict(probabilities(scheme, g, dg), scheme);
        },
        py::arg("scheme"), py::arg("scene"), py::arg("two_parameter") = false, py::arg("derivatives") = "analytic",
        "Outcome probabilities (residual last) and their parameter derivatives.");

    m.def(
        "analyze",
        [](const MeasurementScheme &scheme, const SceneModel &scene, bool twoParameter, const std::string &derivatives, std::optional<double> step,
           double leakageTolerance) {
            const auto r = analyze(scheme, scene, analysisOptions(twoParameter, derivatives, step, leakageTolerance));
            py::dict   d;
            d["J"]                    = r.J;
            d["K"]                    = r.K;
            d["crb_J"]                = r.crbJ ? py::cast(*r.crbJ) : py::none();
            d["crb_K"]                = r.crbK ? py::cast(*r.crbK) : py::none();
            d["dropped_pairs"]        = r.droppedPairs;
            d["flagged_terms"]        = r.flaggedTerms;
            d["smallest_probability"] = r.smallestProbability;
            d["leakage"]              = r.leakage;
            d["dominance_excess"]     = r.dominanceExcess();
            return d;
        },
        py::arg("scheme"), py::arg("scene"), py::arg("two_parameter") = false, py::arg("derivatives") = "analytic", py::arg("step") = py::none(),
        py::arg("leakage_tolerance") = 1e-6, "Classical (J) and Helstrom (K) Fisher information with diagnostics.");

    m.def(
        "helstrom_fisher",
        [](const SceneModel &scene, Index dimension, double center, bool twoParameter) {
            DerivativeSpec spec;
            spec.parameters = parameterList(twoParameter);
            const auto g    = buildCorrelation(scene, dimension, center);
            const auto dg   = buildDerivatives(scene, dimension, center, spec);
            return helstromFisher(g, dg, scene.photons()).matrix;
        },
        py::arg("scene"), py::arg("dimension") = 40, py::arg("center") = 0.0, py::arg("two_parameter") = false);
    m.def(
        "continuum_direct_fisher", [](const SceneModel &scene) { return continuumDirectFisher(scene); }, py::arg("scene"),
        "Separation information of ideal continuous direct imaging.");
    m.def("crb", &crb, py::arg("information"), py::arg("max_condition") = 1e12);

    m.def(
        "mle_separation",
        [](const std::vector<double> &counts, const MeasurementScheme &scheme, const SceneModel &scene, double lower, double upper,
           std::optional<double> tolerance) {
            MleOptions o;
            o.lower     = lower;
            o.upper     = upper;
            o.tolerance = tolerance;
            const auto e = mleSeparation(counts, scheme, scene, o);
            py::dict   d;
            d["value"]          = e.value;
            d["converged"]      = e.converged;
            d["degenerate"]     = e.degenerate;
            d["log_likelihood"] = e.logLikelihood;
            return d;
        },
        py::arg("counts"), py::arg("scheme"), py::arg("scene"), py::arg("lower") = 0.0, py::arg("upper") = 5.0, py::arg("tolerance") = py::none(),
        "Separation MLE from counts (residual count last); the scene supplies centroid and photons.");

    m.def(
        "run_campaign",
        [](std::shared_ptr<MeasurementScheme> scheme, const SceneModel &scene, std::int64_t trials, std::uint64_t seed, std::uint32_t stream,
           double lower, double upper, unsigned threads) {
            TrialConfig c;
            c.scheme          = std::move(scheme);
            c.scene           = scene;
            c.trials          = trials;
            c.seed            = seed;
            c.stream          = stream;
            c.estimator.lower = lower;
            c.estimator.upper = upper;
            c.threads         = threads;
            Campaign result;
            {
                py::gil_scoped_release release;
                result = runCampaign(c);
            }
            const auto &r = result.report;
            py::dict    d;
            d["trials"]             = r.trials;
            d["mse"]                = r.mse;
            d["bias"]               = r.bias;
            d["mse_standard_error"] = r.mseStandardError;
            d["crb"]                = r.crbClassical;
            d["crb_quantum"]        = r.crbQuantum;
            d["mse_over_crb"]       = r.mseOverCrb;
            d["convergence_rate"]   = r.convergenceRate;
            d["unreliable"]         = r.unreliable;
            std::vector<double> estimates;
            for(const auto &rec : result.records) estimates.push_back(rec.estimate);
            d["estimates"] = estimates;
            return d;
        },
        py::arg("scheme"), py::arg("scene"), py::arg("trials") = 1000, py::arg("seed") = 1, py::arg("stream") = 0, py::arg("lower") = 0.0,
        py::arg("upper") = 5.0, py::arg("threads") = 1);

    m.def(
        "run_command",
        [](const std::string &command, const std::filesystem::path &config, std::optional<std::filesystem::path> out,
           std::optional<std::uint64_t> seed, std::optional<unsigned> threads) {
            const auto c = cli::parseCommand(command);
            if(!c) throw ValidationError("unknown command '" + command + "'");
            cli::Overrides o{out, seed, threads};
            auto           ctx = cli::resolveContext(cli::loadConfig(config), o);
            cli::RunSummary s;
            {
                py::gil_scoped_release release;
                s = cli::runCommand(*c, ctx);
            }
            py::dict d;
            d["exit_code"] = s.exitCode;
            d["files"]     = s.files;
            d["warnings"]  = s.warnings;
            d["error"]     = s.error;
            return d;
        },
        py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(), py::arg("threads") = py::none(),
        "Same as the rayleigh-lab executable; returns exit code and written files.");

    m.attr("__version__") = RAYLEIGH_LAB_VERSION;
}
