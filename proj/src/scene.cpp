#include "rayleigh/scene.hpp"

#include "rayleigh/errors.hpp"
#include "rayleigh/quadrature.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace rayleigh {

struct PointSpreadFunction::Spline {
    boost::math::interpolators::cardinal_cubic_b_spline<double> interp;
    double                                                      lo, hi;
};

PointSpreadFunction PointSpreadFunction::gaussian(double sigma) {
    if(!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError(fmt::format("gaussian PSF width must be positive, got {}", sigma));
    PointSpreadFunction psf;
    psf.kind_             = Kind::gaussian;
    psf.width_            = sigma;
    psf.momentumVariance_ = 1.0 / (4.0 * sigma * sigma);
    return psf;
}

PointSpreadFunction PointSpreadFunction::tabulated(std::vector<double> positions, std::vector<double> amplitudes,
                                                   bool normalize) {
    const std::size_t n = positions.size();
    if(n != amplitudes.size()) throw ValidationError("tabulated PSF: position and amplitude counts differ");
    if(n < 5 || n % 2 == 0) throw ValidationError(fmt::format("tabulated PSF needs an odd number (>= 5) of samples, got {}", n));
    const double step = (positions.back() - positions.front()) / static_cast<double>(n - 1);
    if(!(step > 0.0)) throw ValidationError("tabulated PSF: positions must be increasing");
    for(std::size_t i = 1; i < n; ++i) {
        if(std::abs(positions[i] - positions[i - 1] - step) > 1e-9 * step)
            throw ValidationError(fmt::format("tabulated PSF: grid is not uniform at sample {}", i));
    }
    for(double a : amplitudes)
        if(!std::isfinite(a)) throw ValidationError("tabulated PSF: non-finite amplitude");

    std::vector<double> sq(n);
    for(std::size_t i = 0; i < n; ++i) sq[i] = amplitudes[i] * amplitudes[i];
    const double norm = simpsonSampled(sq, step);
    if(!(norm > 0.0)) throw ValidationError("tabulated PSF: amplitude is identically zero");
    if(normalize) {
        const double s = 1.0 / std::sqrt(norm);
        for(auto &a : amplitudes) a *= s;
    } else if(std::abs(norm - 1.0) > 1e-9) {
        throw ValidationError(fmt::format("tabulated PSF is not square-normalized: integral = {:.12g}", norm));
    }

    PointSpreadFunction psf;
    psf.kind_       = Kind::tabulated;
    psf.step_       = step;
    psf.spline_     = std::make_shared<const Spline>(Spline{
        boost::math::interpolators::cardinal_cubic_b_spline<double>(amplitudes.begin(), amplitudes.end(), positions.front(), step),
        positions.front(), positions.back()});
    psf.positions_  = std::move(positions);
    psf.amplitudes_ = std::move(amplitudes);

    // real amplitude: <k> = 0 and dk^2 = int psi'^2 dx
    std::vector<double> d2(n);
    for(std::size_t i = 0; i < n; ++i) {
        const double d = psf.slope(psf.positions_[i]);
        d2[i]          = d * d;
    }
    psf.momentumVariance_ = simpsonSampled(d2, step);
    if(!(psf.momentumVariance_ > 0.0)) throw ValidationError("tabulated PSF: zero momentum variance");
    psf.width_ = 0.5 / std::sqrt(psf.momentumVariance_);
    return psf;
}

double PointSpreadFunction::amplitude(double x) const {
    if(kind_ == Kind::gaussian) {
        const double s2 = width_ * width_;
        return std::exp(-x * x / (4.0 * s2)) / std::sqrt(std::sqrt(2.0 * std::numbers::pi * s2));
    }
    if(x < spline_->lo || x > spline_->hi) return 0.0;
    return spline_->interp(x);
}

double PointSpreadFunction::slope(double x) const {
    if(kind_ == Kind::gaussian) return -x / (2.0 * width_ * width_) * amplitude(x);
    if(x < spline_->lo || x > spline_->hi) return 0.0;
    return spline_->interp.prime(x);
}

std::string_view parameterName(Parameter p) { return p == Parameter::centroid ? "theta1" : "theta2"; }

SceneModel SceneModel::withSeparation(double s) const {
    SceneModel out = *this;
    out.separation = s;
    return out;
}

SceneModel SceneModel::withCentroid(double c) const {
    SceneModel out = *this;
    out.centroid   = c;
    return out;
}

SceneModel SceneModel::withPhotons(double n) const {
    SceneModel out = *this;
    out.epsilon    = n / static_cast<double>(intervals);
    return out;
}

void SceneModel::validate() const {
    if(!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError(fmt::format("epsilon must be positive, got {}", epsilon));
    if(intervals < 1) throw ValidationError(fmt::format("coherence interval count must be >= 1, got {}", intervals));
    if(!(separation >= 0.0) || !std::isfinite(separation)) throw ValidationError(fmt::format("separation must be >= 0, got {}", separation));
    if(!std::isfinite(centroid)) throw ValidationError("centroid must be finite");
}

ModeBasis sceneBasis(const SceneModel &scene, Index dimension, double center) {
    return ModeBasis{scene.psf.width(), center, dimension};
}

RVector sourceCoefficients(const PointSpreadFunction &psf, const ModeBasis &basis, double position, Index count) {
    if(psf.kind() == PointSpreadFunction::Kind::gaussian) return displacedGroundCoefficients(position - basis.center, basis.width, count);

    // <phi_q(. - b) | psi(. - X)> = int phi_q(u + X - b) psi(u) du over the table
    const auto          xs = psf.samplePositions();
    const auto          as = psf.sampleAmplitudes();
    RMatrix             samples(count, static_cast<Index>(xs.size()));
    std::vector<double> buf(static_cast<std::size_t>(count));
    for(std::size_t i = 0; i < xs.size(); ++i) {
        basis.evaluate(xs[i] + position, buf);
        for(Index q = 0; q < count; ++q) samples(q, static_cast<Index>(i)) = buf[static_cast<std::size_t>(q)] * as[i];
    }
    RVector             c(count);
    std::vector<double> row(xs.size());
    for(Index q = 0; q < count; ++q) {
        for(std::size_t i = 0; i < xs.size(); ++i) row[i] = samples(q, static_cast<Index>(i));
        c[q] = simpsonSampled(row, psf.sampleStep());
    }
    return c;
}

namespace {

struct Assembled {
    CMatrix g;
    double  leakage;
};

void checkDimension(Index dimension) {
    if(dimension < 2) throw ValidationError(fmt::format("truncation depth must be >= 2, got {}", dimension));
}

Assembled assemble(const PointSpreadFunction &psf, const ModeBasis &basis, double x1, double x2, const CorrelationOptions &options) {
    const RVector v1    = sourceCoefficients(psf, basis, x1, basis.dimension);
    const RVector v2    = sourceCoefficients(psf, basis, x2, basis.dimension);
    const double  trace = 0.5 * (v1.squaredNorm() + v2.squaredNorm());
    const double  leak  = std::max(0.0, 1.0 - trace);
    if(leak > options.leakageTolerance)
        throw TruncationError(fmt::format("truncation leakage {:.3e} exceeds tolerance {:.1e} at D = {}; increase the truncation depth",
                                          leak, options.leakageTolerance, basis.dimension));
    RMatrix s = 0.5 * (v1 * v1.transpose() + v2 * v2.transpose());
    return {(s / trace).cast<Complex>(), leak};
}

// d g / d X for a source at X in the gaussian basis: dc_q/dX = (sqrt(q) c_{q-1} - sqrt(q+1) c_{q+1}) / (2 w)
RVector coefficientSlope(const RVector &extended, double width, Index dimension) {
    RVector d(dimension);
    for(Index q = 0; q < dimension; ++q) {
        const double lower = q > 0 ? std::sqrt(static_cast<double>(q)) * extended[q - 1] : 0.0;
        const double upper = std::sqrt(static_cast<double>(q + 1)) * extended[q + 1];
        d[q]               = (lower - upper) / (2.0 * width);
    }
    return d;
}

CMatrix analyticDerivative(const SceneModel &scene, const ModeBasis &basis, Parameter parameter) {
    const Index   D  = basis.dimension;
    const RVector e1 = displacedGroundCoefficients(scene.firstSource() - basis.center, basis.width, D + 1);
    const RVector e2 = displacedGroundCoefficients(scene.secondSource() - basis.center, basis.width, D + 1);
    const RVector v1 = e1.head(D);
    const RVector v2 = e2.head(D);
    RVector       d1 = coefficientSlope(e1, basis.width, D);
    RVector       d2 = coefficientSlope(e2, basis.width, D);
    if(parameter == Parameter::separation) {
        d1 *= -0.5;
        d2 *= 0.5;
    }
    const RMatrix s      = 0.5 * (v1 * v1.transpose() + v2 * v2.transpose());
    const RMatrix ds     = 0.5 * (d1 * v1.transpose() + v1 * d1.transpose() + d2 * v2.transpose() + v2 * d2.transpose());
    const double  trace  = 0.5 * (v1.squaredNorm() + v2.squaredNorm());
    const double  dtrace = v1.dot(d1) + v2.dot(d2);
    const RMatrix dg     = ds / trace - s * (dtrace / (trace * trace));
    return dg.cast<Complex>();
}

} // namespace

CorrelationMatrix buildCorrelation(const SceneModel &scene, Index dimension, double basisCenter, const CorrelationOptions &options) {
    checkDimension(dimension);
    scene.validate();
    const ModeBasis basis = sceneBasis(scene, dimension, basisCenter);
    auto [g, leak]        = assemble(scene.psf, basis, scene.firstSource(), scene.secondSource(), options);
    return CorrelationMatrix{std::move(g), leak, basis};
}

CorrelationDerivatives buildDerivatives(const SceneModel &scene, Index dimension, double basisCenter, const DerivativeSpec &spec,
                                        const CorrelationOptions &options) {
    checkDimension(dimension);
    scene.validate();
    if(spec.step && !(*spec.step > 0.0)) throw ValidationError(fmt::format("finite-difference step must be positive, got {}", *spec.step));
    if(spec.method == DerivativeMethod::analytic && scene.psf.kind() != PointSpreadFunction::Kind::gaussian)
        throw UnsupportedError("analytic derivatives need a gaussian PSF; use the central-difference method for tabulated PSFs");

    const ModeBasis        basis = sceneBasis(scene, dimension, basisCenter);
    CorrelationDerivatives out;
    out.parameters = spec.parameters;
    out.method     = spec.method;
    out.step       = spec.step.value_or(1e-5 * scene.psf.width());

    for(Parameter p : spec.parameters) {
        if(spec.method == DerivativeMethod::analytic) {
            out.perParameter.push_back(analyticDerivative(scene, basis, p));
            continue;
        }
        const double h  = out.step;
        // the separation may step below zero; g is even in it, so no clamping
        const double dx1 = p == Parameter::centroid ? h : -0.5 * h;
        const double dx2 = p == Parameter::centroid ? h : 0.5 * h;
        const auto   fwd = assemble(scene.psf, basis, scene.firstSource() + dx1, scene.secondSource() + dx2, options);
        const auto   bwd = assemble(scene.psf, basis, scene.firstSource() - dx1, scene.secondSource() - dx2, options);
        out.perParameter.push_back((fwd.g - bwd.g) / (2.0 * h));
    }
    return out;
}

double intensity(const SceneModel &scene, double x) {
    const double a1 = scene.psf.amplitude(x - scene.firstSource());
    const double a2 = scene.psf.amplitude(x - scene.secondSource());
    return scene.photons() * 0.5 * (a1 * a1 + a2 * a2);
}

} // namespace rayleigh
