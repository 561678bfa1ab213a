#pragma once

#include "rayleigh/hermite.hpp"
#include "rayleigh/linalg.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace rayleigh {

/// Real amplitude point-spread function psi(x), square-normalized.
///
/// The gaussian kind is psi(x) = (2 pi sigma^2)^(-1/4) exp(-x^2 / (4 sigma^2)),
/// whose intensity |psi|^2 has standard deviation sigma and whose momentum
/// variance is 1 / (4 sigma^2). The tabulated kind is sampled on a uniform
/// grid with an odd number of points and interpolated with a cubic B-spline;
/// it vanishes outside the table.
class PointSpreadFunction {
public:
    enum class Kind { gaussian, tabulated };

    static PointSpreadFunction gaussian(double sigma);

    /// Throws ValidationError when the grid is not uniform, has an even
    /// number of points, or (unless `normalize`) is not unit-normalized
    /// within 1e-9.
    static PointSpreadFunction tabulated(std::vector<double> positions, std::vector<double> amplitudes,
                                         bool normalize = false);

    Kind kind() const { return kind_; }

    /// Width of the matching Hermite-Gaussian basis: sigma for the gaussian
    /// kind, 1 / (2 dk) for tabulated data.
    double width() const { return width_; }
    double momentumVariance() const { return momentumVariance_; }

    double amplitude(double x) const;
    double slope(double x) const;

    std::span<const double> samplePositions() const { return positions_; }
    std::span<const double> sampleAmplitudes() const { return amplitudes_; }
    double                  sampleStep() const { return step_; }

private:
    struct Spline;

    Kind                          kind_  = Kind::gaussian;
    double                        width_ = 1.0;
    double                        momentumVariance_ = 0.25;
    std::vector<double>           positions_;
    std::vector<double>           amplitudes_;
    double                        step_ = 0.0;
    std::shared_ptr<const Spline> spline_;
};

enum class Parameter { centroid, separation };

std::string_view parameterName(Parameter p);

/// Two equal-strength incoherent point sources at centroid -/+ separation / 2.
struct SceneModel {
    PointSpreadFunction psf        = PointSpreadFunction::gaussian(1.0);
    double              centroid   = 0.0;
    double              separation = 0.0;
    double              epsilon    = 1e-3;       // mean quanta per coherence interval
    std::int64_t        intervals  = 10'000'000; // coherence intervals M

    double photons() const { return epsilon * static_cast<double>(intervals); }
    double firstSource() const { return centroid - 0.5 * separation; }
    double secondSource() const { return centroid + 0.5 * separation; }

    SceneModel withSeparation(double s) const;
    SceneModel withCentroid(double c) const;
    /// Rescales epsilon so that epsilon * intervals == n.
    SceneModel withPhotons(double n) const;

    void validate() const;
};

/// Basis matched to the scene's PSF with the given depth and center.
ModeBasis sceneBasis(const SceneModel &scene, Index dimension, double center);

/// Coefficients <phi_q | psi(. - position)> in `basis`, q = 0..count-1.
RVector sourceCoefficients(const PointSpreadFunction &psf, const ModeBasis &basis, double position, Index count);

struct CorrelationOptions {
    double leakageTolerance = 1e-6;
};

struct CorrelationMatrix {
    CMatrix   entries;
    double    leakage = 0.0; // trace mass lost to truncation, before renormalization
    ModeBasis basis;

    Index dimension() const { return entries.rows(); }
};

enum class DerivativeMethod { analytic, centralDifference };

struct DerivativeSpec {
    DerivativeMethod       method = DerivativeMethod::analytic;
    std::optional<double>  step;  // default 1e-5 PSF widths
    std::vector<Parameter> parameters{Parameter::separation};
};

struct CorrelationDerivatives {
    std::vector<Parameter> parameters;
    std::vector<CMatrix>   perParameter;
    DerivativeMethod       method = DerivativeMethod::analytic;
    double                 step   = 0.0;

    std::size_t size() const { return perParameter.size(); }
};

/// g = (v1 v1^T + v2 v2^T) / 2 renormalized to unit trace, v_i the
/// coefficients of psi(x - X_i). Throws TruncationError when the lost trace
/// mass exceeds the tolerance.
CorrelationMatrix buildCorrelation(const SceneModel &scene, Index dimension, double basisCenter,
                                   const CorrelationOptions &options = {});

CorrelationDerivatives buildDerivatives(const SceneModel &scene, Index dimension, double basisCenter,
                                        const DerivativeSpec &spec = {}, const CorrelationOptions &options = {});

/// Direct-imaging intensity N g(x, x).
double intensity(const SceneModel &scene, double x);

} // namespace rayleigh
