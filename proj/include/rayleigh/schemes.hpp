#pragma once

#include "rayleigh/hermite.hpp"
#include "rayleigh/linalg.hpp"
#include "rayleigh/scene.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rayleigh {

/// Pixel boundaries on the image line, strictly increasing.
struct PixelGrid {
    std::vector<double> edges;

    /// Pixels of width `width` tiling [center - extent, center + extent].
    static PixelGrid uniform(double width, double extent, double center = 0.0);
    static PixelGrid fromEdges(std::vector<double> edges);

    std::size_t size() const { return edges.empty() ? 0 : edges.size() - 1; }
    double      lower() const { return edges.front(); }
    double      upper() const { return edges.back(); }
};

/// Finite family of projection measures in a truncated mode basis. The
/// element at `residualIndex` is the completeness bucket I - sum(others),
/// present for every kind (possibly zero).
struct MeasurementScheme {
    enum class Kind { directImaging, hgSpade, binarySpade, customUnitary };

    Kind                     kind = Kind::hgSpade;
    ModeBasis                basis;
    std::vector<CMatrix>     elements;
    std::size_t              residualIndex = 0;
    std::vector<std::string> labels;

    std::optional<PixelGrid> pixels;
    Index                    modes  = 0;
    double                   offset = 0.0; // SPADE misalignment d
    CMatrix                  unitary;

    std::size_t outcomeCount() const { return elements.size() - 1; }
};

std::string kindName(MeasurementScheme::Kind kind);

MeasurementScheme makeDirectImaging(const PixelGrid &grid, const ModeBasis &basis);

/// Projectors onto phi_q(. - d) for q < qMax, re-expanded in `basis`.
MeasurementScheme makeHgSpade(Index qMax, double offset, const ModeBasis &basis);

/// {phi_0(. - d) projector, its complement}; the complement is the residual.
MeasurementScheme makeBinarySpade(double offset, const ModeBasis &basis);

MeasurementScheme makeCustomUnitary(const CMatrix &unitary, const ModeBasis &basis);

/// D rows of 2D comma-separated reals (re, im interleaved). Lines starting
/// with '#' are skipped.
CMatrix loadUnitaryCsv(const std::filesystem::path &path);

/// Overlaps <phi_m | phi_q(. - d)> for m < basis.dimension, q < count,
/// by Gauss-Hermite quadrature (exact up to rounding).
RMatrix displacedModeOverlaps(const ModeBasis &basis, double offset, Index count);

struct ProbabilityVector {
    std::vector<Parameter>   parameters;
    RVector                  values;       // non-residual outcomes, scheme order
    std::vector<RVector>     derivatives;  // per parameter, aligned with values
    double                   residualMass = 0.0;
    RVector                  residualDerivatives; // per parameter
    std::vector<std::string> warnings;

    /// values followed by the residual bucket
    RVector allValues() const;
    RVector allDerivatives(std::size_t parameter) const;
};

ProbabilityVector probabilities(const MeasurementScheme &scheme, const CorrelationMatrix &g, const CorrelationDerivatives &dg);
ProbabilityVector probabilities(const MeasurementScheme &scheme, const CorrelationMatrix &g);

} // namespace rayleigh
