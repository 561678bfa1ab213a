#pragma once

#include "rayleigh/linalg.hpp"
#include "rayleigh/scene.hpp"
#include "rayleigh/schemes.hpp"

#include <optional>

namespace rayleigh {

struct FisherOptions {
    double probabilityFloor = 1e-15;
    double derivativeFloor  = 1e-12;
};

struct ClassicalFisher {
    RMatrix matrix;
    int     flaggedTerms        = 0; // p below floor with a non-negligible slope
    int     negligibleTerms     = 0; // p and slope both below floor
    double  smallestProbability = 1.0;
};

/// J_{mu nu} = N sum_j (dp_j/dmu)(dp_j/dnu) / p_j over every outcome
/// including the residual bucket. Outcomes whose probability is below the
/// floor are never divided by: they are dropped as negligible when their
/// slopes are also below the derivative floor, otherwise dropped and
/// counted in `flaggedTerms` (the information is ill-conditioned there).
ClassicalFisher classicalFisher(const ProbabilityVector &p, double photons, const FisherOptions &options = {});

struct SldOptions {
    double rankFloor        = 1e-14; // eigenvalues of g below this are zero
    double pairFloor        = 1e-12; // relative to tr g
    double supportTolerance = 1e-8;
};

struct SldSolution {
    CMatrix sld;
    int     droppedPairs = 0;
};

/// Solves dg = (L g + g L) / 2 in the eigenbasis of g, zeroing L on
/// eigenpairs with lambda_a + lambda_b below the floor. Throws
/// SupportViolation if dg has weight there.
SldSolution sldSolve(const CMatrix &g, const CMatrix &dg, const SldOptions &options = {});

struct HelstromFisher {
    RMatrix matrix;
    int     droppedPairs = 0;
};

/// K_{mu nu} = N Re tr(L_mu L_nu g), symmetrized.
HelstromFisher helstromFisher(const CorrelationMatrix &g, const CorrelationDerivatives &dg, double photons,
                              const SldOptions &options = {});

struct DirectQuadrature {
    double halfWidth         = 12.0; // in PSF widths, around the centroid
    double relativeTolerance = 1e-8;
    int    maxLevels         = 20;
};

/// Separation information of ideal (continuous) direct imaging,
/// N int (dI/dtheta2)^2 / I dx with I the normalized intensity.
double continuumDirectFisher(const SceneModel &scene, const DirectQuadrature &quadrature = {});

/// Matrix inverse; throws SingularMatrixError when the condition number
/// reaches `maxCondition`.
RMatrix crb(const RMatrix &information, double maxCondition = 1e12);

/// 1 / J for a single-parameter problem; throws on J <= 0.
double crbScalar(double information);

struct InformationResult {
    RMatrix                J;
    RMatrix                K;
    std::optional<RMatrix> crbJ;
    std::optional<RMatrix> crbK;

    int    droppedPairs        = 0;
    int    flaggedTerms        = 0;
    double smallestProbability = 1.0;
    double leakage             = 0.0;

    /// Largest eigenvalue of J - K relative to the norm of K.
    double dominanceExcess() const;
};

struct AnalysisOptions {
    DerivativeSpec     derivatives;
    CorrelationOptions correlation;
    FisherOptions      fisher;
    SldOptions         sld;
};

/// J and K of `scheme` at the scene's parameters. g is built in the
/// scheme's own mode basis.
InformationResult analyze(const MeasurementScheme &scheme, const SceneModel &scene, const AnalysisOptions &options = {});

} // namespace rayleigh
