#pragma once

#include "rayleigh/linalg.hpp"

#include <span>

namespace rayleigh {

/// Truncated Hermite-Gaussian mode basis. Mode q is
///   phi_q(x) = (2 pi w^2)^(-1/4) (2^q q!)^(-1/2) H_q(u / (sqrt(2) w)) exp(-u^2 / (4 w^2)),
/// with u = x - center and w = width, so |phi_0|^2 is a normal density of
/// standard deviation w.
struct ModeBasis {
    double width     = 1.0;
    double center    = 0.0;
    Index  dimension = 40;

    /// Values of phi_0..phi_{n-1} at x, n = out.size().
    void evaluate(double x, std::span<double> out) const;
    RVector evaluate(double x) const;

    bool sameAs(const ModeBasis &other) const {
        return width == other.width && center == other.center && dimension == other.dimension;
    }
};

/// Normalized Hermite functions h_q(xi) = (2^q q! sqrt(pi))^(-1/2) H_q(xi) exp(-xi^2/2)
/// via the stable three-term recurrence.
void hermiteFunctions(double xi, std::span<double> out);

/// Expansion coefficients <phi_q | phi_0(. - shift)> for q = 0..count-1 in
/// closed form: exp(-a^2/2) a^q / sqrt(q!) with a = shift / (2 width).
RVector displacedGroundCoefficients(double shift, double width, Index count);

} // namespace rayleigh
