#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace rayleigh {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Hermite rule for the weight exp(-t^2). Exact for
/// polynomials of degree up to 2n-1.
QuadratureRule gaussHermite(int n);

/// Composite Simpson on uniformly spaced samples; needs an odd sample count.
double simpsonSampled(std::span<const double> values, double step);

/// Composite 10-point Gauss-Legendre over [a, b] split into `panels` pieces.
template<class F>
double gaussLegendre(F &&f, double a, double b, int panels) {
    using Rule      = boost::math::quadrature::gauss<double, 10>;
    const double h  = (b - a) / panels;
    double       s  = 0.0;
    const auto  &xs = Rule::abscissa();
    const auto  &ws = Rule::weights();
    for(int k = 0; k < panels; ++k) {
        const double mid  = a + (k + 0.5) * h;
        const double half = 0.5 * h;
        // boost stores the non-negative half of the symmetric rule
        for(std::size_t i = 0; i < xs.size(); ++i) {
            if(xs[i] == 0.0) {
                s += ws[i] * half * f(mid);
            } else {
                s += ws[i] * half * (f(mid - half * xs[i]) + f(mid + half * xs[i]));
            }
        }
    }
    return s;
}

struct RefinedIntegral {
    double value     = 0.0;
    int    levels    = 0;
    bool   converged = false;
};

/// Composite Simpson with successive interval halving, stopping once two
/// consecutive levels agree to `relativeTolerance`.
template<class F>
RefinedIntegral refineSimpson(F &&f, double a, double b, double relativeTolerance, int maxLevels,
                              int initialPanels = 64) {
    int    n  = initialPanels % 2 == 0 ? initialPanels : initialPanels + 1;
    double h  = (b - a) / n;
    // endpoint, odd and even interior sums; halving only adds new odd points
    double ends = f(a) + f(b);
    double odd  = 0.0;
    double even = 0.0;
    for(int i = 1; i < n; ++i) (i % 2 ? odd : even) += f(a + i * h);
    double previous = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    RefinedIntegral out;
    out.value = previous;
    for(int level = 1; level <= maxLevels; ++level) {
        even += odd;
        odd = 0.0;
        n *= 2;
        h *= 0.5;
        for(int i = 1; i < n; i += 2) odd += f(a + i * h);
        const double current = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        out.value            = current;
        out.levels           = level;
        if(std::abs(current - previous) <= relativeTolerance * std::abs(current)) {
            out.converged = true;
            return out;
        }
        previous = current;
    }
    return out;
}

} // namespace rayleigh
