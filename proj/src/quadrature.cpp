#include "rayleigh/quadrature.hpp"

#include "rayleigh/errors.hpp"

#include <algorithm>
#include <numbers>

namespace rayleigh {

QuadratureRule gaussHermite(int n) {
    if(n < 1) throw ValidationError("gaussHermite: need at least one node");
    constexpr double tolerance = 1e-14;
    constexpr int    maxIter   = 100;
    const double     pim4      = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));

    std::vector<double> x(n), w(n);
    const int           m = (n + 1) / 2;
    double              z = 0.0;
    for(int i = 0; i < m; ++i) {
        // initial guesses for the largest roots, then extrapolate inward
        if(i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if(i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if(i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if(i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[i - 2];

        double pp   = 0.0;
        bool   done = false;
        for(int it = 0; it < maxIter; ++it) {
            double p1 = pim4, p2 = 0.0;
            for(int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2              = p1;
                p1              = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp              = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z               = z1 - p1 / pp;
            if(std::abs(z - z1) <= tolerance * std::max(1.0, std::abs(z))) {
                done = true;
                break;
            }
        }
        if(!done) throw QuadratureError("gaussHermite: Newton iteration did not converge");
        x[i]         = z;
        x[n - 1 - i] = -z;
        w[i]         = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    QuadratureRule rule;
    rule.nodes.assign(x.rbegin(), x.rend());
    rule.weights.assign(w.rbegin(), w.rend());
    return rule;
}

double simpsonSampled(std::span<const double> values, double step) {
    const std::size_t n = values.size();
    if(n < 3 || n % 2 == 0) throw ValidationError("simpsonSampled: need an odd number (>= 3) of samples");
    double s = values.front() + values.back();
    for(std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * values[i];
    return s * step / 3.0;
}

} // namespace rayleigh
