#include "rayleigh/hermite.hpp"

#include <cmath>
#include <numbers>

namespace rayleigh {

void hermiteFunctions(double xi, std::span<double> out) {
    if(out.empty()) return;
    out[0] = std::exp(-0.5 * xi * xi) / std::sqrt(std::sqrt(std::numbers::pi));
    if(out.size() == 1) return;
    out[1] = std::numbers::sqrt2 * xi * out[0];
    for(std::size_t q = 1; q + 1 < out.size(); ++q) {
        const double qd = static_cast<double>(q);
        out[q + 1]      = std::sqrt(2.0 / (qd + 1.0)) * xi * out[q] - std::sqrt(qd / (qd + 1.0)) * out[q - 1];
    }
}

void ModeBasis::evaluate(double x, std::span<double> out) const {
    const double scale = std::numbers::sqrt2 * width;
    hermiteFunctions((x - center) / scale, out);
    const double norm = 1.0 / std::sqrt(scale);
    for(auto &v : out) v *= norm;
}

RVector ModeBasis::evaluate(double x) const {
    RVector out(dimension);
    evaluate(x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

RVector displacedGroundCoefficients(double shift, double width, Index count) {
    RVector      c(count);
    const double a = shift / (2.0 * width);
    if(count == 0) return c;
    c[0] = std::exp(-0.5 * a * a);
    for(Index q = 1; q < count; ++q) c[q] = c[q - 1] * a / std::sqrt(static_cast<double>(q));
    return c;
}

} // namespace rayleigh
