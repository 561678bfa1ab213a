#include "rayleigh/random.hpp"

#include <cmath>

namespace rayleigh {

namespace {

constexpr std::uint32_t kMul0   = 0xD2511F53u;
constexpr std::uint32_t kMul1   = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0  = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1  = 0xBB67AE85u;
constexpr int           kRounds = 10;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t &hi, std::uint32_t &lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi                    = static_cast<std::uint32_t>(p >> 32);
    lo                    = static_cast<std::uint32_t>(p);
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for(int r = 0; r < kRounds; ++r) {
        if(r > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, stream, static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32)} {}

std::uint64_t CounterStream::next() {
    if(available_ == 0) {
        const auto block = philox4x32(counter_, key_);
        ++counter_[0];
        buffer_[0]  = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
        buffer_[1]  = (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
        available_  = 2;
    }
    return buffer_[static_cast<std::size_t>(2 - available_--)];
}

double CounterStream::uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

std::int64_t samplePoisson(double mean, CounterStream &rng) {
    if(!(mean > 0.0)) return 0;
    if(mean < 10.0) {
        const double u = rng.uniform();
        double       p = std::exp(-mean);
        double       c = p;
        std::int64_t k = 0;
        // the cap only matters when rounding leaves c just short of u
        while(u > c && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            c += p;
        }
        return k;
    }

    const double smu      = std::sqrt(mean);
    const double b        = 0.931 + 2.53 * smu;
    const double a        = -0.059 + 0.02483 * b;
    const double invAlpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr       = 0.9277 - 3.6224 / (b - 2.0);
    const double logMean  = std::log(mean);
    for(;;) {
        const double u  = rng.uniform() - 0.5;
        const double v  = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const auto   k  = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
        if(us >= 0.07 && v <= vr) return k;
        if(k < 0 || (us < 0.013 && v > us)) continue;
        const double lhs = std::log(v) + std::log(invAlpha) - std::log(a / (us * us) + b);
        const double rhs = -mean + static_cast<double>(k) * logMean - std::lgamma(static_cast<double>(k) + 1.0);
        if(lhs <= rhs) return k;
    }
}

} // namespace rayleigh
