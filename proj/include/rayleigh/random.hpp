#pragma once

#include <array>
#include <cstdint>

namespace rayleigh {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The key is the 64-bit seed; the counter
/// holds (block, stream, substream lo, substream hi), so every
/// (seed, stream, substream) triple addresses an independent sequence that
/// does not depend on evaluation order.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t substream);

    std::uint64_t next();

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform();

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint64_t, 2> buffer_{};
    int                          available_ = 0;
};

/// Poisson variate. Pinned algorithm: mean <= 0 gives 0; mean < 10 uses
/// sequential inversion of the CDF with one uniform; otherwise Hormann's
/// PTRS transformed rejection (two uniforms per attempt).
std::int64_t samplePoisson(double mean, CounterStream &rng);

} // namespace rayleigh
