#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function of
// (key, counter), so per-path substreams are independent of thread scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sigexec {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// 53-bit uniform in [0,1) from two 32-bit words.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

/// Random stream of one simulated path: draws are addressed by (index, purpose).
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)), path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

    /// Two independent uniforms in [0,1) for draw `index` of stream `purpose`.
    std::array<double, 2> uniforms(std::uint32_t index, std::uint32_t purpose) const {
        const auto out = Philox4x32::block({index, purpose, path_lo_, path_hi_}, key_);
        return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
    }

    /// Standard normal via Box-Muller on stream `purpose`.
    double normal(std::uint32_t index, std::uint32_t purpose) const {
        const auto u = uniforms(index, purpose);
        const double radius = std::sqrt(-2.0 * std::log(1.0 - u[0]));
        return radius * std::cos(2.0 * std::numbers::pi * u[1]);
    }

private:
    Philox4x32::Key key_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
};

} // namespace sigexec
