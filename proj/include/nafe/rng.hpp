#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace nafe::rng {

/// Name and version of the generator. Bump the version whenever the mapping
/// from (seed, stream, counter) to variates changes.
inline constexpr std::string_view kGeneratorName = "philox4x32-10/v1";

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
Counter philox4x32_10(Counter ctr, Key key) noexcept;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Child seed for replicate `b` of cell `a`: mix64(mix64(seed ^ mix64(a + 1)) + b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept;

enum class Stream : std::uint32_t {
    Rank = 1,           // U_i
    Regressor = 2,      // Z_it
    Idiosyncratic = 3,  // V_it
    Resample = 4,       // bootstrap unit draws
    Probe = 5,
};

/// Counter-based generator: every variate is a pure function of
/// (seed, stream, i, t), so draws can be produced in any order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream) noexcept;

    std::uint64_t bits(std::uint64_t i, std::uint32_t t) const noexcept;
    /// Uniform on the open interval (0,1).
    double uniform(std::uint64_t i, std::uint32_t t) const noexcept;
    /// Standard normal via Box-Muller on the two 64-bit halves of one block.
    double normal(std::uint64_t i, std::uint32_t t) const noexcept;
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound, std::uint64_t i, std::uint32_t t) const noexcept;

private:
    Counter counter(std::uint64_t i, std::uint32_t t) const noexcept;

    Key key_;
    std::uint32_t stream_;
};

}  // namespace nafe::rng
