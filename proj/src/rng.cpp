#include "nafe/rng.hpp"

#include <cmath>
#include <numbers>

namespace nafe::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

Counter philox4x32_10(Counter c, Key k) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(mix64(seed ^ mix64(a + 1)) + b);
}

CounterRng::CounterRng(std::uint64_t seed, Stream stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_(static_cast<std::uint32_t>(stream)) {}

Counter CounterRng::counter(std::uint64_t i, std::uint32_t t) const noexcept {
    return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), t, stream_};
}

std::uint64_t CounterRng::bits(std::uint64_t i, std::uint32_t t) const noexcept {
    Counter out = philox4x32_10(counter(i, t), key_);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double CounterRng::uniform(std::uint64_t i, std::uint32_t t) const noexcept {
    return to_open_unit(bits(i, t));
}

double CounterRng::normal(std::uint64_t i, std::uint32_t t) const noexcept {
    Counter out = philox4x32_10(counter(i, t), key_);
    double u1 = to_open_unit((static_cast<std::uint64_t>(out[1]) << 32) | out[0]);
    double u2 = to_open_unit((static_cast<std::uint64_t>(out[3]) << 32) | out[2]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t bound, std::uint64_t i, std::uint32_t t) const noexcept {
    // Multiply-high reduction; bias is below 2^-64 * bound.
    unsigned __int128 p = static_cast<unsigned __int128>(bits(i, t)) * bound;
    return static_cast<std::uint64_t>(p >> 64);
}

}  // namespace nafe::rng
