// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Counter-based random helpers. Every random quantity in the simulator is a
// pure function of a small key (seed, stream, index), so results do not depend
// on evaluation order or on the standard library's distribution internals.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace atr::rng
{

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept
{
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

template <typename... Rest>
constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b, Rest... rest) noexcept
{
    return mix(mix(a, b), static_cast<std::uint64_t>(rest)...);
}

// Uniform in (0, 1), never exactly 0 or 1.
constexpr double to_unit(std::uint64_t bits) noexcept
{
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Small sequential generator on top of splitmix64. Deterministic across
// platforms, cheap to construct per acquisition.
class stream
{
public:
    explicit constexpr stream(std::uint64_t key) noexcept : state_(key) {}

    constexpr std::uint64_t next() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() noexcept { return to_unit(next()); }

    // Box-Muller, both outputs used.
    double normal() noexcept
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    // Circularly symmetric complex Gaussian with E|z|^2 = 1.
    std::complex<double> complex_normal() noexcept
    {
        const double re = normal();
        const double im = normal();
        return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace atr::rng
