// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "catch_amalgamated.hpp"

#include "atr/detection.hpp"
#include "atr/errors.hpp"
#include "atr/random.hpp"

#include <cmath>
#include <limits>

using namespace atr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

// Defining form, evaluated in extended precision.
double distance_oracle(double h, double h0)
{
    const long double a = h, b = h0;
    const long double s = a * a + b * b;
    if (s == 0.0L)
        return 0.0;
    return static_cast<double>(1.0L - 2.0L * std::sqrt(a * a * b * b) / s);
}

std::vector<double> random_magnitudes(rng::stream &rs, std::size_t n)
{
    std::vector<double> v(n);
    for (auto &x : v)
        x = std::abs(rs.complex_normal());
    return v;
}

} // namespace

TEST_CASE("Channel distance - hand values")
{
    CHECK(channel_distance(1.0, 1.0) == 0.0);
    CHECK(channel_distance(0.0, 0.0) == 0.0);
    CHECK(channel_distance(1.0, 0.0) == 1.0);
    CHECK(channel_distance(0.0, 2.5) == 1.0);
    CHECK_THAT(channel_distance(1.0, 2.0), WithinAbs(1.0 - 4.0 / 5.0, 1e-15));
    CHECK_THAT(channel_distance(3.0, 1.0), WithinAbs(1.0 - 6.0 / 10.0, 1e-15));
    // extreme magnitudes neither overflow nor underflow
    CHECK_THAT(channel_distance(1e300, 2e300), WithinAbs(0.2, 1e-15));
    CHECK_THAT(channel_distance(1e-300, 2e-300), WithinAbs(0.2, 1e-15));
}

TEST_CASE("Channel distance - properties on random magnitudes")
{
    rng::stream rs(2024);
    for (int i = 0; i < 10000; ++i)
    {
        const double h = std::abs(rs.complex_normal()) * std::exp(4.0 * rs.normal());
        const double h0 = std::abs(rs.complex_normal()) * std::exp(4.0 * rs.normal());
        const double c = std::exp(6.0 * rs.normal());
        const double d = channel_distance(h, h0);

        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0);
        REQUIRE(d == channel_distance(h0, h));
        REQUIRE_THAT(channel_distance(c * h, c * h0), WithinAbs(d, 1e-12));
        REQUIRE_THAT(d, WithinAbs(distance_oracle(h, h0), 1e-12));
        REQUIRE(channel_distance(h, h) == 0.0);
        if (h != h0)
            REQUIRE(d > 0.0);
    }
}

TEST_CASE("Channel distance - vector form")
{
    const std::vector<double> a{1.0, 2.0, 0.0};
    const std::vector<double> b{1.0, 1.0, 3.0};
    const auto d = channel_distance(a, b);
    CHECK(d[0] == 0.0);
    CHECK_THAT(d[1], WithinAbs(0.2, 1e-15));
    CHECK(d[2] == 1.0);

    CHECK_THROWS_AS(channel_distance(a, std::vector<double>{1.0}), argument_error);
    CHECK_THROWS_AS(channel_distance(std::vector<double>{-1.0}, std::vector<double>{1.0}), argument_error);
    CHECK_THROWS_AS(channel_distance(std::vector<double>{std::numeric_limits<double>::infinity()}, std::vector<double>{1.0}),
                    argument_error);
    CHECK_THROWS_AS(channel_distance(std::vector<double>{std::nan("")}, std::vector<double>{1.0}), argument_error);
}

TEST_CASE("MND - double-loop oracle with and without mask")
{
    rng::stream rs(77);
    for (int trial = 0; trial < 1000; ++trial)
    {
        const std::size_t n = 1 + static_cast<std::size_t>(rs.uniform() * 600);
        const auto h = random_magnitudes(rs, n);
        const auto h0 = random_magnitudes(rs, n);

        selection_mask m;
        m.keep.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            m.keep[k] = rs.uniform() < 0.7;
        m.keep[static_cast<std::size_t>(rs.uniform() * n)] = true;

        long double all = 0.0L, kept = 0.0L;
        std::size_t nk = 0;
        for (std::size_t k = 0; k < n; ++k)
        {
            const double d = distance_oracle(h[k], h0[k]);
            all += d;
            if (m.keep[k])
            {
                kept += d;
                ++nk;
            }
        }
        const double expect_all = static_cast<double>(all / static_cast<long double>(n));
        const double expect_kept = static_cast<double>(kept / static_cast<long double>(nk));
        REQUIRE_THAT(mnd(h, h0), WithinRel(expect_all, 1e-12) || WithinAbs(expect_all, 1e-15));
        REQUIRE_THAT(mnd(h, h0, &m), WithinRel(expect_kept, 1e-12) || WithinAbs(expect_kept, 1e-15));
    }
}

TEST_CASE("MND - errors")
{
    const std::vector<double> a{1.0, 2.0};
    selection_mask none;
    none.keep = {false, false};
    CHECK_THROWS_AS(mnd(a, a, &none), degenerate_input_error);
    CHECK_THROWS_AS(mnd(std::vector<double>{}, std::vector<double>{}), degenerate_input_error);
    selection_mask wrong;
    wrong.keep = {true};
    CHECK_THROWS_AS(mnd(a, a, &wrong), argument_error);
    CHECK(mnd(a, a) == 0.0);
}

TEST_CASE("Spectrum selection - drop count and ordering")
{
    rng::stream rs(3);
    for (std::size_t n : {1u, 2u, 10u, 165u, 333u, 500u})
    {
        std::vector<double> alpha(n);
        for (auto &a : alpha)
            a = rs.uniform();
        const auto m = build_mask(alpha, 0.3);
        const auto drop = static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(n)));
        REQUIRE(m.size() == n);
        CHECK(m.kept() == n - drop);
        double max_kept = -1.0, min_dropped = 2.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            if (m.keep[k])
                max_kept = std::max(max_kept, alpha[k]);
            else
                min_dropped = std::min(min_dropped, alpha[k]);
        }
        if (drop > 0)
            CHECK(max_kept <= min_dropped);
    }
    CHECK(build_mask(std::vector<double>(500, 0.0), 0.3).kept() == 350);
    CHECK(build_mask(std::vector<double>(500, 0.0), 0.0).kept() == 500);
    CHECK_THROWS_AS(build_mask(std::vector<double>(5, 0.0), 1.0), argument_error);
    CHECK_THROWS_AS(build_mask(std::vector<double>(5, 0.0), -0.1), argument_error);
    CHECK_THROWS_AS(build_mask(std::vector<double>{std::nan("")}, 0.3), argument_error);
}

TEST_CASE("Spectrum selection - deterministic tie-break")
{
    // all equal: the highest indices go first
    const auto m = build_mask(std::vector<double>(10, 0.5), 0.3);
    CHECK(m.keep == std::vector<bool>{true, true, true, true, true, true, true, false, false, false});

    // ties straddling the cut: among the 0.8 entries the higher index is dropped
    const std::vector<double> alpha{0.9, 0.8, 0.1, 0.8, 0.2, 0.8, 0.3, 0.1, 0.2, 0.3};
    const auto t = build_mask(alpha, 0.3);
    CHECK(t.keep == std::vector<bool>{false, true, true, false, true, false, true, true, true, true});
}

TEST_CASE("Spectrum selection - alpha dominates every provisioning distance")
{
    rng::stream rs(12);
    reference_response ref{random_magnitudes(rs, 64), 0.0};
    std::vector<response> prov;
    for (int i = 0; i < 30; ++i)
    {
        auto v = ref.values;
        for (auto &x : v)
            x *= 1.0 + 0.05 * rs.normal() * rs.normal();
        for (auto &x : v)
            x = std::abs(x);
        prov.push_back({v, frontend::vna, static_cast<double>(i)});
    }
    const auto alpha = alpha_profile(ref, prov);
    for (const auto &r : prov)
    {
        const auto d = channel_distance(r.values, ref.values);
        for (std::size_t k = 0; k < d.size(); ++k)
            CHECK(alpha[k] >= d[k]);
    }
    // and equals the maximum of them
    for (std::size_t k = 0; k < alpha.size(); ++k)
    {
        double mx = 0.0;
        for (const auto &r : prov)
            mx = std::max(mx, channel_distance(r.values[k], ref.values[k]));
        CHECK(alpha[k] == mx);
    }
    CHECK_THROWS_AS(alpha_profile(ref, std::vector<response>{}), argument_error);
}
