// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "catch_amalgamated.hpp"

#include "atr/channel_model.hpp"
#include "atr/errors.hpp"
#include "atr/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

using namespace atr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

constexpr double pi = std::numbers::pi;

tap_set make_taps(std::vector<double> delays, cvec gains, std::uint64_t seed = 7)
{
    tap_set t;
    t.delays = std::move(delays);
    t.gains = std::move(gains);
    t.seed = seed;
    return t;
}

// Direct evaluation of sum g exp(-j 2 pi f d), one std::exp per term.
cvec naive_response(const tap_set &taps, const std::vector<double> &f)
{
    cvec h(f.size());
    for (std::size_t k = 0; k < f.size(); ++k)
        for (std::size_t n = 0; n < taps.size(); ++n)
            h[k] += taps.gains[n] * std::exp(std::complex<double>(0.0, -2.0 * pi * f[k] * taps.delays[n]));
    return h;
}

// |x[n]|^2 with x[n] = N^-1/2 sum_k H[k] exp(+j 2 pi k n / N), evaluated term by term.
std::vector<double> naive_pdp(const cvec &h)
{
    const std::size_t n = h.size();
    std::vector<double> p(n);
    for (std::size_t t = 0; t < n; ++t)
    {
        std::complex<long double> acc = 0.0L;
        for (std::size_t k = 0; k < n; ++k)
        {
            const long double arg = 2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * t % n) /
                                    static_cast<long double>(n);
            acc += std::complex<long double>(h[k].real(), h[k].imag()) * std::complex<long double>(std::cos(arg), std::sin(arg));
        }
        p[t] = static_cast<double>(std::norm(acc) / static_cast<long double>(n));
    }
    return p;
}

double naive_spread(const std::vector<double> &p, const std::vector<double> &d)
{
    double w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        w += p[i];
        m1 += p[i] * d[i];
    }
    const double mean = m1 / w;
    double var = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        var += p[i] * (d[i] - mean) * (d[i] - mean);
    return std::sqrt(var / w);
}

} // namespace

TEST_CASE("Enclosure - synthesis invariants")
{
    for (auto l : {loading::empty, loading::mainboard, loading::absorber, loading::server})
    {
        const auto profile = enclosure_profile::preset(l, 11);
        const auto taps = synth_enclosure(profile);
        REQUIRE(taps.size() == profile.n_taps);
        REQUIRE_NOTHROW(taps.validate());
        CHECK_THAT(taps.total_power(), WithinRel(1.0, 1e-12));
        CHECK(taps.delays.front() >= 0.0);
        for (std::size_t i = 1; i < taps.size(); ++i)
        {
            CHECK(taps.delays[i] > taps.delays[i - 1]);
            // jittered grid: tap i lives in [i, i + 1) * spacing
            CHECK(taps.delays[i] >= static_cast<double>(i) * profile.tap_spacing);
            CHECK(taps.delays[i] < static_cast<double>(i + 1) * profile.tap_spacing);
        }
        // the decay is solved per realization
        CHECK_THAT(rms_delay_spread(taps), WithinRel(profile.target_rms_delay_spread, 1e-6));
    }
}

TEST_CASE("Enclosure - deterministic in the seed")
{
    const auto a = synth_enclosure(enclosure_profile::preset(loading::empty, 5));
    const auto b = synth_enclosure(enclosure_profile::preset(loading::empty, 5));
    const auto c = synth_enclosure(enclosure_profile::preset(loading::empty, 6));
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("Enclosure - delay spread ordering of the presets")
{
    CHECK(default_rms_delay_spread(loading::empty) > default_rms_delay_spread(loading::mainboard));
    CHECK(default_rms_delay_spread(loading::mainboard) > default_rms_delay_spread(loading::absorber));
    CHECK(loading_from_string("absorber") == loading::absorber);
    CHECK(to_string(loading::server) == "server");
    CHECK_THROWS_AS(loading_from_string("attic"), config_error);
}

TEST_CASE("Enclosure - single tap and invalid profiles")
{
    enclosure_profile p;
    p.n_taps = 1;
    p.seed = 3;
    const auto taps = synth_enclosure(p);
    REQUIRE(taps.size() == 1);
    CHECK_THAT(std::abs(taps.gains[0]), WithinRel(1.0, 1e-12));

    p.n_taps = 0;
    CHECK_THROWS_AS(synth_enclosure(p), config_error);
    p.n_taps = 10;
    p.tap_spacing = 0.0;
    CHECK_THROWS_AS(synth_enclosure(p), config_error);
    p.tap_spacing = 1e-9;
    p.target_rms_delay_spread = -1.0;
    CHECK_THROWS_AS(synth_enclosure(p), config_error);
}

TEST_CASE("Frequency response - one-path channels")
{
    const frequency_grid grid{1e9, 2e9, 101};
    {
        const auto h = taps_to_frequency_response(make_taps({0.0}, {{1.0, 0.0}}), grid);
        for (const auto &v : h)
            CHECK_THAT(std::abs(v - std::complex<double>(1.0, 0.0)), WithinAbs(0.0, 1e-15));
    }
    {
        const std::complex<double> g(0.3, -0.4);
        const auto h = taps_to_frequency_response(make_taps({37.3e-9}, {g}), grid);
        for (const auto &v : h)
            CHECK_THAT(std::abs(v), WithinRel(0.5, 1e-12));
    }
}

TEST_CASE("Frequency response - grid evaluation matches direct sums")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 2));
    const frequency_grid grid{2e9, 9e9, 500};
    const auto h = taps_to_frequency_response(taps, grid);
    const auto ref = naive_response(taps, grid.points());
    double worst = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k)
        worst = std::max(worst, std::abs(h[k] - ref[k]));
    CHECK(worst < 1e-10);

    const auto pts = grid.points();
    const auto hs = taps_to_frequency_response(taps, std::span<const double>(pts));
    for (std::size_t k = 0; k < h.size(); ++k)
        CHECK(std::abs(hs[k] - ref[k]) < 1e-11);
}

TEST_CASE("Frequency response - two-path nulls are spaced by the inverse delay difference")
{
    const double delta = 2.5e-9; // nulls every 400 MHz
    const auto taps = make_taps({1e-9, 1e-9 + delta}, {{1.0, 0.0}, {1.0, 0.0}});
    const frequency_grid grid{1e9, 3e9, 20001};
    const auto h = taps_to_frequency_response(taps, grid);

    std::vector<double> nulls;
    for (std::size_t k = 1; k + 1 < h.size(); ++k)
        if (std::abs(h[k]) < std::abs(h[k - 1]) && std::abs(h[k]) <= std::abs(h[k + 1]))
            nulls.push_back(grid.at(k));
    REQUIRE(nulls.size() >= 3);
    for (std::size_t i = 1; i < nulls.size(); ++i)
        CHECK_THAT(nulls[i] - nulls[i - 1], WithinRel(1.0 / delta, 1e-3));
    // |1 + exp(-j 2 pi f delta)| vanishes at odd multiples of 1 / (2 delta)
    CHECK_THAT(std::fmod(nulls.front() * delta, 1.0), WithinAbs(0.5, 1e-3));
}

TEST_CASE("Frequency response - empty grid")
{
    std::vector<double> none;
    CHECK_THROWS_AS(taps_to_frequency_response(make_taps({0.0}, {{1.0, 0.0}}), std::span<const double>(none)),
                    argument_error);
    CHECK_THROWS_AS(taps_to_frequency_response(make_taps({0.0}, {{1.0, 0.0}}), frequency_grid{1e9, 2e9, 1}),
                    argument_error);
}

TEST_CASE("Power delay profile - matches a term-by-term inverse DFT")
{
    rng::stream rs(99);
    for (std::size_t n : {2u, 7u, 64u, 500u})
    {
        cvec h(n);
        for (auto &v : h)
            v = rs.complex_normal();
        const auto p = power_delay_profile(h);
        const auto ref = naive_pdp(h);
        REQUIRE(p.size() == n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK_THAT(p[i], WithinAbs(ref[i], 1e-9 * (1.0 + ref[i])));

        // Parseval with the unitary convention: sum pdp == sum |H|^2
        const double lhs = std::accumulate(p.begin(), p.end(), 0.0);
        double rhs = 0.0;
        for (const auto &v : h)
            rhs += std::norm(v);
        CHECK_THAT(lhs, WithinRel(rhs, 1e-9));
    }
}

TEST_CASE("Power delay profile - flat response is a delta at zero delay")
{
    const cvec flat(128, {1.0, 0.0});
    const auto p = power_delay_profile(flat);
    CHECK_THAT(p[0], WithinRel(128.0, 1e-12));
    for (std::size_t i = 1; i < p.size(); ++i)
        CHECK_THAT(p[i], WithinAbs(0.0, 1e-20));
    CHECK_THROWS_AS(power_delay_profile(cvec(1)), argument_error);
}

TEST_CASE("Power delay profile - single tap lands in the nearest delay bin")
{
    const frequency_grid grid{2e9, 9e9, 500};
    const auto delays = pdp_delay_grid(grid.n_points, grid.step());
    const double bin = delays[1] - delays[0];
    CHECK_THAT(bin, WithinRel(1.0 / (500.0 * grid.step()), 1e-12));

    for (double tau : {3.2e-9, 17.77e-9, 40.1e-9, 60.0e-9})
    {
        const auto p = power_delay_profile(taps_to_frequency_response(make_taps({tau}, {{1.0, 0.0}}), grid));
        const auto peak = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        CHECK(std::abs(delays[peak] - tau) <= bin);
    }
}

TEST_CASE("RMS delay spread - definitions")
{
    SECTION("single bin")
    {
        const std::vector<double> p{0.0, 0.0, 3.0, 0.0};
        const std::vector<double> d{0.0, 1.0, 2.0, 3.0};
        CHECK(rms_delay_spread(p, d) == 0.0);
    }
    SECTION("two equal bins at 0 and T")
    {
        const double T = 40e-9;
        CHECK_THAT(rms_delay_spread(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, T}), WithinRel(T / 2.0, 1e-12));
    }
    SECTION("uniform profile over [0, T]")
    {
        const double T = 100e-9;
        const std::size_t n = 20001;
        std::vector<double> p(n, 1.0), d(n);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = T * static_cast<double>(i) / static_cast<double>(n - 1);
        CHECK_THAT(rms_delay_spread(p, d), WithinRel(T / (2.0 * std::sqrt(3.0)), 0.01));
    }
    SECTION("random profiles against a direct evaluation")
    {
        rng::stream rs(5);
        for (int trial = 0; trial < 50; ++trial)
        {
            std::vector<double> p(64), d(64);
            for (std::size_t i = 0; i < 64; ++i)
            {
                p[i] = rs.uniform();
                d[i] = 1e-9 * static_cast<double>(i) + 1e-10 * rs.uniform();
            }
            CHECK_THAT(rms_delay_spread(p, d), WithinRel(naive_spread(p, d), 1e-12));
        }
    }
    SECTION("errors")
    {
        CHECK_THROWS_AS(rms_delay_spread(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 1.0}),
                        degenerate_input_error);
        CHECK_THROWS_AS(rms_delay_spread(std::vector<double>{1.0}, std::vector<double>{0.0, 1.0}), argument_error);
        CHECK_THROWS_AS(rms_delay_spread(std::vector<double>{-1.0, 2.0}, std::vector<double>{0.0, 1.0}), argument_error);
    }
}

TEST_CASE("RMS delay spread - synthesized enclosures average to the target")
{
    for (auto l : {loading::empty, loading::mainboard, loading::absorber})
    {
        double acc = 0.0;
        for (std::uint64_t s = 0; s < 20; ++s)
            acc += rms_delay_spread(synth_enclosure(enclosure_profile::preset(l, 100 + s)));
        CHECK_THAT(acc / 20.0, WithinRel(default_rms_delay_spread(l), 0.10));
    }
}

TEST_CASE("Perturbation - needle below the dead zone or without diameter is the identity")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 1));
    const position p{0.4, 0.6};
    CHECK(apply_perturbation(taps, perturbation_event::needle(p, 1.0, 8.0)) == taps);
    CHECK(apply_perturbation(taps, perturbation_event::needle(p, 1.0, 3.0)) == taps);
    CHECK(apply_perturbation(taps, perturbation_event::needle(p, 0.0, 40.0)) == taps);
    CHECK_FALSE(apply_perturbation(taps, perturbation_event::needle(p, 0.3, 9.0)) == taps);
}

TEST_CASE("Perturbation - additive term is linear in diameter and insertion")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 1));
    const position p{0.3, 0.5};
    const auto delta = [&](double dia, double depth) {
        const auto out = apply_perturbation(taps, perturbation_event::needle(p, dia, depth));
        cvec d(taps.size());
        for (std::size_t i = 0; i < taps.size(); ++i)
            d[i] = out.gains[i] - taps.gains[i];
        return d;
    };
    const auto base = delta(0.5, 18.0);    // 0.5 mm x 10 mm
    const auto wider = delta(1.0, 18.0);   // 2x
    const auto deeper = delta(0.5, 38.0);  // 3x
    for (std::size_t i = 0; i < taps.size(); ++i)
    {
        CHECK(std::abs(wider[i] - 2.0 * base[i]) <= 1e-12 * (1.0 + std::abs(base[i])));
        CHECK(std::abs(deeper[i] - 3.0 * base[i]) <= 1e-12 * (1.0 + std::abs(base[i])));
    }
    CHECK_FALSE(delta(0.5, 18.0) != base); // deterministic
}

TEST_CASE("Perturbation - positions couple differently, input untouched")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 1));
    const auto copy = taps;
    const auto a = apply_perturbation(taps, perturbation_event::needle({0.3, 0.5}, 1.0, 40.0));
    const auto b = apply_perturbation(taps, perturbation_event::needle({0.7, 0.5}, 1.0, 40.0));
    CHECK(taps == copy);
    CHECK_FALSE(a == b);
    CHECK(a.delays == taps.delays);
}

TEST_CASE("Perturbation - site factor")
{
    coupling_model c;
    c.site_spread = 0.0;
    CHECK_THAT(c.site_factor({0.5, 0.5}, 1), WithinRel(1.0, 1e-12));
    CHECK_THAT(c.site_factor({0.0, 0.5}, 1), WithinRel(c.border_factor, 1e-12));
    CHECK(c.site_factor({0.05, 0.5}, 1) < 1.0);
    c.insensitive = {{0.6, 0.0, 1.0, 1.0}};
    CHECK_THAT(c.site_factor({0.8, 0.5}, 1), WithinRel(c.insensitive_factor, 1e-12));
}

TEST_CASE("Perturbation - lid removal")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 4));
    const auto lid = apply_perturbation(taps, perturbation_event::lid_removal());
    CHECK_THAT(lid.total_power(), WithinRel(coupling_model{}.lid_power_ratio * taps.total_power(), 1e-12));
    CHECK(std::abs(lid.total_power() - taps.total_power()) >= 0.5 * taps.total_power());
    CHECK(lid.delays == taps.delays);
    CHECK(apply_perturbation(taps, perturbation_event::lid_removal()) == lid);
}

TEST_CASE("Perturbation - invalid events")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::empty, 4));
    CHECK_THROWS_AS(apply_perturbation(taps, perturbation_event::needle({1.5, 0.5}, 1.0, 40.0)), argument_error);
    CHECK_THROWS_AS(apply_perturbation(taps, perturbation_event::needle({0.5, 0.5}, 2.5, 40.0)), argument_error);
    CHECK_THROWS_AS(apply_perturbation(taps, perturbation_event::needle({0.5, 0.5}, 1.0, -1.0)), argument_error);
}

TEST_CASE("Drift - neutral state is the identity")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::server, 9));
    CHECK(apply_drift(taps, drift_state{}) == taps);
}

TEST_CASE("Drift - thermal expansion scales delays")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::server, 9));
    drift_state d;
    d.temperature_offset = 10.0;
    const auto out = apply_drift(taps, d);
    const double k = drift_model{}.expansion_coefficient;
    for (std::size_t i = 0; i < taps.size(); ++i)
    {
        CHECK_THAT(out.delays[i], WithinRel(taps.delays[i] * (1.0 + k * 10.0), 1e-15));
        CHECK(out.gains[i] == taps.gains[i]);
    }
}

TEST_CASE("Drift - power states touch only their tap subsets")
{
    const auto taps = synth_enclosure(enclosure_profile::preset(loading::server, 9));
    drift_state d;
    d.psu_on = true;
    const auto psu = apply_drift(taps, d);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < taps.size(); ++i)
        changed += psu.gains[i] != taps.gains[i] ? 1 : 0;
    CHECK(changed > 0);
    CHECK(changed < taps.size());
    CHECK(apply_drift(taps, d) == psu);

    d.booted = true;
    d.fan_phase = 1.0;
    const auto a = apply_drift(taps, d);
    d.fan_phase = 2.0;
    CHECK_FALSE(apply_drift(taps, d) == a);

    d.cpu_load = 1.5;
    CHECK_THROWS_AS(apply_drift(taps, d), argument_error);
}

TEST_CASE("Thermal lag - exact first-order step response")
{
    const thermal_model m;
    double t = 0.0;
    for (int i = 0; i < 60; ++i)
        t = advance_temperature(t, 1.0, 60.0, m);
    CHECK_THAT(t, WithinRel(m.full_load_rise * (1.0 - std::exp(-3600.0 / m.time_constant)), 1e-12));
    CHECK(advance_temperature(5.0, 0.0, 0.0, m) == 5.0);
    CHECK_THROWS_AS(advance_temperature(0.0, 1.0, -1.0, m), argument_error);
}

TEST_CASE("Measurement noise - deterministic and calibrated")
{
    const cvec zero(20000);
    noise_params p{0.05, 17};
    const auto a = apply_measurement_noise(zero, p, 3);
    const auto b = apply_measurement_noise(zero, p, 3);
    const auto c = apply_measurement_noise(zero, p, 4);
    CHECK(a == b);
    CHECK_FALSE(a == c);

    double s2 = 0.0, m = 0.0;
    for (const auto &v : a)
    {
        m += v.real() + v.imag();
        s2 += v.real() * v.real() + v.imag() * v.imag();
    }
    const double n = 2.0 * static_cast<double>(a.size());
    CHECK_THAT(m / n, WithinAbs(0.0, 5.0 * 0.05 / std::sqrt(n)));
    CHECK_THAT(std::sqrt(s2 / n), WithinRel(0.05, 0.02));

    p.measurement_noise_std = 0.0;
    CHECK(apply_measurement_noise(zero, p, 1) == zero);
    p.measurement_noise_std = -1.0;
    CHECK_THROWS_AS(apply_measurement_noise(zero, p, 1), argument_error);
}
