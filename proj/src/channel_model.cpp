// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/channel_model.hpp"

#include "atr/errors.hpp"
#include "atr/random.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

namespace atr
{

namespace
{

constexpr double two_pi = 2.0 * std::numbers::pi;

// Stream salts, one per independent random quantity.
constexpr std::uint64_t salt_enclosure = 0x656E636C6F737572ULL;
constexpr std::uint64_t salt_site = 0x73697465ULL;
constexpr std::uint64_t salt_coupling = 0x636F75706CULL;
constexpr std::uint64_t salt_lid = 0x6C6964ULL;
constexpr std::uint64_t salt_psu = 0x707375ULL;
constexpr std::uint64_t salt_boot = 0x626F6F74ULL;
constexpr std::uint64_t salt_psu_fan = 0x7066616EULL;
constexpr std::uint64_t salt_main_fan = 0x6D66616EULL;
constexpr std::uint64_t salt_noise = 0x6E6F697365ULL;

std::uint64_t quantize(double v) { return static_cast<std::uint64_t>(std::llround(v * 1e9)); }

// RMS delay spread of weights w_n * exp(-(d_n - d_0) / tau).
double spread_for_decay(std::span<const double> w, std::span<const double> d, double tau)
{
    double p_sum = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
    {
        const double p = w[i] * std::exp(-(d[i] - d[0]) / tau);
        const double x = d[i] - d[0];
        p_sum += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    m1 /= p_sum;
    return std::sqrt(std::max(0.0, m2 / p_sum - m1 * m1));
}

double envelope(const tap_set &taps, std::size_t i)
{
    if (taps.decay_time > 0.0)
        return std::exp(-(taps.delays[i] - taps.delays[0]) / taps.decay_time);
    return std::norm(taps.gains[i]);
}

double mean_spacing(const tap_set &taps)
{
    if (taps.size() < 2)
        return 0.0;
    return (taps.delays.back() - taps.delays.front()) / static_cast<double>(taps.size() - 1);
}

bool in_subset(std::uint64_t seed, std::uint64_t salt, std::size_t tap, double fraction)
{
    return rng::to_unit(rng::mix(seed, salt, tap)) < fraction;
}

std::complex<double> unit_phasor(std::uint64_t key)
{
    return std::polar(1.0, two_pi * rng::to_unit(key));
}

std::mutex fftw_planner_mutex;

} // namespace

// ---- enclosure ---------------------------------------------------------

std::string_view to_string(loading l) noexcept
{
    switch (l)
    {
    case loading::empty:
        return "empty";
    case loading::mainboard:
        return "mainboard";
    case loading::absorber:
        return "absorber";
    case loading::server:
        return "server";
    }
    return "unknown";
}

loading loading_from_string(std::string_view name)
{
    for (auto l : {loading::empty, loading::mainboard, loading::absorber, loading::server})
        if (name == to_string(l))
            return l;
    throw config_error("unknown loading '" + std::string(name) + "'");
}

double default_rms_delay_spread(loading l) noexcept
{
    switch (l)
    {
    case loading::empty:
        return 18e-9;
    case loading::mainboard:
        return 11e-9;
    case loading::absorber:
        return 6e-9;
    case loading::server:
        return 6.5e-9;
    }
    return 6.5e-9;
}

enclosure_profile enclosure_profile::preset(loading interior, std::uint64_t seed)
{
    enclosure_profile p;
    p.interior = interior;
    p.seed = seed;
    p.tap_spacing = 0.5e-9;
    p.target_rms_delay_spread = default_rms_delay_spread(interior);
    p.n_taps = static_cast<std::size_t>(std::ceil(10.0 * p.target_rms_delay_spread / p.tap_spacing));
    return p;
}

void enclosure_profile::validate() const
{
    if (n_taps < 1)
        throw config_error("enclosure profile: n_taps must be >= 1");
    if (!(tap_spacing > 0.0) || !std::isfinite(tap_spacing))
        throw config_error("enclosure profile: tap_spacing must be > 0");
    if (!(target_rms_delay_spread > 0.0) || !std::isfinite(target_rms_delay_spread))
        throw config_error("enclosure profile: target_rms_delay_spread must be > 0");
}

double tap_set::total_power() const noexcept
{
    double p = 0.0;
    for (const auto &g : gains)
        p += std::norm(g);
    return p;
}

void tap_set::validate() const
{
    if (delays.empty() || delays.size() != gains.size())
        throw argument_error("tap set: delays and gains must be non-empty and of equal length");
    if (!(delays[0] >= 0.0))
        throw argument_error("tap set: first delay must be >= 0");
    for (std::size_t i = 1; i < delays.size(); ++i)
        if (!(delays[i] > delays[i - 1]) || !std::isfinite(delays[i]))
            throw argument_error("tap set: delays must be strictly increasing");
    const double p = total_power();
    if (!(p > 0.0) || !std::isfinite(p))
        throw argument_error("tap set: total power must be finite and > 0");
}

tap_set synth_enclosure(const enclosure_profile &profile)
{
    profile.validate();

    tap_set taps;
    taps.seed = profile.seed;

    if (profile.n_taps == 1)
    {
        taps.delays = {0.0};
        taps.gains = {{1.0, 0.0}};
        return taps;
    }

    const std::size_t n = profile.n_taps;
    rng::stream rs(rng::mix(profile.seed, salt_enclosure));

    taps.delays.resize(n);
    cvec z(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        taps.delays[i] = (static_cast<double>(i) + rs.uniform()) * profile.tap_spacing;
        z[i] = rs.complex_normal();
        w[i] = std::norm(z[i]);
    }

    // Bracket the target on a log grid, then bisect.
    const double target = profile.target_rms_delay_spread;
    const double span = taps.delays.back() - taps.delays.front();
    double lo = 1e-3 * profile.tap_spacing;
    double hi = 0.0;
    double prev = lo;
    for (int k = 1; k <= 240; ++k)
    {
        const double tau = lo * std::pow(10.0, k * 0.025);
        if (tau > 1e3 * span)
            break;
        if (spread_for_decay(w, taps.delays, tau) >= target)
        {
            lo = prev;
            hi = tau;
            break;
        }
        prev = tau;
    }
    if (hi == 0.0)
        throw config_error("enclosure profile: " + std::to_string(n) + " taps cannot reach the target RMS delay spread");

    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        (spread_for_decay(w, taps.delays, mid) < target ? lo : hi) = mid;
    }
    const double tau = 0.5 * (lo + hi);

    taps.gains.resize(n);
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        taps.gains[i] = z[i] * std::sqrt(std::exp(-(taps.delays[i] - taps.delays[0]) / tau));
        power += std::norm(taps.gains[i]);
    }
    const double scale = 1.0 / std::sqrt(power);
    for (auto &g : taps.gains)
        g *= scale;
    taps.decay_time = tau;
    return taps;
}

// ---- frequency domain --------------------------------------------------

std::vector<double> frequency_grid::points() const
{
    std::vector<double> f(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        f[i] = at(i);
    f.back() = f_stop;
    return f;
}

void frequency_grid::validate() const
{
    if (n_points < 2)
        throw argument_error("frequency grid: n_points must be >= 2");
    if (!(f_start > 0.0) || !(f_stop > f_start) || !std::isfinite(f_stop))
        throw argument_error("frequency grid: requires f_stop > f_start > 0");
}

cvec taps_to_frequency_response(const tap_set &taps, const frequency_grid &grid)
{
    grid.validate();
    // Phasor recurrence along the uniform grid, resynchronized every 64 bins
    // to keep the accumulated rounding error near machine precision.
    constexpr std::size_t resync = 64;
    const std::size_t n = grid.n_points;
    const double df = grid.step();
    cvec h(n, {0.0, 0.0});
    for (std::size_t t = 0; t < taps.size(); ++t)
    {
        const auto g = taps.gains[t];
        const double d = taps.delays[t];
        const auto rot = std::polar(1.0, -two_pi * df * d);
        std::complex<double> p;
        for (std::size_t k = 0; k < n; ++k)
        {
            if (k % resync == 0)
                p = g * std::polar(1.0, -two_pi * grid.at(k) * d);
            else
                p *= rot;
            h[k] += p;
        }
    }
    return h;
}

cvec taps_to_frequency_response(const tap_set &taps, std::span<const double> frequencies)
{
    if (frequencies.empty())
        throw argument_error("frequency response: empty frequency grid");
    cvec h(frequencies.size(), {0.0, 0.0});
    for (std::size_t n = 0; n < taps.size(); ++n)
    {
        const auto g = taps.gains[n];
        const double d = taps.delays[n];
        for (std::size_t k = 0; k < frequencies.size(); ++k)
            h[k] += g * std::polar(1.0, -two_pi * frequencies[k] * d);
    }
    return h;
}

std::vector<double> power_delay_profile(std::span<const std::complex<double>> freq_response)
{
    const std::size_t n = freq_response.size();
    if (n < 2)
        throw argument_error("power delay profile: need at least 2 frequency points");

    std::vector<std::complex<double>> in(freq_response.begin(), freq_response.end());
    std::vector<std::complex<double>> out(n);
    auto *pin = reinterpret_cast<fftw_complex *>(in.data());
    auto *pout = reinterpret_cast<fftw_complex *>(out.data());

    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex);
        plan = fftw_plan_dft_1d(static_cast<int>(n), pin, pout, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex);
        fftw_destroy_plan(plan);
    }

    std::vector<double> pdp(n);
    const double norm = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        pdp[i] = std::norm(out[i]) * norm;
    return pdp;
}

std::vector<double> pdp_delay_grid(std::size_t n, double frequency_step)
{
    if (n == 0 || !(frequency_step > 0.0))
        throw argument_error("pdp delay grid: need n > 0 and a positive frequency step");
    std::vector<double> d(n);
    const double step = 1.0 / (static_cast<double>(n) * frequency_step);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = step * static_cast<double>(i);
    return d;
}

double rms_delay_spread(std::span<const double> pdp, std::span<const double> delays)
{
    if (pdp.size() != delays.size() || pdp.empty())
        throw argument_error("rms delay spread: pdp and delay grid must have equal, non-zero length");
    double p_sum = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < pdp.size(); ++i)
    {
        if (!(pdp[i] >= 0.0) || !std::isfinite(pdp[i]))
            throw argument_error("rms delay spread: pdp must be finite and nonnegative");
        p_sum += pdp[i];
        m1 += pdp[i] * delays[i];
    }
    if (!(p_sum > 0.0))
        throw degenerate_input_error("rms delay spread: pdp carries no power");
    const double mean = m1 / p_sum;
    double m2 = 0.0;
    for (std::size_t i = 0; i < pdp.size(); ++i)
        m2 += pdp[i] * (delays[i] - mean) * (delays[i] - mean);
    return std::sqrt(m2 / p_sum);
}

double rms_delay_spread(const tap_set &taps)
{
    std::vector<double> p(taps.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = std::norm(taps.gains[i]);
    return rms_delay_spread(p, taps.delays);
}

// ---- tamper events -----------------------------------------------------

perturbation_event perturbation_event::needle(position p, double diameter_mm, double depth_mm, double dead_zone_mm)
{
    return {kind_t::needle, p, diameter_mm, depth_mm, dead_zone_mm};
}

perturbation_event perturbation_event::lid_removal()
{
    perturbation_event e;
    e.kind = kind_t::lid_removal;
    return e;
}

void perturbation_event::validate() const
{
    if (kind == kind_t::lid_removal)
        return;
    if (!(where.x >= 0.0 && where.x <= 1.0 && where.y >= 0.0 && where.y <= 1.0))
        throw argument_error("perturbation: position outside [0,1]^2");
    if (!(diameter >= 0.0 && diameter <= 2.0))
        throw argument_error("perturbation: needle diameter must be within [0, 2] mm");
    if (!(depth >= 0.0) || !std::isfinite(depth))
        throw argument_error("perturbation: depth must be >= 0");
    if (!(dead_zone >= 0.0) || !std::isfinite(dead_zone))
        throw argument_error("perturbation: dead zone must be >= 0");
}

double coupling_model::site_factor(position p, std::uint64_t seed) const
{
    const auto key = rng::mix(seed, salt_site, quantize(p.x), quantize(p.y));
    rng::stream rs(key);
    double f = std::exp(site_spread * rs.normal());

    const double wall = std::min({p.x, 1.0 - p.x, p.y, 1.0 - p.y});
    if (border_width > 0.0 && wall < border_width)
        f *= border_factor + (1.0 - border_factor) * wall / border_width;

    for (const auto &r : insensitive)
        if (r.contains(p))
        {
            f *= insensitive_factor;
            break;
        }
    return f;
}

tap_set apply_perturbation(const tap_set &taps, const perturbation_event &event, const coupling_model &coupling)
{
    event.validate();
    tap_set out = taps;

    if (event.kind == perturbation_event::kind_t::lid_removal)
    {
        rng::stream rs(rng::mix(taps.seed, salt_lid));
        double power = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            out.gains[i] = rs.complex_normal() * std::sqrt(envelope(taps, i));
            power += std::norm(out.gains[i]);
        }
        const double scale = std::sqrt(coupling.lid_power_ratio * taps.total_power() / power);
        for (auto &g : out.gains)
            g *= scale;
        return out;
    }

    const double insertion = std::max(0.0, event.depth - event.dead_zone);
    if (event.diameter == 0.0 || insertion == 0.0)
        return out;

    const double strength = coupling.strength * event.diameter * insertion * coupling.site_factor(event.where, taps.seed);
    const double spacing = taps.size() > 1 ? mean_spacing(taps) : coupling.reference_decay;
    const double share = spacing / coupling.reference_decay;

    const auto site_key = rng::mix(taps.seed, salt_coupling, quantize(event.where.x), quantize(event.where.y));
    rng::stream rs(site_key);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        const auto w = rs.complex_normal() * std::sqrt(envelope(taps, i) * share);
        out.gains[i] += strength * w;
    }
    return out;
}

// ---- environment -------------------------------------------------------

void drift_state::validate() const
{
    if (!std::isfinite(temperature_offset) || !std::isfinite(fan_phase))
        throw argument_error("drift state: non-finite field");
    if (!(cpu_load >= 0.0 && cpu_load <= 1.0))
        throw argument_error("drift state: cpu_load must be within [0, 1]");
}

tap_set apply_drift(const tap_set &taps, const drift_state &drift, const drift_model &model)
{
    drift.validate();
    tap_set out = taps;

    if (drift.temperature_offset != 0.0)
    {
        const double scale = 1.0 + model.expansion_coefficient * drift.temperature_offset;
        if (!(scale > 0.0))
            throw argument_error("drift: thermal scale factor must stay positive");
        for (auto &d : out.delays)
            d *= scale;
        if (out.decay_time > 0.0)
            out.decay_time *= scale;
    }

    const auto add_state_term = [&](std::uint64_t salt, double fraction, double amplitude) {
        for (std::size_t i = 0; i < out.size(); ++i)
            if (in_subset(taps.seed, salt, i, fraction))
                out.gains[i] += amplitude * std::abs(taps.gains[i]) * unit_phasor(rng::mix(taps.seed, salt + 1, i));
    };
    const auto modulate = [&](std::uint64_t salt, double fraction, double depth) {
        for (std::size_t i = 0; i < out.size(); ++i)
            if (in_subset(taps.seed, salt, i, fraction))
            {
                const double phi = two_pi * rng::to_unit(rng::mix(taps.seed, salt + 1, i));
                out.gains[i] *= 1.0 + depth * std::cos(drift.fan_phase + phi);
            }
    };

    if (drift.psu_on)
    {
        add_state_term(salt_psu, model.psu_fraction, model.psu_amplitude);
        modulate(salt_psu_fan, model.psu_fan_fraction, model.psu_fan_depth);
    }
    if (drift.booted)
    {
        add_state_term(salt_boot, model.boot_fraction, model.boot_amplitude);
        modulate(salt_main_fan, model.main_fan_fraction, model.main_fan_depth * (1.0 + drift.cpu_load));
    }
    return out;
}

double advance_temperature(double current, double cpu_load, double dt, const thermal_model &model)
{
    if (!(dt >= 0.0) || !(model.time_constant > 0.0))
        throw argument_error("thermal model: need dt >= 0 and a positive time constant");
    const double target = model.full_load_rise * std::clamp(cpu_load, 0.0, 1.0);
    return target + (current - target) * std::exp(-dt / model.time_constant);
}

// ---- measurement noise -------------------------------------------------

void noise_params::validate() const
{
    if (!(measurement_noise_std >= 0.0) || !std::isfinite(measurement_noise_std))
        throw argument_error("noise: measurement_noise_std must be finite and >= 0");
}

cvec apply_measurement_noise(std::span<const std::complex<double>> response, const noise_params &params,
                             std::uint64_t draw_index)
{
    params.validate();
    cvec out(response.begin(), response.end());
    if (params.measurement_noise_std == 0.0)
        return out;
    rng::stream rs(rng::mix(params.rng_seed, salt_noise, draw_index));
    const double s = params.measurement_noise_std;
    for (auto &v : out)
    {
        const double re = rs.normal();
        const double im = rs.normal();
        v += std::complex<double>(s * re, s * im);
    }
    return out;
}

} // namespace atr
