// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Latent multipath channel of a closed metal enclosure.
//
// The enclosure is a tapped delay line: taps on a jittered delay grid with an
// exponentially decaying power profile and frozen circularly symmetric
// Gaussian gains. Tamper events and legitimate environmental changes are
// modelled as deterministic transformations of that tap set.

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace atr
{

using cvec = std::vector<std::complex<double>>;

// ---- enclosure ---------------------------------------------------------

enum class loading
{
    empty,
    mainboard,
    absorber,
    server
};

std::string_view to_string(loading l) noexcept;
loading loading_from_string(std::string_view name);

// Default RMS delay spread of each interior configuration in [s].
// Empty > Mainboard > Absorber ~ Server.
double default_rms_delay_spread(loading l) noexcept;

struct enclosure_profile
{
    std::size_t n_taps = 2;
    double tap_spacing = 0.5e-9;             // mean delay grid step [s]
    double target_rms_delay_spread = 6.5e-9; // [s]
    loading interior = loading::server;
    std::uint64_t seed = 0;

    // Profile for a given interior with enough taps to cover ten decay times.
    static enclosure_profile preset(loading interior, std::uint64_t seed);

    // Throws config_error. n_taps == 1 is accepted as the one-path channel.
    void validate() const;
};

struct tap_set
{
    std::vector<double> delays; // [s], strictly increasing, first >= 0
    cvec gains;                 // dimensionless amplitudes

    std::uint64_t seed = 0;  // enclosure seed, keys position coupling
    double decay_time = 0.0; // power decay constant [s], 0 if unknown

    std::size_t size() const noexcept { return delays.size(); }
    double total_power() const noexcept;

    // Throws argument_error.
    void validate() const;

    bool operator==(const tap_set &) const = default;
};

// Draws the enclosure channel. Tap i sits at (i + u_i) * tap_spacing with
// u_i uniform in [0, 1); the decay constant is solved per realization so the
// drawn channel hits the target RMS delay spread. Total power is normalized to 1.
tap_set synth_enclosure(const enclosure_profile &profile);

// ---- frequency domain --------------------------------------------------

// Equally spaced, inclusive of both endpoints.
struct frequency_grid
{
    double f_start = 2.0e9;
    double f_stop = 9.0e9;
    std::size_t n_points = 500;

    double step() const noexcept { return (f_stop - f_start) / static_cast<double>(n_points - 1); }
    double at(std::size_t i) const noexcept { return f_start + step() * static_cast<double>(i); }
    std::vector<double> points() const;
    void validate() const;
};

// H(f) = sum_n g_n exp(-j 2 pi f tau_n)
cvec taps_to_frequency_response(const tap_set &taps, const frequency_grid &grid);
cvec taps_to_frequency_response(const tap_set &taps, std::span<const double> frequencies);

// |IDFT(H)|^2 with the unitary convention
//   x[n] = 1/sqrt(N) sum_k H[k] exp(+j 2 pi k n / N),
// so sum(pdp) == sum_k |H[k]|^2 == N * mean |H|^2.
std::vector<double> power_delay_profile(std::span<const std::complex<double>> freq_response);

// Delay of each PDP bin for a response sampled every frequency_step Hz.
std::vector<double> pdp_delay_grid(std::size_t n, double frequency_step);

// Power-weighted standard deviation of delay.
double rms_delay_spread(std::span<const double> pdp, std::span<const double> delays);
double rms_delay_spread(const tap_set &taps);

// ---- tamper events -----------------------------------------------------

struct position
{
    double x = 0.5;
    double y = 0.5;
    bool operator==(const position &) const = default;
};

struct perturbation_event
{
    enum class kind_t
    {
        needle,
        lid_removal
    };

    kind_t kind = kind_t::needle;
    position where{};        // normalized lid coordinate in [0,1]^2
    double diameter = 0.0;   // [mm], 0..2
    double depth = 0.0;      // [mm]
    double dead_zone = 8.0;  // [mm] insensitive boundary layer

    static perturbation_event needle(position p, double diameter_mm, double depth_mm, double dead_zone_mm = 8.0);
    static perturbation_event lid_removal();

    void validate() const;
};

struct region
{
    double x0, y0, x1, y1; // half-open box [x0,x1) x [y0,y1)
    bool contains(position p) const noexcept { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
};

// How strongly a needle at a given lid position couples into the channel.
struct coupling_model
{
    // Amplitude per (mm diameter * mm depth); calibrated so a 0.3 mm needle
    // 45 mm deep into the empty box lands near ten times the short-term
    // intra distance of the default VNA frontend.
    double strength = 1.36e-3;
    double reference_decay = 10e-9; // [s]
    double site_spread = 0.12;      // log-normal spread of per-position sensitivity
    double border_width = 0.12;     // normalized distance to the wall
    double border_factor = 0.7;     // amplitude factor right at the wall
    std::vector<region> insensitive;
    double insensitive_factor = 0.05;
    double lid_power_ratio = 0.35; // total power left after removing the lid

    // Per-position amplitude factor (site spread, border, insensitive regions).
    double site_factor(position p, std::uint64_t seed) const;
};

// Returns a perturbed copy; the input is never modified.
tap_set apply_perturbation(const tap_set &taps, const perturbation_event &event, const coupling_model &coupling = {});

// ---- environment -------------------------------------------------------

struct drift_state
{
    double temperature_offset = 0.0; // [K]
    double cpu_load = 0.0;           // [0,1]
    double fan_phase = 0.0;          // [rad]
    bool psu_on = false;
    bool booted = false;

    void validate() const;
};

struct drift_model
{
    double expansion_coefficient = 23e-6; // [1/K], aluminium
    double psu_fraction = 0.12;           // share of taps touched by powering the PSU
    double psu_amplitude = 0.35;          // relative to the tap magnitude
    double boot_fraction = 0.2;
    double boot_amplitude = 0.3;
    double psu_fan_fraction = 0.08;
    double psu_fan_depth = 0.01;
    double main_fan_fraction = 0.12;
    double main_fan_depth = 0.012; // grows with (1 + cpu_load)
};

// Thermal expansion scales all delays by (1 + k dT); PSU and boot states add
// fixed terms on designated tap subsets; running fans modulate a fan subset
// with fan_phase. The neutral state is the identity.
tap_set apply_drift(const tap_set &taps, const drift_state &drift, const drift_model &model = {});

// First-order thermal lag driven by CPU load.
struct thermal_model
{
    double time_constant = 900.0; // [s]
    double full_load_rise = 12.0; // steady-state [K] at 100 % load
};

double advance_temperature(double current, double cpu_load, double dt, const thermal_model &model = {});

// ---- measurement noise -------------------------------------------------

struct noise_params
{
    double measurement_noise_std = 0.0; // per real/imaginary component
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Adds N(0, std^2) to every real and imaginary component. Deterministic in
// (rng_seed, draw_index).
cvec apply_measurement_noise(std::span<const std::complex<double>> response, const noise_params &params,
                             std::uint64_t draw_index);

} // namespace atr
