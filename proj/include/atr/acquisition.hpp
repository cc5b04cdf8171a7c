// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Measurement frontends. Both turn a tap set into a real-valued magnitude
// response; phase is always discarded.
//
//  - vna: swept magnitude transfer function |S21(f)|, smoothed in frequency
//  - uwb: CIR tap magnitudes after the first path on several 500 MHz channels

#pragma once

#include "atr/channel_model.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace atr
{

enum class frontend
{
    vna,
    uwb
};

std::string_view to_string(frontend f) noexcept;
frontend frontend_from_string(std::string_view name);

struct vna_config
{
    frequency_grid grid{2.0e9, 9.0e9, 500};
    std::size_t smoothing_window = 5;
    double acquisition_time = 0.25; // [s], metadata only

    void validate() const;
};

struct uwb_config
{
    std::size_t n_channels = 11;
    double first_center = 2.496e9;
    double last_center = 7.488e9;
    double bandwidth = 500e6;
    std::size_t taps_per_channel = 15;
    double tap_resolution = 1e-9;      // [s]
    std::size_t cir_length = 64;       // accumulator samples searched for the first path
    double first_path_fraction = 0.1;  // of the CIR maximum
    double acquisition_time = 0.7;     // [s], metadata only

    std::vector<double> channel_centers() const;
    std::size_t response_length() const noexcept { return n_channels * taps_per_channel; }
    void validate() const;
};

struct response
{
    std::vector<double> values; // magnitudes, finite and >= 0
    frontend source = frontend::vna;
    double timestamp = 0.0; // simulation clock [s]

    std::size_t size() const noexcept { return values.size(); }
    void validate() const;
    bool operator==(const response &) const = default;
};

// Centered moving average; the window shrinks symmetrically at the edges.
std::vector<double> smooth_frequency(std::span<const double> values, std::size_t window);

response acquire_vna(const tap_set &taps, const vna_config &config, const noise_params &noise,
                     std::uint64_t draw_index, double timestamp = 0.0);

// Complex baseband CIR of the taps seen through a rectangular band of width
// `bandwidth` centered on `center`, sampled at k * resolution, k = 0..n-1:
//   h[k] = sum_n g_n exp(-j 2 pi center tau_n) sinc(bandwidth (k resolution - tau_n))
cvec baseband_cir(const tap_set &taps, double center, double bandwidth, double resolution, std::size_t n);

// Index of the first sample whose magnitude exceeds fraction * max.
std::size_t first_path_index(std::span<const double> magnitudes, double fraction);

response acquire_uwb(const tap_set &taps, const uwb_config &config, const noise_params &noise,
                     std::uint64_t draw_index, double timestamp = 0.0);

// Element-wise mean; timestamp of the last member.
response block_average(std::span<const response> block);

// Acquires `block_size` consecutive responses (draw indices first_draw,
// first_draw + 1, ...) and block-averages them.
response acquire_vna_block(const tap_set &taps, const vna_config &config, const noise_params &noise,
                           std::uint64_t first_draw, std::size_t block_size, double timestamp = 0.0);
response acquire_uwb_block(const tap_set &taps, const uwb_config &config, const noise_params &noise,
                           std::uint64_t first_draw, std::size_t block_size, double timestamp = 0.0);

} // namespace atr
