// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/acquisition.hpp"

#include "atr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace atr
{

namespace
{

double sinc(double x)
{
    if (std::abs(x) < 1e-12)
        return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

std::vector<double> magnitudes(const cvec &v)
{
    std::vector<double> m(v.size());
    std::transform(v.begin(), v.end(), m.begin(), [](const auto &c) { return std::abs(c); });
    return m;
}

// All channels' baseband CIRs concatenated, each cir_length samples long.
cvec uwb_clean_cirs(const tap_set &taps, const uwb_config &config)
{
    const std::size_t n = config.cir_length;
    const std::size_t n_taps = taps.size();

    // The sinc kernel does not depend on the channel center.
    std::vector<double> kernel(n * n_taps);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < n_taps; ++t)
            kernel[k * n_taps + t] = sinc(config.bandwidth * (static_cast<double>(k) * config.tap_resolution - taps.delays[t]));

    const auto centers = config.channel_centers();
    cvec out(centers.size() * n);
    cvec rotated(n_taps);
    for (std::size_t c = 0; c < centers.size(); ++c)
    {
        for (std::size_t t = 0; t < n_taps; ++t)
            rotated[t] = taps.gains[t] * std::polar(1.0, -2.0 * std::numbers::pi * centers[c] * taps.delays[t]);
        for (std::size_t k = 0; k < n; ++k)
        {
            std::complex<double> acc{0.0, 0.0};
            const double *row = &kernel[k * n_taps];
            for (std::size_t t = 0; t < n_taps; ++t)
                acc += rotated[t] * row[t];
            out[c * n + k] = acc;
        }
    }
    return out;
}

std::vector<double> uwb_extract(const cvec &cirs, const uwb_config &config)
{
    const std::size_t n = config.cir_length;
    std::vector<double> values;
    values.reserve(config.response_length());
    std::vector<double> mag(n);
    for (std::size_t c = 0; c < config.n_channels; ++c)
    {
        for (std::size_t k = 0; k < n; ++k)
            mag[k] = std::abs(cirs[c * n + k]);
        const std::size_t fp = std::min(first_path_index(mag, config.first_path_fraction), n - config.taps_per_channel);
        values.insert(values.end(), mag.begin() + static_cast<std::ptrdiff_t>(fp),
                      mag.begin() + static_cast<std::ptrdiff_t>(fp + config.taps_per_channel));
    }
    return values;
}

} // namespace

std::string_view to_string(frontend f) noexcept
{
    return f == frontend::vna ? "vna" : "uwb";
}

frontend frontend_from_string(std::string_view name)
{
    if (name == "vna")
        return frontend::vna;
    if (name == "uwb")
        return frontend::uwb;
    throw argument_error("unknown frontend '" + std::string(name) + "'");
}

void vna_config::validate() const
{
    grid.validate();
    if (smoothing_window < 1 || smoothing_window % 2 == 0 || smoothing_window > grid.n_points)
        throw argument_error("vna config: smoothing window must be odd and within [1, n_points]");
}

std::vector<double> uwb_config::channel_centers() const
{
    std::vector<double> c(n_channels);
    if (n_channels == 1)
    {
        c[0] = first_center;
        return c;
    }
    const double step = (last_center - first_center) / static_cast<double>(n_channels - 1);
    for (std::size_t i = 0; i < n_channels; ++i)
        c[i] = first_center + step * static_cast<double>(i);
    return c;
}

void uwb_config::validate() const
{
    if (n_channels < 1 || taps_per_channel < 1)
        throw argument_error("uwb config: need at least one channel and one tap");
    if (!(first_center > 0.0) || last_center < first_center)
        throw argument_error("uwb config: channel centers must be positive and ascending");
    if (!(bandwidth > 0.0) || !(tap_resolution > 0.0))
        throw argument_error("uwb config: bandwidth and tap resolution must be > 0");
    if (cir_length < taps_per_channel)
        throw argument_error("uwb config: cir_length shorter than the extraction window");
    if (!(first_path_fraction > 0.0 && first_path_fraction <= 1.0))
        throw argument_error("uwb config: first_path_fraction must be within (0, 1]");
}

void response::validate() const
{
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw argument_error("response: values must be finite and nonnegative");
}

std::vector<double> smooth_frequency(std::span<const double> values, std::size_t window)
{
    const std::size_t n = values.size();
    if (window < 1 || window % 2 == 0 || window > n)
        throw argument_error("smoothing: window must be odd and within [1, " + std::to_string(n) + "]");
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const std::size_t h = std::min({half, i, n - 1 - i});
        double acc = 0.0;
        for (std::size_t j = i - h; j <= i + h; ++j)
            acc += values[j];
        out[i] = acc / static_cast<double>(2 * h + 1);
    }
    return out;
}

response acquire_vna(const tap_set &taps, const vna_config &config, const noise_params &noise, std::uint64_t draw_index,
                     double timestamp)
{
    return acquire_vna_block(taps, config, noise, draw_index, 1, timestamp);
}

cvec baseband_cir(const tap_set &taps, double center, double bandwidth, double resolution, std::size_t n)
{
    uwb_config c;
    c.n_channels = 1;
    c.first_center = c.last_center = center;
    c.bandwidth = bandwidth;
    c.tap_resolution = resolution;
    c.cir_length = n;
    c.taps_per_channel = std::min<std::size_t>(1, n);
    c.validate();
    return uwb_clean_cirs(taps, c);
}

std::size_t first_path_index(std::span<const double> magnitudes, double fraction)
{
    if (magnitudes.empty())
        throw argument_error("first path: empty CIR");
    const double peak = *std::max_element(magnitudes.begin(), magnitudes.end());
    for (std::size_t i = 0; i < magnitudes.size(); ++i)
        if (magnitudes[i] > fraction * peak)
            return i;
    return 0;
}

response acquire_uwb(const tap_set &taps, const uwb_config &config, const noise_params &noise, std::uint64_t draw_index,
                     double timestamp)
{
    return acquire_uwb_block(taps, config, noise, draw_index, 1, timestamp);
}

response block_average(std::span<const response> block)
{
    if (block.empty())
        throw argument_error("block average: empty block");
    response out;
    out.source = block.front().source;
    out.values.assign(block.front().size(), 0.0);
    for (const auto &r : block)
    {
        if (r.source != out.source || r.size() != out.size())
            throw argument_error("block average: mixed frontends or lengths");
        for (std::size_t i = 0; i < out.size(); ++i)
            out.values[i] += r.values[i];
    }
    const double inv = 1.0 / static_cast<double>(block.size());
    for (auto &v : out.values)
        v *= inv;
    out.timestamp = block.back().timestamp;
    return out;
}

response acquire_vna_block(const tap_set &taps, const vna_config &config, const noise_params &noise,
                           std::uint64_t first_draw, std::size_t block_size, double timestamp)
{
    config.validate();
    noise.validate();
    if (block_size < 1)
        throw argument_error("block acquisition: block size must be >= 1");
    const cvec clean = taps_to_frequency_response(taps, config.grid);

    std::vector<response> block(block_size);
    for (std::size_t b = 0; b < block_size; ++b)
    {
        const auto noisy = apply_measurement_noise(clean, noise, first_draw + b);
        block[b].values = smooth_frequency(magnitudes(noisy), config.smoothing_window);
        block[b].source = frontend::vna;
        block[b].timestamp = timestamp;
    }
    return block_size == 1 ? std::move(block.front()) : block_average(block);
}

response acquire_uwb_block(const tap_set &taps, const uwb_config &config, const noise_params &noise,
                           std::uint64_t first_draw, std::size_t block_size, double timestamp)
{
    config.validate();
    noise.validate();
    if (block_size < 1)
        throw argument_error("block acquisition: block size must be >= 1");
    const cvec clean = uwb_clean_cirs(taps, config);

    std::vector<response> block(block_size);
    for (std::size_t b = 0; b < block_size; ++b)
    {
        block[b].values = uwb_extract(apply_measurement_noise(clean, noise, first_draw + b), config);
        block[b].source = frontend::uwb;
        block[b].timestamp = timestamp;
    }
    return block_size == 1 ? std::move(block.front()) : block_average(block);
}

} // namespace atr
