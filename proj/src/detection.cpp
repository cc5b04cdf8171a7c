// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/detection.hpp"

#include "atr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atr
{

namespace
{

void check_pair(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw argument_error("distance: length mismatch (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + ")");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i] >= 0.0) || !(b[i] >= 0.0) || !std::isfinite(a[i]) || !std::isfinite(b[i]))
            throw argument_error("distance: inputs must be finite and nonnegative (index " + std::to_string(i) + ")");
}

} // namespace

std::size_t selection_mask::kept() const noexcept
{
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

double channel_distance(double h, double h0) noexcept
{
    // 1 - 2 h h0 / (h^2 + h0^2) == (h - h0)^2 / (h^2 + h0^2) for h, h0 >= 0.
    // The right-hand form is exactly zero iff h == h0 and needs no clamping
    // from below; scaling by the larger magnitude avoids overflow.
    const double m = std::max(h, h0);
    if (m == 0.0)
        return 0.0;
    const double u = h / m;
    const double v = h0 / m;
    const double diff = u - v;
    return std::min(1.0, diff * diff / (u * u + v * v));
}

std::vector<double> channel_distance(std::span<const double> h_t, std::span<const double> h_t0)
{
    check_pair(h_t, h_t0);
    std::vector<double> d(h_t.size());
    for (std::size_t k = 0; k < d.size(); ++k)
        d[k] = channel_distance(h_t[k], h_t0[k]);
    return d;
}

double mnd(std::span<const double> h_t, std::span<const double> h_t0, const selection_mask *mask)
{
    check_pair(h_t, h_t0);
    if (mask && mask->size() != h_t.size())
        throw argument_error("mnd: mask length does not match response length");

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < h_t.size(); ++k)
    {
        if (mask && !mask->keep[k])
            continue;
        sum += channel_distance(h_t[k], h_t0[k]);
        ++count;
    }
    if (count == 0)
        throw degenerate_input_error("mnd: no indices to average over");
    return sum / static_cast<double>(count);
}

std::vector<double> alpha_profile(const reference_response &reference, std::span<const response> provisioning)
{
    if (provisioning.empty())
        throw argument_error("alpha profile: empty provisioning set");
    std::vector<double> alpha(reference.values.size(), 0.0);
    for (const auto &r : provisioning)
    {
        const auto d = channel_distance(r.values, reference.values);
        for (std::size_t k = 0; k < alpha.size(); ++k)
            alpha[k] = std::max(alpha[k], d[k]);
    }
    return alpha;
}

selection_mask build_mask(std::span<const double> alpha, double drop_fraction)
{
    if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
        throw argument_error("build mask: drop fraction must be within [0, 1)");
    for (double a : alpha)
        if (!std::isfinite(a))
            throw argument_error("build mask: alpha must be finite");

    const std::size_t n = alpha.size();
    const auto n_drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Largest alpha first; on ties the higher index comes first.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (alpha[a] != alpha[b])
            return alpha[a] > alpha[b];
        return a > b;
    });

    selection_mask mask;
    mask.keep.assign(n, true);
    mask.alpha.assign(alpha.begin(), alpha.end());
    mask.drop_fraction = drop_fraction;
    for (std::size_t i = 0; i < n_drop; ++i)
        mask.keep[order[i]] = false;
    return mask;
}

} // namespace atr
