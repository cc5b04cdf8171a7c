// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Response comparison and provisioning-based spectrum selection.
//
// Per-index distance between a response h and the reference r:
//
//     d_k = 1 - 2 sqrt(h_k^2 r_k^2) / (h_k^2 + r_k^2),   d_k := 0 if h_k = r_k = 0
//
// The mean normalized deviation (MND) is the mean of d_k over all indices or
// over the indices kept by a selection mask.

#pragma once

#include "atr/acquisition.hpp"

#include <optional>
#include <span>
#include <vector>

namespace atr
{

struct selection_mask
{
    std::vector<bool> keep;
    std::vector<double> alpha;
    double drop_fraction = 0.0;

    std::size_t size() const noexcept { return keep.size(); }
    std::size_t kept() const noexcept;
    bool operator==(const selection_mask &) const = default;
};

struct reference_response
{
    std::vector<double> values;
    double captured_at = 0.0;

    bool operator==(const reference_response &) const = default;
};

double channel_distance(double h, double h0) noexcept;
std::vector<double> channel_distance(std::span<const double> h_t, std::span<const double> h_t0);

double mnd(std::span<const double> h_t, std::span<const double> h_t0, const selection_mask *mask = nullptr);
inline double mnd(std::span<const double> h_t, std::span<const double> h_t0, const std::optional<selection_mask> &mask)
{
    return mnd(h_t, h_t0, mask ? &*mask : nullptr);
}

// alpha_k = max_m d_k(provisioning[m], reference)
std::vector<double> alpha_profile(const reference_response &reference, std::span<const response> provisioning);

// Drops floor(drop_fraction * L) indices with the largest alpha. Among equal
// alpha values the higher index is dropped first.
selection_mask build_mask(std::span<const double> alpha, double drop_fraction = 0.3);

} // namespace atr
