// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Tamper monitor lifecycle.
//
//   provisioning --finalize--> armed --(mnd > threshold)--> alarm
//        |                       |                            |
//        +-------power_loss------+------------+---------------+--> integrity_lost
//
// Alarm and integrity_lost are absorbing. The monitor consumes responses that
// are already block-averaged by the acquisition path.

#pragma once

#include "atr/acquisition.hpp"
#include "atr/detection.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace atr
{

enum class phase
{
    provisioning,
    armed,
    alarm,
    integrity_lost
};

std::string_view to_string(phase p) noexcept;
phase phase_from_string(std::string_view name);

struct monitor_config
{
    std::size_t provisioning_count = 300; // M
    double drop_fraction = 0.3;
    std::size_t block_size = 10; // B, used by the acquisition path
    double threshold_safety_factor = 1.0;

    void validate() const;
};

struct verdict
{
    double mnd_value = 0.0;
    bool tampered = false;
    phase phase_after = phase::armed;

    bool operator==(const verdict &) const = default;
};

struct history_entry
{
    double timestamp = 0.0;
    double mnd_value = 0.0;
    bool tampered = false;

    bool operator==(const history_entry &) const = default;
};

struct monitor_state
{
    monitor_config config{};
    atr::phase current = phase::provisioning;
    std::optional<reference_response> reference;
    std::optional<selection_mask> mask;
    std::optional<double> threshold;
    std::vector<response> provisioning_buffer;
    std::vector<history_entry> history;
};

class monitor
{
public:
    explicit monitor(const monitor_config &config);

    // Rebuilds a monitor from a snapshot. Throws config_error if the snapshot
    // violates the phase invariants.
    static monitor restore(monitor_state state);

    // The first response becomes the reference; every response is buffered.
    void ingest_provisioning(const response &r);

    // alpha -> mask -> threshold = safety * max masked MND over the buffer.
    void finalize_provisioning();

    verdict ingest(const response &r);

    void power_loss() noexcept;

    atr::phase current_phase() const noexcept { return state_.current; }
    const monitor_state &state() const noexcept { return state_; }

private:
    monitor_state state_;
};

} // namespace atr
