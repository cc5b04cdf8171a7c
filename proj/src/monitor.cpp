// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/monitor.hpp"

#include "atr/errors.hpp"

#include <algorithm>
#include <string>

namespace atr
{

std::string_view to_string(phase p) noexcept
{
    switch (p)
    {
    case phase::provisioning:
        return "provisioning";
    case phase::armed:
        return "armed";
    case phase::alarm:
        return "alarm";
    case phase::integrity_lost:
        return "integrity_lost";
    }
    return "unknown";
}

phase phase_from_string(std::string_view name)
{
    for (auto p : {phase::provisioning, phase::armed, phase::alarm, phase::integrity_lost})
        if (name == to_string(p))
            return p;
    throw config_error("unknown monitor phase '" + std::string(name) + "'");
}

void monitor_config::validate() const
{
    if (provisioning_count < 1)
        throw config_error("monitor config: provisioning_count must be >= 1");
    if (block_size < 1)
        throw config_error("monitor config: block_size must be >= 1");
    if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
        throw config_error("monitor config: drop_fraction must be within [0, 1)");
    if (!(threshold_safety_factor >= 1.0))
        throw config_error("monitor config: threshold_safety_factor must be >= 1");
}

monitor::monitor(const monitor_config &config)
{
    config.validate();
    state_.config = config;
}

monitor monitor::restore(monitor_state state)
{
    state.config.validate();
    const bool calibrated = state.reference && state.mask && state.threshold;
    const bool needs = state.current == phase::armed || state.current == phase::alarm;
    if (needs && !calibrated)
        throw config_error("monitor snapshot: armed/alarm phase without reference, mask and threshold");
    if (state.current == phase::provisioning && (state.mask || state.threshold))
        throw config_error("monitor snapshot: provisioning phase with a calibrated mask or threshold");
    if (calibrated && state.mask->size() != state.reference->values.size())
        throw config_error("monitor snapshot: mask length does not match the reference");
    monitor m(state.config);
    m.state_ = std::move(state);
    return m;
}

void monitor::ingest_provisioning(const response &r)
{
    if (state_.current != phase::provisioning)
        throw state_error("ingest_provisioning: monitor is " + std::string(to_string(state_.current)));
    r.validate();
    if (!state_.provisioning_buffer.empty() && r.size() != state_.provisioning_buffer.front().size())
        throw argument_error("ingest_provisioning: response length differs from the reference");
    if (!state_.reference)
        state_.reference = reference_response{r.values, r.timestamp};
    state_.provisioning_buffer.push_back(r);
}

void monitor::finalize_provisioning()
{
    if (state_.current != phase::provisioning)
        throw state_error("finalize_provisioning: monitor is " + std::string(to_string(state_.current)));
    if (state_.provisioning_buffer.size() < state_.config.provisioning_count)
        throw state_error("finalize_provisioning: " + std::to_string(state_.provisioning_buffer.size()) + " of " +
                          std::to_string(state_.config.provisioning_count) + " provisioning responses collected");

    const auto alpha = alpha_profile(*state_.reference, state_.provisioning_buffer);
    auto mask = build_mask(alpha, state_.config.drop_fraction);

    double worst = 0.0;
    for (const auto &r : state_.provisioning_buffer)
        worst = std::max(worst, mnd(r.values, state_.reference->values, &mask));

    state_.mask = std::move(mask);
    state_.threshold = state_.config.threshold_safety_factor * worst;
    state_.current = phase::armed;
}

verdict monitor::ingest(const response &r)
{
    if (state_.current != phase::armed && state_.current != phase::alarm)
        throw state_error("ingest: monitor is " + std::string(to_string(state_.current)));
    r.validate();
    if (r.size() != state_.reference->values.size())
        throw argument_error("ingest: response length " + std::to_string(r.size()) + " does not match reference length " +
                             std::to_string(state_.reference->values.size()));

    verdict v;
    v.mnd_value = mnd(r.values, state_.reference->values, &*state_.mask);
    v.tampered = v.mnd_value > *state_.threshold;
    if (v.tampered)
        state_.current = phase::alarm;
    v.phase_after = state_.current;
    state_.history.push_back({r.timestamp, v.mnd_value, v.tampered});
    return v;
}

void monitor::power_loss() noexcept
{
    state_.current = phase::integrity_lost;
}

} // namespace atr
