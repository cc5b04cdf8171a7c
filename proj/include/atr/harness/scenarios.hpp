// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Scenario runners. Each runner is a pure function of the experiment spec:
// two runs with the same spec produce identical reports.

#pragma once

#include "atr/harness/experiment_spec.hpp"
#include "atr/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace atr::harness
{

// One scenario assertion. Failed checks map to exit code 2 in the CLI.
struct check
{
    std::string name;
    bool passed = false;
    std::string detail;
};

struct scenario_report
{
    harness::scenario kind = scenario::depth_sweep;
    std::uint64_t seed = 0;
    std::vector<check> checks;
    nlohmann::json data = nlohmann::json::object(); // scenario-specific series
    std::vector<detection_report> detections;       // long-term and heatmap runs

    bool passed() const noexcept;
    const check *find(const std::string &name) const noexcept;
};

nlohmann::json to_json(const scenario_report &r);

// ---- hole layouts ------------------------------------------------------

// 26 x 16 grid over the whole lid, row-major, ids 0..415.
std::vector<position> box_holes();
// Server lid: 13 x 9 probing holes over the sensitive left part (ids 0..116)
// followed by 53 holes over the shadowed right part (ids 117..169).
std::vector<position> server_holes();
inline constexpr std::size_t server_sensitive_count = 117;

// ---- runners -----------------------------------------------------------

scenario_report run_depth_sweep(const experiment_spec &spec);
scenario_report run_diameter_sweep(const experiment_spec &spec);
scenario_report run_loading_comparison(const experiment_spec &spec);
scenario_report run_heatmap(const experiment_spec &spec);
scenario_report run_server_states(const experiment_spec &spec);
struct longterm_streams;
// The simulated streams are handed out through `streams` when non-null.
scenario_report run_longterm(const experiment_spec &spec, longterm_streams *streams = nullptr);
scenario_report run_lid_removal(const experiment_spec &spec);

// Dispatches on spec.kind.
scenario_report run(const experiment_spec &spec);

// ---- long-term stream --------------------------------------------------

// Labelled responses of the long-term scenario for one frontend: the first
// monitor.provisioning_count records are provisioning, followed by deployment
// records alternating intra (event "intra") and needle insertions (event
// "insertion", labels hole/x/y/round).
struct longterm_streams
{
    std::vector<trace_record> vna;
    std::vector<trace_record> uwb;
};

longterm_streams simulate_longterm(const experiment_spec &spec);

struct stream_evaluation
{
    detection_report report;
    std::vector<verdict> verdicts; // one per deployment record
    monitor_state final_state;
};

// Feeds records through a monitor exactly as live ingestion: the first
// provisioning_count records provision it, the rest are ingested. Labels are
// read only to score the verdicts. `expected_length` guards against traces of
// a different frontend configuration (argument_error on mismatch).
stream_evaluation evaluate_stream(const std::vector<trace_record> &records, const monitor_config &config,
                                  std::optional<std::size_t> expected_length = std::nullopt,
                                  double band_width = 3.0 * 3600.0);

stream_evaluation replay(const std::filesystem::path &trace, const monitor_config &config,
                         std::optional<std::size_t> expected_length = std::nullopt,
                         double band_width = 3.0 * 3600.0);

} // namespace atr::harness
