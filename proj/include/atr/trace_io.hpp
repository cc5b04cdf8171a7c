// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Trace and report persistence. The formats are documented in
// docs/formats.md and are the public data contract of the tools.
//
// Traces are JSON Lines: one record per line, UTF-8, doubles written with the
// shortest representation that parses back to the same bits.

#pragma once

#include "atr/acquisition.hpp"
#include "atr/monitor.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace atr
{

inline constexpr int trace_schema_version = 1;
inline constexpr int report_schema_version = 1;

using label_value = std::variant<double, std::string>;
using label_map = std::map<std::string, label_value>;

struct trace_record
{
    int schema_version = trace_schema_version;
    std::string frontend = "vna";
    double timestamp = 0.0;
    std::vector<double> values;
    label_map labels;

    static trace_record from_response(const response &r, label_map labels = {});
    response to_response() const;

    std::optional<double> number_label(const std::string &key) const;
    std::optional<std::string> text_label(const std::string &key) const;

    bool operator==(const trace_record &) const = default;
};

nlohmann::json to_json(const trace_record &r);
trace_record trace_record_from_json(const nlohmann::json &j, std::size_t line = 0);

void write_trace(const std::filesystem::path &path, const std::vector<trace_record> &records);
std::vector<trace_record> read_trace(const std::filesystem::path &path);

// ---- detection report --------------------------------------------------

struct hole_result
{
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    bool detected = false;
    std::size_t insertions = 0;
    std::size_t detections = 0;
    double min_insertion_mnd = 0.0;
    double median_insertion_mnd = 0.0;

    bool operator==(const hole_result &) const = default;
};

// MND distribution over one time window. Quantiles are the 25/50/75/99 %
// points of intra and insertion MND inside the window.
struct quantile_band
{
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t n_intra = 0;
    std::size_t n_insertion = 0;
    std::array<double, 4> intra{};
    std::array<double, 4> insertion{};

    bool operator==(const quantile_band &) const = default;
};

struct detection_report
{
    std::string frontend;
    bool masked = true;
    std::size_t total = 0;
    std::size_t detected_count = 0;       // holes detected in at least half of their insertions
    std::size_t min_round_detected = 0;   // worst probing round
    std::size_t max_round_detected = 0;   // best probing round
    std::size_t rounds = 0;
    std::size_t false_positive_count = 0; // intra responses above the monitor threshold
    double threshold = 0.0;               // zero-false-positive threshold used for counting
    double monitor_threshold = 0.0;       // threshold calibrated during provisioning
    std::size_t ingested = 0;
    std::size_t intra_count = 0;
    std::size_t insertion_count = 0;
    std::vector<hole_result> holes;
    std::vector<quantile_band> bands;

    bool operator==(const detection_report &) const = default;
};

nlohmann::json to_json(const detection_report &r);
detection_report detection_report_from_json(const nlohmann::json &j);

// Columns: hole,x,y,detected,detections,insertions,min_insertion_mnd,median_insertion_mnd
void export_report_csv(const detection_report &report, const std::filesystem::path &path);
// Columns: t_start,t_end,n_intra,intra_q25,intra_q50,intra_q75,intra_q99,
//          n_insertion,insertion_q25,insertion_q50,insertion_q75,insertion_q99
void export_bands_csv(const detection_report &report, const std::filesystem::path &path);

// ---- monitor snapshot --------------------------------------------------

nlohmann::json to_json(const monitor_state &state);
monitor_state monitor_state_from_json(const nlohmann::json &j);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

} // namespace atr
