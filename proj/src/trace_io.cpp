// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/trace_io.hpp"

#include "atr/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace atr
{

using nlohmann::json;

namespace
{

std::vector<double> checked_values(const json &j, const char *what, std::size_t line)
{
    if (!j.is_array())
        throw parse_error(std::string(what) + " must be an array", line);
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto &e : j)
    {
        if (!e.is_number())
            throw parse_error(std::string(what) + " must hold numbers", line);
        v.push_back(e.get<double>());
    }
    return v;
}

template <typename T>
T field(const json &j, const char *key, std::size_t line)
{
    const auto it = j.find(key);
    if (it == j.end())
        throw parse_error(std::string("missing field '") + key + "'", line);
    try
    {
        return it->get<T>();
    }
    catch (const json::exception &e)
    {
        throw parse_error(std::string("bad field '") + key + "': " + e.what(), line);
    }
}

std::ofstream open_out(const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream &out, const std::filesystem::path &path)
{
    out.flush();
    if (!out)
        throw io_error("write to '" + path.string() + "' failed");
}

json quantiles_json(const std::array<double, 4> &q) { return json::array({q[0], q[1], q[2], q[3]}); }

std::array<double, 4> quantiles_from_json(const json &j)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4)
        throw parse_error("quantile band needs 4 values", 0);
    return {v[0], v[1], v[2], v[3]};
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path &path, const std::string &text)
{
    auto out = open_out(path);
    out << text;
    finish(out, path);
}

std::string read_text(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- trace records -----------------------------------------------------

trace_record trace_record::from_response(const response &r, label_map labels)
{
    trace_record rec;
    rec.frontend = std::string(to_string(r.source));
    rec.timestamp = r.timestamp;
    rec.values = r.values;
    rec.labels = std::move(labels);
    return rec;
}

response trace_record::to_response() const
{
    response r;
    r.source = frontend_from_string(frontend);
    r.timestamp = timestamp;
    r.values = values;
    return r;
}

std::optional<double> trace_record::number_label(const std::string &key) const
{
    const auto it = labels.find(key);
    if (it == labels.end() || !std::holds_alternative<double>(it->second))
        return std::nullopt;
    return std::get<double>(it->second);
}

std::optional<std::string> trace_record::text_label(const std::string &key) const
{
    const auto it = labels.find(key);
    if (it == labels.end() || !std::holds_alternative<std::string>(it->second))
        return std::nullopt;
    return std::get<std::string>(it->second);
}

json to_json(const trace_record &r)
{
    json j;
    j["schema_version"] = r.schema_version;
    j["frontend"] = r.frontend;
    j["timestamp"] = r.timestamp;
    j["values"] = r.values;
    if (!r.labels.empty())
    {
        json labels = json::object();
        for (const auto &[k, v] : r.labels)
            std::visit([&](const auto &x) { labels[k] = x; }, v);
        j["labels"] = std::move(labels);
    }
    return j;
}

trace_record trace_record_from_json(const json &j, std::size_t line)
{
    if (!j.is_object())
        throw parse_error("record must be a JSON object", line);
    trace_record r;
    r.schema_version = field<int>(j, "schema_version", line);
    if (r.schema_version != trace_schema_version)
        throw version_error("unsupported trace schema_version " + std::to_string(r.schema_version) + " (expected " +
                                std::to_string(trace_schema_version) + ")",
                            line);
    r.frontend = field<std::string>(j, "frontend", line);
    if (r.frontend != "vna" && r.frontend != "uwb")
        throw parse_error("unknown frontend '" + r.frontend + "'", line);
    r.timestamp = field<double>(j, "timestamp", line);
    const auto it = j.find("values");
    if (it == j.end())
        throw parse_error("missing field 'values'", line);
    r.values = checked_values(*it, "values", line);
    for (double v : r.values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw parse_error("values must be finite and nonnegative", line);

    if (const auto lt = j.find("labels"); lt != j.end())
    {
        if (!lt->is_object())
            throw parse_error("labels must be an object", line);
        for (const auto &[k, v] : lt->items())
        {
            if (v.is_number())
                r.labels[k] = v.get<double>();
            else if (v.is_string())
                r.labels[k] = v.get<std::string>();
            else
                throw parse_error("label '" + k + "' must be a number or a string", line);
        }
    }
    return r;
}

void write_trace(const std::filesystem::path &path, const std::vector<trace_record> &records)
{
    auto out = open_out(path);
    for (const auto &r : records)
    {
        response check = r.to_response();
        check.validate();
        out << to_json(r).dump() << '\n';
    }
    finish(out, path);
}

std::vector<trace_record> read_trace(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open '" + path.string() + "' for reading");

    std::vector<trace_record> records;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text))
    {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try
        {
            j = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            throw parse_error(std::string("malformed record: ") + e.what(), line);
        }
        records.push_back(trace_record_from_json(j, line));
    }
    return records;
}

// ---- detection report --------------------------------------------------

json to_json(const detection_report &r)
{
    json j;
    j["schema_version"] = report_schema_version;
    j["frontend"] = r.frontend;
    j["masked"] = r.masked;
    j["total"] = r.total;
    j["detected_count"] = r.detected_count;
    j["min_round_detected"] = r.min_round_detected;
    j["max_round_detected"] = r.max_round_detected;
    j["rounds"] = r.rounds;
    j["false_positive_count"] = r.false_positive_count;
    j["threshold"] = r.threshold;
    j["monitor_threshold"] = r.monitor_threshold;
    j["ingested"] = r.ingested;
    j["intra_count"] = r.intra_count;
    j["insertion_count"] = r.insertion_count;
    j["holes"] = json::array();
    for (const auto &h : r.holes)
        j["holes"].push_back({{"id", h.id},
                              {"x", h.x},
                              {"y", h.y},
                              {"detected", h.detected},
                              {"insertions", h.insertions},
                              {"detections", h.detections},
                              {"min_insertion_mnd", h.min_insertion_mnd},
                              {"median_insertion_mnd", h.median_insertion_mnd}});
    j["bands"] = json::array();
    for (const auto &b : r.bands)
        j["bands"].push_back({{"t_start", b.t_start},
                              {"t_end", b.t_end},
                              {"n_intra", b.n_intra},
                              {"n_insertion", b.n_insertion},
                              {"intra", quantiles_json(b.intra)},
                              {"insertion", quantiles_json(b.insertion)}});
    return j;
}

detection_report detection_report_from_json(const json &j)
{
    try
    {
        if (j.at("schema_version").get<int>() != report_schema_version)
            throw version_error("unsupported report schema_version", 0);
        detection_report r;
        r.frontend = j.at("frontend").get<std::string>();
        r.masked = j.at("masked").get<bool>();
        r.total = j.at("total").get<std::size_t>();
        r.detected_count = j.at("detected_count").get<std::size_t>();
        r.min_round_detected = j.at("min_round_detected").get<std::size_t>();
        r.max_round_detected = j.at("max_round_detected").get<std::size_t>();
        r.rounds = j.at("rounds").get<std::size_t>();
        r.false_positive_count = j.at("false_positive_count").get<std::size_t>();
        r.threshold = j.at("threshold").get<double>();
        r.monitor_threshold = j.at("monitor_threshold").get<double>();
        r.ingested = j.at("ingested").get<std::size_t>();
        r.intra_count = j.at("intra_count").get<std::size_t>();
        r.insertion_count = j.at("insertion_count").get<std::size_t>();
        for (const auto &h : j.at("holes"))
            r.holes.push_back({h.at("id").get<int>(), h.at("x").get<double>(), h.at("y").get<double>(),
                               h.at("detected").get<bool>(), h.at("insertions").get<std::size_t>(),
                               h.at("detections").get<std::size_t>(), h.at("min_insertion_mnd").get<double>(),
                               h.at("median_insertion_mnd").get<double>()});
        for (const auto &b : j.at("bands"))
            r.bands.push_back({b.at("t_start").get<double>(), b.at("t_end").get<double>(),
                               b.at("n_intra").get<std::size_t>(), b.at("n_insertion").get<std::size_t>(),
                               quantiles_from_json(b.at("intra")), quantiles_from_json(b.at("insertion"))});
        return r;
    }
    catch (const json::exception &e)
    {
        throw parse_error(std::string("malformed detection report: ") + e.what(), 0);
    }
}

void export_report_csv(const detection_report &report, const std::filesystem::path &path)
{
    auto out = open_out(path);
    out << "hole,x,y,detected,detections,insertions,min_insertion_mnd,median_insertion_mnd\n";
    for (const auto &h : report.holes)
        out << h.id << ',' << format_double(h.x) << ',' << format_double(h.y) << ',' << (h.detected ? 1 : 0) << ','
            << h.detections << ',' << h.insertions << ',' << format_double(h.min_insertion_mnd) << ','
            << format_double(h.median_insertion_mnd) << '\n';
    finish(out, path);
}

void export_bands_csv(const detection_report &report, const std::filesystem::path &path)
{
    auto out = open_out(path);
    out << "t_start,t_end,n_intra,intra_q25,intra_q50,intra_q75,intra_q99,"
           "n_insertion,insertion_q25,insertion_q50,insertion_q75,insertion_q99\n";
    for (const auto &b : report.bands)
    {
        out << format_double(b.t_start) << ',' << format_double(b.t_end) << ',' << b.n_intra;
        for (double q : b.intra)
            out << ',' << format_double(q);
        out << ',' << b.n_insertion;
        for (double q : b.insertion)
            out << ',' << format_double(q);
        out << '\n';
    }
    finish(out, path);
}

// ---- monitor snapshot --------------------------------------------------

json to_json(const monitor_state &s)
{
    json j;
    j["schema_version"] = trace_schema_version;
    j["phase"] = std::string(to_string(s.current));
    j["config"] = {{"provisioning_count", s.config.provisioning_count},
                   {"drop_fraction", s.config.drop_fraction},
                   {"block_size", s.config.block_size},
                   {"threshold_safety_factor", s.config.threshold_safety_factor}};
    if (s.reference)
        j["reference"] = {{"values", s.reference->values}, {"captured_at", s.reference->captured_at}};
    if (s.mask)
        j["mask"] = {{"keep", s.mask->keep}, {"alpha", s.mask->alpha}, {"drop_fraction", s.mask->drop_fraction}};
    if (s.threshold)
        j["threshold"] = *s.threshold;
    j["provisioning_buffer"] = json::array();
    for (const auto &r : s.provisioning_buffer)
        j["provisioning_buffer"].push_back(to_json(trace_record::from_response(r)));
    j["history"] = json::array();
    for (const auto &h : s.history)
        j["history"].push_back({h.timestamp, h.mnd_value, h.tampered});
    return j;
}

monitor_state monitor_state_from_json(const json &j)
{
    try
    {
        if (j.at("schema_version").get<int>() != trace_schema_version)
            throw version_error("unsupported monitor snapshot schema_version", 0);
        monitor_state s;
        s.current = phase_from_string(j.at("phase").get<std::string>());
        const auto &c = j.at("config");
        s.config.provisioning_count = c.at("provisioning_count").get<std::size_t>();
        s.config.drop_fraction = c.at("drop_fraction").get<double>();
        s.config.block_size = c.at("block_size").get<std::size_t>();
        s.config.threshold_safety_factor = c.at("threshold_safety_factor").get<double>();
        if (j.contains("reference"))
            s.reference = reference_response{j["reference"].at("values").get<std::vector<double>>(),
                                             j["reference"].at("captured_at").get<double>()};
        if (j.contains("mask"))
        {
            selection_mask m;
            m.keep = j["mask"].at("keep").get<std::vector<bool>>();
            m.alpha = j["mask"].at("alpha").get<std::vector<double>>();
            m.drop_fraction = j["mask"].at("drop_fraction").get<double>();
            s.mask = std::move(m);
        }
        if (j.contains("threshold"))
            s.threshold = j["threshold"].get<double>();
        std::size_t i = 0;
        for (const auto &r : j.at("provisioning_buffer"))
            s.provisioning_buffer.push_back(trace_record_from_json(r, ++i).to_response());
        for (const auto &h : j.at("history"))
            s.history.push_back({h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<bool>()});
        return s;
    }
    catch (const json::exception &e)
    {
        throw parse_error(std::string("malformed monitor snapshot: ") + e.what(), 0);
    }
}

} // namespace atr
