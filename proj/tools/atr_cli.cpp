// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// atr: experiment runner and trace tooling.
//
//   atr simulate <scenario> [--spec f] [--seed n] [--out dir] [--frontend f] [--no-mask]
//   atr provision --trace f [--spec f] [--out dir] [--no-mask]
//   atr monitor   --state f --trace f [--out dir]
//   atr replay    --trace f [--spec f] [--out dir] [--frontend f] [--no-mask]
//   atr report    --in f [--out dir]
//
// Exit codes: 0 all checks passed, 2 a detection target was missed, 1 error.

#include "atr/errors.hpp"
#include "atr/harness/experiment_spec.hpp"
#include "atr/harness/scenarios.hpp"
#include "atr/trace_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atr;
using namespace atr::harness;

namespace
{

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_miss = 2;

struct common_options
{
    std::string spec_file;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string frontend;
    bool no_mask = false;
};

experiment_spec load_spec(const common_options &o, std::optional<scenario> kind)
{
    experiment_spec spec;
    if (!o.spec_file.empty())
    {
        json j;
        try
        {
            j = json::parse(read_text(o.spec_file));
        }
        catch (const json::parse_error &e)
        {
            throw config_error("spec file '" + o.spec_file + "': " + e.what());
        }
        spec = spec_from_json(j, kind, o.seed);
    }
    else
    {
        if (!o.seed)
            throw config_error("a seed is required (--seed or a spec file with \"seed\")");
        spec = default_spec(kind.value_or(scenario::longterm), *o.seed);
    }
    if (!o.frontend.empty())
        spec.frontends = frontend_choice_from_string(o.frontend);
    if (o.no_mask)
        spec.masked = false;
    spec.validate();
    return spec;
}

monitor_config effective_monitor(const experiment_spec &spec)
{
    auto cfg = spec.monitor;
    if (!spec.masked)
        cfg.drop_fraction = 0.0;
    return cfg;
}

std::size_t response_length(const experiment_spec &spec, frontend fe)
{
    return fe == frontend::vna ? spec.vna.grid.n_points : spec.uwb.response_length();
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

void print_checks(const scenario_report &r)
{
    for (const auto &c : r.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
}

void print_detection(const detection_report &r)
{
    std::cout << r.frontend << (r.masked ? " masked" : " unmasked") << ": " << r.detected_count << "/" << r.total
              << " holes detected, per round " << r.min_round_detected << "-" << r.max_round_detected << " over "
              << r.rounds << " rounds at zero-false-positive threshold " << format_double(r.threshold) << "; "
              << r.false_positive_count << " intra above the provisioning threshold "
              << format_double(r.monitor_threshold) << "\n";
}

void export_detection(const detection_report &r, const fs::path &dir, const std::string &stem)
{
    write_json(dir / (stem + ".json"), to_json(r));
    export_report_csv(r, dir / (stem + "_holes.csv"));
    export_bands_csv(r, dir / (stem + "_bands.csv"));
}

std::string detection_stem(const detection_report &r)
{
    return "detection_" + r.frontend + (r.masked ? "_masked" : "_unmasked");
}

int cmd_simulate(const std::string &name, const common_options &o)
{
    const auto spec = load_spec(o, scenario_from_string(name));
    const fs::path out = o.out_dir;
    fs::create_directories(out);

    scenario_report rep;
    if (spec.kind == scenario::longterm)
    {
        longterm_streams streams;
        rep = run_longterm(spec, &streams);
        if (!streams.vna.empty())
            write_trace(out / "trace_vna.jsonl", streams.vna);
        if (!streams.uwb.empty())
            write_trace(out / "trace_uwb.jsonl", streams.uwb);
        for (const auto &d : rep.detections)
        {
            export_detection(d, out, detection_stem(d));
            print_detection(d);
        }
    }
    else
        rep = run(spec);

    write_json(out / "spec.json", to_json(spec));
    write_json(out / "report.json", to_json(rep));
    print_checks(rep);
    return rep.passed() ? exit_ok : exit_miss;
}

int cmd_provision(const std::string &trace, const common_options &o)
{
    const auto spec = load_spec(o, std::nullopt);
    const auto cfg = effective_monitor(spec);
    const auto records = read_trace(trace);
    if (records.size() < cfg.provisioning_count)
        throw state_error("trace holds " + std::to_string(records.size()) + " records, provisioning needs " +
                          std::to_string(cfg.provisioning_count));

    monitor m(cfg);
    for (std::size_t i = 0; i < cfg.provisioning_count; ++i)
        m.ingest_provisioning(records[i].to_response());
    m.finalize_provisioning();

    fs::create_directories(o.out_dir);
    write_json(fs::path(o.out_dir) / "monitor.json", to_json(m.state()));
    std::cout << "provisioned from " << cfg.provisioning_count << " responses, threshold "
              << format_double(*m.state().threshold) << ", " << m.state().mask->kept() << " of "
              << m.state().mask->size() << " indices kept\n";
    return exit_ok;
}

int cmd_monitor(const std::string &state_file, const std::string &trace, const common_options &o)
{
    auto m = monitor::restore(monitor_state_from_json(json::parse(read_text(state_file))));
    const auto records = read_trace(trace);

    std::string lines;
    std::size_t alarms = 0;
    for (const auto &rec : records)
    {
        const auto v = m.ingest(rec.to_response());
        alarms += v.tampered ? 1 : 0;
        lines += json{{"timestamp", rec.timestamp},
                      {"mnd", v.mnd_value},
                      {"tampered", v.tampered},
                      {"phase", std::string(to_string(v.phase_after))}}
                     .dump() +
                 "\n";
    }

    const fs::path out = o.out_dir;
    fs::create_directories(out);
    write_text(out / "verdicts.jsonl", lines);
    write_json(out / "monitor.json", to_json(m.state()));
    std::cout << records.size() << " responses ingested, " << alarms << " above threshold, phase "
              << to_string(m.current_phase()) << "\n";
    return exit_ok;
}

int cmd_replay(const std::string &trace, const common_options &o)
{
    const auto records = read_trace(trace);
    const auto spec = load_spec(o, std::nullopt);
    std::optional<std::size_t> length;
    if (!o.frontend.empty())
        length = response_length(spec, frontend_from_string(o.frontend));
    else if (!records.empty())
        length = response_length(spec, frontend_from_string(records.front().frontend));

    const auto ev = evaluate_stream(records, effective_monitor(spec), length, spec.params.band_width);
    const fs::path out = o.out_dir;
    fs::create_directories(out);
    export_detection(ev.report, out, "replay");
    print_detection(ev.report);
    return exit_ok;
}

int cmd_report(const std::string &in, const common_options &o)
{
    const auto j = json::parse(read_text(in));
    const fs::path out = o.out_dir;
    if (j.contains("checks"))
    {
        for (const auto &c : j.at("checks"))
            std::cout << (c.at("passed").get<bool>() ? "PASS " : "FAIL ") << c.at("name").get<std::string>() << ": "
                      << c.at("detail").get<std::string>() << "\n";
        for (const auto &d : j.at("detections"))
        {
            const auto r = detection_report_from_json(d);
            print_detection(r);
            fs::create_directories(out);
            export_report_csv(r, out / (detection_stem(r) + "_holes.csv"));
            export_bands_csv(r, out / (detection_stem(r) + "_bands.csv"));
        }
        return j.value("passed", false) ? exit_ok : exit_miss;
    }
    const auto r = detection_report_from_json(j);
    print_detection(r);
    fs::create_directories(out);
    export_report_csv(r, out / (detection_stem(r) + "_holes.csv"));
    export_bands_csv(r, out / (detection_stem(r) + "_bands.csv"));
    return exit_ok;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Anti-tamper radio simulator and trace tooling"};
    app.require_subcommand(1);

    common_options o;
    const auto add_common = [&](CLI::App *sub, bool with_frontend) {
        sub->add_option("--spec", o.spec_file, "Experiment spec (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed, overrides the experiment spec");
        sub->add_option("--out", o.out_dir, "Output directory");
        if (with_frontend)
            sub->add_option("--frontend", o.frontend, "vna, uwb or both")
                ->check(CLI::IsMember({"vna", "uwb", "both"}));
        sub->add_flag("--no-mask", o.no_mask, "Disable spectrum selection");
    };

    std::string scenario_name, trace, state_file, in;

    auto *sim = app.add_subcommand("simulate", "Run a scenario and write its report");
    sim->add_option("scenario", scenario_name,
                    "depth_sweep, diameter_sweep, loading_comparison, heatmap, server_states, longterm, lid_removal")
        ->required();
    add_common(sim, true);

    auto *prov = app.add_subcommand("provision", "Provision a monitor from the head of a trace");
    prov->add_option("--trace", trace, "Trace file (JSON Lines)")->required()->check(CLI::ExistingFile);
    add_common(prov, false);

    auto *mon = app.add_subcommand("monitor", "Feed a trace through a provisioned monitor");
    mon->add_option("--state", state_file, "Monitor snapshot")->required()->check(CLI::ExistingFile);
    mon->add_option("--trace", trace, "Trace file (JSON Lines)")->required()->check(CLI::ExistingFile);
    mon->add_option("--out", o.out_dir, "Output directory");

    auto *rep = app.add_subcommand("replay", "Provision, monitor and score a labelled trace");
    rep->add_option("--trace", trace, "Trace file (JSON Lines)")->required()->check(CLI::ExistingFile);
    add_common(rep, true);

    auto *report = app.add_subcommand("report", "Summarize a report and export CSV tables");
    report->add_option("--in", in, "report.json or a detection report")->required()->check(CLI::ExistingFile);
    report->add_option("--out", o.out_dir, "Output directory");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_error;
    }

    // provision/replay fall back to the long-term defaults when no spec is given
    if ((prov->parsed() || rep->parsed()) && o.spec_file.empty() && !o.seed)
        o.seed = 1;

    try
    {
        if (sim->parsed())
            return cmd_simulate(scenario_name, o);
        if (prov->parsed())
            return cmd_provision(trace, o);
        if (mon->parsed())
            return cmd_monitor(state_file, trace, o);
        if (rep->parsed())
            return cmd_replay(trace, o);
        if (report->parsed())
            return cmd_report(in, o);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
