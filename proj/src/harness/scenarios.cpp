// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#include "atr/harness/scenarios.hpp"

#include "atr/detection.hpp"
#include "atr/errors.hpp"
#include "atr/harness/stats.hpp"
#include "atr/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace atr::harness
{

using nlohmann::json;

namespace
{

constexpr std::uint64_t salt_vna_stream = 0x766E61ULL;
constexpr std::uint64_t salt_uwb_stream = 0x757762ULL;
constexpr std::uint64_t salt_fan_phase = 0x66616E70ULL;
constexpr std::uint64_t salt_load = 0x6C6F6164ULL;
constexpr std::uint64_t salt_run = 0x72756EULL;
constexpr std::uint64_t salt_pick = 0x7069636BULL;
constexpr std::uint64_t salt_spread = 0x737072ULL;

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void add_check(scenario_report &r, std::string name, bool ok, std::string detail)
{
    // per-item details are built as "a; b; "
    if (detail.ends_with("; "))
        detail.resize(detail.size() - 2);
    r.checks.push_back({std::move(name), ok, std::move(detail)});
}

frontend sweep_frontend(const experiment_spec &spec)
{
    return spec.frontends == frontend_choice::uwb ? frontend::uwb : frontend::vna;
}

// Block-averaged acquisitions on one noise stream.
class sampler
{
  public:
    sampler(const experiment_spec &spec, frontend fe, std::uint64_t stream)
        : spec_(spec), fe_(fe), block_(spec.monitor.block_size)
    {
        noise_.measurement_noise_std = fe == frontend::vna ? spec.vna_noise_std : spec.uwb_noise_std;
        noise_.rng_seed = rng::mix(spec.seed, fe == frontend::vna ? salt_vna_stream : salt_uwb_stream, stream);
    }

    response take(const tap_set &taps, double timestamp = 0.0)
    {
        auto r = fe_ == frontend::vna ? acquire_vna_block(taps, spec_.vna, noise_, draw_, block_, timestamp)
                                      : acquire_uwb_block(taps, spec_.uwb, noise_, draw_, block_, timestamp);
        draw_ += block_;
        return r;
    }

  private:
    const experiment_spec &spec_;
    frontend fe_;
    std::size_t block_;
    noise_params noise_;
    std::uint64_t draw_ = 0;
};

double distance(const response &a, const response &ref) { return mnd(a.values, ref.values); }

tap_set needled(const tap_set &taps, const experiment_spec &spec, position p, double diameter, double depth)
{
    return apply_perturbation(taps, perturbation_event::needle(p, diameter, depth, spec.params.dead_zone),
                              spec.coupling);
}

std::vector<double> column(const std::vector<std::vector<double>> &rows, std::size_t k)
{
    std::vector<double> c;
    c.reserve(rows.size());
    for (const auto &r : rows)
        c.push_back(r[k]);
    return c;
}

bool on_border(std::size_t id)
{
    const std::size_t i = id % 26, j = id / 26;
    return i == 0 || i == 25 || j == 0 || j == 15;
}

// Server idle with PSU and mainboard powered.
drift_state powered(double temperature, double load, double fan_phase)
{
    drift_state d;
    d.temperature_offset = temperature;
    d.cpu_load = load;
    d.fan_phase = fan_phase;
    d.psu_on = true;
    d.booted = true;
    return d;
}

double fan_phase(std::uint64_t seed, std::uint64_t index) { return two_pi * rng::to_unit(rng::mix(seed, salt_fan_phase, index)); }

std::array<double, 4> band_quantiles(const std::vector<double> &v)
{
    if (v.empty())
        return {0.0, 0.0, 0.0, 0.0};
    return {stats::quantile(v, 0.25), stats::quantile(v, 0.5), stats::quantile(v, 0.75), stats::quantile(v, 0.99)};
}

} // namespace

// ---- report ------------------------------------------------------------

bool scenario_report::passed() const noexcept
{
    return std::all_of(checks.begin(), checks.end(), [](const check &c) { return c.passed; });
}

const check *scenario_report::find(const std::string &name) const noexcept
{
    for (const auto &c : checks)
        if (c.name == name)
            return &c;
    return nullptr;
}

json to_json(const scenario_report &r)
{
    json j;
    j["schema_version"] = report_schema_version;
    j["scenario"] = std::string(to_string(r.kind));
    j["seed"] = r.seed;
    j["passed"] = r.passed();
    j["checks"] = json::array();
    for (const auto &c : r.checks)
        j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["data"] = r.data;
    j["detections"] = json::array();
    for (const auto &d : r.detections)
        j["detections"].push_back(to_json(d));
    return j;
}

// ---- layouts -----------------------------------------------------------

std::vector<position> box_holes()
{
    std::vector<position> p;
    p.reserve(26 * 16);
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 26; ++i)
            p.push_back({(i + 0.5) / 26.0, (j + 0.5) / 16.0});
    return p;
}

std::vector<position> server_holes()
{
    std::vector<position> p;
    p.reserve(170);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 13; ++i)
            p.push_back({0.04 + 0.6 * i / 12.0, 0.06 + 0.88 * j / 8.0});
    // 53 shadowed holes: 6 columns of 9 minus the last.
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 6; ++i)
        {
            if (p.size() == 170)
                break;
            p.push_back({0.72 + 0.25 * i / 5.0, 0.06 + 0.88 * j / 8.0});
        }
    return p;
}

// ---- depth sweep -------------------------------------------------------

scenario_report run_depth_sweep(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::depth_sweep, spec.seed, {}, json::object(), {}};

    const auto taps = synth_enclosure(spec.enclosure);
    const auto all = box_holes();
    std::vector<double> depths;
    for (double d = 0.0; d <= p.max_depth + 1e-9; d += p.depth_step)
        depths.push_back(d);

    sampler s(spec, sweep_frontend(spec), 1);
    std::vector<std::size_t> ids;
    std::vector<double> intra;
    std::vector<std::vector<double>> curves;
    for (std::size_t h = 0; h < p.sweep_holes; ++h)
    {
        const std::size_t id = h * all.size() / p.sweep_holes;
        const auto ref = s.take(taps);
        intra.push_back(distance(s.take(taps), ref));
        std::vector<double> curve;
        for (double d : depths)
            curve.push_back(distance(s.take(needled(taps, spec, all[id], p.needle_diameter, d)), ref));
        ids.push_back(id);
        curves.push_back(std::move(curve));
    }

    std::vector<double> mean_curve;
    for (std::size_t k = 0; k < depths.size(); ++k)
        mean_curve.push_back(stats::mean(column(curves, k)));
    const double intra_mean = stats::mean(intra);

    // below the dead zone the needle is invisible
    bool flat = true;
    std::string flat_detail;
    for (std::size_t k = 0; k < depths.size(); ++k)
        if (depths[k] <= p.dead_zone)
        {
            const double ratio = mean_curve[k] / intra_mean;
            flat = flat && ratio >= 0.8 && ratio <= 1.25;
            flat_detail += num(depths[k]) + " mm: " + num(ratio) + "x intra; ";
        }
    add_check(rep, "below_dead_zone_matches_intra", flat, flat_detail);

    std::vector<double> dx, dy;
    for (std::size_t k = 0; k < depths.size(); ++k)
        if (depths[k] > p.dead_zone)
        {
            dx.push_back(depths[k]);
            dy.push_back(mean_curve[k]);
        }
    const double rho = dx.size() >= 2 ? stats::spearman(dx, dy) : 0.0;
    add_check(rep, "monotone_beyond_dead_zone", rho > 0.95, "spearman rho " + num(rho));

    std::optional<double> onset;
    for (std::size_t k = 0; k < depths.size() && !onset; ++k)
        if (mean_curve[k] > 2.0 * intra_mean)
            onset = depths[k];
    add_check(rep, "onset_after_dead_zone", onset && *onset > p.dead_zone && *onset > 0.0,
              onset ? "first depth above 2x intra: " + num(*onset) + " mm" : "never above 2x intra");

    // deepest vs. the depth nearest 16 mm, per hole
    const std::size_t deep = depths.size() - 1;
    std::size_t shallow = 0;
    for (std::size_t k = 0; k < depths.size(); ++k)
        if (std::abs(depths[k] - 16.0) < std::abs(depths[shallow] - 16.0))
            shallow = k;
    std::size_t rising = 0;
    for (const auto &c : curves)
        rising += c[deep] > c[shallow] ? 1 : 0;
    const double frac = static_cast<double>(rising) / static_cast<double>(curves.size());
    add_check(rep, "deep_exceeds_shallow", frac >= 0.95,
              num(frac * 100.0) + " % of holes rise from " + num(depths[shallow]) + " to " + num(depths[deep]) + " mm");

    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))},
                {"depths_mm", depths},
                {"mean_mnd", mean_curve},
                {"intra_mean", intra_mean},
                {"intra", intra},
                {"holes", ids},
                {"curves", curves}};
    return rep;
}

// ---- diameter sweep ----------------------------------------------------

scenario_report run_diameter_sweep(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::diameter_sweep, spec.seed, {}, json::object(), {}};

    const auto taps = synth_enclosure(spec.enclosure);
    const auto all = box_holes();
    const std::size_t first = (26 - p.diameter_holes) / 2;
    sampler s(spec, sweep_frontend(spec), 2);

    std::vector<double> control, intra;
    json per_depth = json::array();
    bool linear = true, thick = true;
    std::string linear_detail, thick_detail;

    for (double depth : p.sweep_depths)
    {
        std::vector<std::vector<double>> rows; // hole x diameter
        for (std::size_t h = 0; h < p.diameter_holes; ++h)
        {
            const auto where = all[8 * 26 + first + h];
            const auto ref = s.take(taps);
            intra.push_back(distance(s.take(taps), ref));
            std::vector<double> row;
            for (double dia : p.diameters)
                row.push_back(distance(s.take(needled(taps, spec, where, dia, depth)), ref));
            rows.push_back(std::move(row));
        }

        std::vector<double> mean_row, fx, fy;
        for (std::size_t k = 0; k < p.diameters.size(); ++k)
        {
            const auto col = column(rows, k);
            mean_row.push_back(stats::mean(col));
            if (p.diameters[k] == 0.0)
                control.insert(control.end(), col.begin(), col.end());
            else
            {
                fx.push_back(p.diameters[k]);
                fy.push_back(mean_row.back());
            }
        }

        const auto fit = fx.size() >= 2 ? stats::fit_line(fx, fy) : stats::linear_fit{};
        linear = linear && fit.r_squared > 0.9;
        linear_detail += num(depth) + " mm: R2 " + num(fit.r_squared) + "; ";

        if (!fx.empty())
        {
            const auto lo = std::min_element(fx.begin(), fx.end()) - fx.begin();
            const auto hi = std::max_element(fx.begin(), fx.end()) - fx.begin();
            thick = thick && fy[hi] > fy[lo];
            thick_detail += num(depth) + " mm: " + num(fy[hi]) + " vs " + num(fy[lo]) + "; ";
        }
        per_depth.push_back({{"depth_mm", depth}, {"mean_mnd", mean_row}, {"slope", fit.slope},
                             {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"per_hole", rows}});
    }

    add_check(rep, "linear_in_diameter", linear, linear_detail);
    add_check(rep, "thick_exceeds_thin", thick, thick_detail);
    if (!control.empty())
    {
        const auto test = stats::mann_whitney(control, intra);
        add_check(rep, "control_matches_intra", test.p_value > 0.01,
                  "rank test p " + num(test.p_value) + " (n " + std::to_string(control.size()) + ")");
    }

    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))},
                {"diameters_mm", p.diameters},
                {"depths", per_depth},
                {"intra", intra},
                {"intra_mean", stats::mean(intra)}};
    return rep;
}

// ---- loading comparison ------------------------------------------------

scenario_report run_loading_comparison(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::loading_comparison, spec.seed, {}, json::object(), {}};
    const auto all = box_holes();
    const std::array<loading, 3> interiors{loading::empty, loading::mainboard, loading::absorber};

    json per_loading = json::array();
    std::array<double, 3> sigma_taps{}, sigma_pdp{}, mean_ins{};
    double absorber_min_ins = 0.0, absorber_max_intra = 0.0;
    bool border_ok = true;
    std::string border_detail;

    for (std::size_t li = 0; li < interiors.size(); ++li)
    {
        const auto l = interiors[li];

        // delay spread over independent enclosures
        std::vector<double> st, sp;
        std::vector<double> mean_pdp(spec.vna.grid.n_points, 0.0);
        const auto delays = pdp_delay_grid(spec.vna.grid.n_points, spec.vna.grid.step());
        for (std::size_t k = 0; k < p.spread_seeds; ++k)
        {
            const auto taps = synth_enclosure(enclosure_profile::preset(l, rng::mix(spec.seed, salt_spread, k)));
            const auto pdp = power_delay_profile(taps_to_frequency_response(taps, spec.vna.grid));
            st.push_back(rms_delay_spread(taps));
            sp.push_back(rms_delay_spread(pdp, delays));
            for (std::size_t i = 0; i < pdp.size(); ++i)
                mean_pdp[i] += pdp[i] / static_cast<double>(p.spread_seeds);
        }
        sigma_taps[li] = stats::mean(st);
        sigma_pdp[li] = stats::mean(sp);

        const auto taps = synth_enclosure(enclosure_profile::preset(l, spec.seed));
        sampler s(spec, sweep_frontend(spec), 3 + li);
        std::vector<double> intra, ins, border, interior;
        for (std::size_t id = 0; id < all.size(); ++id)
        {
            const auto ref = s.take(taps);
            intra.push_back(distance(s.take(taps), ref));
            ins.push_back(distance(s.take(needled(taps, spec, all[id], p.needle_diameter, p.needle_depth)), ref));
            (on_border(id) ? border : interior).push_back(ins.back());
        }
        mean_ins[li] = stats::mean(ins);
        if (l == loading::absorber)
        {
            absorber_min_ins = *std::min_element(ins.begin(), ins.end());
            absorber_max_intra = *std::max_element(intra.begin(), intra.end());
        }
        const double mb = stats::mean(border), mi = stats::mean(interior);
        border_ok = border_ok && mb < mi;
        border_detail += std::string(to_string(l)) + ": " + num(mb) + " vs " + num(mi) + "; ";

        per_loading.push_back({{"loading", std::string(to_string(l))},
                               {"rms_delay_spread_taps", sigma_taps[li]},
                               {"rms_delay_spread_pdp", sigma_pdp[li]},
                               {"pdp_delays", delays},
                               {"mean_pdp", mean_pdp},
                               {"intra", intra},
                               {"insertion", ins},
                               {"mean_insertion", mean_ins[li]}});
    }

    const auto ordered = [](const std::array<double, 3> &v) { return v[0] > v[1] && v[1] > v[2]; };
    const auto triple = [](const std::array<double, 3> &v) {
        return num(v[0]) + " > " + num(v[1]) + " > " + num(v[2]);
    };
    add_check(rep, "delay_spread_ordering", ordered(sigma_taps) && ordered(sigma_pdp),
              "taps " + triple(sigma_taps) + " s; pdp " + triple(sigma_pdp) + " s");
    add_check(rep, "insertion_ordering", ordered(mean_ins), "mean insertion MND " + triple(mean_ins));
    add_check(rep, "absorber_detectable_everywhere", absorber_min_ins > absorber_max_intra,
              "min insertion " + num(absorber_min_ins) + " vs max intra " + num(absorber_max_intra));
    add_check(rep, "border_weaker_than_interior", border_ok, border_detail);

    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))}, {"loadings", per_loading}};
    return rep;
}

// ---- heatmap -----------------------------------------------------------

scenario_report run_heatmap(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::heatmap, spec.seed, {}, json::object(), {}};

    const auto base = synth_enclosure(spec.enclosure);
    const auto taps = apply_drift(base, powered(0.0, 0.0, 0.0), spec.drift);
    const auto holes = server_holes();
    sampler s(spec, sweep_frontend(spec), 10);

    std::vector<double> intra, ins, sensitive, shadowed;
    json cells = json::array();
    for (std::size_t id = 0; id < holes.size(); ++id)
    {
        const auto ref = s.take(taps);
        intra.push_back(distance(s.take(taps), ref));
        ins.push_back(distance(s.take(needled(taps, spec, holes[id], p.needle_diameter, p.needle_depth)), ref));
        (id < server_sensitive_count ? sensitive : shadowed).push_back(ins.back());
        cells.push_back({{"hole", id}, {"x", holes[id].x}, {"y", holes[id].y}, {"mnd", ins.back()}});
    }
    const double ms = stats::mean(sensitive), mh = stats::mean(shadowed), mi = stats::mean(intra);
    add_check(rep, "sensitive_above_shadowed", ms > mh, num(ms) + " vs " + num(mh));
    add_check(rep, "shadowed_near_intra", mh < 2.0 * mi, num(mh) + " vs intra " + num(mi));

    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))},
                {"cells", cells},
                {"intra_mean", mi},
                {"sensitive_mean", ms},
                {"shadowed_mean", mh}};
    return rep;
}

// ---- server states -----------------------------------------------------

scenario_report run_server_states(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::server_states, spec.seed, {}, json::object(), {}};

    struct segment
    {
        const char *name;
        bool psu, boot;
        double load;
        std::size_t samples;
    };
    const std::size_t n = p.state_samples;
    const std::array<segment, 6> plan{{{"off", false, false, 0.0, n},
                                       {"psu", true, false, 0.0, n},
                                       {"boot", true, true, 0.0, n},
                                       {"idle", true, true, 0.0, 2 * n},
                                       {"load", true, true, 1.0, 2 * n},
                                       {"idle2", true, true, 0.0, 3 * n}}};

    const auto base = synth_enclosure(spec.enclosure);
    sampler s(spec, sweep_frontend(spec), 11);
    std::optional<response> ref;
    double temperature = 0.0, t = 0.0;
    std::uint64_t index = 0;
    std::vector<std::vector<double>> per_state;
    json series = json::array();
    for (const auto &seg : plan)
    {
        std::vector<double> v;
        for (std::size_t k = 0; k < seg.samples; ++k, ++index, t += p.cadence)
        {
            if (seg.boot)
                temperature = advance_temperature(temperature, seg.load, p.cadence, spec.thermal);
            drift_state d;
            d.temperature_offset = temperature;
            d.cpu_load = seg.load;
            d.fan_phase = fan_phase(spec.seed, index);
            d.psu_on = seg.psu;
            d.booted = seg.boot;
            const auto r = s.take(apply_drift(base, d, spec.drift), t);
            if (!ref)
                ref = r;
            v.push_back(distance(r, *ref));
            series.push_back({{"t", t}, {"state", seg.name}, {"mnd", v.back()}, {"temperature", temperature}});
        }
        per_state.push_back(std::move(v));
    }

    std::array<double, 6> means{};
    for (std::size_t i = 0; i < 6; ++i)
        means[i] = stats::mean(per_state[i]);
    const double within = std::max(stats::stddev(per_state[0]), stats::stddev(per_state[1]));
    const double jump = std::abs(means[1] - means[0]);
    add_check(rep, "psu_step", jump > 5.0 * within, "jump " + num(jump) + " vs within-state std " + num(within));
    add_check(rep, "off_state_quiet", means[0] < 0.2 * jump, "off mean " + num(means[0]));
    const bool back = std::abs(means[5] - means[3]) < std::abs(means[5] - means[4]);
    add_check(rep, "idle_returns_toward_baseline", back,
              "idle " + num(means[3]) + ", load " + num(means[4]) + ", idle again " + num(means[5]));

    json states = json::array();
    for (std::size_t i = 0; i < 6; ++i)
        states.push_back({{"state", plan[i].name}, {"mean", means[i]}, {"std", stats::stddev(per_state[i])}});
    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))}, {"states", states}, {"series", series}};
    return rep;
}

// ---- long-term ---------------------------------------------------------

longterm_streams simulate_longterm(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    const bool want_vna = spec.frontends != frontend_choice::uwb;
    const bool want_uwb = spec.frontends != frontend_choice::vna;

    const auto base = synth_enclosure(spec.enclosure);
    auto holes = server_holes();
    holes.resize(server_sensitive_count);

    sampler sv(spec, frontend::vna, 20), su(spec, frontend::uwb, 20);
    longterm_streams out;
    const auto emit = [&](const tap_set &taps, double t, const label_map &labels) {
        if (want_vna)
            out.vna.push_back(trace_record::from_response(sv.take(taps, t), labels));
        if (want_uwb)
            out.uwb.push_back(trace_record::from_response(su.take(taps, t), labels));
    };

    double temperature = 0.0, t = 0.0;
    std::uint64_t index = 0;

    // provisioning under randomized load
    for (std::size_t m = 0; m < spec.monitor.provisioning_count; ++m, ++index)
    {
        const auto hold = static_cast<std::uint64_t>(std::floor(t / p.provisioning_hold));
        const double load = rng::to_unit(rng::mix(spec.seed, salt_load, hold));
        temperature = advance_temperature(temperature, load, p.cadence, spec.thermal);
        t += p.cadence;
        emit(apply_drift(base, powered(temperature, load, fan_phase(spec.seed, index)), spec.drift), t,
             {{"event", std::string("provisioning")}, {"cpu_load", load}, {"temperature", temperature}});
    }

    // deployment: one intra and one insertion per cadence step
    const double start = t;
    const auto steps = static_cast<std::size_t>(std::floor(p.duration / p.cadence));
    const double half = 0.5 * p.cadence;
    for (std::size_t k = 0; k < steps; ++k)
    {
        const double phase = std::fmod(t + half - start, p.load_period);
        const double load = phase < 0.5 * p.load_period ? 0.0 : 1.0;

        temperature = advance_temperature(temperature, load, half, spec.thermal);
        t += half;
        emit(apply_drift(base, powered(temperature, load, fan_phase(spec.seed, index++)), spec.drift), t,
             {{"event", std::string("intra")}, {"cpu_load", load}, {"temperature", temperature}});

        const std::size_t hole = k % holes.size();
        temperature = advance_temperature(temperature, load, half, spec.thermal);
        t += half;
        const auto drifted = apply_drift(base, powered(temperature, load, fan_phase(spec.seed, index++)), spec.drift);
        emit(needled(drifted, spec, holes[hole], p.needle_diameter, p.needle_depth), t,
             {{"event", std::string("insertion")},
              {"hole", static_cast<double>(hole)},
              {"x", holes[hole].x},
              {"y", holes[hole].y},
              {"round", static_cast<double>(k / holes.size())},
              {"cpu_load", load},
              {"temperature", temperature}});
    }
    return out;
}

stream_evaluation evaluate_stream(const std::vector<trace_record> &records, const monitor_config &config,
                                  std::optional<std::size_t> expected_length, double band_width)
{
    config.validate();
    if (!(band_width > 0.0))
        throw argument_error("evaluate: band width must be > 0");

    stream_evaluation ev;
    auto &rep = ev.report;
    rep.masked = config.drop_fraction > 0.0;
    monitor mon(config);
    if (records.empty())
    {
        ev.final_state = mon.state();
        return ev;
    }
    rep.frontend = records.front().frontend;

    const std::size_t length = expected_length.value_or(records.front().values.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].values.size() != length)
            throw argument_error("trace record " + std::to_string(i + 1) + " has " +
                                 std::to_string(records[i].values.size()) + " values, expected " +
                                 std::to_string(length));
    if (records.size() < config.provisioning_count)
        throw state_error("trace holds " + std::to_string(records.size()) + " records, provisioning needs " +
                          std::to_string(config.provisioning_count));

    const std::size_t m = config.provisioning_count;
    for (std::size_t i = 0; i < m; ++i)
        mon.ingest_provisioning(records[i].to_response());
    mon.finalize_provisioning();
    rep.monitor_threshold = *mon.state().threshold;

    struct scored
    {
        double t, mnd;
        std::optional<double> hole, round;
    };
    std::vector<scored> intra, insertion;
    std::map<int, position> where;
    for (std::size_t i = m; i < records.size(); ++i)
    {
        const auto &rec = records[i];
        ev.verdicts.push_back(mon.ingest(rec.to_response()));
        ++rep.ingested;
        const auto event = rec.text_label("event");
        const double v = ev.verdicts.back().mnd_value;
        if (event == "intra")
        {
            intra.push_back({rec.timestamp, v, {}, {}});
            rep.false_positive_count += ev.verdicts.back().tampered ? 1 : 0;
        }
        else if (event == "insertion")
        {
            const auto hole = rec.number_label("hole");
            insertion.push_back({rec.timestamp, v, hole, rec.number_label("round")});
            if (hole)
                where[static_cast<int>(*hole)] = {rec.number_label("x").value_or(0.0), rec.number_label("y").value_or(0.0)};
        }
    }
    rep.intra_count = intra.size();
    rep.insertion_count = insertion.size();

    double worst_intra = 0.0;
    for (const auto &s : intra)
        worst_intra = std::max(worst_intra, s.mnd);
    rep.threshold = std::max(rep.monitor_threshold, worst_intra);

    std::map<int, std::vector<double>> per_hole;
    std::map<int, std::pair<std::size_t, std::size_t>> per_round; // inserted, detected
    for (const auto &s : insertion)
    {
        if (!s.hole)
            continue;
        per_hole[static_cast<int>(*s.hole)].push_back(s.mnd);
        if (s.round)
        {
            auto &r = per_round[static_cast<int>(*s.round)];
            ++r.first;
            r.second += s.mnd > rep.threshold ? 1 : 0;
        }
    }
    rep.total = per_hole.size();
    for (const auto &[id, values] : per_hole)
    {
        hole_result h;
        h.id = id;
        h.x = where[id].x;
        h.y = where[id].y;
        h.insertions = values.size();
        h.detections = static_cast<std::size_t>(
            std::count_if(values.begin(), values.end(), [&](double v) { return v > rep.threshold; }));
        h.detected = 2 * h.detections >= h.insertions;
        h.min_insertion_mnd = *std::min_element(values.begin(), values.end());
        h.median_insertion_mnd = stats::median(values);
        rep.detected_count += h.detected ? 1 : 0;
        rep.holes.push_back(h);
    }

    // only rounds that probed every hole count towards the min/max
    bool any_round = false;
    for (const auto &[round, counts] : per_round)
    {
        if (counts.first != rep.total)
            continue;
        ++rep.rounds;
        rep.min_round_detected = any_round ? std::min(rep.min_round_detected, counts.second) : counts.second;
        rep.max_round_detected = std::max(rep.max_round_detected, counts.second);
        any_round = true;
    }

    const double t0 = records[m].timestamp;
    double t_last = t0;
    for (std::size_t i = m; i < records.size(); ++i)
        t_last = std::max(t_last, records[i].timestamp);
    const auto n_bands = static_cast<std::size_t>(std::floor((t_last - t0) / band_width)) + 1;
    std::vector<std::vector<double>> bi(n_bands), bn(n_bands);
    const auto band_of = [&](double t) {
        return std::min(n_bands - 1, static_cast<std::size_t>(std::floor((t - t0) / band_width)));
    };
    for (const auto &s : intra)
        bi[band_of(s.t)].push_back(s.mnd);
    for (const auto &s : insertion)
        bn[band_of(s.t)].push_back(s.mnd);
    for (std::size_t b = 0; b < n_bands; ++b)
    {
        quantile_band q;
        q.t_start = t0 + band_width * static_cast<double>(b);
        q.t_end = q.t_start + band_width;
        q.n_intra = bi[b].size();
        q.n_insertion = bn[b].size();
        q.intra = band_quantiles(bi[b]);
        q.insertion = band_quantiles(bn[b]);
        rep.bands.push_back(q);
    }

    ev.final_state = mon.state();
    return ev;
}

stream_evaluation replay(const std::filesystem::path &trace, const monitor_config &config,
                         std::optional<std::size_t> expected_length, double band_width)
{
    return evaluate_stream(read_trace(trace), config, expected_length, band_width);
}

scenario_report run_longterm(const experiment_spec &spec, longterm_streams *streams)
{
    const auto sim = simulate_longterm(spec);
    scenario_report rep{scenario::longterm, spec.seed, {}, json::object(), {}};

    auto unmasked = spec.monitor;
    unmasked.drop_fraction = 0.0;

    std::map<std::string, std::pair<detection_report, detection_report>> by_frontend; // masked, unmasked
    const auto evaluate = [&](const std::vector<trace_record> &s, std::size_t length, const std::string &name) {
        if (s.empty())
            return;
        auto masked = evaluate_stream(s, spec.monitor, length, spec.params.band_width).report;
        auto plain = evaluate_stream(s, unmasked, length, spec.params.band_width).report;
        rep.detections.push_back(masked);
        rep.detections.push_back(plain);
        by_frontend[name] = {std::move(masked), std::move(plain)};
    };
    evaluate(sim.vna, spec.vna.grid.n_points, "vna");
    evaluate(sim.uwb, spec.uwb.response_length(), "uwb");

    const auto needed = [](const detection_report &r, double share) {
        return static_cast<std::size_t>(std::ceil(share * static_cast<double>(r.total) - 1e-9));
    };
    const auto summary = [](const detection_report &r) {
        return std::to_string(r.min_round_detected) + "-" + std::to_string(r.max_round_detected) + " of " +
               std::to_string(r.total) + " per round at zero false positives, " + std::to_string(r.detected_count) +
               " holes overall, " + std::to_string(r.false_positive_count) + " intra above the provisioning threshold";
    };

    if (const auto it = by_frontend.find("vna"); it != by_frontend.end())
    {
        const auto &[m, u] = it->second;
        add_check(rep, "vna_masked_detection", m.rounds > 0 && m.min_round_detected >= needed(m, 0.95), summary(m));
        add_check(rep, "vna_masking_helps", m.min_round_detected >= u.min_round_detected && m.detected_count >= u.detected_count,
                  "masked " + summary(m) + "; unmasked " + summary(u));
    }
    if (const auto it = by_frontend.find("uwb"); it != by_frontend.end())
    {
        const auto &[m, u] = it->second;
        add_check(rep, "uwb_masked_detection", m.rounds > 0 && m.min_round_detected >= needed(m, 0.75), summary(m));
        add_check(rep, "uwb_masking_helps", m.min_round_detected >= u.min_round_detected && m.detected_count >= u.detected_count,
                  "masked " + summary(m) + "; unmasked " + summary(u));
        if (const auto v = by_frontend.find("vna"); v != by_frontend.end())
            add_check(rep, "uwb_below_vna", m.min_round_detected < v->second.first.min_round_detected,
                      "uwb " + std::to_string(m.min_round_detected) + " vs vna " +
                          std::to_string(v->second.first.min_round_detected) + " worst-round detections");
    }

    rep.data = {{"provisioning_count", spec.monitor.provisioning_count},
                {"deployment_steps", static_cast<std::size_t>(std::floor(spec.params.duration / spec.params.cadence))}};
    if (streams)
        *streams = sim;
    return rep;
}

// ---- lid removal -------------------------------------------------------

scenario_report run_lid_removal(const experiment_spec &spec)
{
    spec.validate();
    const auto &p = spec.params;
    scenario_report rep{scenario::lid_removal, spec.seed, {}, json::object(), {}};
    const auto all = box_holes();

    std::size_t ordered = 0, separated = 0;
    json runs = json::array();
    json first;
    std::vector<double> intra_means;
    for (std::size_t run = 0; run < p.lid_runs; ++run)
    {
        auto enclosure = spec.enclosure;
        enclosure.seed = rng::mix(spec.seed, salt_run, run);
        const auto taps = synth_enclosure(enclosure);
        const auto lid = apply_perturbation(taps, perturbation_event::lid_removal(), spec.coupling);

        // needle through an interior hole
        auto id = static_cast<std::size_t>(rng::to_unit(rng::mix(enclosure.seed, salt_pick, run)) * all.size());
        if (on_border(id))
            id = 8 * 26 + 13;
        const auto needle = needled(taps, spec, all[id], p.needle_diameter, p.needle_depth);

        sampler s(spec, sweep_frontend(spec), 100 + run);
        const auto ref = s.take(taps);
        std::vector<double> a, b, c;
        double t = 0.0;
        for (std::size_t k = 0; k < p.lid_samples; ++k, t += p.cadence)
            a.push_back(distance(s.take(taps, t), ref));
        for (std::size_t k = 0; k < p.lid_samples; ++k, t += p.cadence)
            b.push_back(distance(s.take(needle, t), ref));
        for (std::size_t k = 0; k < p.lid_samples; ++k, t += p.cadence)
            c.push_back(distance(s.take(lid, t), ref));

        const double ma = stats::median(a), mb = stats::median(b), mc = stats::median(c);
        const double max_needle = *std::max_element(b.begin(), b.end());
        const double min_lid = *std::min_element(c.begin(), c.end());
        const bool ok_order = ma < mb && mb < mc;
        const bool ok_sep = min_lid > max_needle;
        ordered += ok_order ? 1 : 0;
        separated += ok_sep ? 1 : 0;
        intra_means.push_back(stats::mean(a));
        runs.push_back({{"run", run},
                        {"hole", id},
                        {"median_intra", ma},
                        {"median_needle", mb},
                        {"median_lid", mc},
                        {"max_needle", max_needle},
                        {"min_lid", min_lid}});
        if (run == 0)
            first = {{"intra", a}, {"needle", b}, {"lid", c}};
    }

    const double n = static_cast<double>(p.lid_runs);
    add_check(rep, "ordering_intra_needle_lid", ordered >= 0.99 * n,
              std::to_string(ordered) + " of " + std::to_string(p.lid_runs) + " runs ordered");
    add_check(rep, "lid_separated_from_needle", separated >= 0.99 * n,
              std::to_string(separated) + " of " + std::to_string(p.lid_runs) + " runs fully separated");

    rep.data = {{"frontend", std::string(to_string(sweep_frontend(spec)))},
                {"runs", runs},
                {"first_run", first},
                {"intra_mean", stats::mean(intra_means)}};
    return rep;
}

scenario_report run(const experiment_spec &spec)
{
    switch (spec.kind)
    {
    case scenario::depth_sweep:
        return run_depth_sweep(spec);
    case scenario::diameter_sweep:
        return run_diameter_sweep(spec);
    case scenario::loading_comparison:
        return run_loading_comparison(spec);
    case scenario::heatmap:
        return run_heatmap(spec);
    case scenario::server_states:
        return run_server_states(spec);
    case scenario::longterm:
        return run_longterm(spec);
    case scenario::lid_removal:
        return run_lid_removal(spec);
    }
    throw config_error("unknown scenario");
}

} // namespace atr::harness
