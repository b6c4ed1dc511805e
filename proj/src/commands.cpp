#include "spadsim/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spadsim/errors.hpp"
#include "spadsim/manifest.hpp"
#include "spadsim/tagio.hpp"

namespace spadsim::cli {

namespace {

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

void emit_manifest(const std::string& command, const config::Config& cfg,
                   const std::string& out_path, std::vector<std::string> outputs) {
    RunManifest manifest;
    manifest.command = command;
    manifest.seed = cfg.get_u64("seed");
    manifest.config = cfg.entries();
    manifest.outputs = std::move(outputs);
    write_manifest(manifest_path_for(out_path), manifest);
}

config::Config with(const config::Config& cfg,
                    std::initializer_list<std::pair<const char*, std::string>> kv) {
    config::Config out = cfg;
    for (const auto& [key, value] : kv) out.set(key, value);
    return out;
}

std::string u64_string(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

config::Config resolve_config(const CommonOptions& options) {
    config::Config cfg = config::Config::defaults();
    if (!options.config_path.empty()) apply_config_or_manifest(cfg, options.config_path);
    for (const std::string& assignment : options.sets) cfg.apply_override(assignment);
    if (options.seed) cfg.set("seed", u64_string(*options.seed));
    if (options.duration_s) cfg.set("duration_s", format_number(*options.duration_s));
    return cfg;
}

engine::TagStream cmd_simulate(const config::Config& cfg, const std::string& out_path,
                               bool truth_sidecar) {
    config::Config run_cfg = cfg;
    if (truth_sidecar) run_cfg.set("emit_truth_labels", "true");
    const engine::TagStream stream = engine::simulate(run_cfg.sim());

    tagio::write_tag_file(out_path, stream);
    std::vector<std::string> outputs{out_path};
    if (!stream.labels.empty()) {
        const std::string truth_path = out_path + ".truth";
        tagio::write_truth_sidecar(truth_path, stream);
        outputs.push_back(truth_path);
    }
    emit_manifest("simulate", run_cfg, out_path, std::move(outputs));
    return stream;
}

std::vector<BiasSweepRow> cmd_bias_sweep(const config::Config& cfg,
                                         const std::vector<double>& v_ex_points,
                                         const std::string& out_path) {
    if (v_ex_points.empty()) throw UsageError("bias sweep needs at least one v_ex point");
    const double mu = cfg.get_double("mu");
    if (!(mu > 0.0)) throw UsageError("bias sweep requires mu > 0");
    const std::uint64_t base_seed = cfg.get_u64("seed");
    const double duration_s = cfg.get_double("duration_s");

    std::vector<BiasSweepRow> rows;
    rows.reserve(v_ex_points.size());
    for (std::size_t i = 0; i < v_ex_points.size(); ++i) {
        const std::string vex = format_number(v_ex_points[i]);
        const config::Config illum_cfg =
            with(cfg, {{"v_ex", vex},
                       {"traps_enabled", "false"},
                       {"seed", u64_string(derive_seed(base_seed, 2 * i))}});
        const config::Config dark_cfg =
            with(illum_cfg, {{"mu", "0"},
                             {"seed", u64_string(derive_seed(base_seed, 2 * i + 1))}});
        const engine::TagStream illum = engine::simulate(illum_cfg.sim());
        const engine::TagStream dark = engine::simulate(dark_cfg.sim());

        BiasSweepRow row;
        row.v_ex = v_ex_points[i];
        const double pulses = static_cast<double>(illum.truth.n_laser_pulses);
        const double excess =
            (static_cast<double>(illum.size()) - static_cast<double>(dark.size())) /
            pulses;
        if (!(excess < 1.0))
            throw StatisticsError("bias sweep: click fraction saturated at v_ex=" + vex);
        row.eta = excess <= 0.0 ? 0.0 : -std::log1p(-excess) / mu;
        row.p_dc = static_cast<double>(dark.size()) /
                   static_cast<double>(dark.truth.n_gates);
        row.dark_hz = static_cast<double>(dark.size()) / duration_s;
        rows.push_back(row);
    }

    std::ostringstream csv;
    csv << "v_ex,eta,p_dc,dark_hz\n";
    for (const BiasSweepRow& row : rows)
        csv << format_number(row.v_ex) << ',' << format_number(row.eta) << ','
            << format_number(row.p_dc) << ',' << format_number(row.dark_hz) << '\n';
    write_text_file(out_path, csv.str());
    emit_manifest("bias-sweep", cfg, out_path, {out_path});
    return rows;
}

ScanResult cmd_delay_scan(const config::Config& cfg, double range_ps, double step_ps,
                          double dwell_s, const std::string& out_path) {
    if (!(step_ps > 0.0)) throw UsageError("delay scan requires step > 0");
    if (!(dwell_s > 0.0)) throw UsageError("delay scan requires dwell > 0");
    if (!(range_ps > 0.0)) throw UsageError("delay scan requires range > 0");
    const std::uint64_t base_seed = cfg.get_u64("seed");

    ScanResult scan;
    std::size_t index = 0;
    for (double d = -range_ps / 2.0; d <= range_ps / 2.0 + 1e-9; d += step_ps, ++index) {
        const config::Config point_cfg =
            with(cfg, {{"delay_ps", format_number(d)},
                       {"duration_s", format_number(dwell_s)},
                       {"seed", u64_string(derive_seed(base_seed, index))}});
        const engine::TagStream stream = engine::simulate(point_cfg.sim());
        scan.delays_ps.push_back(d);
        scan.counts.push_back(static_cast<double>(stream.size()));
    }

    const analysis::PeakFit fit = analysis::fit_peak_fwhm(scan.delays_ps, scan.counts);
    scan.fitted_fwhm_ps = fit.fwhm_ps;
    scan.fitted_center_ps = fit.center_ps;
    scan.fitted_amplitude = fit.amplitude;
    scan.method = fit.method;

    std::ostringstream csv;
    csv << "delay_ps,counts\n";
    for (std::size_t i = 0; i < scan.delays_ps.size(); ++i)
        csv << format_number(scan.delays_ps[i]) << ','
            << format_number(scan.counts[i]) << '\n';
    csv << "# fit: fwhm_ps=" << format_number(scan.fitted_fwhm_ps)
        << " center_ps=" << format_number(scan.fitted_center_ps)
        << " amplitude=" << format_number(scan.fitted_amplitude) << " method="
        << (scan.method == analysis::FitMethod::gaussian_least_squares
                ? "gaussian"
                : "half_max_interpolation")
        << '\n';
    write_text_file(out_path, csv.str());
    emit_manifest("delay-scan", cfg, out_path, {out_path});
    return scan;
}

AfterpulseResult cmd_afterpulse(const config::Config& cfg, const std::string& out_path) {
    const std::uint64_t base_seed = cfg.get_u64("seed");
    const config::Config illum_cfg =
        with(cfg, {{"seed", u64_string(derive_seed(base_seed, 0))}});
    const config::Config dark_cfg =
        with(cfg, {{"mu", "0"}, {"seed", u64_string(derive_seed(base_seed, 1))}});
    const engine::TagStream illum = engine::simulate(illum_cfg.sim());
    const engine::TagStream dark = engine::simulate(dark_cfg.sim());

    const model::DiodeModel diode = cfg.diode();
    AfterpulseResult result;
    result.report = analysis::estimate_afterpulse(illum, dark, diode.gate,
                                                  cfg.main_peak_window_ps());

    // Detrapping lifetime from the side-peak envelope of the interval
    // histogram, corrected for interval truncation at the measured rate.
    const std::uint64_t period = diode.gate.period_ps_int();
    const double tau_cfg = diode.traps.tau_detrap_ps;
    const std::uint64_t range =
        static_cast<std::uint64_t>(std::llround(8.0 * tau_cfg));
    const analysis::Histogram intervals = analysis::interval_histogram(
        illum, period, range, -static_cast<std::int64_t>(period / 2));
    const double rate_hz = static_cast<double>(illum.size()) /
                           (static_cast<double>(illum.duration_ps) * 1e-12);
    try {
        result.fitted_tau_ps = analysis::fit_detrap_tau(intervals, diode.gate, rate_hz);
    } catch (const FitError&) {
        // No usable side-peak envelope (e.g. trap generation disabled).
        result.fitted_tau_ps = std::numeric_limits<double>::quiet_NaN();
    }

    std::ostringstream report;
    report << "c_tol = " << result.report.c_tol << '\n'
           << "c_dc = " << result.report.c_dc << '\n'
           << "c_ph = " << format_number(result.report.c_ph) << '\n'
           << "p_ap = " << format_number(result.report.p_ap) << '\n'
           << "p_ap_per_gate = " << format_number(result.report.p_ap_per_gate) << '\n'
           << "p_ap_per_ns = " << format_number(result.report.p_ap_per_ns) << '\n'
           << "mean_interval_ps = " << format_number(result.report.mean_interval_ps)
           << '\n'
           << "main_peak_center_ps = "
           << format_number(result.report.main_peak_center_ps) << '\n'
           << "fitted_tau_ps = " << format_number(result.fitted_tau_ps) << '\n';
    write_text_file(out_path, report.str());
    emit_manifest("afterpulse", cfg, out_path, {out_path});
    return result;
}

analysis::JitterReport cmd_jitter(const config::Config& cfg, double system_duration_s,
                                  double reference_duration_s,
                                  const std::string& out_path) {
    if (!(system_duration_s > 0.0) || !(reference_duration_s > 0.0))
        throw UsageError("jitter measurement requires positive durations");
    const engine::SimConfig sim_cfg =
        with(cfg, {{"duration_s", format_number(system_duration_s)}}).sim();
    const std::uint64_t fold =
        sim_cfg.diode.gate.period_ps_int() * sim_cfg.diode.gate.laser_divisor;
    const double halfgate = sim_cfg.diode.gate.period_ps() / 2.0;

    // Reference channel: every laser pulse detected, smeared by the
    // reference jitter alone, through the same TDC.
    engine::TagStream reference;
    reference.tdc_resolution_ps = sim_cfg.tdc_resolution_ps;
    {
        Rng rng(derive_seed(sim_cfg.seed, 1));
        const std::uint64_t pulses = static_cast<std::uint64_t>(
            std::llround(reference_duration_s *
                         sim_cfg.diode.gate.gate_frequency_hz /
                         sim_cfg.diode.gate.laser_divisor));
        reference.tags.reserve(pulses);
        for (std::uint64_t i = 0; i < pulses; ++i)
            reference.tags.push_back(engine::stamp(i * fold,
                                                   sim_cfg.reference_jitter_fwhm_ps,
                                                   sim_cfg.tdc_resolution_ps, rng));
        std::sort(reference.tags.begin(), reference.tags.end());
        reference.duration_ps = pulses * fold;
    }
    const analysis::PeakFit ref_fit = analysis::measure_folded_peak(
        reference, fold, sim_cfg.tdc_resolution_ps, halfgate);

    const engine::TagStream system = engine::simulate(sim_cfg);
    const analysis::PeakFit total_fit = analysis::measure_folded_peak(
        system, fold, sim_cfg.tdc_resolution_ps, halfgate);

    analysis::JitterReport report;
    report.total_fwhm_ps = total_fit.fwhm_ps;
    report.reference_fwhm_ps = ref_fit.fwhm_ps;
    report.device_fwhm_ps =
        analysis::quadrature_subtract(total_fit.fwhm_ps, ref_fit.fwhm_ps);

    std::ostringstream text;
    text << "total_fwhm_ps = " << format_number(report.total_fwhm_ps) << '\n'
         << "reference_fwhm_ps = " << format_number(report.reference_fwhm_ps) << '\n'
         << "device_fwhm_ps = " << format_number(report.device_fwhm_ps) << '\n';
    write_text_file(out_path, text.str());
    emit_manifest("jitter", cfg, out_path, {out_path});
    return report;
}

control::StabilityTrace cmd_stability(const config::Config& cfg, double hours,
                                      bool feedback, const std::string& out_path) {
    if (!(hours > 0.0)) throw UsageError("stability run requires hours > 0");
    const control::StabilityTrace trace = control::run_stability(
        cfg.sim(), hours, feedback, cfg.drift(), cfg.feedback());

    std::ostringstream csv;
    csv << "time_min,eta,delay_ps,in_scan\n";
    for (const control::StabilitySample& s : trace.samples)
        csv << format_number(s.time_min) << ',' << format_number(s.eta) << ','
            << format_number(s.delay_ps) << ',' << (s.in_scan ? '1' : '0') << '\n';
    write_text_file(out_path, csv.str());
    emit_manifest("stability", cfg, out_path, {out_path});
    return trace;
}

}  // namespace spadsim::cli
