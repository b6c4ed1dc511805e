#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spadsim/commands.hpp"
#include "spadsim/errors.hpp"

namespace {

using spadsim::cli::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions* options) {
    cmd->add_option("--config", options->config_path,
                    "Config file (key = value) or a run manifest");
    cmd->add_option("--set", options->sets, "Override KEY=VALUE (repeatable)");
    cmd->add_option("--seed", options->seed, "RNG seed override");
}

int run(int argc, char** argv) {
    CLI::App app{"Monte Carlo simulator and characterization toolkit for a "
                 "1.25 GHz sine-wave-gated single-photon detector"};
    app.require_subcommand(1);

    // simulate
    CommonOptions sim_opts;
    std::string sim_out;
    bool sim_truth = false;
    CLI::App* sim = app.add_subcommand("simulate", "Generate a time-tag stream");
    add_common(sim, &sim_opts);
    sim->add_option("--duration-s", sim_opts.duration_s, "Simulated seconds");
    sim->add_option("--out", sim_out, "Output tag file")->required();
    sim->add_flag("--truth", sim_truth, "Write a truth-label sidecar");

    // bias-sweep
    CommonOptions bias_opts;
    std::string bias_out;
    std::vector<double> bias_points;
    CLI::App* bias = app.add_subcommand("bias-sweep",
                                        "Efficiency and dark-count response vs bias");
    add_common(bias, &bias_opts);
    bias->add_option("--duration-s", bias_opts.duration_s, "Seconds per run");
    bias->add_option("--v-ex", bias_points, "Bias points (repeatable)");
    bias->add_option("--out", bias_out, "Output CSV")->required();

    // delay-scan
    CommonOptions scan_opts;
    std::string scan_out;
    double scan_range = 800.0, scan_step = 10.0, scan_dwell = 0.01;
    CLI::App* scan = app.add_subcommand("delay-scan",
                                        "Counts vs laser delay with a peak fit");
    add_common(scan, &scan_opts);
    scan->add_option("--range-ps", scan_range, "Scan range (default 800)");
    scan->add_option("--step-ps", scan_step, "Scan step (default 10)");
    scan->add_option("--dwell-s", scan_dwell, "Seconds per point (default 0.01)");
    scan->add_option("--out", scan_out, "Output CSV")->required();

    // afterpulse
    CommonOptions ap_opts;
    std::string ap_out;
    CLI::App* ap = app.add_subcommand("afterpulse",
                                      "Afterpulse probability from paired runs");
    add_common(ap, &ap_opts);
    ap->add_option("--duration-s", ap_opts.duration_s, "Seconds per run");
    ap->add_option("--out", ap_out, "Output report")->required();

    // jitter
    CommonOptions jit_opts;
    std::string jit_out;
    double jit_duration = 10.0, jit_ref_duration = 0.5;
    CLI::App* jit = app.add_subcommand("jitter", "System and device timing jitter");
    add_common(jit, &jit_opts);
    jit->add_option("--duration-s", jit_duration, "System run seconds (default 10)");
    jit->add_option("--ref-duration-s", jit_ref_duration,
                    "Reference run seconds (default 0.5)");
    jit->add_option("--out", jit_out, "Output report")->required();

    // stability
    CommonOptions stab_opts;
    std::string stab_out;
    double stab_hours = 0.0;
    bool stab_feedback = false;
    CLI::App* stab = app.add_subcommand("stability", "Efficiency drift trace");
    add_common(stab, &stab_opts);
    stab->add_option("--hours", stab_hours, "Run length in hours")->required();
    stab->add_flag("--feedback", stab_feedback, "Enable peak-search feedback");
    stab->add_option("--out", stab_out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        spadsim::cli::cmd_simulate(spadsim::cli::resolve_config(sim_opts), sim_out,
                                   sim_truth);
    } else if (bias->parsed()) {
        const auto rows = spadsim::cli::cmd_bias_sweep(
            spadsim::cli::resolve_config(bias_opts), bias_points, bias_out);
        for (const auto& row : rows)
            std::printf("v_ex=%g eta=%g p_dc=%g dark_hz=%g\n", row.v_ex, row.eta,
                        row.p_dc, row.dark_hz);
    } else if (scan->parsed()) {
        const auto result = spadsim::cli::cmd_delay_scan(
            spadsim::cli::resolve_config(scan_opts), scan_range, scan_step, scan_dwell,
            scan_out);
        std::printf("fitted fwhm_ps=%g center_ps=%g\n", result.fitted_fwhm_ps,
                    result.fitted_center_ps);
    } else if (ap->parsed()) {
        const auto result = spadsim::cli::cmd_afterpulse(
            spadsim::cli::resolve_config(ap_opts), ap_out);
        std::printf("p_ap=%g per_gate=%g per_ns=%g tau_ps=%g\n", result.report.p_ap,
                    result.report.p_ap_per_gate, result.report.p_ap_per_ns,
                    result.fitted_tau_ps);
    } else if (jit->parsed()) {
        const auto report = spadsim::cli::cmd_jitter(
            spadsim::cli::resolve_config(jit_opts), jit_duration, jit_ref_duration,
            jit_out);
        std::printf("total=%g reference=%g device=%g\n", report.total_fwhm_ps,
                    report.reference_fwhm_ps, report.device_fwhm_ps);
    } else if (stab->parsed()) {
        spadsim::cli::cmd_stability(spadsim::cli::resolve_config(stab_opts), stab_hours,
                                    stab_feedback, stab_out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const spadsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const spadsim::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const spadsim::StatisticsError& e) {
        std::fprintf(stderr, "statistics error: %s\n", e.what());
        return 3;
    } catch (const spadsim::FitError& e) {
        std::fprintf(stderr, "fit error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
