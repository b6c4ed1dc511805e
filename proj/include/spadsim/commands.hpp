#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spadsim/analysis.hpp"
#include "spadsim/config.hpp"
#include "spadsim/control.hpp"
#include "spadsim/engine.hpp"

namespace spadsim::cli {

struct CommonOptions {
    std::string config_path;            // config file or manifest
    std::vector<std::string> sets;      // --set KEY=VALUE overrides
    std::optional<std::uint64_t> seed;  // --seed override
    std::optional<double> duration_s;   // --duration-s override
};

/// defaults -> config file (or manifest) -> --set overrides -> flag overrides.
config::Config resolve_config(const CommonOptions& options);

engine::TagStream cmd_simulate(const config::Config& cfg, const std::string& out_path,
                               bool truth_sidecar);

struct BiasSweepRow {
    double v_ex = 0.0;
    double eta = 0.0;
    double p_dc = 0.0;
    double dark_hz = 0.0;
};

/// One row per bias point, measured from paired illuminated/dark runs.
/// Trap generation is disabled for the sweep so the efficiency estimate is
/// not inflated by afterpulse counts.
std::vector<BiasSweepRow> cmd_bias_sweep(const config::Config& cfg,
                                         const std::vector<double>& v_ex_points,
                                         const std::string& out_path);

struct ScanResult {
    std::vector<double> delays_ps;
    std::vector<double> counts;
    double fitted_fwhm_ps = 0.0;
    double fitted_center_ps = 0.0;
    double fitted_amplitude = 0.0;
    analysis::FitMethod method = analysis::FitMethod::gaussian_least_squares;
};

ScanResult cmd_delay_scan(const config::Config& cfg, double range_ps, double step_ps,
                          double dwell_s, const std::string& out_path);

struct AfterpulseResult {
    analysis::AfterpulseReport report;
    double fitted_tau_ps = 0.0;
};

/// Paired illuminated/dark runs under identical settings, Eq.-style
/// estimator plus a detrapping-lifetime fit of the side-peak envelope.
AfterpulseResult cmd_afterpulse(const config::Config& cfg, const std::string& out_path);

analysis::JitterReport cmd_jitter(const config::Config& cfg, double system_duration_s,
                                  double reference_duration_s,
                                  const std::string& out_path);

control::StabilityTrace cmd_stability(const config::Config& cfg, double hours,
                                      bool feedback, const std::string& out_path);

/// Locale-independent shortest round-trip formatting used in all CSV and
/// report output.
std::string format_number(double value);

}  // namespace spadsim::cli
