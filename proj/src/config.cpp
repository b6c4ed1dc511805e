#include "spadsim/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spadsim/errors.hpp"

namespace spadsim::config {

namespace {

struct KeyDefault {
    const char* key;
    const char* value;
};

// The single source of truth for the configuration schema.
constexpr std::array kSchema = {
    KeyDefault{"gate_frequency_hz", "1.25e9"},
    KeyDefault{"gate_fwhm_ps", "189"},
    KeyDefault{"gate_profile", "gaussian"},
    KeyDefault{"laser_divisor", "100"},
    KeyDefault{"eta_slope", "0.20"},
    KeyDefault{"dark_p0", "4.66e-7"},
    KeyDefault{"dark_gamma", "4.605170185988092"},
    KeyDefault{"trap_k_ap", "0.834840889591568"},
    KeyDefault{"trap_charge_factor", "1.0"},
    KeyDefault{"tau_detrap_ps", "1.0e6"},
    KeyDefault{"traps_enabled", "true"},
    KeyDefault{"temperature_label_c", "-50"},
    KeyDefault{"v_ex", "0.5"},
    KeyDefault{"mu", "0.1"},
    KeyDefault{"delay_ps", "0.0"},
    KeyDefault{"duration_s", "60"},
    KeyDefault{"logic_deadtime_ns", "0"},
    KeyDefault{"spad_jitter_fwhm_ps", "288"},
    KeyDefault{"reference_jitter_fwhm_ps", "99"},
    KeyDefault{"tdc_resolution_ps", "50"},
    KeyDefault{"seed", "1"},
    KeyDefault{"emit_truth_labels", "false"},
    KeyDefault{"main_peak_window_ps", "400"},
    KeyDefault{"drift_rate_ps_per_min", "0.4672"},
    KeyDefault{"eta_noise_fraction", "0.01"},
    KeyDefault{"feedback_interval_min", "10"},
    KeyDefault{"scan_cost_min", "1"},
    KeyDefault{"scan_range_ps", "800"},
    KeyDefault{"coarse_step_ps", "25"},
    KeyDefault{"fine_step_ps", "5"},
    KeyDefault{"scan_dwell_s", "1.0"},
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

Config Config::defaults() {
    Config cfg;
    for (const KeyDefault& kd : kSchema) cfg.values_[kd.key] = kd.value;
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    if (value.empty()) throw ConfigError("empty value for key '" + key + "'");
    it->second = value;
}

const std::string& Config::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

void Config::apply_text(const std::string& text, const std::string& source_name) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (values_.find(key) == values_.end())
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": unknown config key '" + key + "'");
        if (value.empty())
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": empty value for key '" + key + "'");
        values_[key] = value;
    }
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_text(buf.str(), path);
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    set(key, value);
}

double Config::get_double(const std::string& key) const {
    const std::string& text = raw(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a number");
    }
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string& text = raw(key);
    try {
        std::size_t used = 0;
        if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
        const std::uint64_t v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text +
                          "' is not an unsigned integer");
    }
}

std::uint32_t Config::get_u32(const std::string& key) const {
    const std::uint64_t v = get_u64(key);
    if (v > 0xFFFFFFFFull)
        throw ConfigError("key '" + key + "': value out of range");
    return static_cast<std::uint32_t>(v);
}

bool Config::get_bool(const std::string& key) const {
    const std::string& text = raw(key);
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
}

std::uint64_t seconds_to_ps(double seconds) {
    if (!(seconds >= 0.0)) throw ConfigError("durations must be >= 0 seconds");
    const double ps = seconds * 1e12;
    if (ps >= 9.2e18) throw ConfigError("duration too long for the ps timebase");
    return static_cast<std::uint64_t>(std::llround(ps));
}

model::DiodeModel Config::diode() const {
    model::DiodeModel diode;
    diode.gate.gate_frequency_hz = get_double("gate_frequency_hz");
    diode.gate.gate_fwhm_ps = get_double("gate_fwhm_ps");
    diode.gate.laser_divisor = get_u32("laser_divisor");
    diode.gate.profile = model::parse_gate_profile(raw("gate_profile"));
    diode.efficiency.eta_slope = get_double("eta_slope");
    diode.dark.p0 = get_double("dark_p0");
    diode.dark.gamma = get_double("dark_gamma");
    diode.traps.k_ap = get_double("trap_k_ap");
    diode.traps.charge_factor_base = get_double("trap_charge_factor");
    diode.traps.tau_detrap_ps = get_double("tau_detrap_ps");
    diode.temperature_label_c = get_double("temperature_label_c");
    return diode;
}

model::BiasPoint Config::bias() const { return model::BiasPoint{get_double("v_ex")}; }

engine::SimConfig Config::sim() const {
    engine::SimConfig cfg;
    cfg.diode = diode();
    cfg.bias = bias();
    cfg.mu = get_double("mu");
    cfg.delay_ps = get_double("delay_ps");
    cfg.duration_ps = seconds_to_ps(get_double("duration_s"));
    const double deadtime_ns = get_double("logic_deadtime_ns");
    if (!(deadtime_ns >= 0.0)) throw ConfigError("logic_deadtime_ns must be >= 0");
    cfg.logic_deadtime_ps =
        static_cast<std::uint64_t>(std::llround(deadtime_ns * 1000.0));
    cfg.spad_jitter_fwhm_ps = get_double("spad_jitter_fwhm_ps");
    cfg.reference_jitter_fwhm_ps = get_double("reference_jitter_fwhm_ps");
    cfg.tdc_resolution_ps = get_u32("tdc_resolution_ps");
    cfg.seed = get_u64("seed");
    cfg.traps_enabled = get_bool("traps_enabled");
    cfg.emit_truth_labels = get_bool("emit_truth_labels");
    engine::validate(cfg);
    return cfg;
}

control::DriftModel Config::drift() const {
    control::DriftModel drift;
    drift.rate_ps_per_min = get_double("drift_rate_ps_per_min");
    drift.eta_noise_fraction = get_double("eta_noise_fraction");
    control::validate(drift);
    return drift;
}

control::FeedbackPolicy Config::feedback() const {
    control::FeedbackPolicy policy;
    policy.interval_min = get_double("feedback_interval_min");
    policy.scan_cost_min = get_double("scan_cost_min");
    policy.scan_range_ps = get_double("scan_range_ps");
    policy.coarse_step_ps = get_double("coarse_step_ps");
    policy.fine_step_ps = get_double("fine_step_ps");
    policy.dwell_s = get_double("scan_dwell_s");
    control::validate(policy);
    return policy;
}

double Config::main_peak_window_ps() const {
    const double w = get_double("main_peak_window_ps");
    if (!(w > 0.0)) throw ConfigError("main_peak_window_ps must be > 0");
    return w;
}

}  // namespace spadsim::config
