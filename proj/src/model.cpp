#include "spadsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "spadsim/errors.hpp"

namespace spadsim::model {

namespace {
constexpr double kFwhmToSigma = 2.3548200450309493;  // 2*sqrt(2*ln 2)
}

GateProfile parse_gate_profile(const std::string& name) {
    if (name == "gaussian") return GateProfile::gaussian;
    throw ConfigError("unsupported gate_profile '" + name + "' (supported: gaussian)");
}

const char* gate_profile_name(GateProfile) { return "gaussian"; }

std::uint64_t GateConfig::period_ps_int() const {
    return static_cast<std::uint64_t>(std::llround(period_ps()));
}

double GateConfig::sigma_ps() const { return gate_fwhm_ps / kFwhmToSigma; }

void validate(const GateConfig& gate) {
    if (!(gate.gate_frequency_hz > 0.0))
        throw ConfigError("gate_frequency_hz must be > 0");
    if (!(gate.gate_fwhm_ps > 0.0))
        throw ConfigError("gate_fwhm_ps must be > 0");
    if (gate.laser_divisor < 1)
        throw ConfigError("laser_divisor must be >= 1");
    const double period = gate.period_ps();
    if (!(gate.gate_fwhm_ps < period))
        throw ConfigError("gate_fwhm_ps must be smaller than the gate period");
    // The engine timestamps on an integer picosecond grid; a period off that
    // grid would drift against the requested frequency over long runs.
    if (std::abs(period - std::llround(period)) > 1e-6 * period)
        throw ConfigError("gate period is not representable on the ps grid");
    if (gate.period_ps_int() < 1)
        throw ConfigError("gate period must be at least 1 ps");
}

void validate(const DiodeModel& model, const BiasPoint& bias) {
    validate(model.gate);
    if (!(bias.v_ex >= 0.0 && bias.v_ex <= 1.0))
        throw ConfigError("v_ex must lie in [0, 1]");
    if (!(model.efficiency.eta_slope > 0.0))
        throw ConfigError("eta_slope must be > 0");
    if (!(model.dark.p0 > 0.0)) throw ConfigError("dark_p0 must be > 0");
    if (!(model.dark.gamma > 0.0)) throw ConfigError("dark_gamma must be > 0");
    const double pdc = model.dark.p0 * std::exp(model.dark.gamma * bias.v_ex);
    if (!(pdc > 0.0 && pdc < 1.0))
        throw ConfigError("dark probability per gate must lie in (0, 1)");
    if (!(model.traps.k_ap > 0.0)) throw ConfigError("trap_k_ap must be > 0");
    if (!(model.traps.charge_factor_base > 0.0))
        throw ConfigError("trap_charge_factor must be > 0");
    if (!(model.traps.tau_detrap_ps > 0.0))
        throw ConfigError("tau_detrap_ps must be > 0");
}

double efficiency_at(const DiodeModel& model, const BiasPoint& bias) {
    return std::min(model.efficiency.eta_slope * bias.v_ex, 1.0);
}

double dark_prob_at(const DiodeModel& model, const BiasPoint& bias) {
    return model.dark.p0 * std::exp(model.dark.gamma * bias.v_ex);
}

double gate_weight(const GateConfig& gate, double delta_ps) {
    const double period = gate.period_ps();
    double d = std::fmod(delta_ps, period);
    if (d >= period / 2.0) d -= period;
    if (d < -period / 2.0) d += period;
    const double sigma = gate.sigma_ps();
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

double detection_prob(const DiodeModel& model, const BiasPoint& bias, double mu,
                      double delta_ps) {
    const double pdc = dark_prob_at(model, bias);
    const double eta = efficiency_at(model, bias);
    const double weight = gate_weight(model.gate, delta_ps);
    return 1.0 - (1.0 - pdc) * std::exp(-mu * eta * weight);
}

double trap_seed_mean(const DiodeModel& model, const BiasPoint& bias) {
    return model.traps.k_ap * model.traps.charge_factor_base * bias.v_ex;
}

double eq1_deadtime_survival(double deadtime_ps, double tau_ps) {
    return std::exp(-deadtime_ps / tau_ps);
}

}  // namespace spadsim::model
