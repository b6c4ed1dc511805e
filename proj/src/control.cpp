#include "spadsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spadsim/errors.hpp"

namespace spadsim::control {

void validate(const DriftModel& drift) {
    if (!(drift.rate_ps_per_min >= 0.0))
        throw ConfigError("drift_rate_ps_per_min must be >= 0");
    if (!(drift.eta_noise_fraction >= 0.0 && drift.eta_noise_fraction <= 0.1))
        throw ConfigError("eta_noise_fraction must lie in [0, 0.1]");
}

double drift_offset(const DriftModel& drift, double t_min) {
    if (t_min < 0.0) throw std::invalid_argument("drift_offset requires t >= 0");
    return drift.rate_ps_per_min * t_min;
}

void validate(const FeedbackPolicy& policy) {
    if (!(policy.scan_cost_min > 0.0) || !(policy.interval_min > policy.scan_cost_min))
        throw ConfigError("feedback requires interval_min > scan_cost_min > 0");
    if (!(policy.coarse_step_ps > 0.0) || !(policy.fine_step_ps > 0.0))
        throw ConfigError("scan steps must be > 0");
    if (policy.fine_step_ps > policy.coarse_step_ps)
        throw ConfigError("fine_step_ps must not exceed coarse_step_ps");
    if (!(policy.scan_range_ps > 0.0)) throw ConfigError("scan_range_ps must be > 0");
    if (!(policy.dwell_s > 0.0)) throw ConfigError("scan dwell must be > 0");
}

PeakSearchResult peak_search(const std::function<std::uint64_t(double)>& counter,
                             const FeedbackPolicy& policy, double previous_delay_ps) {
    validate(policy);

    auto argmax_over = [&](double start, double stop, double step, bool* any) {
        double best_delay = start;
        std::uint64_t best_count = 0;
        *any = false;
        for (double d = start; d <= stop + 1e-9; d += step) {
            const std::uint64_t c = counter(d);
            if (c > best_count) {
                best_count = c;
                best_delay = d;
                *any = true;
            }
        }
        return best_delay;
    };

    const double half = policy.scan_range_ps / 2.0;
    bool any = false;
    const double coarse_best =
        argmax_over(-half, half - policy.coarse_step_ps, policy.coarse_step_ps, &any);
    if (!any) return {previous_delay_ps, false};

    bool fine_any = false;
    const double fine_best =
        argmax_over(coarse_best - policy.coarse_step_ps,
                    coarse_best + policy.coarse_step_ps, policy.fine_step_ps,
                    &fine_any);
    return {fine_any ? fine_best : coarse_best, true};
}

StabilityTrace run_stability(const engine::SimConfig& operating_point, double hours,
                             bool feedback, const DriftModel& drift,
                             const FeedbackPolicy& policy, StabilityMode mode) {
    if (!(hours > 0.0)) throw UsageError("stability run requires hours > 0");
    engine::validate(operating_point);
    validate(drift);
    if (feedback) validate(policy);
    if (!(operating_point.mu > 0.0))
        throw ConfigError("stability runs require mu > 0");

    const model::DiodeModel& diode = operating_point.diode;
    const model::BiasPoint& bias = operating_point.bias;
    const double mu = operating_point.mu;
    const double laser_hz =
        diode.gate.gate_frequency_hz / diode.gate.laser_divisor;
    const std::uint64_t pulses_per_min =
        static_cast<std::uint64_t>(std::llround(60.0 * laser_hz));
    const std::uint64_t probe_pulses =
        static_cast<std::uint64_t>(std::llround(policy.dwell_s * laser_hz));
    const double eta0 = model::efficiency_at(diode, bias);

    const std::uint64_t total_min =
        static_cast<std::uint64_t>(std::llround(hours * 60.0));
    const std::uint64_t scan_minutes = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(policy.scan_cost_min)));

    Rng rng(operating_point.seed);
    StabilityTrace trace;
    trace.samples.reserve(total_min);

    // The optimum delay drifts linearly away from the initial setting.
    const double base_delay = operating_point.delay_ps;
    auto optimum_at = [&](double t_min) {
        return base_delay + drift_offset(drift, t_min);
    };
    double setting = base_delay;

    auto estimate_eta = [&](double offset_ps, std::uint64_t minute) {
        std::uint64_t k = 0;
        if (mode == StabilityMode::aggregate) {
            double eta_eff = eta0;
            if (drift.eta_noise_fraction > 0.0)
                eta_eff = std::max(
                    0.0, eta0 * (1.0 + drift.eta_noise_fraction * sample_normal(rng)));
            const double pdc = model::dark_prob_at(diode, bias);
            const double weight = model::gate_weight(diode.gate, offset_ps);
            const double p_click =
                1.0 - (1.0 - pdc) * std::exp(-mu * eta_eff * weight);
            k = sample_poisson(rng, static_cast<double>(pulses_per_min) * p_click);
        } else {
            engine::SimConfig cfg = operating_point;
            cfg.delay_ps = offset_ps;
            cfg.duration_ps = 60ull * 1000000000000ull;
            cfg.seed = derive_seed(operating_point.seed, 0x5741 + minute);
            cfg.traps_enabled = false;  // cross-validates drift/feedback only
            cfg.emit_truth_labels = false;
            const engine::TagStream stream = engine::simulate(cfg);
            // Clicks in the illuminated gate position of the fold.
            const std::uint64_t fold =
                diode.gate.period_ps_int() * diode.gate.laser_divisor;
            const std::uint64_t halfgate = diode.gate.period_ps_int() / 2;
            for (std::uint64_t t : stream.tags) {
                const std::uint64_t r = (t + halfgate) % fold;
                if (r < 2 * halfgate) ++k;
            }
        }
        if (k >= pulses_per_min) k = pulses_per_min - 1;
        const double eta_hat =
            -std::log1p(-static_cast<double>(k) / static_cast<double>(pulses_per_min)) /
            mu;
        return std::clamp(eta_hat, 0.0, 1.0);
    };

    double op_minutes_since_scan = 0.0;
    std::uint64_t m = 0;
    while (m < total_min) {
        if (feedback && op_minutes_since_scan >= policy.interval_min) {
            const double scan_start = static_cast<double>(m);
            const double opt_frozen = optimum_at(scan_start);
            const auto counter = [&](double d) {
                const double p = model::detection_prob(diode, bias, mu, d - opt_frozen);
                return sample_poisson(rng, static_cast<double>(probe_pulses) * p);
            };
            const PeakSearchResult found = peak_search(counter, policy, setting);
            ++trace.scans;
            if (!found.success) ++trace.failed_scans;

            for (std::uint64_t j = 0; j < scan_minutes && m < total_min; ++j, ++m) {
                const double t_mid = static_cast<double>(m) + 0.5;
                const double offset = optimum_at(t_mid) - setting;
                trace.samples.push_back(
                    {t_mid, estimate_eta(offset, m), setting, true});
            }
            setting = found.best_delay_ps;
            op_minutes_since_scan = 0.0;
            continue;
        }
        const double t_mid = static_cast<double>(m) + 0.5;
        const double offset = optimum_at(t_mid) - setting;
        trace.samples.push_back({t_mid, estimate_eta(offset, m), setting, false});
        op_minutes_since_scan += 1.0;
        ++m;
    }
    return trace;
}

double eta_crossing_min(const StabilityTrace& trace, double eta_threshold) {
    bool have_prev = false;
    double t0 = 0.0, e0 = 0.0;
    for (const StabilitySample& s : trace.samples) {
        if (s.in_scan) continue;
        if (s.eta <= eta_threshold) {
            if (!have_prev || e0 <= eta_threshold) return s.time_min;
            return t0 + (e0 - eta_threshold) * (s.time_min - t0) / (e0 - s.eta);
        }
        t0 = s.time_min;
        e0 = s.eta;
        have_prev = true;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace spadsim::control
