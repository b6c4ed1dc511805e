#include "spadsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "spadsim/errors.hpp"

namespace spadsim::engine {

namespace {
constexpr std::uint64_t kNoEvent = std::numeric_limits<std::uint64_t>::max();
}

const char* label_name(TagLabel label) {
    switch (label) {
        case TagLabel::photon: return "photon";
        case TagLabel::dark: return "dark";
        case TagLabel::afterpulse: return "afterpulse";
    }
    return "?";
}

TagLabel parse_label(const std::string& name) {
    if (name == "photon") return TagLabel::photon;
    if (name == "dark") return TagLabel::dark;
    if (name == "afterpulse") return TagLabel::afterpulse;
    throw std::invalid_argument("unknown tag label '" + name + "'");
}

double SimConfig::total_jitter_fwhm_ps() const {
    return std::sqrt(spad_jitter_fwhm_ps * spad_jitter_fwhm_ps +
                     reference_jitter_fwhm_ps * reference_jitter_fwhm_ps);
}

void validate(const SimConfig& config) {
    model::validate(config.diode, config.bias);
    if (config.duration_ps >= (1ull << 63))
        throw ConfigError("duration_ps must be < 2^63");
    if (config.tdc_resolution_ps == 0)
        throw ConfigError("tdc_resolution_ps must be > 0");
    if (!(config.mu >= 0.0)) throw ConfigError("mu must be >= 0");
    if (!(config.spad_jitter_fwhm_ps >= 0.0) ||
        !(config.reference_jitter_fwhm_ps >= 0.0))
        throw ConfigError("jitter FWHM values must be >= 0");
}

std::uint64_t deadtime_gates(std::uint64_t deadtime_ps, std::uint64_t period_ps) {
    return (deadtime_ps + period_ps - 1) / period_ps;
}

std::uint64_t next_event_gap(Rng& rng, double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("next_event_gap requires 0 < p < 1");
    const double u = rng.uniform();
    const double g = std::floor(std::log1p(-u) / std::log1p(-p));
    if (!(g >= 0.0)) return 1;
    if (g >= 4.0e18) return static_cast<std::uint64_t>(4.0e18);
    return static_cast<std::uint64_t>(g) + 1;
}

std::vector<AfterpulseCandidate> schedule_afterpulses(Rng& rng,
                                                      std::uint64_t avalanche_time_ps,
                                                      const model::DiodeModel& diode,
                                                      const model::BiasPoint& bias) {
    std::vector<AfterpulseCandidate> accepted;
    const double nbar = model::trap_seed_mean(diode, bias);
    if (nbar <= 0.0) return accepted;
    const std::uint64_t n = sample_poisson(rng, nbar);
    if (n == 0) return accepted;

    const std::uint64_t period = diode.gate.period_ps_int();
    const std::uint64_t g0 = (avalanche_time_ps + period / 2) / period;
    const double residual = static_cast<double>(
        static_cast<std::int64_t>(avalanche_time_ps) -
        static_cast<std::int64_t>(g0 * period));
    const double sigma = diode.gate.sigma_ps();
    const double tau = diode.traps.tau_detrap_ps;

    accepted.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const double release = residual + sample_exponential(rng, tau);
        std::int64_t m = std::llround(release / static_cast<double>(period));
        if (m < 1) m = 1;  // a trap cannot retrigger the gate that filled it
        const double offset = release - static_cast<double>(m) * static_cast<double>(period);
        const double weight = std::exp(-offset * offset / (2.0 * sigma * sigma));
        if (rng.uniform() < weight) {
            const std::uint64_t gate = g0 + static_cast<std::uint64_t>(m);
            accepted.push_back({gate * period, gate});
        }
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const AfterpulseCandidate& a, const AfterpulseCandidate& b) {
                  return a.time_ps < b.time_ps;
              });
    return accepted;
}

std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>>
apply_logic_deadtime(const std::vector<std::uint64_t>& events,
                     std::uint64_t deadtime_ps) {
    std::vector<std::uint64_t> counted;
    std::vector<std::uint64_t> suppressed;
    bool have_last = false;
    std::uint64_t last = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (i > 0 && events[i] < events[i - 1])
            throw std::invalid_argument("apply_logic_deadtime requires sorted input");
        if (!have_last || events[i] - last >= deadtime_ps) {
            counted.push_back(events[i]);
            last = events[i];
            have_last = true;
        } else {
            suppressed.push_back(events[i]);
        }
    }
    return {std::move(counted), std::move(suppressed)};
}

std::uint64_t stamp(std::uint64_t event_time_ps, double jitter_fwhm_ps,
                    std::uint32_t tdc_resolution_ps, Rng& rng) {
    if (tdc_resolution_ps == 0)
        throw std::invalid_argument("tdc resolution must be > 0");
    std::int64_t t = static_cast<std::int64_t>(event_time_ps);
    if (jitter_fwhm_ps > 0.0) {
        const double sigma = jitter_fwhm_ps / 2.3548200450309493;
        t += std::llround(sigma * sample_normal(rng));
    }
    const std::int64_t res = tdc_resolution_ps;
    const std::int64_t shifted = t + res / 2;
    if (shifted < 0) return 0;
    return static_cast<std::uint64_t>(shifted / res * res);
}

TagStream simulate(const SimConfig& config) {
    validate(config);

    TagStream out;
    out.duration_ps = config.duration_ps;
    out.tdc_resolution_ps = config.tdc_resolution_ps;

    const std::uint64_t period = config.diode.gate.period_ps_int();
    const std::uint64_t n_gates = config.duration_ps / period;
    const std::uint64_t divisor = config.diode.gate.laser_divisor;
    out.truth.n_gates = n_gates;
    out.truth.n_laser_pulses = n_gates == 0 ? 0 : (n_gates + divisor - 1) / divisor;
    if (n_gates == 0) return out;

    const double p_dark = model::dark_prob_at(config.diode, config.bias);
    const double eta = model::efficiency_at(config.diode, config.bias);
    const double weight = model::gate_weight(config.diode.gate, config.delay_ps);
    const double p_photon = 1.0 - std::exp(-config.mu * eta * weight);
    const std::uint64_t dt_gates =
        deadtime_gates(config.logic_deadtime_ps, period);
    const double jitter = config.total_jitter_fwhm_ps();

    Rng rng(config.seed);

    // Three independent event sources merged in gate order: photon clicks on
    // illuminated gates, dark clicks on every gate, trap releases.
    std::uint64_t next_dark = kNoEvent;
    if (p_dark > 0.0 && p_dark < 1.0)
        next_dark = next_event_gap(rng, p_dark) - 1;
    else if (p_dark >= 1.0)
        next_dark = 0;

    const std::uint64_t max_pulse = out.truth.n_laser_pulses;
    std::uint64_t next_pulse = kNoEvent;
    if (p_photon > 0.0 && p_photon < 1.0) {
        const std::uint64_t gap = next_event_gap(rng, p_photon);
        next_pulse = gap - 1;
    } else if (p_photon >= 1.0) {
        next_pulse = 0;
    }
    auto photon_gate = [&]() -> std::uint64_t {
        return (next_pulse == kNoEvent || next_pulse >= max_pulse)
                   ? kNoEvent
                   : next_pulse * divisor;
    };

    std::priority_queue<std::uint64_t, std::vector<std::uint64_t>,
                        std::greater<std::uint64_t>>
        pending;

    std::vector<std::uint64_t> event_gates;
    std::vector<TagLabel> event_labels;
    bool have_last = false;
    std::uint64_t last_counted = 0;

    while (true) {
        std::uint64_t g = kNoEvent;
        if (next_dark != kNoEvent) g = next_dark;
        const std::uint64_t pg = photon_gate();
        if (pg < g) g = pg;
        if (!pending.empty() && pending.top() < g) g = pending.top();
        if (g >= n_gates) break;

        bool has_photon = false;
        bool has_dark = false;
        if (pg == g) {
            has_photon = true;
            next_pulse += p_photon >= 1.0 ? 1 : next_event_gap(rng, p_photon);
        }
        if (next_dark == g) {
            has_dark = true;
            next_dark += next_event_gap(rng, p_dark);
        }
        while (!pending.empty() && pending.top() == g) pending.pop();

        const TagLabel label = has_photon  ? TagLabel::photon
                               : has_dark  ? TagLabel::dark
                                           : TagLabel::afterpulse;

        const bool counted =
            !have_last || (g - last_counted >= dt_gates);
        if (counted) {
            last_counted = g;
            have_last = true;
            event_gates.push_back(g);
            event_labels.push_back(label);
            switch (label) {
                case TagLabel::photon: ++out.truth.n_photon; break;
                case TagLabel::dark: ++out.truth.n_dark; break;
                case TagLabel::afterpulse: ++out.truth.n_afterpulse; break;
            }
        } else {
            ++out.truth.n_suppressed;
        }

        // Every avalanche fills traps, suppressed ones included: the SPAD
        // keeps gating during logic deadtime.
        if (config.traps_enabled) {
            for (const AfterpulseCandidate& cand :
                 schedule_afterpulses(rng, g * period, config.diode, config.bias)) {
                if (cand.gate_index < n_gates) pending.push(cand.gate_index);
            }
        }
    }

    const std::size_t n = event_gates.size();
    std::vector<std::uint64_t> stamped(n);
    for (std::size_t i = 0; i < n; ++i)
        stamped[i] =
            stamp(event_gates[i] * period, jitter, config.tdc_resolution_ps, rng);

    // Jitter can locally reorder stamps; the emitted stream is time-sorted.
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         return stamped[a] < stamped[b];
                     });
    out.tags.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.tags[i] = stamped[order[i]];
    if (config.emit_truth_labels) {
        out.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.labels[i] = event_labels[order[i]];
    }
    return out;
}

}  // namespace spadsim::engine
