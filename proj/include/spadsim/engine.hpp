#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spadsim/model.hpp"
#include "spadsim/rng.hpp"

namespace spadsim::engine {

enum class TagLabel : std::uint8_t { photon = 0, dark = 1, afterpulse = 2 };

const char* label_name(TagLabel label);
TagLabel parse_label(const std::string& name);

struct SimConfig {
    model::DiodeModel diode;
    model::BiasPoint bias;
    double mu = 0.1;                     // mean photons per laser pulse
    double delay_ps = 0.0;               // laser offset from gate center
    std::uint64_t duration_ps = 0;
    std::uint64_t logic_deadtime_ps = 0;  // quantized up to whole gates
    double spad_jitter_fwhm_ps = 288.0;
    double reference_jitter_fwhm_ps = 99.0;
    std::uint32_t tdc_resolution_ps = 50;
    std::uint64_t seed = 1;
    bool traps_enabled = true;
    bool emit_truth_labels = false;

    double total_jitter_fwhm_ps() const;
};

void validate(const SimConfig& config);

/// Count-off time in whole gates: ceil(deadtime / gate period).
std::uint64_t deadtime_gates(std::uint64_t deadtime_ps, std::uint64_t period_ps);

struct TruthCounters {
    std::uint64_t n_photon = 0;
    std::uint64_t n_dark = 0;
    std::uint64_t n_afterpulse = 0;
    std::uint64_t n_suppressed = 0;  // avalanches inside logic deadtime
    std::uint64_t n_gates = 0;
    std::uint64_t n_laser_pulses = 0;

    std::uint64_t counted_total() const {
        return n_photon + n_dark + n_afterpulse;
    }
};

struct TagStream {
    std::vector<std::uint64_t> tags;   // TDC-quantized ps, nondecreasing
    std::vector<TagLabel> labels;      // parallel to tags when truth enabled
    TruthCounters truth;
    std::uint64_t duration_ps = 0;
    std::uint32_t tdc_resolution_ps = 50;

    std::uint64_t size() const { return tags.size(); }
};

/// Gates until the next success of a Bernoulli(p) trial sequence,
/// geometric with mean 1/p. Requires 0 < p < 1.
std::uint64_t next_event_gap(Rng& rng, double p);

struct AfterpulseCandidate {
    std::uint64_t time_ps = 0;    // center of the assigned gate
    std::uint64_t gate_index = 0;
};

/// Draws Poisson(trap_seed_mean) traps for one avalanche, releases each
/// after an Exp(tau) delay, assigns the release to the nearest gate at or
/// after the next gate, and keeps it with probability
/// gate_weight(release offset). Sorted by time.
std::vector<AfterpulseCandidate> schedule_afterpulses(Rng& rng,
                                                      std::uint64_t avalanche_time_ps,
                                                      const model::DiodeModel& diode,
                                                      const model::BiasPoint& bias);

/// Greedy count-off scan over ascending event times: an event is counted
/// iff it is >= deadtime_ps after the last counted event. Throws on
/// unsorted input.
std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>>
apply_logic_deadtime(const std::vector<std::uint64_t>& events,
                     std::uint64_t deadtime_ps);

/// Gaussian timestamp jitter plus TDC quantization (round to the nearest
/// multiple of the resolution, clamped at zero).
std::uint64_t stamp(std::uint64_t event_time_ps, double jitter_fwhm_ps,
                    std::uint32_t tdc_resolution_ps, Rng& rng);

/// Event-driven Monte Carlo run over the full gate sequence.
/// Deterministic for a fixed config (including seed).
TagStream simulate(const SimConfig& config);

}  // namespace spadsim::engine
