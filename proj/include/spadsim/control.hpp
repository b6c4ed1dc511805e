#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spadsim/engine.hpp"

namespace spadsim::control {

/// Linear phase drift between laser pulses and sine gates, plus optional
/// gate-amplitude noise expressed as a multiplicative efficiency jitter.
/// The default rate makes the efficiency at the 11 % operating point reach
/// 10 % after 75 minutes of unchecked drift.
struct DriftModel {
    double rate_ps_per_min = 0.4672;
    double eta_noise_fraction = 0.01;
};

void validate(const DriftModel& drift);

double drift_offset(const DriftModel& drift, double t_min);

struct FeedbackPolicy {
    double interval_min = 10.0;   // operating minutes between scans
    double scan_cost_min = 1.0;   // minutes lost to one scan
    double scan_range_ps = 800.0; // full gate period
    double coarse_step_ps = 25.0;
    double fine_step_ps = 5.0;
    double dwell_s = 1.0;         // count integration per probe point
};

void validate(const FeedbackPolicy& policy);

struct PeakSearchResult {
    double best_delay_ps = 0.0;
    bool success = false;
};

/// Two-stage argmax scan: coarse pass over the full range, then a fine pass
/// within one coarse step of the coarse maximum. Ties break toward the
/// smallest delay. A scan that sees zero counts everywhere keeps
/// previous_delay_ps and reports failure.
PeakSearchResult peak_search(const std::function<std::uint64_t(double)>& counter,
                             const FeedbackPolicy& policy, double previous_delay_ps);

struct StabilitySample {
    double time_min = 0.0;
    double eta = 0.0;
    double delay_ps = 0.0;
    bool in_scan = false;
};

struct StabilityTrace {
    std::vector<StabilitySample> samples;
    std::uint64_t scans = 0;
    std::uint64_t failed_scans = 0;
};

enum class StabilityMode {
    aggregate,  // per-minute expected counts, Poisson-sampled
    tag_level   // one engine run per minute (cross-validation)
};

/// Minute-resolution stability run at the given operating point. With
/// feedback on, a peak search runs after every interval_min minutes of
/// operation, costs scan_cost_min minutes (samples flagged in_scan), and
/// resets the delay to the found maximum.
StabilityTrace run_stability(const engine::SimConfig& operating_point, double hours,
                             bool feedback, const DriftModel& drift,
                             const FeedbackPolicy& policy,
                             StabilityMode mode = StabilityMode::aggregate);

/// Interpolated time at which the non-scan eta trace first falls to the
/// threshold; NaN if it never does.
double eta_crossing_min(const StabilityTrace& trace, double eta_threshold);

}  // namespace spadsim::control
