#pragma once

#include <cstdint>
#include <vector>

#include "spadsim/engine.hpp"
#include "spadsim/model.hpp"

namespace spadsim::analysis {

struct Histogram {
    std::uint64_t bin_width_ps = 1;
    std::int64_t origin_ps = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t fold_period_ps = 0;  // 0 = not folded

    double bin_center_ps(std::size_t bin) const {
        return static_cast<double>(origin_ps) +
               (static_cast<double>(bin) + 0.5) * static_cast<double>(bin_width_ps);
    }
    std::uint64_t total() const;
};

/// Folds every tag into [0, fold_period) relative to origin_ps and bins it.
Histogram fold_histogram(const engine::TagStream& stream,
                         std::uint64_t fold_period_ps, std::uint64_t bin_width_ps,
                         std::int64_t origin_ps = 0);

/// Histogram of time since the previous detection, over [origin, origin+range).
Histogram interval_histogram(const engine::TagStream& stream,
                             std::uint64_t bin_width_ps, std::uint64_t range_ps,
                             std::int64_t origin_ps = 0);

enum class FitMethod { gaussian_least_squares, half_max_interpolation };

struct PeakFit {
    double fwhm_ps = 0.0;
    double center_ps = 0.0;
    double amplitude = 0.0;
    double background = 0.0;
    FitMethod method = FitMethod::gaussian_least_squares;
};

/// Least-squares Gaussian peak fit (amplitude, center, sigma, flat
/// background) over point samples, with a linear-interpolated half-maximum
/// fallback when the fit does not converge. Throws FitError when neither
/// path yields a width.
PeakFit fit_peak_fwhm(const std::vector<double>& xs, const std::vector<double>& ys);

/// The fallback path by itself: width between the linear-interpolated
/// half-maximum crossings around the global maximum.
PeakFit interpolate_half_max(const std::vector<double>& xs,
                             const std::vector<double>& ys);

/// Peak width of a folded histogram. The model integrates the Gaussian
/// over each bin, so the reported FWHM is free of the broadening that the
/// TDC quantization lattice imposes on naive point fits (~6 ps at a 99 ps
/// peak with 50 ps bins, which would swamp the reference-channel figure).
/// The fit uses bins within fit_halfwindow_ps of the tallest bin.
PeakFit measure_folded_peak(const engine::TagStream& stream,
                            std::uint64_t fold_period_ps,
                            std::uint64_t bin_width_ps,
                            double fit_halfwindow_ps);

struct AfterpulseReport {
    std::uint64_t c_tol = 0;     // total illuminated-run counts
    std::uint64_t c_dc = 0;      // total dark-run counts
    double c_ph = 0.0;           // estimated photon counts
    double p_ap = 0.0;
    double p_ap_per_gate = 0.0;
    double p_ap_per_ns = 0.0;
    double mean_interval_ps = 0.0;      // duration / c_ph
    double main_peak_center_ps = 0.0;   // fitted fold position of the peak
};

/// Total afterpulse probability from paired illuminated/dark tag streams:
/// p_ap = (c_tol - c_dc - c_ph) / c_ph with c_ph taken from the folded
/// main-peak window after subtracting the dark share c_dc / laser_divisor.
/// main_peak_window_ps is the window half-width around the fitted center.
AfterpulseReport estimate_afterpulse(const engine::TagStream& illum,
                                     const engine::TagStream& dark,
                                     const model::GateConfig& gate,
                                     double main_peak_window_ps);

struct JitterReport {
    double total_fwhm_ps = 0.0;
    double reference_fwhm_ps = 0.0;
    double device_fwhm_ps = 0.0;
};

/// sqrt(total^2 - reference^2); throws StatisticsError when total < reference.
double quadrature_subtract(double total_fwhm_ps, double reference_fwhm_ps);

/// Detrapping lifetime from the side-peak envelope of a time-since-previous-
/// detection histogram, by weighted log-linear least squares above the noise
/// floor. Interval histograms of a stream with total rate lambda are damped
/// by exp(-lambda * dt); passing truncation_rate_hz undoes that damping
/// bin-wise before the fit. Returns +infinity for a flat envelope.
double fit_detrap_tau(const Histogram& hist, const model::GateConfig& gate,
                      double truncation_rate_hz = 0.0);

double dark_rate_hz(double p_dc_per_gate, double gate_frequency_hz);
double dark_prob_per_ns(double p_dc_per_gate, double gate_fwhm_ps);

}  // namespace spadsim::analysis
