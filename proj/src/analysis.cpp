#include "spadsim/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spadsim/errors.hpp"

namespace spadsim::analysis {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

double normal_pdf(double z) {
    return 0.3989422804014326779 * std::exp(-0.5 * z * z);
}

// Peak model over point samples: A * exp(-(x-c)^2 / 2 s^2) + b.
struct PointGaussian {
    double value(double x, const double* p, double* grad) const {
        const double a = p[0], c = p[1], s = p[2], b = p[3];
        const double z = (x - c) / s;
        const double e = std::exp(-0.5 * z * z);
        if (grad) {
            grad[0] = e;
            grad[1] = a * e * z / s;
            grad[2] = a * e * z * z / s;
            grad[3] = 1.0;
        }
        return a * e + b;
    }
};

// Peak model over histogram bins: the Gaussian mass integrated across each
// bin, M * (Phi(zR) - Phi(zL)) + b, with half the bin width on each side.
struct BinnedGaussian {
    double half_bin;
    double value(double x, const double* p, double* grad) const {
        const double m = p[0], c = p[1], s = p[2], b = p[3];
        const double zl = (x - half_bin - c) / s;
        const double zr = (x + half_bin - c) / s;
        const double mass = normal_cdf(zr) - normal_cdf(zl);
        if (grad) {
            const double pl = normal_pdf(zl);
            const double pr = normal_pdf(zr);
            grad[0] = mass;
            grad[1] = m * (pl - pr) / s;
            grad[2] = m * (pl * zl - pr * zr) / s;
            grad[3] = 1.0;
        }
        return m * mass + b;
    }
};

template <typename Model>
bool levenberg_marquardt(const std::vector<double>& xs, const std::vector<double>& ys,
                         const Model& model, double* params) {
    const std::size_t n = xs.size();
    auto chi2_of = [&](const double* p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - model.value(xs[i], p, nullptr);
            acc += r * r;
        }
        return acc;
    };

    double p[4] = {params[0], params[1], params[2], params[3]};
    double chi2 = chi2_of(p);
    if (!std::isfinite(chi2)) return false;
    double lambda = 1e-3;

    for (int iter = 0; iter < 200; ++iter) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        double grad[4];
        for (std::size_t i = 0; i < n; ++i) {
            const double f = model.value(xs[i], p, grad);
            const double r = ys[i] - f;
            for (int a = 0; a < 4; ++a) {
                jtr(a) += grad[a] * r;
                for (int b = a; b < 4; ++b) jtj(a, b) += grad[a] * grad[b];
            }
        }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < a; ++b) jtj(a, b) = jtj(b, a);

        bool stepped = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::Matrix4d damped = jtj;
            for (int a = 0; a < 4; ++a)
                damped(a, a) += lambda * (jtj(a, a) > 0 ? jtj(a, a) : 1.0);
            const Eigen::Vector4d delta = damped.ldlt().solve(jtr);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            double trial[4];
            for (int a = 0; a < 4; ++a) trial[a] = p[a] + delta(a);
            trial[2] = std::abs(trial[2]);
            if (trial[2] <= 0.0 || !std::isfinite(trial[2])) {
                lambda *= 10.0;
                continue;
            }
            const double trial_chi2 = chi2_of(trial);
            if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
                const double rel = std::abs(chi2 - trial_chi2) /
                                   std::max(chi2, 1e-300);
                std::copy(trial, trial + 4, p);
                const bool small_step =
                    std::abs(delta(1)) < 1e-9 * std::max(1.0, std::abs(p[1])) &&
                    std::abs(delta(2)) < 1e-9 * std::max(1.0, p[2]);
                chi2 = trial_chi2;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (rel < 1e-12 || small_step) {
                    std::copy(p, p + 4, params);
                    return true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // Stuck: accept if we are at a (possibly flat) minimum.
            std::copy(p, p + 4, params);
            return std::isfinite(chi2);
        }
    }
    std::copy(p, p + 4, params);
    return true;
}

struct HalfMax {
    double fwhm;
    double center;
    double amplitude;
    double background;
};

// Linear-interpolated half-maximum crossings around the global maximum.
bool half_max_width(const std::vector<double>& xs, const std::vector<double>& ys,
                    HalfMax* out) {
    const std::size_t n = xs.size();
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (ys[i] > ys[imax]) imax = i;
    const double base = *std::min_element(ys.begin(), ys.end());
    const double peak = ys[imax];
    if (!(peak > base)) return false;
    const double half = base + 0.5 * (peak - base);

    double left = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = imax; i-- > 0;) {
        if (ys[i] <= half) {
            const double dy = ys[i + 1] - ys[i];
            left = dy == 0.0 ? xs[i]
                             : xs[i] + (half - ys[i]) * (xs[i + 1] - xs[i]) / dy;
            break;
        }
    }
    double right = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = imax + 1; i < n; ++i) {
        if (ys[i] <= half) {
            const double dy = ys[i] - ys[i - 1];
            right = dy == 0.0 ? xs[i]
                              : xs[i - 1] +
                                    (half - ys[i - 1]) * (xs[i] - xs[i - 1]) / dy;
            break;
        }
    }
    if (!std::isfinite(left) || !std::isfinite(right) || !(right > left))
        return false;
    out->fwhm = right - left;
    out->center = 0.5 * (left + right);
    out->amplitude = peak - base;
    out->background = base;
    return true;
}

void initial_guess(const std::vector<double>& xs, const std::vector<double>& ys,
                   double* p) {
    const std::size_t n = xs.size();
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (ys[i] > ys[imax]) imax = i;
    const double base = *std::min_element(ys.begin(), ys.end());
    p[0] = ys[imax] - base;
    p[1] = xs[imax];
    p[3] = base;
    HalfMax hm{};
    if (half_max_width(xs, ys, &hm) && hm.fwhm > 0.0) {
        p[2] = hm.fwhm / kFwhmToSigma;
        p[1] = hm.center;
    } else {
        p[2] = std::max((xs.back() - xs.front()) / 6.0, 1e-6);
    }
}

template <typename Model>
bool try_gaussian_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                      const Model& model, PeakFit* out) {
    double p[4];
    initial_guess(xs, ys, p);
    if (!levenberg_marquardt(xs, ys, model, p)) return false;
    const double sigma = std::abs(p[2]);
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(p[1])) return false;
    if (!(p[0] > 0.0)) return false;
    // Reject degenerate solutions wider than the sampled span.
    if (sigma * kFwhmToSigma > 4.0 * (xs.back() - xs.front())) return false;
    out->fwhm_ps = sigma * kFwhmToSigma;
    out->center_ps = p[1];
    out->amplitude = p[0];
    out->background = p[3];
    out->method = FitMethod::gaussian_least_squares;
    return true;
}

}  // namespace

std::uint64_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Histogram fold_histogram(const engine::TagStream& stream,
                         std::uint64_t fold_period_ps, std::uint64_t bin_width_ps,
                         std::int64_t origin_ps) {
    if (bin_width_ps == 0 || fold_period_ps < bin_width_ps)
        throw std::invalid_argument("fold_histogram requires fold_period >= bin_width > 0");
    Histogram hist;
    hist.bin_width_ps = bin_width_ps;
    hist.origin_ps = origin_ps;
    hist.fold_period_ps = fold_period_ps;
    hist.counts.assign((fold_period_ps + bin_width_ps - 1) / bin_width_ps, 0);
    const std::int64_t fold = static_cast<std::int64_t>(fold_period_ps);
    for (std::uint64_t t : stream.tags) {
        std::int64_t r = (static_cast<std::int64_t>(t) - origin_ps) % fold;
        if (r < 0) r += fold;
        ++hist.counts[static_cast<std::uint64_t>(r) / bin_width_ps];
    }
    return hist;
}

Histogram interval_histogram(const engine::TagStream& stream,
                             std::uint64_t bin_width_ps, std::uint64_t range_ps,
                             std::int64_t origin_ps) {
    if (bin_width_ps == 0 || range_ps < bin_width_ps)
        throw std::invalid_argument("interval_histogram requires range >= bin_width > 0");
    Histogram hist;
    hist.bin_width_ps = bin_width_ps;
    hist.origin_ps = origin_ps;
    hist.counts.assign((range_ps + bin_width_ps - 1) / bin_width_ps, 0);
    for (std::size_t i = 1; i < stream.tags.size(); ++i) {
        const std::int64_t dt =
            static_cast<std::int64_t>(stream.tags[i] - stream.tags[i - 1]) - origin_ps;
        if (dt >= 0 && dt < static_cast<std::int64_t>(range_ps))
            ++hist.counts[static_cast<std::uint64_t>(dt) / bin_width_ps];
    }
    return hist;
}

PeakFit interpolate_half_max(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw std::invalid_argument("interpolate_half_max needs matched samples");
    HalfMax hm{};
    if (!half_max_width(xs, ys, &hm))
        throw FitError("no half-maximum crossings");
    PeakFit fit;
    fit.fwhm_ps = hm.fwhm;
    fit.center_ps = hm.center;
    fit.amplitude = hm.amplitude;
    fit.background = hm.background;
    fit.method = FitMethod::half_max_interpolation;
    return fit;
}

PeakFit fit_peak_fwhm(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("fit_peak_fwhm: xs and ys lengths differ");
    if (xs.size() < 5)
        throw std::invalid_argument("fit_peak_fwhm needs at least 5 points");
    if (*std::max_element(ys.begin(), ys.end()) <= 0.0)
        throw FitError("fit_peak_fwhm: no positive samples");

    PeakFit fit;
    if (try_gaussian_fit(xs, ys, PointGaussian{}, &fit)) return fit;
    return interpolate_half_max(xs, ys);
}

PeakFit measure_folded_peak(const engine::TagStream& stream,
                            std::uint64_t fold_period_ps,
                            std::uint64_t bin_width_ps,
                            double fit_halfwindow_ps) {
    if (stream.tags.empty()) throw FitError("measure_folded_peak: empty stream");
    // First pass locates the tallest bin; the second pass re-folds with the
    // peak at mid-range so the fit region never wraps.
    const Histogram coarse = fold_histogram(stream, fold_period_ps, bin_width_ps);
    std::size_t imax = 0;
    for (std::size_t i = 1; i < coarse.counts.size(); ++i)
        if (coarse.counts[i] > coarse.counts[imax]) imax = i;
    const std::int64_t shift =
        static_cast<std::int64_t>(imax * bin_width_ps + bin_width_ps / 2) -
        static_cast<std::int64_t>(fold_period_ps / 2);
    const Histogram hist =
        fold_histogram(stream, fold_period_ps, bin_width_ps, shift);

    std::vector<double> xs;
    std::vector<double> ys;
    const double mid = static_cast<double>(fold_period_ps) / 2.0;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double x = hist.bin_center_ps(i) - static_cast<double>(hist.origin_ps);
        if (std::abs(x - mid) <= fit_halfwindow_ps) {
            xs.push_back(x);
            ys.push_back(static_cast<double>(hist.counts[i]));
        }
    }
    PeakFit fit;
    if (!try_gaussian_fit(xs, ys, BinnedGaussian{0.5 * static_cast<double>(bin_width_ps)},
                          &fit)) {
        HalfMax hm{};
        if (!half_max_width(xs, ys, &hm))
            throw FitError("measure_folded_peak: fit failed");
        fit.fwhm_ps = hm.fwhm;
        fit.center_ps = hm.center;
        fit.amplitude = hm.amplitude;
        fit.background = hm.background;
        fit.method = FitMethod::half_max_interpolation;
    }
    // Map the fitted center back to the unshifted fold coordinate.
    double center = fit.center_ps + static_cast<double>(shift);
    const double fold = static_cast<double>(fold_period_ps);
    center = std::fmod(center, fold);
    if (center < 0.0) center += fold;
    fit.center_ps = center;
    return fit;
}

AfterpulseReport estimate_afterpulse(const engine::TagStream& illum,
                                     const engine::TagStream& dark,
                                     const model::GateConfig& gate,
                                     double main_peak_window_ps) {
    if (main_peak_window_ps <= 0.0)
        throw std::invalid_argument("main_peak_window_ps must be > 0");
    AfterpulseReport report;
    report.c_tol = illum.size();
    report.c_dc = dark.size();
    if (illum.tags.empty())
        throw StatisticsError("estimate_afterpulse: illuminated stream is empty");

    const std::uint64_t fold =
        gate.period_ps_int() * static_cast<std::uint64_t>(gate.laser_divisor);
    const PeakFit peak = measure_folded_peak(
        illum, fold, illum.tdc_resolution_ps, static_cast<double>(gate.period_ps_int()));
    report.main_peak_center_ps = peak.center_ps;

    // Window: cyclic distance from the fitted center below w plus half a TDC
    // bin, so both edge bins of the quantization lattice enter symmetrically.
    const std::int64_t fold_i = static_cast<std::int64_t>(fold);
    const std::int64_t reach = std::llround(main_peak_window_ps +
                                            0.5 * illum.tdc_resolution_ps);
    const std::int64_t span = std::min(2 * reach - 1, fold_i);
    std::int64_t lo = (std::llround(peak.center_ps) - reach + 1) % fold_i;
    if (lo < 0) lo += fold_i;
    std::uint64_t in_window = 0;
    for (std::uint64_t t : illum.tags) {
        std::int64_t r = (static_cast<std::int64_t>(t) - lo) % fold_i;
        if (r < 0) r += fold_i;
        if (r < span) ++in_window;
    }

    report.c_ph = static_cast<double>(in_window) -
                  static_cast<double>(report.c_dc) / gate.laser_divisor;
    if (!(report.c_ph > 0.0))
        throw StatisticsError(
            "estimate_afterpulse: non-positive photon count estimate "
            "(insufficient illumination or wrong window)");

    report.p_ap = (static_cast<double>(report.c_tol) -
                   static_cast<double>(report.c_dc) - report.c_ph) /
                  report.c_ph;
    // Per-gate normalization over the mean photon-detection interval.
    report.mean_interval_ps = static_cast<double>(illum.duration_ps) / report.c_ph;
    report.p_ap_per_gate = report.p_ap / (report.mean_interval_ps / gate.period_ps());
    report.p_ap_per_ns = report.p_ap_per_gate / (gate.gate_fwhm_ps / 1000.0);
    return report;
}

double quadrature_subtract(double total_fwhm_ps, double reference_fwhm_ps) {
    if (!(reference_fwhm_ps >= 0.0))
        throw StatisticsError("quadrature_subtract: reference must be >= 0");
    if (total_fwhm_ps < reference_fwhm_ps)
        throw StatisticsError(
            "quadrature_subtract: total below reference (miscalibrated reference)");
    return std::sqrt(total_fwhm_ps * total_fwhm_ps -
                     reference_fwhm_ps * reference_fwhm_ps);
}

double fit_detrap_tau(const Histogram& hist, const model::GateConfig& gate,
                      double truncation_rate_hz) {
    const double period = gate.period_ps();
    const double rate_per_ps = truncation_rate_hz * 1e-12;
    struct Point {
        double t;
        double raw;
        double corrected;
    };
    std::vector<Point> peaks;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double t = hist.bin_center_ps(i);
        const std::int64_t pos = std::llround(t / period);
        if (pos < 1) continue;  // main/same-gate bin
        // Laser-interval comb positions carry photon-pair peaks three orders
        // of magnitude above the envelope; jitter spills them one position to
        // either side, so those neighbors go too.
        const std::int64_t comb = pos % gate.laser_divisor;
        if (comb == 0 || comb == 1 ||
            comb == static_cast<std::int64_t>(gate.laser_divisor) - 1)
            continue;
        const double tp = static_cast<double>(pos) * period;
        const double raw = static_cast<double>(hist.counts[i]);
        // Undo the interval-truncation damping: after this the trap signal
        // decays as exp(-t/tau) and pair backgrounds are flat.
        peaks.push_back({tp, raw, raw * std::exp(rate_per_ps * tp)});
    }
    std::size_t occupied = 0;
    for (const Point& p : peaks)
        if (p.raw > 0.0) ++occupied;
    if (occupied < 10)
        throw FitError("fit_detrap_tau: fewer than 10 occupied side-peak positions");

    // Noise floor from the last quarter of the range.
    std::vector<double> tail;
    for (const Point& p : peaks)
        if (p.t > 0.75 * peaks.back().t) tail.push_back(p.corrected);
    std::sort(tail.begin(), tail.end());
    const double floor = tail.empty() ? 0.0 : tail[tail.size() / 2];

    double sw = 0.0, swt = 0.0, swy = 0.0, swtt = 0.0, swty = 0.0;
    std::size_t used = 0;
    for (const Point& p : peaks) {
        const double boost = std::exp(rate_per_ps * p.t);
        const double amp = p.corrected - floor;
        if (!(amp > 3.0 * std::sqrt(p.raw + 1.0) * boost)) continue;
        const double y = std::log(amp);
        // Inverse variance of log of the corrected Poisson count.
        const double w = amp * amp / (std::max(p.raw, 1.0) * boost * boost);
        sw += w;
        swt += w * p.t;
        swy += w * y;
        swtt += w * p.t * p.t;
        swty += w * p.t * y;
        ++used;
    }
    if (used < 2) throw FitError("fit_detrap_tau: fewer than 2 usable envelope points");
    const double det = sw * swtt - swt * swt;
    if (!(std::abs(det) > 0.0)) throw FitError("fit_detrap_tau: degenerate envelope");
    const double slope = (sw * swty - swt * swy) / det;
    if (!(slope < 0.0)) return std::numeric_limits<double>::infinity();
    return -1.0 / slope;
}

double dark_rate_hz(double p_dc_per_gate, double gate_frequency_hz) {
    if (p_dc_per_gate < 0.0 || gate_frequency_hz < 0.0)
        throw std::invalid_argument("dark_rate_hz requires nonnegative inputs");
    return p_dc_per_gate * gate_frequency_hz;
}

double dark_prob_per_ns(double p_dc_per_gate, double gate_fwhm_ps) {
    if (p_dc_per_gate < 0.0 || !(gate_fwhm_ps > 0.0))
        throw std::invalid_argument("dark_prob_per_ns requires p >= 0 and fwhm > 0");
    return p_dc_per_gate / (gate_fwhm_ps / 1000.0);
}

}  // namespace spadsim::analysis
