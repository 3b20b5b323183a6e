#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gridfreq/stream.hpp"
#include "gridfreq/zcfreq.hpp"

namespace gridfreq::timebase {

/// Imperfections of one device's acquisition clock chain.
struct ClockModel {
    double ppm_error = 0.0;      // quartz rate error, parts per million
    double static_offset = 0.0;  // PPS chain delay, seconds
    double pps_jitter = 0.0;     // per-pulse jitter bound, seconds

    void validate() const {
        if (std::abs(ppm_error) > 200.0)
            throw std::invalid_argument("ClockModel: |ppm_error| > 200");
        if (std::abs(static_offset) > 2e-5)
            throw std::invalid_argument("ClockModel: |static_offset| > 20 us");
        if (pps_jitter < 0.0 || pps_jitter > 1e-6)
            throw std::invalid_argument("ClockModel: pps_jitter outside [0, 1 us]");
    }

    double true_rate(double fs_nominal) const { return fs_nominal * (1.0 + ppm_error * 1e-6); }
};

/// Low-pass-shaped pulse train sampled synchronously with the signal
/// channel. true_edge_times labels each present pulse with its UTC second.
struct PpsChannel {
    std::vector<double> samples;
    double fs = 0.0;  // nominal rate of the sampling quartz
    std::vector<std::int64_t> true_edge_times;
};

namespace detail {

// Raised-cosine step from 0 to 1 over [-w, +w]; 0.5 exactly at the center.
inline double rc_step(double x, double w) {
    if (x <= -w) return 0.0;
    if (x >= w) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (x + w) / (2.0 * w)));
}

}  // namespace detail

/// Simulates the PPS channel of a device across duration_s UTC seconds
/// starting at UTC second t0_sec. Pulses sit at the true second boundaries
/// shifted by the static offset plus per-pulse jitter, rise over five
/// nominal samples, and are sampled by the device's (drifting) quartz.
inline PpsChannel simulate_pps(const ClockModel& model, std::int64_t duration_s, double fs,
                               std::uint64_t seed, std::int64_t t0_sec = 0,
                               const std::set<std::int64_t>& missing = {},
                               std::size_t sample_count = 0) {
    model.validate();
    if (fs < 1000.0) throw std::invalid_argument("simulate_pps: fs below 1 kHz");
    const double fs_true = model.true_rate(fs);
    if (sample_count == 0)
        sample_count = static_cast<std::size_t>(static_cast<double>(duration_s) * fs_true);

    PpsChannel pps;
    pps.fs = fs;
    pps.samples.assign(sample_count, 0.0);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-model.pps_jitter, model.pps_jitter);

    const double w = 2.5 / fs;      // rise half-width: 5 nominal samples
    const double hold = 0.1;        // pulse width, seconds
    for (std::int64_t k = 0; k < duration_s; ++k) {
        const double j = model.pps_jitter > 0.0 ? jitter(rng) : 0.0;
        if (missing.count(t0_sec + k)) continue;
        const double edge = static_cast<double>(k) + model.static_offset + j;
        const double lo = edge - w, hi = edge + hold + w;
        if (lo < 0.0) continue;  // rise clipped by the recording start: pulse unusable
        auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo * fs_true)));
        auto i1 = static_cast<std::size_t>(std::max(0.0, std::floor(hi * fs_true)));
        i1 = std::min(i1, sample_count == 0 ? 0 : sample_count - 1);
        for (std::size_t i = i0; i <= i1 && i < sample_count; ++i) {
            const double tau = static_cast<double>(i) / fs_true;
            pps.samples[i] = detail::rc_step(tau - edge, w) - detail::rc_step(tau - edge - hold, w);
        }
        pps.true_edge_times.push_back(t0_sec + k);
    }
    return pps;
}

/// One detected pulse: fractional sample index of the 50% point and the
/// UTC second it marks.
struct PpsAnchor {
    double index = 0.0;
    std::int64_t second = 0;
};

inline std::vector<PpsAnchor> detect_pps_edges(const PpsChannel& pps) {
    double peak = 0.0;
    for (double v : pps.samples) peak = std::max(peak, v);
    if (peak <= 0.0) throw std::runtime_error("detect_pps_edges: no pulses in channel");
    const double thr = 0.5 * peak;

    std::vector<double> positions;
    const double refractory = 0.5 * pps.fs;
    double last = -2.0 * refractory;
    for (std::size_t n = 0; n + 1 < pps.samples.size(); ++n) {
        const double a = pps.samples[n], b = pps.samples[n + 1];
        if (a < thr && b >= thr) {
            const double pos = static_cast<double>(n) + (thr - a) / (b - a);
            if (pos - last >= refractory) {
                positions.push_back(pos);
                last = pos;
            }
        }
    }
    if (positions.size() != pps.true_edge_times.size())
        throw std::runtime_error("detect_pps_edges: pulse count does not match labels");
    std::vector<PpsAnchor> anchors(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        anchors[i] = {positions[i], pps.true_edge_times[i]};
    return anchors;
}

/// Piecewise-linear mapping from fractional sample index to UTC, anchored
/// at the detected PPS edges. Absorbs the quartz rate error.
class PpsTimeMap {
  public:
    explicit PpsTimeMap(std::vector<PpsAnchor> anchors) : anchors_(std::move(anchors)) {
        if (anchors_.size() < 2) throw std::invalid_argument("PpsTimeMap: need two anchors");
        for (std::size_t i = 1; i < anchors_.size(); ++i)
            if (!(anchors_[i].index > anchors_[i - 1].index &&
                  anchors_[i].second > anchors_[i - 1].second))
                throw std::invalid_argument("PpsTimeMap: anchors not increasing");
    }

    UtcTime map(double index) const {
        std::size_t i = segment_for(index);
        const auto& a = anchors_[i];
        const auto& b = anchors_[i + 1];
        const double u = (index - a.index) / (b.index - a.index);
        return UtcTime::make(a.second, u * static_cast<double>(b.second - a.second));
    }

    /// Seconds whose boundaries are not bracketed by consecutive-second
    /// anchors; their timestamps are interpolated across a PPS outage.
    std::vector<std::pair<std::int64_t, std::int64_t>> unsynchronized_ranges() const {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (std::size_t i = 1; i < anchors_.size(); ++i)
            if (anchors_[i].second - anchors_[i - 1].second > 1)
                out.emplace_back(anchors_[i - 1].second, anchors_[i].second);
        return out;
    }

    std::int64_t first_second() const { return anchors_.front().second; }
    std::int64_t last_second() const { return anchors_.back().second; }

  private:
    std::size_t segment_for(double index) const {
        if (index <= anchors_.front().index) return 0;
        auto it = std::upper_bound(anchors_.begin(), anchors_.end(), index,
                                   [](double v, const PpsAnchor& a) { return v < a.index; });
        std::size_t i = static_cast<std::size_t>(it - anchors_.begin());
        if (i == 0) return 0;
        if (i >= anchors_.size()) return anchors_.size() - 2;
        return i - 1;
    }

    std::vector<PpsAnchor> anchors_;
};

/// Signal samples plus their PPS-derived UTC timebase.
struct AlignedStream {
    std::vector<double> samples;
    double fs_nominal = 0.0;
    PpsTimeMap map;
    std::vector<std::pair<std::int64_t, std::int64_t>> unsynchronized;
};

/// Detects the PPS edges and attaches the piecewise-linear UTC mapping to
/// the signal channel. Both channels must come from the same quartz.
inline AlignedStream align_to_pps(SampleStream signal, const PpsChannel& pps) {
    if (signal.fs != pps.fs)
        throw std::invalid_argument("align_to_pps: channels sampled at different nominal rates");
    PpsTimeMap map(detect_pps_edges(pps));
    auto unsync = map.unsynchronized_ranges();
    return AlignedStream{std::move(signal.samples), signal.fs, std::move(map), std::move(unsync)};
}

/// Frequency error equivalent of a timing uncertainty over one period.
inline double clock_error_to_frequency_error(double dt, double f_nom) {
    if (dt < 0.0) throw std::invalid_argument("clock_error_to_frequency_error: negative dt");
    return f_nom * f_nom * dt;
}

namespace detail {

// Four-point Lagrange interpolation on a uniform grid; exact at u == 0.
inline double cubic_interp(const std::vector<double>& x, double q) {
    auto j = static_cast<std::ptrdiff_t>(std::floor(q));
    j = std::clamp<std::ptrdiff_t>(j, 1, static_cast<std::ptrdiff_t>(x.size()) - 3);
    const double u = q - static_cast<double>(j);
    const double p0 = x[j - 1], p1 = x[j], p2 = x[j + 1], p3 = x[j + 2];
    return -u * (u - 1.0) * (u - 2.0) / 6.0 * p0 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * p1 -
           (u + 1.0) * u * (u - 2.0) / 2.0 * p2 + (u + 1.0) * u * (u - 1.0) / 6.0 * p3;
}

}  // namespace detail

/// The true signal as one device records it: resampled through the
/// device's quartz, optionally polarity flipped, paired with the device's
/// own simulated PPS channel. t0 of the true signal must be a whole UTC
/// second.
inline std::pair<SampleStream, PpsChannel> apply_clock_model(const ClockModel& model,
                                                             const SampleStream& true_signal,
                                                             std::uint64_t seed,
                                                             int polarity = +1) {
    model.validate();
    if (true_signal.t0.frac != 0.0)
        throw std::invalid_argument("apply_clock_model: t0 must be a whole second");
    if (polarity != 1 && polarity != -1)
        throw std::invalid_argument("apply_clock_model: polarity must be +1 or -1");

    const double fs = true_signal.fs;
    const double fs_true = model.true_rate(fs);
    const double duration = static_cast<double>(true_signal.samples.size()) / fs;
    const auto whole_seconds = static_cast<std::int64_t>(std::floor(duration));

    auto n_dev = static_cast<std::size_t>(duration * fs_true);
    while (n_dev > 0 &&
           static_cast<double>(n_dev - 1) / fs_true * fs + 2.0 >
               static_cast<double>(true_signal.samples.size()))
        --n_dev;

    SampleStream device;
    device.fs = fs;
    device.t0 = true_signal.t0;
    device.samples.resize(n_dev);
    const double ratio = fs / fs_true;  // true-signal samples per device sample
    for (std::size_t i = 0; i < n_dev; ++i) {
        const double q = static_cast<double>(i) * ratio;
        device.samples[i] = polarity * detail::cubic_interp(true_signal.samples, q);
    }

    PpsChannel pps =
        simulate_pps(model, whole_seconds, fs, seed, true_signal.t0.sec, {}, n_dev);
    return {std::move(device), std::move(pps)};
}

/// Full estimation pipeline on a PPS-aligned stream: zero-phase filtering,
/// zero-crossing detection in index space, UTC mapping through the PPS
/// anchors, aggregation, and finally qi=1 on unsynchronized seconds.
inline std::vector<zcfreq::SecondAggregate> run_aligned_pipeline(
    const AlignedStream& aligned, const fir::FirFilter& filter,
    const zcfreq::AggregationOptions& opts) {
    SampleStream tmp{aligned.samples, aligned.fs_nominal, UtcTime{}};
    fir::FilteredStream filtered = fir::apply_zero_phase(filter, tmp);
    auto positions = zcfreq::detail::detect_positions(filtered.stream.samples,
                                                      filtered.valid_begin, filtered.valid_end);
    std::vector<UtcTime> times;
    times.reserve(positions.size());
    for (double p : positions) times.push_back(aligned.map.map(p));

    zcfreq::detail::Chain chain;
    chain.times = times;
    chain.relax_start = true;
    chain.relax_end = true;
    chain.cover_end = aligned.map.map(static_cast<double>(aligned.samples.size() - 1));

    const std::int64_t k_begin = aligned.map.first_second();
    const std::int64_t k_end = chain.cover_end.sec;  // B_{k+1} must not pass the coverage
    auto aggregates =
        zcfreq::detail::aggregate_chains({&chain, 1}, k_begin, k_end, opts);
    for (auto& agg : aggregates)
        for (const auto& [lo, hi] : aligned.unsynchronized)
            if (agg.k >= lo && agg.k < hi) agg.qi = zcfreq::kQiInvalid;
    return aggregates;
}

}  // namespace gridfreq::timebase
