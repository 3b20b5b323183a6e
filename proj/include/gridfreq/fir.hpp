#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gridfreq/stream.hpp"

namespace gridfreq::fir {

#if defined(__GNUC__) || defined(__clang__)
#define GRIDFREQ_NOINLINE __attribute__((noinline))
#else
#define GRIDFREQ_NOINLINE
#endif

/// Symmetric (type-I) low-pass FIR. Taps are normalized to unit DC gain,
/// so the group delay is exactly order()/2 samples.
struct FirFilter {
    std::vector<double> taps;
    double fs = 0.0;
    double f_corner = 0.0;  // design cutoff of the sinc kernel, in Hz

    std::size_t order() const { return taps.size() - 1; }
    std::size_t group_delay() const { return order() / 2; }
};

namespace detail {

inline std::vector<double> windowed_sinc(std::size_t order, double wc) {
    // Kernel sin(wc*(n - L/2))/(n - L/2), center tap wc, under a Hamming
    // window of length L+1; scaled afterwards to unit DC gain. The lower
    // half is mirrored so tap symmetry holds bit-exactly.
    const double center = static_cast<double>(order) / 2.0;
    std::vector<double> h(order + 1);
    for (std::size_t n = 0; n <= order / 2; ++n) {
        const double d = static_cast<double>(n) - center;
        double v = (d == 0.0) ? wc : std::sin(wc * d) / d;
        v *= 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                    static_cast<double>(order));
        h[n] = v;
        h[order - n] = v;
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;
    return h;
}

// Shared out-of-line dot product so the batch and streaming paths round
// identically (taps are symmetric, so forward order equals convolution).
GRIDFREQ_NOINLINE inline double fir_dot(const double* taps, const double* window,
                                        std::size_t count) {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) acc += taps[k] * window[k];
    return acc;
}

}  // namespace detail

/// Zero-crossing pre-filter: cutoff term 2*f_nom/fs, order L = fs/(5*(2*f_nom))*2
/// rounded to the nearest even integer (L = 100 at 25 kHz / 50 Hz).
inline FirFilter design_zc_prefilter(double fs, double f_nom) {
    if (!(fs >= 100.0 * f_nom))
        throw std::invalid_argument("design_zc_prefilter: fs must be at least 100*f_nom");
    const auto order = static_cast<std::size_t>(2 * std::llround(fs / (10.0 * f_nom)));
    const double wc = 2.0 * std::numbers::pi * 2.0 * f_nom / fs;
    return FirFilter{detail::windowed_sinc(order, wc), fs, 2.0 * f_nom};
}

/// Low-pass family for shaping modulation signals: fixed absolute transition
/// width (default 1% of the sampling rate), so every member rolls off with
/// the same dB-per-Hz steepness. cutoff == fs/2 degenerates to an identity.
inline FirFilter design_modulation_lowpass(double cutoff, double fs_mod,
                                           double transition_width = -1.0) {
    if (!(cutoff > 0.0) || cutoff > fs_mod / 2.0)
        throw std::invalid_argument("design_modulation_lowpass: cutoff outside (0, fs/2]");
    if (transition_width <= 0.0) transition_width = 0.01 * fs_mod;
    // Hamming transition is ~3.3/L in normalized frequency.
    auto order = static_cast<std::size_t>(
        2 * std::llround(3.3 * fs_mod / transition_width / 2.0));
    if (order < 2) order = 2;
    const double wc = 2.0 * std::numbers::pi * cutoff / fs_mod;
    return FirFilter{detail::windowed_sinc(order, wc), fs_mod, cutoff};
}

/// Exact DTFT of the taps at frequency f.
inline std::complex<double> frequency_response(const FirFilter& filter, double f) {
    std::complex<double> acc{0.0, 0.0};
    const double w = 2.0 * std::numbers::pi * f / filter.fs;
    for (std::size_t n = 0; n < filter.taps.size(); ++n)
        acc += filter.taps[n] * std::exp(std::complex<double>(0.0, -w * static_cast<double>(n)));
    return acc;
}

inline double magnitude_db(const FirFilter& filter, double f) {
    return 20.0 * std::log10(std::abs(frequency_response(filter, f)));
}

/// Group-delay-compensated filtering: output sample n lines up with input
/// sample n and carries the same t0. The first and last L/2 samples are
/// computed against zero padding and must not feed zero-crossing detection;
/// valid_begin/valid_end of the result mark the clean region.
struct FilteredStream {
    SampleStream stream;
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;  // one past the last valid index
};

inline FilteredStream apply_zero_phase(const FirFilter& filter, const SampleStream& input) {
    const std::size_t L = filter.order();
    const std::size_t n = input.samples.size();
    if (n <= L) throw std::invalid_argument("apply_zero_phase: stream shorter than filter");
    const std::size_t gd = filter.group_delay();
    const double* x = input.samples.data();
    const double* h = filter.taps.data();

    std::vector<double> y(n);
    for (std::size_t i = gd; i + gd < n; ++i) y[i] = detail::fir_dot(h, x + (i - gd), L + 1);
    // Edge samples against zero padding, flagged unusable by the valid range.
    for (std::size_t i = 0; i < gd; ++i) {
        double acc = 0.0;
        for (std::size_t k = gd - i; k <= L; ++k) acc += h[k] * x[i + k - gd];
        y[i] = acc;
    }
    for (std::size_t i = (n > gd ? n - gd : 0); i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n + gd - i; ++k) acc += h[k] * x[i + k - gd];
        y[i] = acc;
    }
    return FilteredStream{SampleStream{std::move(y), input.fs, input.t0}, gd, n - gd};
}

/// Streaming zero-phase filter. Feeding a signal in arbitrary block sizes
/// reproduces the batch output bit-for-bit on the valid region.
class FilterState {
  public:
    explicit FilterState(FirFilter filter) : filter_(std::move(filter)) {}

    const FirFilter& filter() const { return filter_; }

    /// Global index of the next output sample this state will emit.
    std::size_t next_output_index() const { return emitted_; }

    /// Appends raw samples; returns filtered samples for the global output
    /// range [next_output_index before call, next_output_index after call).
    std::vector<double> feed(const std::vector<double>& block) {
        const std::size_t L = filter_.order();
        const std::size_t gd = filter_.group_delay();
        const double* h = filter_.taps.data();

        // Window for output i spans raw [i-gd, i+gd]; keep a contiguous
        // buffer of the unconsumed raw tail plus the new block.
        buf_.insert(buf_.end(), block.begin(), block.end());
        total_raw_ += block.size();

        std::vector<double> out;
        if (total_raw_ <= L) return out;
        const std::size_t last_emittable = total_raw_ - 1 - gd;  // needs raw up to i+gd
        if (emitted_ == 0) emitted_ = gd;                        // cold start: no left history
        for (std::size_t i = emitted_; i <= last_emittable; ++i) {
            const std::size_t w = i - gd - buf_offset_;
            out.push_back(detail::fir_dot(h, buf_.data() + w, L + 1));
        }
        emitted_ = last_emittable + 1;

        // Drop raw samples no longer reachable by any future window.
        const std::size_t keep_from = emitted_ - gd;
        if (keep_from > buf_offset_) {
            buf_.erase(buf_.begin(),
                       buf_.begin() + static_cast<std::ptrdiff_t>(keep_from - buf_offset_));
            buf_offset_ = keep_from;
        }
        return out;
    }

  private:
    FirFilter filter_;
    std::vector<double> buf_;
    std::size_t buf_offset_ = 0;  // global index of buf_[0]
    std::size_t total_raw_ = 0;
    std::size_t emitted_ = 0;
};

}  // namespace gridfreq::fir
