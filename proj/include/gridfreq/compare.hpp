#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gridfreq/dataio.hpp"
#include "gridfreq/detail/fft.hpp"

namespace gridfreq::compare {

struct ComparisonStats {
    double mean_error = 0.0;  // Hz, signed
    double rmse = 0.0;
    double max_abs = 0.0;
    double median_abs = 0.0;
    double p99_abs = 0.0;
    std::size_t n = 0;
};

/// Inner-joins two series on the timestamp, discards rows where either
/// side has qi != 0, and returns the per-second differences a - b in Hz.
inline std::vector<double> difference_series(const dataio::CampaignSeries& a, std::size_t col_a,
                                             const dataio::CampaignSeries& b, std::size_t col_b) {
    if (col_a >= a.columns.size() || col_b >= b.columns.size())
        throw std::invalid_argument("difference_series: no such column");
    const std::int64_t begin = std::max(a.start_sec, b.start_sec);
    const std::int64_t end = std::min(a.end_sec(), b.end_sec());
    if (begin >= end) throw std::invalid_argument("difference_series: no overlapping time range");
    std::vector<double> diff;
    diff.reserve(static_cast<std::size_t>(end - begin));
    const auto& ca = a.columns[col_a];
    const auto& cb = b.columns[col_b];
    for (std::int64_t t = begin; t < end; ++t) {
        const auto ia = static_cast<std::size_t>(t - a.start_sec);
        const auto ib = static_cast<std::size_t>(t - b.start_sec);
        if (ca.qi[ia] != 0 || cb.qi[ib] != 0) continue;
        diff.push_back((ca.deviation_mhz[ia] - cb.deviation_mhz[ib]) * 1e-3);
    }
    return diff;
}

inline ComparisonStats comparison_stats(std::vector<double> diff) {
    if (diff.empty()) throw std::invalid_argument("comparison_stats: no overlapping valid rows");
    ComparisonStats st;
    st.n = diff.size();
    double acc = 0.0, acc2 = 0.0;
    for (double d : diff) {
        acc += d;
        acc2 += d * d;
    }
    st.mean_error = acc / static_cast<double>(diff.size());
    st.rmse = std::sqrt(acc2 / static_cast<double>(diff.size()));
    for (double& d : diff) d = std::abs(d);
    std::sort(diff.begin(), diff.end());
    st.max_abs = diff.back();
    const std::size_t n = diff.size();
    st.median_abs = n % 2 ? diff[n / 2] : 0.5 * (diff[n / 2 - 1] + diff[n / 2]);
    // Nearest-rank percentile; never exceeds the maximum.
    const auto r99 = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    st.p99_abs = diff[std::min(n - 1, r99 == 0 ? 0 : r99 - 1)];
    return st;
}

struct HistogramBin {
    double center = 0.0;  // Hz
    std::size_t count = 0;
};

/// Fixed-width bins (default 10 uHz) centered on multiples of the width,
/// spanning +-max|diff|.
inline std::vector<HistogramBin> histogram(const std::vector<double>& diff,
                                           double bin_width = 10e-6) {
    if (diff.empty()) return {};
    double m = 0.0;
    for (double d : diff) m = std::max(m, std::abs(d));
    const auto half = static_cast<std::int64_t>(std::floor(m / bin_width)) + 1;
    std::vector<HistogramBin> bins(static_cast<std::size_t>(2 * half + 1));
    for (std::size_t i = 0; i < bins.size(); ++i)
        bins[i].center = (static_cast<double>(i) - static_cast<double>(half)) * bin_width;
    for (double d : diff) {
        auto idx = static_cast<std::int64_t>(std::llround(d / bin_width)) + half;
        idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(bins.size()) - 1);
        bins[static_cast<std::size_t>(idx)].count++;
    }
    return bins;
}

struct SpectrumPoint {
    double freq_hz = 0.0;
    double amplitude = 0.0;  // Hz
};

/// Single-sided amplitude spectrum of a 1 Hz-sampled difference series:
/// Hann window over the data, zero-padded or truncated to an n_fft-point
/// transform (2^16 by default).
inline std::vector<SpectrumPoint> amplitude_spectrum(const std::vector<double>& diff,
                                                     std::size_t n_fft = 1u << 16,
                                                     double sample_rate_hz = 1.0) {
    if (diff.empty()) throw std::invalid_argument("amplitude_spectrum: empty series");
    const std::size_t n_data = std::min(diff.size(), n_fft);
    std::vector<std::complex<double>> x(n_fft, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n_data; ++i) {
        const double w =
            n_data == 1
                ? 1.0
                : 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(n_data - 1)));
        x[i] = diff[i] * w;
        wsum += w;
    }
    detail::fft_pow2(x);
    std::vector<SpectrumPoint> out(n_fft / 2 + 1);
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
        const double scale = (k == 0 || k == n_fft / 2) ? 1.0 : 2.0;
        out[k].freq_hz = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);
        out[k].amplitude = scale * std::abs(x[k]) / wsum;
    }
    return out;
}

}  // namespace gridfreq::compare
