#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gridfreq/fir.hpp"
#include "gridfreq/stream.hpp"

namespace gridfreq::zcfreq {

inline constexpr std::uint8_t kQiOk = 0;
inline constexpr std::uint8_t kQiInvalid = 1;
inline constexpr std::uint8_t kQiInterpolated = 2;

struct ZeroCrossing {
    UtcTime t;
};

struct PeriodMeasurement {
    UtcTime t_start;
    UtcTime t_end;
    double f_p = 0.0;
};

struct SecondAggregate {
    std::int64_t k = 0;        // UTC second the estimate belongs to
    double f_hz = 0.0;         // NaN when qi != 0 and no interval was formed
    std::uint32_t n_periods = 0;
    std::uint8_t qi = kQiInvalid;
    bool has_interval = false;
    UtcTime t_open;
    UtcTime t_close;
};

struct AggregationOptions {
    double f_nom = 50.0;
    bool cycle_count_mean = true;        // false: arithmetic mean of f(p)
    double sanity_band_fraction = 0.2;   // periods outside f_nom*(1±frac) invalidate the second

    double max_sane_period() const { return 1.0 / ((1.0 - sanity_band_fraction) * f_nom); }
};

namespace detail {

/// Rising-crossing positions (fractional sample index) in y[lo, hi).
/// Predicate y[n] < 0 && y[n+1] >= 0; an exact zero lands the crossing on
/// the first non-negative sample.
inline std::vector<double> detect_positions(std::span<const double> y, std::size_t lo,
                                            std::size_t hi) {
    std::vector<double> out;
    if (hi > y.size()) hi = y.size();
    for (std::size_t n = lo; n + 1 < hi; ++n) {
        const double a = y[n], b = y[n + 1];
        if (a < 0.0 && b >= 0.0) out.push_back(static_cast<double>(n) + (-a) / (b - a));
    }
    return out;
}

}  // namespace detail

/// Rising zero crossings of a (filtered) stream with sub-sample linear
/// interpolation. [lo, hi) restricts detection to the filter-valid region.
inline std::vector<ZeroCrossing> find_rising_zero_crossings(const SampleStream& stream,
                                                            std::size_t lo = 0,
                                                            std::size_t hi = SIZE_MAX) {
    auto positions =
        detail::detect_positions(stream.samples, lo, std::min(hi, stream.samples.size()));
    std::vector<ZeroCrossing> out;
    out.reserve(positions.size());
    for (double p : positions) out.push_back({stream.time_of(p)});
    return out;
}

inline std::vector<PeriodMeasurement> period_frequencies(std::span<const ZeroCrossing> zcs) {
    if (zcs.size() < 2)
        throw std::invalid_argument("period_frequencies: need at least two crossings");
    std::vector<PeriodMeasurement> out;
    out.reserve(zcs.size() - 1);
    for (std::size_t i = 0; i + 1 < zcs.size(); ++i) {
        const double dt = zcs[i + 1].t.diff(zcs[i].t);
        if (!(dt > 0.0)) throw std::invalid_argument("period_frequencies: non-increasing crossings");
        out.push_back({zcs[i].t, zcs[i + 1].t, 1.0 / dt});
    }
    return out;
}

namespace detail {

/// One gap-free run of chained crossings plus what is known about the
/// acquisition window around it.
struct Chain {
    std::span<const UtcTime> times;
    bool relax_start = false;  // true only where the recording itself begins
    bool relax_end = false;    // true only where the recording itself ends
    UtcTime cover_end;         // sample coverage end (bounds the end relaxation)
};

/// Aggregate one UTC second from a chain. The interval opens at the last
/// crossing at-or-before the second boundary and closes at the opener of
/// the next second, so consecutive intervals share their boundary crossing
/// exactly. At the recording edges a missing opener/closer is tolerated
/// within one sane period.
inline SecondAggregate aggregate_one_second(const Chain& chain, std::int64_t k,
                                            const AggregationOptions& opts) {
    SecondAggregate agg;
    agg.k = k;
    agg.f_hz = std::numeric_limits<double>::quiet_NaN();

    const auto& t = chain.times;
    const UtcTime b0 = UtcTime::from_seconds(k);
    const UtcTime b1 = UtcTime::from_seconds(k + 1);
    const double margin = opts.max_sane_period();

    auto last_at_or_before = [&](const UtcTime& b) -> std::ptrdiff_t {
        auto it = std::upper_bound(t.begin(), t.end(), b);
        return static_cast<std::ptrdiff_t>(it - t.begin()) - 1;
    };

    std::ptrdiff_t open_idx = last_at_or_before(b0);
    if (open_idx < 0) {
        // No opener at-or-before the boundary: acceptable only at the very
        // start of the recording, opening at the first crossing instead.
        if (!(chain.relax_start && !t.empty() && t[0] < b1 && t[0].diff(b0) <= margin))
            return agg;
        open_idx = 0;
    }

    std::ptrdiff_t close_idx = last_at_or_before(b1);
    if (close_idx <= open_idx) return agg;
    if (close_idx == static_cast<std::ptrdiff_t>(t.size()) - 1) {
        // Nothing beyond the candidate closer: it is only known to be the
        // last crossing before the boundary if the recording ends here and
        // covers through the boundary within one sane period.
        if (!(chain.relax_end && b1.diff(t[close_idx]) <= margin && !(chain.cover_end < b1)))
            return agg;
    }

    const auto n = static_cast<std::uint32_t>(close_idx - open_idx);
    agg.has_interval = true;
    agg.t_open = t[open_idx];
    agg.t_close = t[close_idx];
    agg.n_periods = n;
    agg.qi = kQiOk;

    const double f_lo = opts.f_nom * (1.0 - opts.sanity_band_fraction);
    const double f_hi = opts.f_nom * (1.0 + opts.sanity_band_fraction);
    if (opts.cycle_count_mean) {
        agg.f_hz = static_cast<double>(n) / agg.t_close.diff(agg.t_open);
    } else {
        double acc = 0.0;
        for (std::ptrdiff_t i = open_idx; i < close_idx; ++i)
            acc += 1.0 / t[i + 1].diff(t[i]);
        agg.f_hz = acc / static_cast<double>(n);
    }
    for (std::ptrdiff_t i = open_idx; i < close_idx; ++i) {
        const double f_p = 1.0 / t[i + 1].diff(t[i]);
        if (f_p < f_lo || f_p > f_hi) {
            agg.qi = kQiInvalid;
            break;
        }
    }
    return agg;
}

inline std::vector<SecondAggregate> aggregate_chains(std::span<const Chain> chains,
                                                     std::int64_t k_begin, std::int64_t k_end,
                                                     const AggregationOptions& opts) {
    std::vector<SecondAggregate> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, k_end - k_begin)));
    std::size_t ci = 0;
    for (std::int64_t k = k_begin; k < k_end; ++k) {
        while (ci < chains.size() &&
               (chains[ci].times.empty() || chains[ci].times.back() < UtcTime::from_seconds(k)))
            ++ci;
        SecondAggregate agg;
        if (ci < chains.size()) {
            agg = aggregate_one_second(chains[ci], k, opts);
        } else {
            agg.k = k;
            agg.f_hz = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(agg);
    }
    return out;
}

}  // namespace detail

/// Aggregates period measurements into UTC-second estimates for seconds
/// [k_begin, k_end). Periods must be time ordered; runs of periods that do
/// not chain exactly (lost data in between) are treated as separate chains
/// and the unreachable seconds come back with qi=1.
inline std::vector<SecondAggregate> aggregate_seconds(std::span<const PeriodMeasurement> periods,
                                                      std::int64_t k_begin, std::int64_t k_end,
                                                      const AggregationOptions& opts = {}) {
    std::vector<std::vector<UtcTime>> chain_times;
    for (const auto& p : periods) {
        if (!(p.t_end > p.t_start)) throw std::invalid_argument("aggregate_seconds: unordered input");
        if (chain_times.empty() || !(chain_times.back().back() == p.t_start)) {
            if (!chain_times.empty() && p.t_start < chain_times.back().back())
                throw std::invalid_argument("aggregate_seconds: unordered input");
            chain_times.push_back({p.t_start});
        }
        chain_times.back().push_back(p.t_end);
    }
    std::vector<detail::Chain> chains;
    chains.reserve(chain_times.size());
    for (std::size_t i = 0; i < chain_times.size(); ++i) {
        detail::Chain c;
        c.times = chain_times[i];
        c.relax_start = (i == 0);
        c.relax_end = (i + 1 == chain_times.size());
        c.cover_end = chain_times[i].back().plus(opts.max_sane_period());
        chains.push_back(c);
    }
    return detail::aggregate_chains(chains, k_begin, k_end, opts);
}

/// Acquired sample ranges, e.g. from acquisition logs.
struct CoverageRange {
    UtcTime begin;
    UtcTime end;
};

/// Re-flags aggregates whose measurement interval was not fully covered by
/// acquired samples (one missing period measurement spoils the second).
inline std::vector<SecondAggregate> mark_missing_seconds(std::vector<SecondAggregate> aggregates,
                                                         std::span<const CoverageRange> coverage) {
    auto covered = [&](const UtcTime& a, const UtcTime& b) {
        for (const auto& r : coverage)
            if (!(a < r.begin) && !(r.end < b)) return true;
        return false;
    };
    for (auto& agg : aggregates) {
        if (agg.qi != kQiOk) continue;
        const UtcTime a = agg.has_interval ? agg.t_open : UtcTime::from_seconds(agg.k);
        const UtcTime b = agg.has_interval ? agg.t_close : UtcTime::from_seconds(agg.k + 1);
        if (!covered(a, b)) agg.qi = kQiInvalid;
    }
    return aggregates;
}

/// Streaming estimator: blocks in, closed UTC-second aggregates out.
/// Feeding the same samples in any block partition yields the batch result
/// bit for bit.
class Estimator {
  public:
    Estimator(fir::FirFilter filter, AggregationOptions opts)
        : filter_state_(std::move(filter)), opts_(opts) {}

    const AggregationOptions& options() const { return opts_; }

    std::vector<SecondAggregate> process_block(const SampleStream& block) {
        if (block.samples.empty()) return {};
        if (!started_) {
            started_ = true;
            fs_ = block.fs;
            epoch_ = block.t0;
            segment_relax_start_ = true;
            cursor_k_ = block.t0.frac == 0.0 ? block.t0.sec : block.t0.sec + 1;
        } else {
            if (block.fs != fs_)
                throw std::invalid_argument("process_block: sampling rate mismatch");
            const UtcTime expected = epoch_.plus(static_cast<double>(n_raw_) / fs_);
            const double skew = block.t0.diff(expected);
            if (skew < -0.5 / fs_) throw std::invalid_argument("process_block: out-of-order block");
            if (skew > 0.5 / fs_) begin_new_segment(block.t0);
        }

        std::vector<double> filtered = filter_state_.feed(block.samples);
        std::size_t g = filter_state_.next_output_index() - filtered.size();
        for (double y : filtered) {
            if (have_prev_ && prev_y_ < 0.0 && y >= 0.0) {
                const double pos = static_cast<double>(g - 1) + (-prev_y_) / (y - prev_y_);
                const UtcTime t = epoch_.plus(pos / fs_);
                if (!chain_.empty() && !(chain_.back() < t))
                    throw std::runtime_error("process_block: non-increasing crossing");
                chain_.push_back(t);
            }
            prev_y_ = y;
            have_prev_ = true;
            ++g;
        }
        n_raw_ += block.samples.size();

        // Seconds are final once a crossing beyond their closing boundary
        // exists.
        std::vector<SecondAggregate> out;
        if (!chain_.empty()) {
            while (UtcTime::from_seconds(cursor_k_ + 1) < chain_.back()) {
                out.push_back(emit_second(cursor_k_, /*relax_end=*/false, UtcTime{}));
                ++cursor_k_;
            }
        }
        trim_chain();
        return out;
    }

    /// Flushes the trailing seconds once the recording is over. The final
    /// second may close on the last crossing of the stream even without a
    /// successor, because acquisition genuinely ends here.
    std::vector<SecondAggregate> finish() {
        std::vector<SecondAggregate> out;
        if (!started_) return out;
        const UtcTime end = epoch_.plus(static_cast<double>(n_raw_) / fs_);
        while (!(end < UtcTime::from_seconds(cursor_k_ + 1))) {
            out.push_back(emit_second(cursor_k_, /*relax_end=*/true, end));
            ++cursor_k_;
        }
        return out;
    }

  private:
    void begin_new_segment(const UtcTime& t0) {
        // Data were lost: seconds whose closer cannot be confirmed within
        // the old segment stay unemitted here and fall out as qi=1 via the
        // cursor in emit_second (the chain simply cannot serve them).
        chain_.clear();
        chain_offset_dropped_ = false;
        segment_relax_start_ = false;
        have_prev_ = false;
        epoch_ = t0;
        n_raw_ = 0;
        filter_state_ = fir::FilterState(filter_state_.filter());
    }

    SecondAggregate emit_second(std::int64_t k, bool relax_end, const UtcTime& cover_end) {
        detail::Chain c;
        c.times = chain_;
        c.relax_start = segment_relax_start_ && !chain_offset_dropped_;
        c.relax_end = relax_end;
        c.cover_end = cover_end;
        return detail::aggregate_one_second(c, k, opts_);
    }

    void trim_chain() {
        // Keep everything from the opener of the next pending second on.
        if (chain_.size() < 4) return;
        const UtcTime b = UtcTime::from_seconds(cursor_k_);
        auto it = std::upper_bound(chain_.begin(), chain_.end(), b);
        if (it == chain_.begin()) return;
        --it;  // opener candidate for cursor_k_
        if (it != chain_.begin()) {
            chain_.erase(chain_.begin(), it);
            chain_offset_dropped_ = true;
        }
    }

    fir::FilterState filter_state_;
    AggregationOptions opts_;
    bool started_ = false;
    double fs_ = 0.0;
    UtcTime epoch_;
    std::size_t n_raw_ = 0;
    bool have_prev_ = false;
    double prev_y_ = 0.0;
    std::vector<UtcTime> chain_;
    bool chain_offset_dropped_ = false;  // chain_[0] is no longer the true first crossing
    bool segment_relax_start_ = false;
    std::int64_t cursor_k_ = 0;
};

}  // namespace gridfreq::zcfreq
